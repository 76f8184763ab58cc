#pragma once

#include <complex>
#include <string>

#include <Eigen/Dense>

namespace cascade {

using cplx = std::complex<double>;
using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;

// Two-qubit basis order: (HH, HV, VH, VV). First slot is the biexciton
// photon, second the exciton photon.
enum BasisIndex : int { kHH = 0, kHV = 1, kVH = 2, kVV = 3 };

inline constexpr double kEigenClipTolerance = 1e-9;

class PureState2Q {
 public:
  PureState2Q() = default;
  // Throws ValidationError unless the amplitudes are normalized to 1e-12.
  explicit PureState2Q(const Vector4c& amplitudes);
  // Normalizes the input; throws on a zero vector.
  static PureState2Q normalized(const Vector4c& amplitudes);

  const Vector4c& amplitudes() const { return amp_; }
  cplx operator[](int i) const { return amp_(i); }

  static PureState2Q phi_plus();
  static PureState2Q phi_minus();
  static PureState2Q product(BasisIndex idx);

 private:
  Vector4c amp_ = Vector4c::Zero();
};

// A 4x4 matrix that is meant to be a two-qubit state. Construction does not
// validate; operations that need a physical state call validate().
class DensityMatrix {
 public:
  DensityMatrix() : m_(Matrix4c::Identity() / 4.0) {}
  explicit DensityMatrix(const Matrix4c& m) : m_(m) {}

  // Validating factory.
  static DensityMatrix checked(const Matrix4c& m);
  static DensityMatrix maximally_mixed() { return DensityMatrix(); }

  const Matrix4c& matrix() const { return m_; }
  cplx operator()(int r, int c) const { return m_(r, c); }

  // Empty string when physical, otherwise a description of the first
  // violated invariant.
  std::string violation() const;
  bool is_physical() const { return violation().empty(); }
  void validate() const;

 private:
  Matrix4c m_;
};

// (1/√2)(|HH> + e^{i·fss·t/ħ}|VV>)
PureState2Q time_evolved_state(double fss_ueV, double t_ps);

// Relative phase fss·t/ħ of the evolved state.
double fss_phase(double fss_ueV, double t_ps);

DensityMatrix density_of(const PureState2Q& psi);

// <ψ|ρ|ψ>, clamped to [0, 1].
double fidelity(const DensityMatrix& rho, const PureState2Q& target);

// Wootters concurrence.
double concurrence(const DensityMatrix& rho);

// Symmetrize, clip negative eigenvalues, renormalize the trace.
DensityMatrix project_physical(const Matrix4c& m);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

// σy ⊗ σy
const Matrix4c& spin_flip();

}  // namespace cascade
