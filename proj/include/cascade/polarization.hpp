#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cascade/quantum.hpp"

namespace cascade {

using Matrix2c = Eigen::Matrix2cd;
using Vector2c = Eigen::Vector2cd;

enum class Polarization : int { H = 0, V, D, A, R, L };

inline constexpr std::array<Polarization, 6> kAllPolarizations = {
    Polarization::H, Polarization::V, Polarization::D,
    Polarization::A, Polarization::R, Polarization::L};

char to_char(Polarization p);
Polarization polarization_from_char(char c);
Polarization orthogonal(Polarization p);

// Sign of the V component of R. kRMinusI: R = (1, -i)/√2.
enum class CircularConvention { kRMinusI, kRPlusI };

class JonesVector {
 public:
  explicit JonesVector(const Vector2c& v);
  const Vector2c& components() const { return v_; }
  cplx h() const { return v_(0); }
  cplx v() const { return v_(1); }

 private:
  Vector2c v_;
};

JonesVector projector_for(Polarization p,
                          CircularConvention conv = CircularConvention::kRMinusI);

// Retarder with the given retardance and fast-axis angle:
// R(axis) · diag(1, e^{-i·retardance}) · R(-axis).
Matrix2c waveplate_jones(double retardance, double fast_axis);

struct WaveplateSetting {
  double qwp_angle = 0.0;
  double hwp_angle = 0.0;
};

// QWP then HWP then a fixed H polarizer. The settings rotate the listed
// analysis state onto H, so the polarizer transmits exactly that projection.
// Documentation table for simulation realism; the math path uses
// projector_for directly.
WaveplateSetting waveplate_setting_for(Polarization p);

struct BasisPair {
  Polarization xx = Polarization::H;
  Polarization x = Polarization::H;

  std::string label() const;
  static BasisPair parse(std::string_view label);
  BasisPair with_xx(Polarization p) const { return {p, x}; }
  BasisPair with_x(Polarization p) const { return {xx, p}; }
  auto operator<=>(const BasisPair&) const = default;
};

// 36: {H,V,D,A,R,L}^2; 16: {H,V,D,R}^2. Outer loop XX arm, inner loop X arm.
std::vector<BasisPair> tomography_bases(int count);

// |a ⊗ b><a ⊗ b| in the (HH, HV, VH, VV) basis.
Matrix4c pair_projector(const BasisPair& pair,
                        CircularConvention conv = CircularConvention::kRMinusI);
Vector4c pair_state(const BasisPair& pair,
                    CircularConvention conv = CircularConvention::kRMinusI);

struct CorrectionUnitary {
  double theta = 0.0;
  double phi = 0.0;
};

enum class CorrectionArms { kBoth, kXXOnly, kXOnly };

CorrectionArms arms_from_string(std::string_view s);
std::string to_string(CorrectionArms arms);

// Rz(φ)·Ry(θ).
Matrix2c correction_unitary(const CorrectionUnitary& c);

Matrix4c kron(const Matrix2c& a, const Matrix2c& b);

DensityMatrix apply_correction(const DensityMatrix& rho, const CorrectionUnitary& c,
                               CorrectionArms arms = CorrectionArms::kBoth);

}  // namespace cascade
