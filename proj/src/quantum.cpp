#include "cascade/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cascade/constants.hpp"
#include "cascade/errors.hpp"

namespace cascade {

namespace {

constexpr double kNormTolerance = 1e-12;
constexpr double kHermitianTolerance = 1e-10;
constexpr double kTraceTolerance = 1e-10;

Eigen::Vector4d hermitian_eigenvalues(const Matrix4c& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

PureState2Q::PureState2Q(const Vector4c& amplitudes) : amp_(amplitudes) {
  const double norm = amp_.squaredNorm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
    std::ostringstream os;
    os << "state is not normalized: |psi|^2 = " << norm;
    throw ValidationError(os.str());
  }
}

PureState2Q PureState2Q::normalized(const Vector4c& amplitudes) {
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot normalize a zero state vector");
  }
  PureState2Q s;
  s.amp_ = amplitudes / norm;
  return s;
}

PureState2Q PureState2Q::phi_plus() {
  return time_evolved_state(0.0, 0.0);
}

PureState2Q PureState2Q::phi_minus() {
  const double r = 1.0 / std::sqrt(2.0);
  Vector4c v(r, 0.0, 0.0, -r);
  return PureState2Q(v);
}

PureState2Q PureState2Q::product(BasisIndex idx) {
  Vector4c v = Vector4c::Zero();
  v(idx) = 1.0;
  return PureState2Q(v);
}

DensityMatrix DensityMatrix::checked(const Matrix4c& m) {
  DensityMatrix rho(m);
  rho.validate();
  return rho;
}

std::string DensityMatrix::violation() const {
  if (!m_.allFinite()) return "density matrix has non-finite entries";
  const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTolerance) {
    std::ostringstream os;
    os << "density matrix is not Hermitian (max |rho - rho^dag| = " << herm << ")";
    return os.str();
  }
  const cplx tr = m_.trace();
  if (std::abs(tr - 1.0) > kTraceTolerance) {
    std::ostringstream os;
    os << "density matrix trace is " << tr.real() << ", expected 1";
    return os.str();
  }
  const double min_eig = hermitian_eigenvalues(m_).minCoeff();
  if (min_eig < -kEigenClipTolerance) {
    std::ostringstream os;
    os << "density matrix is not positive semidefinite (min eigenvalue " << min_eig << ")";
    return os.str();
  }
  return {};
}

void DensityMatrix::validate() const {
  if (auto v = violation(); !v.empty()) throw ValidationError(v);
}

double fss_phase(double fss_ueV, double t_ps) {
  return fss_ueV * t_ps / PhysicalConstants::hbar;
}

PureState2Q time_evolved_state(double fss_ueV, double t_ps) {
  const double r = 1.0 / std::sqrt(2.0);
  Vector4c v = Vector4c::Zero();
  v(kHH) = r;
  v(kVV) = r * std::polar(1.0, fss_phase(fss_ueV, t_ps));
  return PureState2Q(v);
}

DensityMatrix density_of(const PureState2Q& psi) {
  const Vector4c& a = psi.amplitudes();
  return DensityMatrix(a * a.adjoint());
}

double fidelity(const DensityMatrix& rho, const PureState2Q& target) {
  rho.validate();
  const Vector4c& psi = target.amplitudes();
  const double f = (psi.adjoint() * rho.matrix() * psi)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

const Matrix4c& spin_flip() {
  static const Matrix4c yy = [] {
    Eigen::Matrix2cd sy;
    sy << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
    Matrix4c out;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) out(2 * a + c, 2 * b + d) = sy(a, b) * sy(c, d);
    return out;
  }();
  return yy;
}

double concurrence(const DensityMatrix& rho) {
  rho.validate();
  // With ρ = A·A†, the λ_i (square roots of the eigenvalues of ρρ̃) are the
  // singular values of Aᵀ·(σy⊗σy)·A. Taking them directly avoids a square
  // root of a noisy spectrum, which costs half the digits near rank-deficient
  // states. Eigenvalues at round-off level are treated as exact zeros.
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho.matrix());
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * es.eigenvalues().cwiseAbs().maxCoeff();
  const Eigen::Vector4d w = es.eigenvalues().unaryExpr([&](double v) { return v > floor ? std::sqrt(v) : 0.0; });
  const Matrix4c a = es.eigenvectors() * w.cast<cplx>().asDiagonal();
  const Matrix4c n = a.transpose() * spin_flip() * a;
  const Eigen::Vector4d lam = Eigen::JacobiSVD<Matrix4c>(n).singularValues();  // descending
  return std::clamp(lam(0) - lam(1) - lam(2) - lam(3), 0.0, 1.0);
}

DensityMatrix project_physical(const Matrix4c& m) {
  if (!m.allFinite()) throw ValidationError("cannot project a matrix with non-finite entries");
  if (m.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("cannot project the zero matrix");
  const Matrix4c h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0);
  const double total = lam.sum();
  if (!(total > 0.0)) throw ValidationError("matrix has no positive eigenvalues");
  lam /= total;
  Matrix4c out = es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(out);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  const Matrix4c d = a.matrix() - b.matrix();
  return 0.5 * hermitian_eigenvalues(0.5 * (d + d.adjoint())).cwiseAbs().sum();
}

}  // namespace cascade
