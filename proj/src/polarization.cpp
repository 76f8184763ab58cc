#include "cascade/polarization.hpp"

#include <cmath>
#include <numbers>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

Matrix2c rotation(double angle) {
  Matrix2c r;
  const double c = std::cos(angle), s = std::sin(angle);
  r << c, -s, s, c;
  return r;
}

}  // namespace

char to_char(Polarization p) {
  static constexpr char kLabels[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  return kLabels[static_cast<int>(p)];
}

Polarization polarization_from_char(char c) {
  switch (c) {
    case 'H': return Polarization::H;
    case 'V': return Polarization::V;
    case 'D': return Polarization::D;
    case 'A': return Polarization::A;
    case 'R': return Polarization::R;
    case 'L': return Polarization::L;
    default: throw ValidationError(std::string("unknown polarization label '") + c + "'");
  }
}

Polarization orthogonal(Polarization p) {
  switch (p) {
    case Polarization::H: return Polarization::V;
    case Polarization::V: return Polarization::H;
    case Polarization::D: return Polarization::A;
    case Polarization::A: return Polarization::D;
    case Polarization::R: return Polarization::L;
    case Polarization::L: return Polarization::R;
  }
  return p;
}

JonesVector::JonesVector(const Vector2c& v) : v_(v) {
  if (std::abs(v_.squaredNorm() - 1.0) > 1e-12) {
    throw ValidationError("Jones vector is not normalized");
  }
}

JonesVector projector_for(Polarization p, CircularConvention conv) {
  const double r = 1.0 / std::sqrt(2.0);
  const cplx i(0.0, 1.0);
  const cplx r_sign = conv == CircularConvention::kRMinusI ? -i : i;
  switch (p) {
    case Polarization::H: return JonesVector(Vector2c(1.0, 0.0));
    case Polarization::V: return JonesVector(Vector2c(0.0, 1.0));
    case Polarization::D: return JonesVector(Vector2c(r, r));
    case Polarization::A: return JonesVector(Vector2c(r, -r));
    case Polarization::R: return JonesVector(Vector2c(r, r * r_sign));
    case Polarization::L: return JonesVector(Vector2c(r, -r * r_sign));
  }
  throw ValidationError("invalid polarization");
}

Matrix2c waveplate_jones(double retardance, double fast_axis) {
  Matrix2c d = Matrix2c::Zero();
  d(0, 0) = 1.0;
  d(1, 1) = std::polar(1.0, -retardance);
  return rotation(fast_axis) * d * rotation(-fast_axis);
}

WaveplateSetting waveplate_setting_for(Polarization p) {
  using std::numbers::pi;
  switch (p) {
    case Polarization::H: return {0.0, 0.0};
    case Polarization::V: return {0.0, pi / 4};
    case Polarization::D: return {pi / 4, pi / 8};
    case Polarization::A: return {pi / 4, 3 * pi / 8};
    case Polarization::R: return {0.0, 7 * pi / 8};
    case Polarization::L: return {0.0, pi / 8};
  }
  return {};
}

std::string BasisPair::label() const {
  return std::string{to_char(xx), to_char(x)};
}

BasisPair BasisPair::parse(std::string_view label) {
  if (label.size() != 2) {
    throw ValidationError("basis label must have two letters, got '" + std::string(label) + "'");
  }
  return {polarization_from_char(label[0]), polarization_from_char(label[1])};
}

std::vector<BasisPair> tomography_bases(int count) {
  std::vector<Polarization> labels;
  if (count == 36) {
    labels.assign(kAllPolarizations.begin(), kAllPolarizations.end());
  } else if (count == 16) {
    labels = {Polarization::H, Polarization::V, Polarization::D, Polarization::R};
  } else {
    throw ValidationError("unsupported tomography basis count " + std::to_string(count) +
                          " (expected 16 or 36)");
  }
  std::vector<BasisPair> out;
  out.reserve(labels.size() * labels.size());
  for (auto a : labels)
    for (auto b : labels) out.push_back({a, b});
  return out;
}

Vector4c pair_state(const BasisPair& pair, CircularConvention conv) {
  const Vector2c a = projector_for(pair.xx, conv).components();
  const Vector2c b = projector_for(pair.x, conv).components();
  return Vector4c(a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1));
}

Matrix4c pair_projector(const BasisPair& pair, CircularConvention conv) {
  const Vector4c s = pair_state(pair, conv);
  return s * s.adjoint();
}

CorrectionArms arms_from_string(std::string_view s) {
  if (s == "both") return CorrectionArms::kBoth;
  if (s == "xx_only") return CorrectionArms::kXXOnly;
  if (s == "x_only") return CorrectionArms::kXOnly;
  throw ValidationError("unknown correction arms '" + std::string(s) + "'");
}

std::string to_string(CorrectionArms arms) {
  switch (arms) {
    case CorrectionArms::kBoth: return "both";
    case CorrectionArms::kXXOnly: return "xx_only";
    case CorrectionArms::kXOnly: return "x_only";
  }
  return "both";
}

Matrix2c correction_unitary(const CorrectionUnitary& c) {
  const double ch = std::cos(c.theta / 2), sh = std::sin(c.theta / 2);
  Matrix2c ry;
  ry << ch, -sh, sh, ch;
  Matrix2c rz = Matrix2c::Zero();
  rz(0, 0) = std::polar(1.0, -c.phi / 2);
  rz(1, 1) = std::polar(1.0, c.phi / 2);
  return rz * ry;
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
  Matrix4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

DensityMatrix apply_correction(const DensityMatrix& rho, const CorrectionUnitary& c,
                               CorrectionArms arms) {
  rho.validate();
  const Matrix2c u = correction_unitary(c);
  const Matrix2c id = Matrix2c::Identity();
  const Matrix4c full = kron(arms == CorrectionArms::kXOnly ? id : u,
                             arms == CorrectionArms::kXXOnly ? id : u);
  Matrix4c out = full * rho.matrix() * full.adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(out);
}

}  // namespace cascade
