#include "advcf/encoding/fourier.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

#include "advcf/random.hpp"

namespace advcf::enc {

std::array<double, 2> normalize(const ConditioningVector& c) {
  if (!(c.age_years >= kMinAge && c.age_years <= kMaxAge)) {
    throw std::out_of_range("age " + std::to_string(c.age_years) + " outside [60, 90]");
  }
  const double v0 = std::clamp(normalized_age(c.age_years), 0.0, kNormalizedCeiling);
  return {v0, kDiagnosisCode[static_cast<int>(c.diagnosis)]};
}

FourierEncoder::FourierEncoder(const EncoderParams& params) : params_(params) {
  if (params.m == 0 || params.d == 0) throw std::invalid_argument("encoder needs m >= 1 and d >= 1");
  Rng rng(params.seed);
  basis_ = ad::Tensor({params.m, params.d});
  for (double& b : basis_.buffer()) b = rng.normal(0.0, params.scale);
  finalize();
}

FourierEncoder FourierEncoder::from_basis(ad::Tensor basis) {
  if (basis.rank() != 2 || basis.numel() == 0) throw ad::ShapeError("basis must be a non-empty m x d matrix");
  FourierEncoder e;
  e.params_.m = basis.dim(0);
  e.params_.d = basis.dim(1);
  e.params_.scale = 0.0;
  e.basis_ = std::move(basis);
  e.finalize();
  return e;
}

void FourierEncoder::finalize() {
  const std::size_t m = params_.m;
  const std::size_t d = params_.d;
  coefficients_.assign(m, 1.0);
  basis_t_ = ad::Tensor({d, m});
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) basis_t_.at(k, j) = 2.0 * std::numbers::pi * basis_.at(j, k);
  }
}

ad::Var FourierEncoder::encode(const ad::Var& v) const {
  const ad::Shape& s = v.shape();
  if (s.empty() || s.size() > 2 || s.back() != params_.d) {
    throw ad::ShapeError("encode: expected (" + std::to_string(params_.d) + ",) or (n, " +
                         std::to_string(params_.d) + "), got " + ad::shape_str(s));
  }
  ad::Tape& tape = v.tape();
  const ad::Var phase = ad::matmul(v, tape.constant(basis_t_));
  const ad::Var parts[] = {ad::cos(phase), ad::sin(phase)};
  // Coefficients are fixed at 1, so the pairwise weighting is the identity.
  return ad::concat(parts, 0, /*interleave=*/true);
}

ad::Tensor FourierEncoder::encode(const ad::Tensor& v) const {
  ad::Tape tape;
  return encode(tape.constant(v)).value();
}

}  // namespace advcf::enc
