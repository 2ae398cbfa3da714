#pragma once

#include <array>
#include <cstdint>

#include "advcf/autodiff/tape.hpp"
#include "advcf/types.hpp"

namespace advcf::enc {

struct ConditioningVector {
  double age_years = kMinAge;
  Diagnosis diagnosis = Diagnosis::CN;
};

/// Upper end of the half-open normalized domain [0, 1).
inline constexpr double kNormalizedCeiling = 1.0 - 1e-9;
inline constexpr double kDiagnosisCode[2] = {0.0, 0.5};

/// Maps (age, diagnosis) into [0,1)^2: age affinely over [60, 90] and the
/// diagnosis to 0.0 (CN) or 0.5 (AD). Throws std::out_of_range outside [60, 90].
std::array<double, 2> normalize(const ConditioningVector& c);

/// Normalized age coordinate without the range check; used on the gradient
/// path where ages are already clipped.
inline double normalized_age(double years) { return (years - kMinAge) / kAgeSpan; }

struct EncoderParams {
  std::size_t m = 100;
  std::size_t d = 2;
  double scale = 10.0;
  std::uint64_t seed = 0;
};

/// Random Fourier feature map
///   gamma(v) = [p_j cos(2 pi b_j.v), p_j sin(2 pi b_j.v)]_{j=1..m}
/// with a frozen Gaussian basis (zero mean, stddev = scale) and p_j = 1.
class FourierEncoder {
 public:
  explicit FourierEncoder(const EncoderParams& params);

  /// Encoder with an explicit m x d basis and unit coefficients.
  static FourierEncoder from_basis(ad::Tensor basis);

  /// v of shape (d,) -> (2m,), or a batch (n, d) -> (n, 2m). Recorded on v's tape.
  ad::Var encode(const ad::Var& v) const;
  /// Tape-free convenience wrapper.
  ad::Tensor encode(const ad::Tensor& v) const;

  std::size_t m() const { return params_.m; }
  std::size_t d() const { return params_.d; }
  std::size_t output_dim() const { return 2 * params_.m; }
  const EncoderParams& params() const { return params_; }
  /// m x d frequency matrix.
  const ad::Tensor& basis() const { return basis_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  FourierEncoder() = default;
  void finalize();

  EncoderParams params_;
  ad::Tensor basis_;
  ad::Tensor basis_t_;  // d x m, scaled by 2 pi
  std::vector<double> coefficients_;
};

}  // namespace advcf::enc
