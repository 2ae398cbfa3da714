#pragma once

#include <cstdint>
#include <vector>

#include "advcf/harness/report.hpp"

namespace advcf::harness {

/// Finite-difference checks of every autodiff primitive, the Fourier
/// encoding, the renderer's age gradient and full classifier and generator
/// backward passes.
CriterionResult gradient_suite(std::uint64_t seed = 0);

/// Feature norm and closed-form age derivative of the Fourier encoding.
CriterionResult encoding_invariants(std::uint64_t seed = 0);

/// Ascent sign and age bounds over a complete adversarial run.
CriterionResult game_algebra(std::uint64_t seed = 0);

/// Hard selection vs a sort oracle, store M=100 vs the plain game, and the
/// AD/CN rendering equivalence.
CriterionResult oracle_equivalences(std::uint64_t seed = 0);

/// All of the above, in order.
std::vector<CriterionResult> selftest(std::uint64_t seed = 0);

}  // namespace advcf::harness
