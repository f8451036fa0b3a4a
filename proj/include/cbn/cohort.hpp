#ifndef CBN_COHORT_HPP
#define CBN_COHORT_HPP

#include "cbn/bn.hpp"
#include "cbn/data.hpp"

namespace cbn {

/// Target node of the reference cohort and its positive state.
inline constexpr const char* kCohortTarget = "LNM";
inline constexpr const char* kCohortPositive = "yes";

/// The 18 clinical variables in three temporal tiers (pre-operative,
/// post-operative/treatment, late outcomes). With `hospital`, a 10-state
/// Hospital context variable is added.
Schema cohort_schema(bool hospital = false);

/// Synthetic ground-truth network over cohort_schema(hospital). Its edges
/// respect the tiers and give the target three pre-operative parents. CPT
/// rows are ordinal-logit: P(s) proportional to exp(bias_s + s * z) with z a
/// weighted sum of parent states scaled to [-1, 1].
CausalBayesianNetwork cohort_network(bool hospital = false);

}  // namespace cbn

#endif  // CBN_COHORT_HPP
