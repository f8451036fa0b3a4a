#ifndef CBN_PARAMS_HPP
#define CBN_PARAMS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/data.hpp"
#include "cbn/graph.hpp"

namespace cbn {

/// Above this many joint states of a record's missing cells, the E-step
/// switches from enumeration to per-family variable elimination.
inline constexpr std::size_t kEnumerationLimit = 4096;

/// (Expected) counts for one family, shaped like the node's CPT.
struct FamilyCounts {
    std::size_t child = 0;
    std::vector<std::size_t> parents;  // ascending node positions
    std::size_t cardinality = 0;
    std::vector<double> counts;        // rows x cardinality
};

struct SufficientStatistics {
    std::vector<FamilyCounts> families;  // one per node
    double records = 0.0;

    /// Sum of counts for one node's family.
    double total(std::size_t node) const;
};

enum class EmInit { Uniform, Random };

struct EmConfig {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;
    double ess = 1.0;
    EmInit init = EmInit::Uniform;
    std::uint64_t seed = 0;

    /// Throws ValidationError when max_iterations < 1, tolerance <= 0 or ess < 0.
    void validate() const;
};

/// Raw tabulation of a complete dataset over the families of `dag`.
SufficientStatistics tabulate(const Dag& dag, const Dataset& data);

/// Smoothed normalization: entry (r, k) = (N_rk + ess / (rows * card)) /
/// (N_r + ess / rows). With ess = 0 an empty row becomes uniform.
std::vector<Cpt> fit_from_counts(const Dag& dag, const std::vector<Variable>& variables,
                                 const SufficientStatistics& stats, double ess);

/// Closed-form (smoothed) maximum likelihood on complete data.
std::vector<Cpt> mle_fit(const Dag& dag, const Dataset& data, double ess);

/// E-step: posterior-weighted family counts given each record's observed
/// cells. Throws ZeroProbabilityEvidence naming the first offending record.
SufficientStatistics expected_counts(const CausalBayesianNetwork& bn, const Dataset& data);

/// Sum over records of log P(observed cells); -infinity if any is zero.
double observed_log_likelihood(const CausalBayesianNetwork& bn, const Dataset& data);

/// Dirichlet log-prior term sum alpha * log(theta) with alpha = ess / (rows * card)
/// per entry; the quantity MAP-EM increases alongside the likelihood.
double log_prior(const std::vector<Cpt>& cpts, double ess);

struct EmResult {
    std::vector<Cpt> cpts;
    /// Objective after each parameter update, starting from the initial
    /// parameters: observed-data log-likelihood + log_prior. Non-decreasing.
    std::vector<double> trace;
    /// Observed-data log-likelihood alone, aligned with `trace`.
    std::vector<double> log_likelihood;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Initial CPTs for `init`: uniform, or seeded random rows.
std::vector<Cpt> initial_cpts(const Dag& dag, const std::vector<Variable>& variables, const EmConfig& cfg);

/// Expectation-maximization on incomplete data. Complete data short-circuits
/// to mle_fit after a single iteration.
EmResult em_fit(const Dag& dag, const Dataset& data, const EmConfig& cfg);

}  // namespace cbn

#endif  // CBN_PARAMS_HPP
