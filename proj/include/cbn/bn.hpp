#ifndef CBN_BN_HPP
#define CBN_BN_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbn/data.hpp"
#include "cbn/factor.hpp"
#include "cbn/graph.hpp"

namespace cbn {

/// Conditional probability table P(child | parents). Rows follow mixed-radix
/// order over `parents` as listed (first parent most significant); within a
/// row, entries follow the child's state order.
struct Cpt {
    std::string child;
    std::vector<std::string> parents;
    std::size_t cardinality = 0;
    std::vector<double> table;

    std::size_t rows() const noexcept { return cardinality == 0 ? 0 : table.size() / cardinality; }
    std::span<const double> row(std::size_t r) const { return {table.data() + r * cardinality, cardinality}; }

    friend bool operator==(const Cpt&, const Cpt&) = default;
};

/// Label-level assignment used by the public API and the service.
using StateMap = std::map<std::string, std::string>;

/// Discrete network B = (G, Theta) whose edges are read causally. Immutable.
class CausalBayesianNetwork {
public:
    CausalBayesianNetwork() = default;
    /// Validates that variables match the dag nodes, that each CPT's parents
    /// equal the dag parents in node order, and that every row is a
    /// distribution (entries in [0,1], sum 1 within 1e-9).
    CausalBayesianNetwork(Dag dag, std::vector<Variable> variables, std::vector<Cpt> cpts);

    const Dag& dag() const noexcept { return dag_; }
    const std::vector<Variable>& variables() const noexcept { return variables_; }
    const std::vector<Cpt>& cpts() const noexcept { return cpts_; }
    std::size_t size() const noexcept { return variables_.size(); }
    std::size_t index_of(std::string_view name) const { return dag_.index_of(name); }
    std::size_t cardinality(std::size_t node) const { return variables_[node].cardinality(); }

    const std::vector<std::size_t>& parent_indices(std::size_t node) const { return parents_[node]; }

    /// CPT row selected by the parent states in a full assignment.
    std::size_t row_index(std::size_t node, std::span<const int> assignment) const;
    double probability(std::size_t node, std::span<const int> assignment) const {
        return cpts_[node].table[row_index(node, assignment) * cpts_[node].cardinality +
                                 static_cast<std::size_t>(assignment[node])];
    }

    /// Factor over {node} ∪ parents for the node's CPT.
    Factor cpt_factor(std::size_t node) const;

    /// Converts a label map to state indices (kMissing where absent). Throws
    /// UnknownNode or ValidationError on bad labels.
    std::vector<int> to_indices(const StateMap& states) const;

    friend bool operator==(const CausalBayesianNetwork&, const CausalBayesianNetwork&) = default;

private:
    Dag dag_;
    std::vector<Variable> variables_;
    std::vector<Cpt> cpts_;
    std::vector<std::vector<std::size_t>> parents_;
};

/// Product of matching CPT entries for a full assignment.
double joint_probability(const CausalBayesianNetwork& bn, std::span<const int> assignment);
double joint_probability(const CausalBayesianNetwork& bn, const StateMap& assignment);

/// Min-fill elimination ordering for the non-query, non-evidence variables.
std::vector<std::size_t> min_fill_order(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                                        std::span<const std::size_t> query);

/// Normalized joint posterior over `query` (sorted ascending in the returned
/// factor) by variable elimination. Throws ZeroProbabilityEvidence.
Factor joint_posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                       std::span<const std::size_t> query);

/// P(target | evidence) via variable elimination with min-fill ordering.
/// Throws ValidationError when the target carries evidence and
/// ZeroProbabilityEvidence when P(evidence) = 0.
std::vector<double> posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence, std::size_t target);
/// Same, eliminating variables in the given order (must cover every
/// non-target, non-evidence variable).
std::vector<double> posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence, std::size_t target,
                              std::span<const std::size_t> elimination_order);
std::vector<double> posterior(const CausalBayesianNetwork& bn, const StateMap& evidence, const std::string& target);

/// P(evidence) by variable elimination; 1 for empty evidence.
double evidence_probability(const CausalBayesianNetwork& bn, std::span<const int> evidence);

/// Forward sampling in topological order. Complete, deterministic per seed.
Dataset sample(const CausalBayesianNetwork& bn, std::size_t count, std::uint64_t seed);

/// Sum of log joint probabilities over complete records; -infinity when any
/// record has probability zero. Throws SchemaError / ValidationError.
double log_likelihood(const CausalBayesianNetwork& bn, const Dataset& data);

/// Posterior completions of one partially observed record: every joint state
/// of its missing cells with nonzero probability, normalized.
struct Completions {
    std::vector<std::size_t> missing;  // columns with kMissing, ascending
    std::vector<int> states;           // missing.size() entries per completion
    std::vector<double> weights;       // P(completion | observed cells)
    double evidence_probability = 0.0; // P(observed cells)

    std::size_t count() const noexcept { return weights.size(); }
};

/// Enumerates completions when the product of missing cardinalities is at
/// most `limit`; std::nullopt otherwise. A record with P(observed) = 0 yields
/// evidence_probability 0 and no completions.
std::optional<Completions> enumerate_completions(const CausalBayesianNetwork& bn, std::span<const int> record,
                                                 std::size_t limit);

/// Every row uniform; used as EM start and no-edge baseline.
std::vector<Cpt> uniform_cpts(const Dag& dag, const std::vector<Variable>& variables);

}  // namespace cbn

#endif  // CBN_BN_HPP
