#ifndef CBN_STRUCTURE_HPP
#define CBN_STRUCTURE_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/data.hpp"
#include "cbn/graph.hpp"
#include "cbn/params.hpp"

namespace cbn {

/// Statistics frozen for one round of structure search. Complete data is a
/// weighted table with duplicate records merged. Incomplete records are
/// replaced by their posterior completions under a fitted network; a record
/// with more than kEnumerationLimit completions is kept as a product of its
/// per-cell posterior marginals instead.
class CompletedData {
public:
    CompletedData() = default;

    static CompletedData from_complete(const Dataset& data);
    /// Throws ZeroProbabilityEvidence naming the offending record.
    static CompletedData from_network(const CausalBayesianNetwork& bn, const Dataset& data);

    const std::vector<Variable>& variables() const noexcept { return variables_; }
    std::vector<std::string> names() const;
    /// Total record weight (the record count of the source dataset).
    double records() const noexcept { return records_; }
    /// False when at least one record uses the factorized approximation.
    bool exact() const noexcept { return factorized_.empty(); }
    std::size_t distinct_rows() const noexcept { return weights_.size(); }

    /// Counts over (parents, child) laid out like a CPT: mixed radix over
    /// `parents` in the given order, child state fastest.
    std::vector<double> family_counts(std::size_t child, std::span<const std::size_t> parents) const;

private:
    struct Factorized {
        std::vector<int> cells;
        double weight = 0.0;
        std::vector<std::vector<double>> marginals;  // empty for observed cells
    };

    std::vector<Variable> variables_;
    std::vector<int> rows_;  // complete rows, row-major
    std::vector<double> weights_;
    std::vector<Factorized> factorized_;
    double records_ = 0.0;
};

enum class ScoreKind { BIC };

struct ScoreConfig {
    ScoreKind kind = ScoreKind::BIC;
    /// Dirichlet smoothing applied to the family fit inside the score.
    double ess = 0.0;
};

struct SemConfig {
    EmConfig em;
    std::size_t max_sem_iterations = 20;
    ScoreConfig score;

    void validate() const;
};

/// BIC family term: sum N_rk log theta_rk minus (log n_records / 2) *
/// (card(child) - 1) * prod card(parents). Zero counts contribute nothing to
/// the likelihood term.
double family_score(std::size_t child, std::span<const std::size_t> parents, const CompletedData& data,
                    const ScoreConfig& score, double n_records);
double family_score(const std::string& child, const std::vector<std::string>& parents, const CompletedData& data,
                    const ScoreConfig& score, double n_records);
/// Same term from a ready-made count table (rows x cardinality).
double family_score_from_counts(std::span<const double> counts, std::size_t cardinality, const ScoreConfig& score,
                                double n_records);

/// Sum of family scores with n_records = data.records().
double total_score(const Dag& dag, const CompletedData& data, const ScoreConfig& score);

struct HillClimbResult {
    Dag dag;
    double score = 0.0;
    double start_score = 0.0;
    std::size_t moves = 0;
};

/// Steepest-ascent hill-climbing over Add/Delete/Reverse moves consistent with
/// the knowledge. Among equally good moves the first in enumeration order
/// wins: Add < Delete < Reverse, then (source, target) by node position.
/// Stops when no move improves the score by more than 1e-8.
HillClimbResult hill_climb_detailed(const CompletedData& data, const PriorKnowledge& knowledge,
                                    const ScoreConfig& score, const Dag& start);
Dag hill_climb(const CompletedData& data, const PriorKnowledge& knowledge, const ScoreConfig& score,
               const Dag& start);

struct SemResult {
    Dag dag;
    std::size_t iterations = 0;
    /// Graph produced by each structure step.
    std::vector<Dag> history;
    bool converged = false;
};

/// Structural EM from the empty graph plus required edges: fit parameters by
/// EM on the current graph, freeze the expected completions, hill-climb from
/// the current graph; repeat until the graph stops changing.
SemResult structural_em_detailed(const Dataset& data, const PriorKnowledge& knowledge, const SemConfig& cfg);
Dag structural_em(const Dataset& data, const PriorKnowledge& knowledge, const SemConfig& cfg);

}  // namespace cbn

#endif  // CBN_STRUCTURE_HPP
