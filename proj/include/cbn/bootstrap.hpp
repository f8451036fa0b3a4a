#ifndef CBN_BOOTSTRAP_HPP
#define CBN_BOOTSTRAP_HPP

#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/data.hpp"
#include "cbn/error.hpp"
#include "cbn/graph.hpp"
#include "cbn/params.hpp"
#include "cbn/structure.hpp"

namespace cbn {

/// Edge-inclusion frequencies over n bootstrap graphs. Entries are stored as
/// integer counts so every value is exactly count / n.
class ConfidenceMatrix {
public:
    ConfidenceMatrix() = default;
    ConfidenceMatrix(std::vector<std::string> nodes, std::vector<std::size_t> counts, std::size_t bootstraps);

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t bootstraps() const noexcept { return bootstraps_; }

    double operator()(std::size_t source, std::size_t target) const {
        return static_cast<double>(counts_[source * size() + target]) / static_cast<double>(bootstraps_);
    }
    double at(std::string_view source, std::string_view target) const;
    std::size_t count(std::size_t source, std::size_t target) const { return counts_[source * size() + target]; }
    double max_entry() const;

    friend bool operator==(const ConfidenceMatrix&, const ConfidenceMatrix&) = default;

private:
    std::vector<std::string> nodes_;
    std::vector<std::size_t> counts_;
    std::size_t bootstraps_ = 1;
};

struct BootstrapConfig {
    std::size_t n = 1;
    /// Records per resample; 0 means |D|.
    std::size_t m = 0;
    std::uint64_t seed = 0;
    SemConfig sem;
    /// Worker threads for the bootstrap loop; 0 = hardware concurrency.
    std::size_t threads = 1;

    void validate() const;
};

/// A bootstrap iteration failed; `index` is its position, `cause` the error.
class BootstrapFailure : public Error {
public:
    BootstrapFailure(std::size_t index, std::exception_ptr cause, const std::string& what)
        : Error("bootstrap " + std::to_string(index) + " failed: " + what), index_(index), cause_(cause) {}
    std::size_t index() const noexcept { return index_; }
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    std::size_t index_;
    std::exception_ptr cause_;
};

/// m records drawn uniformly with replacement; missing cells kept as-is.
Dataset resample(const Dataset& data, std::size_t m, std::uint64_t seed);

/// One structural EM run per seed (resample seeded by it); counts summed in
/// seed-list order, which does not affect the result.
ConfidenceMatrix confidence_matrix_from_seeds(const Dataset& data, const PriorKnowledge& knowledge,
                                              const SemConfig& sem, std::size_t m,
                                              std::span<const std::uint64_t> seeds, std::size_t threads);

/// Bootstrap i uses seed + i.
ConfidenceMatrix confidence_matrix(const Dataset& data, const PriorKnowledge& knowledge, const BootstrapConfig& cfg);

struct AverageGraphResult {
    Dag dag;
    /// Antiparallel pairs with equal confidence >= lambda, dropped both ways.
    std::vector<Edge> dropped_ties;
    /// Candidates skipped because they would close a cycle.
    std::vector<Edge> skipped_cycles;
};

/// Required edges first; then every allowed edge with 0 < C >= lambda in
/// decreasing confidence (ties by node position), skipping cycle-makers. For
/// an antiparallel pair passing the threshold only the stronger direction is
/// a candidate; equal strengths drop both.
AverageGraphResult average_graph_detailed(const ConfidenceMatrix& confidence, double lambda,
                                          const PriorKnowledge& knowledge);
Dag average_graph(const ConfidenceMatrix& confidence, double lambda, const PriorKnowledge& knowledge);

struct LearnResult {
    CausalBayesianNetwork network;
    ConfidenceMatrix confidence;
    AverageGraphResult average;
    EmResult em;
};

/// confidence_matrix -> average_graph -> em_fit on the full dataset.
LearnResult learn_cbn(const Dataset& data, const PriorKnowledge& knowledge, const BootstrapConfig& cfg,
                      double lambda);

}  // namespace cbn

#endif  // CBN_BOOTSTRAP_HPP
