#ifndef CBN_EVAL_HPP
#define CBN_EVAL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/bootstrap.hpp"
#include "cbn/data.hpp"
#include "cbn/graph.hpp"

namespace cbn {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Predict positive iff score >= threshold. Labels must be 0 or 1.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold);

/// tp / (tp + fn); std::nullopt when there are no positives.
std::optional<double> sensitivity(const ConfusionMatrix& cm);
/// tn / (tn + fp); std::nullopt when there are no negatives.
std::optional<double> specificity(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold;  // +inf for the (0, 0) anchor
    double fpr;        // 1 - specificity
    double tpr;        // sensitivity
    ConfusionMatrix cm;
};

struct RocCurve {
    std::vector<RocPoint> points;
};

struct RocResult {
    RocCurve curve;
    double auc = 0.0;
};

/// Thresholds: +inf, then every distinct score in descending order (the
/// lowest reaches (1, 1)). AUC by the trapezoid rule, evaluated in integer
/// arithmetic so it equals the pairwise statistic with ties counted 1/2.
/// Throws ValidationError without at least one positive and one negative.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Pr(score_pos > score_neg) + 0.5 Pr(tie) over all pairs, O(P * N).
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);

struct AucInterval {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t resamples = 0;
    /// Resamples discarded because they held a single class.
    std::size_t degenerate = 0;
};

/// Percentile interval from a nonparametric bootstrap over records.
AucInterval auc_bootstrap_ci(std::span<const double> scores, std::span<const int> labels, std::size_t resamples = 2000,
                             double level = 0.95, std::uint64_t seed = 0);

/// Per record: P(target = positive | observed cells other than the target).
/// Records whose evidence has probability zero get std::nullopt.
std::vector<std::optional<double>> predict_risk(const CausalBayesianNetwork& bn, const Dataset& records,
                                                const std::string& target, const std::string& positive_state);

/// 1 / 0 per record for target == positive; std::nullopt when missing.
std::vector<std::optional<int>> binary_labels(const Dataset& records, const std::string& target,
                                              const std::string& positive_state);

/// Scores and labels of the records where both are defined.
struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;
    std::size_t undefined_scores = 0;
    std::size_t missing_labels = 0;
};
ScoredSet pair_scores(const std::vector<std::optional<double>>& scores, const std::vector<std::optional<int>>& labels);

/// AUC of the network's risk scores on a dataset; std::nullopt when the
/// scored set holds a single class.
std::optional<double> evaluate_auc(const CausalBayesianNetwork& bn, const Dataset& data, const std::string& target,
                                   const std::string& positive_state);

struct GridConfig {
    std::size_t n = 10;
    std::size_t m = 0;
    double lambda = 0.5;
    double ess = 1.0;
    std::size_t max_em_iterations = 100;
    double tolerance = 1e-6;
    std::size_t max_sem_iterations = 20;
    std::uint64_t seed = 0;

    BootstrapConfig bootstrap(std::size_t threads) const;
};

struct GridResult {
    GridConfig config;
    std::optional<double> in_sample_auc;
    std::optional<double> out_of_sample_auc;
    std::vector<std::string> target_parents;
    std::size_t edges = 0;
    std::optional<std::string> error;
};

/// learn_cbn on `train` per configuration, scored on train and test. Results
/// sorted by out-of-sample AUC descending (failures and undefined AUCs last),
/// ties kept in grid order. A failing configuration is recorded, not fatal.
/// Configurations run on up to `threads` workers.
std::vector<GridResult> grid_search(const Dataset& train, const Dataset& test, const PriorKnowledge& knowledge,
                                    const std::vector<GridConfig>& grid, const std::string& target,
                                    const std::string& positive_state, std::size_t threads = 1);

}  // namespace cbn

#endif  // CBN_EVAL_HPP
