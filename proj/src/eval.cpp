#include "cbn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbn/error.hpp"
#include "cbn/parallel.hpp"
#include "cbn/rng.hpp"

namespace cbn {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ValidationError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                              std::to_string(labels.size()) + ")");
    }
    for (int l : labels)
        if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
    for (double s : scores)
        if (std::isnan(s)) throw ValidationError("scores must not be NaN");
}

}  // namespace

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
    check_inputs(scores, labels);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1) {
            (predicted ? cm.tp : cm.fn)++;
        } else {
            (predicted ? cm.fp : cm.tn)++;
        }
    }
    return cm;
}

std::optional<double> sensitivity(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

std::optional<double> specificity(const ConfusionMatrix& cm) {
    if (cm.tn + cm.fp == 0) return std::nullopt;
    return static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw ValidationError("ROC needs at least one positive and one negative label");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double p = static_cast<double>(positives);
    const double n = static_cast<double>(negatives);
    RocResult result;
    ConfusionMatrix cm{0, 0, negatives, positives};
    result.curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, cm});

    // Twice the area times P * N, exact in integers.
    unsigned long long doubled_area = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        const auto prev = cm;
        for (; i < order.size() && scores[order[i]] == threshold; ++i) {
            if (labels[order[i]] == 1) {
                ++cm.tp;
                --cm.fn;
            } else {
                ++cm.fp;
                --cm.tn;
            }
        }
        doubled_area += static_cast<unsigned long long>(cm.fp - prev.fp) * (cm.tp + prev.tp);
        result.curve.points.push_back(
            {threshold, static_cast<double>(cm.fp) / n, static_cast<double>(cm.tp) / p, cm});
    }
    result.auc = static_cast<double>(doubled_area) / (2.0 * p * n);
    return result;
}

double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    unsigned long long twice_wins = 0;
    unsigned long long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                twice_wins += 2;
            } else if (scores[i] == scores[j]) {
                twice_wins += 1;
            }
        }
    }
    if (pairs == 0) throw ValidationError("pairwise AUC needs at least one positive and one negative label");
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pairs));
}

namespace {

double quantile(std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

AucInterval auc_bootstrap_ci(std::span<const double> scores, std::span<const int> labels, std::size_t resamples,
                             double level, std::uint64_t seed) {
    check_inputs(scores, labels);
    if (resamples == 0) throw ValidationError("need at least one bootstrap resample");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    Rng rng(seed);
    const std::size_t n = scores.size();
    std::vector<double> aucs;
    aucs.reserve(resamples);
    std::vector<double> s(n);
    std::vector<int> l(n);
    AucInterval out;
    for (std::size_t b = 0; b < resamples; ++b) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(rng.below(n));
            s[i] = scores[k];
            l[i] = labels[k];
            pos += static_cast<std::size_t>(l[i]);
        }
        if (pos == 0 || pos == n) {
            ++out.degenerate;
            continue;
        }
        aucs.push_back(roc_auc(s, l).auc);
    }
    if (aucs.empty()) throw ValidationError("every bootstrap resample held a single class");
    std::sort(aucs.begin(), aucs.end());
    out.lower = quantile(aucs, (1.0 - level) / 2.0);
    out.upper = quantile(aucs, 1.0 - (1.0 - level) / 2.0);
    out.resamples = aucs.size();
    return out;
}

std::vector<std::optional<double>> predict_risk(const CausalBayesianNetwork& bn, const Dataset& records,
                                                const std::string& target, const std::string& positive_state) {
    require_same_schema(bn.variables(), records.variables());
    const auto t = bn.index_of(target);
    const auto positive = static_cast<std::size_t>(bn.variables()[t].state_index(positive_state));
    std::vector<std::optional<double>> out;
    out.reserve(records.rows());
    std::vector<int> evidence(bn.size());
    for (std::size_t r = 0; r < records.rows(); ++r) {
        const auto row = records.row(r);
        std::copy(row.begin(), row.end(), evidence.begin());
        evidence[t] = kMissing;
        try {
            out.push_back(posterior(bn, evidence, t)[positive]);
        } catch (const ZeroProbabilityEvidence&) {
            out.push_back(std::nullopt);
        }
    }
    return out;
}

std::vector<std::optional<int>> binary_labels(const Dataset& records, const std::string& target,
                                              const std::string& positive_state) {
    const auto t = records.column_of(target);
    const int positive = records.variables()[t].state_index(positive_state);
    std::vector<std::optional<int>> out;
    out.reserve(records.rows());
    for (std::size_t r = 0; r < records.rows(); ++r) {
        const int v = records.cell(r, t);
        if (v == kMissing) {
            out.push_back(std::nullopt);
        } else {
            out.push_back(v == positive ? 1 : 0);
        }
    }
    return out;
}

ScoredSet pair_scores(const std::vector<std::optional<double>>& scores, const std::vector<std::optional<int>>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
    ScoredSet out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            ++out.missing_labels;
            continue;
        }
        if (!scores[i]) {
            ++out.undefined_scores;
            continue;
        }
        out.scores.push_back(*scores[i]);
        out.labels.push_back(*labels[i]);
    }
    return out;
}

std::optional<double> evaluate_auc(const CausalBayesianNetwork& bn, const Dataset& data, const std::string& target,
                                   const std::string& positive_state) {
    const auto set = pair_scores(predict_risk(bn, data, target, positive_state),
                                 binary_labels(data, target, positive_state));
    const auto positives = std::count(set.labels.begin(), set.labels.end(), 1);
    if (positives == 0 || static_cast<std::size_t>(positives) == set.labels.size()) return std::nullopt;
    return roc_auc(set.scores, set.labels).auc;
}

BootstrapConfig GridConfig::bootstrap(std::size_t threads) const {
    BootstrapConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.sem.em.ess = ess;
    cfg.sem.em.max_iterations = max_em_iterations;
    cfg.sem.em.tolerance = tolerance;
    cfg.sem.max_sem_iterations = max_sem_iterations;
    return cfg;
}

std::vector<GridResult> grid_search(const Dataset& train, const Dataset& test, const PriorKnowledge& knowledge,
                                    const std::vector<GridConfig>& grid, const std::string& target,
                                    const std::string& positive_state, std::size_t threads) {
    if (grid.empty()) throw ValidationError("grid search needs at least one configuration");
    require_same_schema(train.variables(), test.variables());
    train.column_of(target);

    const std::size_t grid_threads = std::min(resolve_threads(threads), grid.size());
    // Leftover workers go to the bootstrap loop of each configuration.
    const std::size_t inner_threads = std::max<std::size_t>(1, resolve_threads(threads) / grid_threads);

    std::vector<GridResult> results(grid.size());
    parallel_for(grid.size(), grid_threads, [&](std::size_t i) {
        GridResult& r = results[i];
        r.config = grid[i];
        try {
            auto learned = learn_cbn(train, knowledge, grid[i].bootstrap(inner_threads), grid[i].lambda);
            r.in_sample_auc = evaluate_auc(learned.network, train, target, positive_state);
            r.out_of_sample_auc = evaluate_auc(learned.network, test, target, positive_state);
            r.target_parents = parents(learned.network.dag(), target);
            r.edges = learned.network.dag().edge_count();
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    });

    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        const bool ha = a.out_of_sample_auc.has_value();
        const bool hb = b.out_of_sample_auc.has_value();
        if (ha != hb) return ha;
        return ha && *a.out_of_sample_auc > *b.out_of_sample_auc;
    });
    return results;
}

}  // namespace cbn
