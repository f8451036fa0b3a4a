#include "cbn/bootstrap.hpp"

#include <algorithm>
#include <tuple>

#include "cbn/parallel.hpp"
#include "cbn/rng.hpp"

namespace cbn {

ConfidenceMatrix::ConfidenceMatrix(std::vector<std::string> nodes, std::vector<std::size_t> counts,
                                   std::size_t bootstraps)
    : nodes_(std::move(nodes)), counts_(std::move(counts)), bootstraps_(bootstraps) {
    if (bootstraps_ == 0) throw ValidationError("confidence matrix needs at least one bootstrap");
    if (counts_.size() != nodes_.size() * nodes_.size()) throw ValidationError("confidence matrix is not square");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (counts_[i * nodes_.size() + i] != 0) throw ValidationError("confidence matrix diagonal must be zero");
    }
    for (auto c : counts_)
        if (c > bootstraps_) throw ValidationError("edge count exceeds the number of bootstraps");
}

double ConfidenceMatrix::at(std::string_view source, std::string_view target) const {
    auto find = [&](std::string_view name) {
        auto it = std::find(nodes_.begin(), nodes_.end(), name);
        if (it == nodes_.end()) throw UnknownNode(std::string(name));
        return static_cast<std::size_t>(it - nodes_.begin());
    };
    return (*this)(find(source), find(target));
}

double ConfidenceMatrix::max_entry() const {
    std::size_t best = 0;
    for (auto c : counts_) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(bootstraps_);
}

void BootstrapConfig::validate() const {
    if (n < 1) throw ValidationError("number of bootstraps must be at least 1");
    sem.validate();
}

Dataset resample(const Dataset& data, std::size_t m, std::uint64_t seed) {
    if (data.rows() == 0) throw ValidationError("cannot resample an empty dataset");
    if (m == 0) throw ValidationError("resample size must be positive");
    Rng rng(seed);
    std::vector<std::size_t> picks(m);
    for (auto& p : picks) p = static_cast<std::size_t>(rng.below(data.rows()));
    return data.select_rows(picks);
}

ConfidenceMatrix confidence_matrix_from_seeds(const Dataset& data, const PriorKnowledge& knowledge,
                                              const SemConfig& sem, std::size_t m,
                                              std::span<const std::uint64_t> seeds, std::size_t threads) {
    if (seeds.empty()) throw ValidationError("number of bootstraps must be at least 1");
    sem.validate();
    const auto nodes = data.names();
    knowledge.check_nodes(nodes);
    const std::size_t draws = m == 0 ? data.rows() : m;
    const std::size_t n_nodes = nodes.size();

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges(seeds.size());
    auto errors = parallel_for(seeds.size(), threads, [&](std::size_t i) {
        const Dataset sample_i = resample(data, draws, seeds[i]);
        edges[i] = structural_em(sample_i, knowledge, sem).edge_indices();
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        std::string what = "unknown error";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        throw BootstrapFailure(i, errors[i], what);
    }

    std::vector<std::size_t> counts(n_nodes * n_nodes, 0);
    for (const auto& list : edges)
        for (auto [s, t] : list) ++counts[s * n_nodes + t];
    return ConfidenceMatrix(nodes, std::move(counts), seeds.size());
}

ConfidenceMatrix confidence_matrix(const Dataset& data, const PriorKnowledge& knowledge, const BootstrapConfig& cfg) {
    cfg.validate();
    std::vector<std::uint64_t> seeds(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) seeds[i] = cfg.seed + i;
    return confidence_matrix_from_seeds(data, knowledge, cfg.sem, cfg.m, seeds, cfg.threads);
}

AverageGraphResult average_graph_detailed(const ConfidenceMatrix& confidence, double lambda,
                                          const PriorKnowledge& knowledge) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    const auto& nodes = confidence.nodes();
    const std::size_t n = nodes.size();
    AverageGraphResult result;
    result.dag = required_graph(nodes, knowledge);

    auto passes = [&](std::size_t s, std::size_t t) {
        const double c = confidence(s, t);
        return c > 0.0 && c >= lambda && !knowledge.is_forbidden(Edge{nodes[s], nodes[t]});
    };

    struct Candidate {
        std::size_t count;
        std::size_t s;
        std::size_t t;
    };
    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            if (s == t || result.dag.has_edge(s, t) || !passes(s, t)) continue;
            if (passes(t, s) && !result.dag.has_edge(t, s)) {
                const auto forward = confidence.count(s, t);
                const auto backward = confidence.count(t, s);
                if (forward < backward) continue;
                if (forward == backward) {
                    if (s < t) {
                        result.dropped_ties.push_back(Edge{nodes[s], nodes[t]});
                        result.dropped_ties.push_back(Edge{nodes[t], nodes[s]});
                    }
                    continue;
                }
            }
            candidates.push_back({confidence.count(s, t), s, t});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(b.count, a.s, a.t) < std::tie(a.count, b.s, b.t);
    });
    for (const auto& c : candidates) {
        if (result.dag.reaches(c.t, c.s)) {
            result.skipped_cycles.push_back(Edge{nodes[c.s], nodes[c.t]});
            continue;
        }
        result.dag = result.dag.with_edge(c.s, c.t);
    }
    return result;
}

Dag average_graph(const ConfidenceMatrix& confidence, double lambda, const PriorKnowledge& knowledge) {
    return average_graph_detailed(confidence, lambda, knowledge).dag;
}

LearnResult learn_cbn(const Dataset& data, const PriorKnowledge& knowledge, const BootstrapConfig& cfg,
                      double lambda) {
    auto confidence = confidence_matrix(data, knowledge, cfg);
    auto average = average_graph_detailed(confidence, lambda, knowledge);
    auto em = em_fit(average.dag, data, cfg.sem.em);
    CausalBayesianNetwork network(average.dag, data.variables(), em.cpts);
    return LearnResult{std::move(network), std::move(confidence), std::move(average), std::move(em)};
}

}  // namespace cbn
