#include "cbn/structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "cbn/error.hpp"

namespace cbn {

CompletedData CompletedData::from_complete(const Dataset& data) {
    if (!data.complete()) throw ValidationError("from_complete requires a complete dataset");
    CompletedData out;
    out.variables_ = data.variables();
    for (const auto& g : group_rows(data)) {
        out.rows_.insert(out.rows_.end(), g.cells.begin(), g.cells.end());
        out.weights_.push_back(static_cast<double>(g.count));
    }
    out.records_ = static_cast<double>(data.rows());
    return out;
}

CompletedData CompletedData::from_network(const CausalBayesianNetwork& bn, const Dataset& data) {
    require_same_schema(bn.variables(), data.variables());
    CompletedData out;
    out.variables_ = data.variables();
    std::map<std::vector<int>, double> merged;
    for (const auto& g : group_rows(data)) {
        const double w = static_cast<double>(g.count);
        auto completions = enumerate_completions(bn, g.cells, kEnumerationLimit);
        if (completions) {
            if (completions->evidence_probability <= 0.0) {
                throw ZeroProbabilityEvidence("record has probability zero under the fitted network", g.first_row);
            }
            std::vector<int> full = g.cells;
            const auto& missing = completions->missing;
            for (std::size_t c = 0; c < completions->count(); ++c) {
                for (std::size_t m = 0; m < missing.size(); ++m)
                    full[missing[m]] = completions->states[c * missing.size() + m];
                merged[full] += w * completions->weights[c];
            }
            continue;
        }
        Factorized f;
        f.cells = g.cells;
        f.weight = w;
        f.marginals.resize(g.cells.size());
        for (std::size_t c = 0; c < g.cells.size(); ++c) {
            if (g.cells[c] != kMissing) continue;
            try {
                f.marginals[c] = posterior(bn, g.cells, c);
            } catch (const ZeroProbabilityEvidence&) {
                throw ZeroProbabilityEvidence("record has probability zero under the fitted network", g.first_row);
            }
        }
        out.factorized_.push_back(std::move(f));
    }
    for (const auto& [row, w] : merged) {
        out.rows_.insert(out.rows_.end(), row.begin(), row.end());
        out.weights_.push_back(w);
    }
    out.records_ = static_cast<double>(data.rows());
    return out;
}

std::vector<std::string> CompletedData::names() const {
    std::vector<std::string> out;
    for (const auto& v : variables_) out.push_back(v.name);
    return out;
}

std::vector<double> CompletedData::family_counts(std::size_t child, std::span<const std::size_t> parents) const {
    const std::size_t card = variables_[child].cardinality();
    std::size_t rows = 1;
    for (auto p : parents) rows *= variables_[p].cardinality();
    std::vector<double> counts(rows * card, 0.0);
    const std::size_t width = variables_.size();

    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const int* row = rows_.data() + i * width;
        std::size_t r = 0;
        for (auto p : parents) r = r * variables_[p].cardinality() + static_cast<std::size_t>(row[p]);
        counts[r * card + static_cast<std::size_t>(row[child])] += weights_[i];
    }

    for (const auto& f : factorized_) {
        std::vector<std::size_t> family(parents.begin(), parents.end());
        family.push_back(child);
        std::vector<int> state(family.size());
        std::vector<std::size_t> free;
        for (std::size_t j = 0; j < family.size(); ++j) {
            state[j] = f.cells[family[j]];
            if (state[j] == kMissing) {
                free.push_back(j);
                state[j] = 0;
            }
        }
        while (true) {
            double w = f.weight;
            for (auto j : free) w *= f.marginals[family[j]][static_cast<std::size_t>(state[j])];
            std::size_t idx = 0;
            for (std::size_t j = 0; j < family.size(); ++j)
                idx = idx * variables_[family[j]].cardinality() + static_cast<std::size_t>(state[j]);
            counts[idx] += w;
            std::size_t d = free.size();
            for (; d-- > 0;) {
                const auto j = free[d];
                if (static_cast<std::size_t>(++state[j]) < variables_[family[j]].cardinality()) break;
                state[j] = 0;
            }
            if (d == static_cast<std::size_t>(-1)) break;
        }
    }
    return counts;
}

void SemConfig::validate() const {
    em.validate();
    if (max_sem_iterations < 1) throw ValidationError("max_sem_iterations must be at least 1");
    if (!(score.ess >= 0.0)) throw ValidationError("score ess must be nonnegative");
}

double family_score_from_counts(std::span<const double> counts, std::size_t cardinality, const ScoreConfig& score,
                                double n_records) {
    if (!(n_records > 0.0)) throw ValidationError("BIC needs a positive record count");
    const std::size_t rows = counts.size() / cardinality;
    const double alpha = score.ess / static_cast<double>(counts.size());
    const double row_alpha = score.ess / static_cast<double>(rows);
    double ll = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double n_row = 0.0;
        for (std::size_t k = 0; k < cardinality; ++k) n_row += counts[r * cardinality + k];
        if (n_row <= 0.0) continue;
        for (std::size_t k = 0; k < cardinality; ++k) {
            const double n = counts[r * cardinality + k];
            if (n > 0.0) ll += n * std::log((n + alpha) / (n_row + row_alpha));
        }
    }
    const double parameters = static_cast<double>((cardinality - 1) * rows);
    return ll - 0.5 * std::log(n_records) * parameters;
}

double family_score(std::size_t child, std::span<const std::size_t> parents, const CompletedData& data,
                    const ScoreConfig& score, double n_records) {
    if (child >= data.variables().size()) throw ValidationError("child index out of range");
    for (auto p : parents) {
        if (p >= data.variables().size()) throw ValidationError("parent index out of range");
        if (p == child) throw ValidationError("a node cannot be its own parent");
    }
    const auto counts = data.family_counts(child, parents);
    return family_score_from_counts(counts, data.variables()[child].cardinality(), score, n_records);
}

double family_score(const std::string& child, const std::vector<std::string>& parents, const CompletedData& data,
                    const ScoreConfig& score, double n_records) {
    auto index = [&](const std::string& name) {
        const auto& vars = data.variables();
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i].name == name) return i;
        throw UnknownNode(name);
    };
    std::vector<std::size_t> pa;
    for (const auto& p : parents) pa.push_back(index(p));
    std::sort(pa.begin(), pa.end());
    return family_score(index(child), pa, data, score, n_records);
}

double total_score(const Dag& dag, const CompletedData& data, const ScoreConfig& score) {
    double s = 0.0;
    for (std::size_t i = 0; i < dag.size(); ++i) s += family_score(i, dag.parent_indices(i), data, score, data.records());
    return s;
}

namespace {

constexpr double kMinImprovement = 1e-8;

class ScoreCache {
public:
    ScoreCache(const CompletedData& data, const ScoreConfig& score) : data_(data), score_(score) {}

    double operator()(std::size_t child, std::uint64_t parent_mask) {
        const Key key{child, parent_mask};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        std::vector<std::size_t> parents;
        for (std::size_t p = 0; p < 64; ++p)
            if (parent_mask & (std::uint64_t{1} << p)) parents.push_back(p);
        const double s = family_score(child, parents, data_, score_, data_.records());
        cache_.emplace(key, s);
        return s;
    }

private:
    struct Key {
        std::size_t child;
        std::uint64_t mask;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            return std::hash<std::uint64_t>()(k.mask * 0x9E3779B97F4A7C15ull ^ k.child);
        }
    };
    const CompletedData& data_;
    const ScoreConfig& score_;
    std::unordered_map<Key, double, KeyHash> cache_;
};

// Adjacency as parent bitmasks; small graphs only.
struct Graph {
    std::size_t n;
    std::vector<std::uint64_t> parents;

    bool has(std::size_t s, std::size_t t) const { return (parents[t] >> s) & 1u; }

    // Path from `from` to `to` avoiding the single edge (skip_s, skip_t).
    bool reaches(std::size_t from, std::size_t to, std::size_t skip_s = SIZE_MAX, std::size_t skip_t = SIZE_MAX) const {
        std::vector<unsigned char> seen(n, 0);
        std::vector<std::size_t> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            if (v == to) return true;
            for (std::size_t w = 0; w < n; ++w) {
                if (seen[w] || !has(v, w) || (v == skip_s && w == skip_t)) continue;
                seen[w] = 1;
                stack.push_back(w);
            }
        }
        return false;
    }
};

}  // namespace

HillClimbResult hill_climb_detailed(const CompletedData& data, const PriorKnowledge& knowledge,
                                    const ScoreConfig& score, const Dag& start) {
    const auto nodes = data.names();
    if (start.nodes() != nodes) throw ValidationError("start graph nodes do not match the data columns");
    if (nodes.size() > 64) throw ValidationError("hill climbing supports at most 64 variables");
    const KnowledgeMask mask(knowledge, nodes);
    // Infeasible knowledge (cyclic required edges) fails here.
    (void)required_graph(nodes, knowledge);
    if (!satisfies(start, knowledge)) throw ConstraintViolated("start graph does not satisfy the prior knowledge");

    const std::size_t n = nodes.size();
    Graph g{n, std::vector<std::uint64_t>(n, 0)};
    for (auto [s, t] : start.edge_indices()) g.parents[t] |= std::uint64_t{1} << s;

    ScoreCache cache(data, score);
    std::vector<double> current(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += current[i] = cache(i, g.parents[i]);

    HillClimbResult result;
    result.start_score = total;
    while (true) {
        double best = kMinImprovement;
        MoveKind best_kind = MoveKind::Add;
        std::size_t best_s = 0;
        std::size_t best_t = 0;
        bool found = false;
        auto consider = [&](MoveKind kind, std::size_t s, std::size_t t, double delta) {
            if (delta > best) {
                best = delta;
                best_kind = kind;
                best_s = s;
                best_t = t;
                found = true;
            }
        };

        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t t = 0; t < n; ++t) {
                if (s == t || g.has(s, t) || mask.forbidden(s, t)) continue;
                if (g.reaches(t, s)) continue;
                const auto bit = std::uint64_t{1} << s;
                consider(MoveKind::Add, s, t, cache(t, g.parents[t] | bit) - current[t]);
            }
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t t = 0; t < n; ++t) {
                if (!g.has(s, t) || mask.required(s, t)) continue;
                const auto bit = std::uint64_t{1} << s;
                consider(MoveKind::Delete, s, t, cache(t, g.parents[t] & ~bit) - current[t]);
            }
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t t = 0; t < n; ++t) {
                if (!g.has(s, t) || mask.required(s, t) || mask.forbidden(t, s)) continue;
                if (g.reaches(s, t, s, t)) continue;
                const auto sbit = std::uint64_t{1} << s;
                const auto tbit = std::uint64_t{1} << t;
                const double delta = (cache(t, g.parents[t] & ~sbit) - current[t]) +
                                     (cache(s, g.parents[s] | tbit) - current[s]);
                consider(MoveKind::Reverse, s, t, delta);
            }

        if (!found) break;
        const auto sbit = std::uint64_t{1} << best_s;
        const auto tbit = std::uint64_t{1} << best_t;
        switch (best_kind) {
            case MoveKind::Add: g.parents[best_t] |= sbit; break;
            case MoveKind::Delete: g.parents[best_t] &= ~sbit; break;
            case MoveKind::Reverse:
                g.parents[best_t] &= ~sbit;
                g.parents[best_s] |= tbit;
                break;
        }
        current[best_t] = cache(best_t, g.parents[best_t]);
        current[best_s] = cache(best_s, g.parents[best_s]);
        ++result.moves;
    }

    EdgeSet edges;
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t s = 0; s < n; ++s)
            if (g.has(s, t)) edges.insert(Edge{nodes[s], nodes[t]});
    result.dag = Dag(nodes, edges);
    result.score = 0.0;
    for (std::size_t i = 0; i < n; ++i) result.score += current[i];
    return result;
}

Dag hill_climb(const CompletedData& data, const PriorKnowledge& knowledge, const ScoreConfig& score,
               const Dag& start) {
    return hill_climb_detailed(data, knowledge, score, start).dag;
}

SemResult structural_em_detailed(const Dataset& data, const PriorKnowledge& knowledge, const SemConfig& cfg) {
    cfg.validate();
    if (data.rows() == 0) throw ValidationError("structural EM needs a nonempty dataset");
    const auto nodes = data.names();
    SemResult result;
    result.dag = required_graph(nodes, knowledge);

    const bool complete = data.complete();
    CompletedData completed;
    if (complete) completed = CompletedData::from_complete(data);

    for (std::size_t it = 1; it <= cfg.max_sem_iterations; ++it) {
        if (!complete) {
            const auto em = em_fit(result.dag, data, cfg.em);
            const CausalBayesianNetwork bn(result.dag, data.variables(), em.cpts);
            completed = CompletedData::from_network(bn, data);
        }
        Dag next = hill_climb(completed, knowledge, cfg.score, result.dag);
        result.history.push_back(next);
        result.iterations = it;
        if (next == result.dag) {
            result.converged = true;
            break;
        }
        result.dag = std::move(next);
    }
    return result;
}

Dag structural_em(const Dataset& data, const PriorKnowledge& knowledge, const SemConfig& cfg) {
    return structural_em_detailed(data, knowledge, cfg).dag;
}

}  // namespace cbn
