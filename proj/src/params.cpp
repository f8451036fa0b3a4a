#include "cbn/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbn/error.hpp"
#include "cbn/rng.hpp"

namespace cbn {

double SufficientStatistics::total(std::size_t node) const {
    double s = 0.0;
    for (double c : families[node].counts) s += c;
    return s;
}

void EmConfig::validate() const {
    if (max_iterations < 1) throw ValidationError("EM max_iterations must be at least 1");
    if (!(tolerance > 0.0)) throw ValidationError("EM tolerance must be positive");
    if (!(ess >= 0.0)) throw ValidationError("equivalent sample size must be nonnegative");
}

namespace {

SufficientStatistics empty_statistics(const Dag& dag, const std::vector<Variable>& variables) {
    SufficientStatistics stats;
    stats.families.resize(dag.size());
    for (std::size_t i = 0; i < dag.size(); ++i) {
        auto& f = stats.families[i];
        f.child = i;
        f.parents = dag.parent_indices(i);
        f.cardinality = variables[i].cardinality();
        std::size_t rows = 1;
        for (auto p : f.parents) rows *= variables[p].cardinality();
        f.counts.assign(rows * f.cardinality, 0.0);
    }
    return stats;
}

std::size_t family_index(const FamilyCounts& f, const std::vector<Variable>& variables, std::span<const int> row) {
    std::size_t r = 0;
    for (auto p : f.parents) r = r * variables[p].cardinality() + static_cast<std::size_t>(row[p]);
    return r * f.cardinality + static_cast<std::size_t>(row[f.child]);
}

void check_dag_schema(const Dag& dag, const std::vector<Variable>& variables) {
    if (dag.size() != variables.size()) throw SchemaError("graph and dataset have different variable counts");
    for (std::size_t i = 0; i < dag.size(); ++i) {
        if (dag.nodes()[i] != variables[i].name) {
            throw SchemaError("graph node '" + dag.nodes()[i] + "' does not match column '" + variables[i].name + "'");
        }
    }
}

}  // namespace

SufficientStatistics tabulate(const Dag& dag, const Dataset& data) {
    check_dag_schema(dag, data.variables());
    if (!data.complete()) throw ValidationError("tabulate requires a complete dataset");
    auto stats = empty_statistics(dag, data.variables());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto row = data.row(r);
        for (auto& f : stats.families) f.counts[family_index(f, data.variables(), row)] += 1.0;
    }
    stats.records = static_cast<double>(data.rows());
    return stats;
}

std::vector<Cpt> fit_from_counts(const Dag& dag, const std::vector<Variable>& variables,
                                 const SufficientStatistics& stats, double ess) {
    if (!(ess >= 0.0)) throw ValidationError("equivalent sample size must be nonnegative");
    check_dag_schema(dag, variables);
    if (stats.families.size() != dag.size()) throw SchemaError("statistics do not match the graph");
    std::vector<Cpt> out;
    out.reserve(dag.size());
    for (std::size_t i = 0; i < dag.size(); ++i) {
        const auto& f = stats.families[i];
        Cpt cpt;
        cpt.child = dag.nodes()[i];
        for (auto p : f.parents) cpt.parents.push_back(dag.nodes()[p]);
        cpt.cardinality = f.cardinality;
        const std::size_t card = f.cardinality;
        const std::size_t rows = f.counts.size() / card;
        const double alpha = ess / static_cast<double>(rows * card);
        const double row_alpha = ess / static_cast<double>(rows);
        cpt.table.resize(f.counts.size());
        for (std::size_t r = 0; r < rows; ++r) {
            double n_row = 0.0;
            for (std::size_t k = 0; k < card; ++k) n_row += f.counts[r * card + k];
            const double denom = n_row + row_alpha;
            for (std::size_t k = 0; k < card; ++k) {
                cpt.table[r * card + k] =
                    denom > 0.0 ? (f.counts[r * card + k] + alpha) / denom : 1.0 / static_cast<double>(card);
            }
        }
        out.push_back(std::move(cpt));
    }
    return out;
}

std::vector<Cpt> mle_fit(const Dag& dag, const Dataset& data, double ess) {
    return fit_from_counts(dag, data.variables(), tabulate(dag, data), ess);
}

namespace {

// One pass over distinct records: accumulates expected counts (when `stats`
// is given) and returns the observed-data log-likelihood.
double e_step(const CausalBayesianNetwork& bn, const Dataset& data, SufficientStatistics* stats) {
    require_same_schema(bn.variables(), data.variables());
    const auto& variables = data.variables();
    double ll = 0.0;
    std::vector<int> full(bn.size());
    for (const auto& group : group_rows(data)) {
        const double w = static_cast<double>(group.count);
        auto completions = enumerate_completions(bn, group.cells, kEnumerationLimit);
        if (completions) {
            if (completions->evidence_probability <= 0.0) {
                if (stats) {
                    throw ZeroProbabilityEvidence("record has probability zero under the current parameters",
                                                  group.first_row);
                }
                return -std::numeric_limits<double>::infinity();
            }
            ll += w * std::log(completions->evidence_probability);
            if (!stats) continue;
            const auto& missing = completions->missing;
            std::copy(group.cells.begin(), group.cells.end(), full.begin());
            for (std::size_t c = 0; c < completions->count(); ++c) {
                for (std::size_t m = 0; m < missing.size(); ++m) {
                    full[missing[m]] = completions->states[c * missing.size() + m];
                }
                const double q = w * completions->weights[c];
                for (auto& f : stats->families) f.counts[family_index(f, variables, full)] += q;
            }
            continue;
        }

        // Too many joint completions: exact per-family elimination.
        const double pe = evidence_probability(bn, group.cells);
        if (pe <= 0.0) {
            if (stats) {
                throw ZeroProbabilityEvidence("record has probability zero under the current parameters",
                                              group.first_row);
            }
            return -std::numeric_limits<double>::infinity();
        }
        ll += w * std::log(pe);
        if (!stats) continue;
        for (auto& f : stats->families) {
            std::vector<std::size_t> query;
            for (auto p : f.parents)
                if (group.cells[p] == kMissing) query.push_back(p);
            if (group.cells[f.child] == kMissing) query.push_back(f.child);
            std::sort(query.begin(), query.end());
            if (query.empty()) {
                f.counts[family_index(f, variables, group.cells)] += w;
                continue;
            }
            const Factor joint = joint_posterior(bn, group.cells, query);
            std::copy(group.cells.begin(), group.cells.end(), full.begin());
            std::vector<int> state(query.size(), 0);
            for (std::size_t k = 0; k < joint.values.size(); ++k) {
                for (std::size_t q = 0; q < query.size(); ++q) full[query[q]] = state[q];
                f.counts[family_index(f, variables, full)] += w * joint.values[k];
                for (std::size_t d = query.size(); d-- > 0;) {
                    if (static_cast<std::size_t>(++state[d]) < joint.cards[d]) break;
                    state[d] = 0;
                }
            }
        }
    }
    if (stats) stats->records = static_cast<double>(data.rows());
    return ll;
}

}  // namespace

SufficientStatistics expected_counts(const CausalBayesianNetwork& bn, const Dataset& data) {
    auto stats = empty_statistics(bn.dag(), bn.variables());
    e_step(bn, data, &stats);
    return stats;
}

double observed_log_likelihood(const CausalBayesianNetwork& bn, const Dataset& data) {
    return e_step(bn, data, nullptr);
}

double log_prior(const std::vector<Cpt>& cpts, double ess) {
    if (ess == 0.0) return 0.0;
    double out = 0.0;
    for (const auto& cpt : cpts) {
        const double alpha = ess / static_cast<double>(cpt.table.size());
        for (double p : cpt.table) out += alpha * std::log(p);
    }
    return out;
}

std::vector<Cpt> initial_cpts(const Dag& dag, const std::vector<Variable>& variables, const EmConfig& cfg) {
    auto cpts = uniform_cpts(dag, variables);
    if (cfg.init == EmInit::Uniform) return cpts;
    Rng rng(cfg.seed);
    for (auto& cpt : cpts) {
        for (std::size_t r = 0; r < cpt.rows(); ++r) {
            double sum = 0.0;
            for (std::size_t k = 0; k < cpt.cardinality; ++k) {
                // Exponential draws give a flat Dirichlet row; the offset keeps
                // every entry strictly positive.
                const double x = -std::log(1.0 - rng.uniform()) + 1e-3;
                cpt.table[r * cpt.cardinality + k] = x;
                sum += x;
            }
            for (std::size_t k = 0; k < cpt.cardinality; ++k) cpt.table[r * cpt.cardinality + k] /= sum;
        }
    }
    return cpts;
}

EmResult em_fit(const Dag& dag, const Dataset& data, const EmConfig& cfg) {
    cfg.validate();
    check_dag_schema(dag, data.variables());
    if (data.rows() == 0) throw ValidationError("EM needs a nonempty dataset");
    const auto& variables = data.variables();
    EmResult result;

    if (data.complete()) {
        result.cpts = mle_fit(dag, data, cfg.ess);
        const CausalBayesianNetwork bn(dag, variables, result.cpts);
        const double ll = log_likelihood(bn, data);
        result.log_likelihood.push_back(ll);
        result.trace.push_back(ll + log_prior(result.cpts, cfg.ess));
        result.iterations = 1;
        result.converged = true;
        return result;
    }

    result.cpts = initial_cpts(dag, variables, cfg);
    auto stats = empty_statistics(dag, variables);
    double ll = e_step(CausalBayesianNetwork(dag, variables, result.cpts), data, &stats);
    result.log_likelihood.push_back(ll);
    result.trace.push_back(ll + log_prior(result.cpts, cfg.ess));

    for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
        result.cpts = fit_from_counts(dag, variables, stats, cfg.ess);
        stats = empty_statistics(dag, variables);
        ll = e_step(CausalBayesianNetwork(dag, variables, result.cpts), data, &stats);
        const double objective = ll + log_prior(result.cpts, cfg.ess);
        const double previous = result.trace.back();
        result.log_likelihood.push_back(ll);
        result.trace.push_back(objective);
        result.iterations = it;
        if (std::abs(objective - previous) <= cfg.tolerance * std::abs(previous)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace cbn
