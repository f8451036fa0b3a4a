#include "cbn/bn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "cbn/error.hpp"
#include "cbn/rng.hpp"

namespace cbn {

CausalBayesianNetwork::CausalBayesianNetwork(Dag dag, std::vector<Variable> variables, std::vector<Cpt> cpts)
    : dag_(std::move(dag)), variables_(std::move(variables)), cpts_(std::move(cpts)) {
    validate_variables(variables_);
    if (variables_.size() != dag_.size()) throw SchemaError("variable list and graph node list differ in size");
    if (cpts_.size() != dag_.size()) throw SchemaError("expected one CPT per node");
    parents_.resize(dag_.size());
    for (std::size_t i = 0; i < dag_.size(); ++i) {
        const auto& name = dag_.nodes()[i];
        if (variables_[i].name != name) {
            throw SchemaError("variable '" + variables_[i].name + "' does not match graph node '" + name + "'");
        }
        parents_[i] = dag_.parent_indices(i);
        const Cpt& cpt = cpts_[i];
        if (cpt.child != name) throw SchemaError("CPT for '" + cpt.child + "' found where '" + name + "' expected");
        std::vector<std::string> expected;
        std::size_t rows = 1;
        for (auto p : parents_[i]) {
            expected.push_back(dag_.nodes()[p]);
            rows *= variables_[p].cardinality();
        }
        if (cpt.parents != expected) throw SchemaError("CPT parents of '" + name + "' differ from graph parents");
        if (cpt.cardinality != variables_[i].cardinality()) {
            throw SchemaError("CPT cardinality of '" + name + "' differs from its variable");
        }
        if (cpt.table.size() != rows * cpt.cardinality) {
            throw SchemaError("CPT of '" + name + "' has " + std::to_string(cpt.table.size()) + " entries, expected " +
                              std::to_string(rows * cpt.cardinality));
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (double p : cpt.row(r)) {
                if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("CPT entry of '" + name + "' outside [0, 1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw ValidationError("CPT row " + std::to_string(r) + " of '" + name + "' does not sum to 1");
            }
        }
    }
}

std::size_t CausalBayesianNetwork::row_index(std::size_t node, std::span<const int> assignment) const {
    std::size_t row = 0;
    for (auto p : parents_[node]) row = row * variables_[p].cardinality() + static_cast<std::size_t>(assignment[p]);
    return row;
}

Factor CausalBayesianNetwork::cpt_factor(std::size_t node) const {
    Factor f;
    f.scope = parents_[node];
    f.scope.insert(std::lower_bound(f.scope.begin(), f.scope.end(), node), node);
    for (auto v : f.scope) f.cards.push_back(variables_[v].cardinality());
    const auto total_size = cpts_[node].table.size();
    f.values.resize(total_size);

    std::vector<int> assignment(size(), 0);
    for (std::size_t k = 0; k < total_size; ++k) {
        f.values[k] = probability(node, assignment);
        for (std::size_t d = f.scope.size(); d-- > 0;) {
            const auto v = f.scope[d];
            if (static_cast<std::size_t>(++assignment[v]) < f.cards[d]) break;
            assignment[v] = 0;
        }
    }
    return f;
}

std::vector<int> CausalBayesianNetwork::to_indices(const StateMap& states) const {
    std::vector<int> out(size(), kMissing);
    for (const auto& [name, label] : states) {
        const auto i = index_of(name);
        out[i] = variables_[i].state_index(label);
    }
    return out;
}

double joint_probability(const CausalBayesianNetwork& bn, std::span<const int> assignment) {
    if (assignment.size() != bn.size()) throw ValidationError("assignment does not cover every variable");
    double p = 1.0;
    for (std::size_t i = 0; i < bn.size(); ++i) {
        if (assignment[i] < 0 || static_cast<std::size_t>(assignment[i]) >= bn.cardinality(i)) {
            throw ValidationError("invalid or missing state for '" + bn.variables()[i].name + "'");
        }
    }
    for (std::size_t i = 0; i < bn.size(); ++i) p *= bn.probability(i, assignment);
    return p;
}

double joint_probability(const CausalBayesianNetwork& bn, const StateMap& assignment) {
    return joint_probability(bn, bn.to_indices(assignment));
}

namespace {

// Ancestral closure of the seed set; only these CPTs influence the query.
std::vector<unsigned char> relevant_nodes(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                                          std::span<const std::size_t> query) {
    std::vector<unsigned char> keep(bn.size(), 0);
    std::vector<std::size_t> stack(query.begin(), query.end());
    for (std::size_t i = 0; i < bn.size(); ++i)
        if (evidence[i] != kMissing) stack.push_back(i);
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        if (keep[v]) continue;
        keep[v] = 1;
        for (auto p : bn.parent_indices(v)) stack.push_back(p);
    }
    return keep;
}

void check_evidence(const CausalBayesianNetwork& bn, std::span<const int> evidence) {
    if (evidence.size() != bn.size()) throw ValidationError("evidence vector has the wrong length");
    for (std::size_t i = 0; i < bn.size(); ++i) {
        if (evidence[i] != kMissing && (evidence[i] < 0 || static_cast<std::size_t>(evidence[i]) >= bn.cardinality(i))) {
            throw ValidationError("invalid evidence state for '" + bn.variables()[i].name + "'");
        }
    }
}

std::vector<Factor> reduced_factors(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                                    const std::vector<unsigned char>& relevant) {
    std::vector<Factor> factors;
    for (std::size_t i = 0; i < bn.size(); ++i)
        if (relevant[i]) factors.push_back(reduce(bn.cpt_factor(i), evidence));
    return factors;
}

void eliminate(std::vector<Factor>& factors, std::size_t var) {
    Factor product = Factor::constant(1.0);
    std::vector<Factor> rest;
    bool touched = false;
    for (auto& f : factors) {
        if (f.contains(var)) {
            product = multiply(product, f);
            touched = true;
        } else {
            rest.push_back(std::move(f));
        }
    }
    factors = std::move(rest);
    if (touched) factors.push_back(sum_out(product, var));
}

Factor multiply_all(const std::vector<Factor>& factors) {
    Factor out = Factor::constant(1.0);
    for (const auto& f : factors) out = multiply(out, f);
    return out;
}

std::vector<std::size_t> min_fill(const std::vector<Factor>& factors, std::vector<std::size_t> candidates,
                                  std::size_t n) {
    std::vector<std::set<std::size_t>> adj(n);
    for (const auto& f : factors)
        for (auto a : f.scope)
            for (auto b : f.scope)
                if (a != b) adj[a].insert(b);
    std::vector<std::size_t> order;
    while (!candidates.empty()) {
        std::size_t best_pos = 0;
        std::size_t best_fill = std::numeric_limits<std::size_t>::max();
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const auto v = candidates[c];
            std::size_t fill = 0;
            for (auto a = adj[v].begin(); a != adj[v].end(); ++a)
                for (auto b = std::next(a); b != adj[v].end(); ++b)
                    if (!adj[*a].contains(*b)) ++fill;
            if (fill < best_fill) {
                best_fill = fill;
                best_pos = c;
            }
        }
        const auto v = candidates[best_pos];
        for (auto a : adj[v])
            for (auto b : adj[v])
                if (a != b) adj[a].insert(b);
        for (auto a : adj[v]) adj[a].erase(v);
        adj[v].clear();
        order.push_back(v);
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    return order;
}

std::vector<std::size_t> elimination_candidates(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                                                std::span<const std::size_t> query,
                                                const std::vector<unsigned char>& relevant) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bn.size(); ++i) {
        if (!relevant[i] || evidence[i] != kMissing) continue;
        if (std::find(query.begin(), query.end(), i) != query.end()) continue;
        out.push_back(i);
    }
    return out;
}

// Constant factors (components not connected to the query) only rescale the
// result; they are checked for zero but left out of the product so that the
// posterior does not pick up rounding noise from unrelated evidence.
Factor normalized(const std::vector<Factor>& factors) {
    Factor result = Factor::constant(1.0);
    for (const auto& f : factors) {
        if (!f.scope.empty()) {
            result = multiply(result, f);
        } else if (!(f.values[0] > 0.0)) {
            throw ZeroProbabilityEvidence("evidence has probability zero under the network");
        }
    }
    const double z = total(result);
    if (!(z > 0.0)) throw ZeroProbabilityEvidence("evidence has probability zero under the network");
    for (auto& v : result.values) v /= z;
    return result;
}

void check_query(const CausalBayesianNetwork& bn, std::span<const int> evidence, std::span<const std::size_t> query) {
    for (auto q : query) {
        if (q >= bn.size()) throw ValidationError("query variable out of range");
        if (evidence[q] != kMissing) {
            throw ValidationError("query variable '" + bn.variables()[q].name + "' also carries evidence");
        }
    }
}

}  // namespace

std::vector<std::size_t> min_fill_order(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                                        std::span<const std::size_t> query) {
    check_evidence(bn, evidence);
    const auto relevant = relevant_nodes(bn, evidence, query);
    const auto factors = reduced_factors(bn, evidence, relevant);
    return min_fill(factors, elimination_candidates(bn, evidence, query, relevant), bn.size());
}

Factor joint_posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence,
                       std::span<const std::size_t> query) {
    check_evidence(bn, evidence);
    check_query(bn, evidence, query);
    const auto relevant = relevant_nodes(bn, evidence, query);
    auto factors = reduced_factors(bn, evidence, relevant);
    for (auto v : min_fill(factors, elimination_candidates(bn, evidence, query, relevant), bn.size())) {
        eliminate(factors, v);
    }
    return normalized(factors);
}

std::vector<double> posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence, std::size_t target) {
    const std::size_t query[] = {target};
    return joint_posterior(bn, evidence, query).values;
}

std::vector<double> posterior(const CausalBayesianNetwork& bn, std::span<const int> evidence, std::size_t target,
                              std::span<const std::size_t> elimination_order) {
    check_evidence(bn, evidence);
    const std::size_t query[] = {target};
    check_query(bn, evidence, query);
    const auto relevant = relevant_nodes(bn, evidence, query);
    auto factors = reduced_factors(bn, evidence, relevant);
    const auto needed = elimination_candidates(bn, evidence, query, relevant);
    for (auto v : elimination_order) {
        if (std::find(needed.begin(), needed.end(), v) != needed.end()) eliminate(factors, v);
    }
    for (const auto& f : factors)
        for (auto v : f.scope)
            if (v != target) throw ValidationError("elimination order does not cover every hidden variable");
    return normalized(factors).values;
}

std::vector<double> posterior(const CausalBayesianNetwork& bn, const StateMap& evidence, const std::string& target) {
    return posterior(bn, bn.to_indices(evidence), bn.index_of(target));
}

double evidence_probability(const CausalBayesianNetwork& bn, std::span<const int> evidence) {
    check_evidence(bn, evidence);
    const auto relevant = relevant_nodes(bn, evidence, {});
    auto factors = reduced_factors(bn, evidence, relevant);
    for (auto v : min_fill(factors, elimination_candidates(bn, evidence, {}, relevant), bn.size())) {
        eliminate(factors, v);
    }
    return total(multiply_all(factors));
}

Dataset sample(const CausalBayesianNetwork& bn, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw ValidationError("sample count must be positive");
    const auto order = topological_indices(bn.dag());
    Dataset out(bn.variables());
    Rng rng(seed);
    std::vector<int> record(bn.size(), 0);
    for (std::size_t r = 0; r < count; ++r) {
        for (auto v : order) {
            const auto& cpt = bn.cpts()[v];
            const auto row = cpt.row(bn.row_index(v, record));
            const double u = rng.uniform();
            double cumulative = 0.0;
            int chosen = -1;
            for (std::size_t s = 0; s < row.size(); ++s) {
                cumulative += row[s];
                if (u < cumulative) {
                    chosen = static_cast<int>(s);
                    break;
                }
            }
            if (chosen < 0) {
                // Rounding left u above the cumulative sum: take the last
                // state with positive mass.
                for (std::size_t s = row.size(); s-- > 0;)
                    if (row[s] > 0.0) {
                        chosen = static_cast<int>(s);
                        break;
                    }
            }
            record[v] = chosen;
        }
        out.add_row(record);
    }
    return out;
}

double log_likelihood(const CausalBayesianNetwork& bn, const Dataset& data) {
    require_same_schema(bn.variables(), data.variables());
    if (!data.complete()) throw ValidationError("log_likelihood requires a complete dataset");
    // Summed over distinct records weighted by multiplicity, so the result
    // does not depend on record order and scales exactly with duplication.
    double ll = 0.0;
    for (const auto& g : group_rows(data)) {
        double record_ll = 0.0;
        for (std::size_t i = 0; i < bn.size(); ++i) {
            const double p = bn.probability(i, g.cells);
            if (p <= 0.0) return -std::numeric_limits<double>::infinity();
            record_ll += std::log(p);
        }
        ll += static_cast<double>(g.count) * record_ll;
    }
    return ll;
}

std::vector<Cpt> uniform_cpts(const Dag& dag, const std::vector<Variable>& variables) {
    std::vector<Cpt> out;
    for (std::size_t i = 0; i < dag.size(); ++i) {
        Cpt cpt;
        cpt.child = dag.nodes()[i];
        cpt.cardinality = variables[i].cardinality();
        std::size_t rows = 1;
        for (auto p : dag.parent_indices(i)) {
            cpt.parents.push_back(dag.nodes()[p]);
            rows *= variables[p].cardinality();
        }
        cpt.table.assign(rows * cpt.cardinality, 1.0 / static_cast<double>(cpt.cardinality));
        out.push_back(std::move(cpt));
    }
    return out;
}

}  // namespace cbn

namespace cbn {

std::optional<Completions> enumerate_completions(const CausalBayesianNetwork& bn, std::span<const int> record,
                                                 std::size_t limit) {
    if (record.size() != bn.size()) throw ValidationError("record width does not match the network");
    Completions out;
    std::size_t combos = 1;
    for (std::size_t i = 0; i < bn.size(); ++i) {
        if (record[i] != kMissing) continue;
        out.missing.push_back(i);
        combos *= bn.cardinality(i);
        if (combos > limit) return std::nullopt;
    }

    std::vector<unsigned char> is_missing(bn.size(), 0);
    for (auto m : out.missing) is_missing[m] = 1;
    std::vector<int> assignment(record.begin(), record.end());
    for (auto m : out.missing) assignment[m] = 0;

    // Families without a missing member contribute a constant factor.
    std::vector<std::size_t> varying;
    double constant = 1.0;
    for (std::size_t i = 0; i < bn.size(); ++i) {
        bool touched = is_missing[i] != 0;
        for (auto p : bn.parent_indices(i)) touched = touched || is_missing[p] != 0;
        if (touched) {
            varying.push_back(i);
        } else {
            constant *= bn.probability(i, assignment);
        }
    }
    if (constant <= 0.0) return out;

    const std::size_t k = out.missing.size();
    out.states.reserve(combos * k);
    out.weights.reserve(combos);
    for (std::size_t c = 0; c < combos; ++c) {
        double p = constant;
        for (auto v : varying) p *= bn.probability(v, assignment);
        if (p > 0.0) {
            for (auto m : out.missing) out.states.push_back(assignment[m]);
            out.weights.push_back(p);
            out.evidence_probability += p;
        }
        for (std::size_t d = k; d-- > 0;) {
            const auto m = out.missing[d];
            if (static_cast<std::size_t>(++assignment[m]) < bn.cardinality(m)) break;
            assignment[m] = 0;
        }
    }
    if (out.evidence_probability > 0.0)
        for (auto& w : out.weights) w /= out.evidence_probability;
    return out;
}

}  // namespace cbn
