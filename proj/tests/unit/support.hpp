// Independent oracles and fixtures shared by the unit and acceptance tests.
#ifndef CBN_TEST_SUPPORT_HPP
#define CBN_TEST_SUPPORT_HPP

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/data.hpp"
#include "cbn/rng.hpp"

namespace testing {

using namespace cbn;

inline std::vector<Variable> make_variables(const std::vector<std::size_t>& cards) {
    std::vector<Variable> vars;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        Variable v{"X" + std::to_string(i), {}};
        for (std::size_t s = 0; s < cards[i]; ++s) v.states.push_back("s" + std::to_string(s));
        vars.push_back(v);
    }
    return vars;
}

inline std::vector<std::string> names_of(const std::vector<Variable>& vars) {
    std::vector<std::string> out;
    for (const auto& v : vars) out.push_back(v.name);
    return out;
}

/// Random distribution; entries bounded away from zero unless `sparse`.
inline std::vector<double> random_row(Rng& rng, std::size_t k, bool sparse = false) {
    std::vector<double> row(k);
    double sum = 0.0;
    for (auto& v : row) {
        v = -std::log(1.0 - rng.uniform()) + (sparse ? 0.0 : 0.05);
        if (sparse && rng.uniform() < 0.3) v = 0.0;
        sum += v;
    }
    if (sum == 0.0) {
        row[0] = 1.0;
        return row;
    }
    for (auto& v : row) v /= sum;
    return row;
}

/// CPTs for `dag` filled with random rows, parents in dag order.
inline std::vector<Cpt> random_cpts(Rng& rng, const Dag& dag, const std::vector<Variable>& vars, bool sparse = false) {
    std::vector<Cpt> cpts;
    for (std::size_t i = 0; i < dag.size(); ++i) {
        Cpt c{vars[i].name, {}, vars[i].cardinality(), {}};
        std::size_t rows = 1;
        for (auto p : dag.parent_indices(i)) {
            c.parents.push_back(vars[p].name);
            rows *= vars[p].cardinality();
        }
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = random_row(rng, c.cardinality, sparse);
            c.table.insert(c.table.end(), row.begin(), row.end());
        }
        cpts.push_back(std::move(c));
    }
    return cpts;
}

/// Random DAG: edges only from lower to higher position in a random
/// permutation, so any node order can carry parents "later" in the list.
inline Dag random_dag(Rng& rng, std::size_t n, double edge_prob, std::size_t max_parents = 3) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("X" + std::to_string(i));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    EdgeSet edges;
    std::vector<std::size_t> fan_in(n, 0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (fan_in[perm[b]] < max_parents && rng.uniform() < edge_prob) {
                edges.insert(Edge{names[perm[a]], names[perm[b]]});
                ++fan_in[perm[b]];
            }
    return Dag(names, edges);
}

inline CausalBayesianNetwork random_network(Rng& rng, std::size_t n, std::size_t min_card, std::size_t max_card,
                                            double edge_prob, bool sparse = false) {
    std::vector<std::size_t> cards(n);
    for (auto& c : cards) c = min_card + rng.below(max_card - min_card + 1);
    auto vars = make_variables(cards);
    auto dag = random_dag(rng, n, edge_prob);
    auto cpts = random_cpts(rng, dag, vars, sparse);
    return CausalBayesianNetwork(dag, vars, cpts);
}

/// Calls fn(assignment) for every joint state (last variable fastest).
template <class Fn>
void for_each_assignment(const std::vector<Variable>& vars, Fn&& fn) {
    std::vector<int> a(vars.size(), 0);
    while (true) {
        fn(a);
        std::size_t i = vars.size();
        while (i > 0) {
            --i;
            if (++a[i] < static_cast<int>(vars[i].cardinality())) break;
            a[i] = 0;
            if (i == 0) return;
        }
        if (vars.empty()) return;
    }
}

/// Product of CPT entries computed directly from the tables, without any
/// library inference code.
inline double oracle_joint(const CausalBayesianNetwork& bn, const std::vector<int>& a) {
    double p = 1.0;
    for (std::size_t i = 0; i < bn.size(); ++i) {
        const auto& pa = bn.parent_indices(i);
        std::size_t row = 0;
        for (auto q : pa) row = row * bn.cardinality(q) + static_cast<std::size_t>(a[q]);
        p *= bn.cpts()[i].table[row * bn.cardinality(i) + static_cast<std::size_t>(a[i])];
    }
    return p;
}

/// P(target | evidence) by full-joint enumeration; empty when P(evidence) = 0.
inline std::vector<double> oracle_posterior(const CausalBayesianNetwork& bn, const std::vector<int>& evidence,
                                            std::size_t target) {
    std::vector<double> out(bn.cardinality(target), 0.0);
    for_each_assignment(bn.variables(), [&](const std::vector<int>& a) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (evidence[i] != kMissing && evidence[i] != a[i]) return;
        out[static_cast<std::size_t>(a[target])] += oracle_joint(bn, a);
    });
    double z = 0.0;
    for (double v : out) z += v;
    if (z == 0.0) return {};
    for (auto& v : out) v /= z;
    return out;
}

inline double oracle_evidence_probability(const CausalBayesianNetwork& bn, const std::vector<int>& evidence) {
    double z = 0.0;
    for_each_assignment(bn.variables(), [&](const std::vector<int>& a) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (evidence[i] != kMissing && evidence[i] != a[i]) return;
        z += oracle_joint(bn, a);
    });
    return z;
}

/// Strongly dependent binary chain X0 -> X1 -> ... with named nodes.
inline CausalBayesianNetwork chain_network(const std::vector<std::string>& names, double root_p = 0.5,
                                           double stay = 0.9) {
    std::vector<Variable> vars;
    EdgeSet edges;
    std::vector<Cpt> cpts;
    for (std::size_t i = 0; i < names.size(); ++i) {
        vars.push_back(Variable{names[i], {"0", "1"}});
        if (i == 0) {
            cpts.push_back(Cpt{names[i], {}, 2, {1.0 - root_p, root_p}});
        } else {
            edges.insert(Edge{names[i - 1], names[i]});
            cpts.push_back(Cpt{names[i], {names[i - 1]}, 2, {stay, 1.0 - stay, 1.0 - stay, stay}});
        }
    }
    return CausalBayesianNetwork(Dag(names, edges), vars, cpts);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("cbn-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing

#endif  // CBN_TEST_SUPPORT_HPP
