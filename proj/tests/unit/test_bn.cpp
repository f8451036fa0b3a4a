#include <cmath>
#include <numeric>

#include "cbn/bn.hpp"
#include "cbn/error.hpp"
#include "cbn/factor.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cbn;
using testing::oracle_posterior;

namespace {

CausalBayesianNetwork two_node(double pa1, double pb1_given_a1, double pb1_given_a0 = 0.5) {
    const std::vector<Variable> vars = {{"A", {"0", "1"}}, {"B", {"0", "1"}}};
    return CausalBayesianNetwork(Dag({"A", "B"}, {{"A", "B"}}), vars,
                                 {Cpt{"A", {}, 2, {1 - pa1, pa1}},
                                  Cpt{"B", {"A"}, 2, {1 - pb1_given_a0, pb1_given_a0, 1 - pb1_given_a1, pb1_given_a1}}});
}

}  // namespace

TEST_SUITE("bn") {
    TEST_CASE("factor multiply and sum_out against direct tables") {
        // f(A,B) and g(B,C) over binary/ternary variables.
        Factor f{{0, 1}, {2, 3}, {1, 2, 3, 4, 5, 6}};
        Factor g{{1, 2}, {3, 2}, {1, 0, 2, 1, 0, 3}};
        const auto h = multiply(f, g);
        CHECK(h.scope == std::vector<std::size_t>{0, 1, 2});
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 3; ++b)
                for (std::size_t c = 0; c < 2; ++c)
                    CHECK(h.values[(a * 3 + b) * 2 + c] == f.values[a * 3 + b] * g.values[b * 2 + c]);
        const auto s = sum_out(h, 1);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t c = 0; c < 2; ++c) {
                double expect = 0;
                for (std::size_t b = 0; b < 3; ++b) expect += h.values[(a * 3 + b) * 2 + c];
                CHECK(s.values[a * 2 + c] == doctest::Approx(expect));
            }
        CHECK(total(f) == 21.0);
    }

    TEST_CASE("joint_probability examples") {
        const std::vector<Variable> one = {{"X", {"0", "1"}}};
        const CausalBayesianNetwork single(Dag({"X"}), one, {Cpt{"X", {}, 2, {0.5, 0.5}}});
        CHECK(joint_probability(single, StateMap{{"X", "0"}}) == 0.5);
        const auto ab = two_node(0.3, 0.8);
        CHECK(joint_probability(ab, StateMap{{"A", "1"}, {"B", "1"}}) == doctest::Approx(0.24).epsilon(1e-12));
        CHECK_THROWS_AS(joint_probability(ab, StateMap{{"A", "1"}}), ValidationError);
        CHECK_THROWS_AS(joint_probability(ab, StateMap{{"A", "1"}, {"B", "7"}}), ValidationError);
    }

    TEST_CASE("joint sums to one over all assignments") {
        Rng rng(11);
        for (int t = 0; t < 50; ++t) {
            const auto bn = testing::random_network(rng, 4 + rng.below(5), 2, 3, 0.5);
            double sum = 0.0;
            testing::for_each_assignment(bn.variables(), [&](const std::vector<int>& a) {
                const double p = joint_probability(bn, a);
                CHECK(p == doctest::Approx(testing::oracle_joint(bn, a)).epsilon(1e-12));
                sum += p;
            });
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }

    TEST_CASE("CPT validation") {
        const std::vector<Variable> vars = {{"A", {"0", "1"}}, {"B", {"0", "1"}}};
        const Dag d({"A", "B"}, {{"A", "B"}});
        CHECK_THROWS_AS(CausalBayesianNetwork(d, vars, {Cpt{"A", {}, 2, {0.5, 0.6}}, Cpt{"B", {"A"}, 2, {1, 0, 0, 1}}}),
                        ValidationError);
        CHECK_THROWS_AS(CausalBayesianNetwork(d, vars, {Cpt{"A", {}, 2, {0.5, 0.5}}, Cpt{"B", {}, 2, {1, 0}}}),
                        ValidationError);
        CHECK_THROWS_AS(CausalBayesianNetwork(d, vars, {Cpt{"A", {}, 2, {1.5, -0.5}}, Cpt{"B", {"A"}, 2, {1, 0, 0, 1}}}),
                        ValidationError);
        CHECK_THROWS_AS(CausalBayesianNetwork(d, vars, {Cpt{"A", {}, 2, {0.5, 0.5}}, Cpt{"B", {"A"}, 2, {1, 0}}}),
                        ValidationError);
    }

    TEST_CASE("posterior with no evidence on a root equals its CPT") {
        const auto ab = two_node(0.3, 0.8);
        const auto p = posterior(ab, StateMap{}, "A");
        CHECK(p[0] == doctest::Approx(0.7));
        CHECK(p[1] == doctest::Approx(0.3));
        CHECK_THROWS_AS(posterior(ab, StateMap{{"A", "1"}}, "A"), ValidationError);
    }

    TEST_CASE("posterior matches enumeration on random 6-node ternary networks") {
        Rng rng(2024);
        for (int t = 0; t < 100; ++t) {
            const auto bn = testing::random_network(rng, 6, 3, 3, 0.45);
            std::vector<int> ev(6, kMissing);
            std::size_t a = rng.below(6), b = rng.below(6);
            ev[a] = static_cast<int>(rng.below(3));
            ev[b] = static_cast<int>(rng.below(3));
            std::size_t target = rng.below(6);
            while (ev[target] != kMissing) target = (target + 1) % 6;
            const auto expect = oracle_posterior(bn, ev, target);
            const auto got = posterior(bn, ev, target);
            REQUIRE(got.size() == expect.size());
            for (std::size_t s = 0; s < got.size(); ++s) CHECK(std::abs(got[s] - expect[s]) < 1e-9);
            CHECK(evidence_probability(bn, ev) ==
                  doctest::Approx(testing::oracle_evidence_probability(bn, ev)).epsilon(1e-9));
        }
    }

    TEST_CASE("posterior is independent of the elimination order") {
        Rng rng(99);
        for (int t = 0; t < 60; ++t) {
            const auto bn = testing::random_network(rng, 7, 2, 4, 0.4);
            std::vector<int> ev(7, kMissing);
            ev[rng.below(7)] = 0;
            std::size_t target = rng.below(7);
            while (ev[target] != kMissing) target = (target + 1) % 7;
            std::vector<std::size_t> order(7);
            std::iota(order.begin(), order.end(), 0);
            for (std::size_t i = 7; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            const auto a = posterior(bn, ev, target);
            const auto b = posterior(bn, ev, target, order);
            for (std::size_t s = 0; s < a.size(); ++s) CHECK(std::abs(a[s] - b[s]) < 1e-9);
        }
        const auto ab = two_node(0.3, 0.8);
        const std::vector<int> none = {kMissing, kMissing};
        const std::vector<std::size_t> empty_order;
        CHECK_THROWS_AS(posterior(ab, none, 1, empty_order), ValidationError);
    }

    TEST_CASE("zero-probability evidence is an explicit error") {
        const auto ab = two_node(0.0, 0.8);  // A never 1
        try {
            posterior(ab, StateMap{{"A", "1"}}, "B");
            FAIL("expected ZeroProbabilityEvidence");
        } catch (const ZeroProbabilityEvidence&) {
        }
        CHECK(evidence_probability(ab, std::vector<int>{1, kMissing}) == 0.0);
    }

    TEST_CASE("unrelated evidence does not perturb a posterior") {
        // Disconnected nodes: the target's posterior must equal its prior
        // bit for bit, whatever the other evidence is.
        const std::vector<Variable> vars = {{"A", {"0", "1"}}, {"B", {"0", "1", "2"}}, {"C", {"0", "1"}}};
        const CausalBayesianNetwork bn(Dag({"A", "B", "C"}), vars,
                                       {Cpt{"A", {}, 2, {0.3, 0.7}}, Cpt{"B", {}, 3, {0.1, 0.2, 0.7}},
                                        Cpt{"C", {}, 2, {0.123, 0.877}}});
        const auto prior = posterior(bn, std::vector<int>{kMissing, kMissing, kMissing}, 2);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 3; ++b) CHECK(posterior(bn, std::vector<int>{a, b, kMissing}, 2) == prior);
    }

    TEST_CASE("sampling") {
        const std::vector<Variable> vars = {{"A", {"0", "1"}}, {"B", {"0", "1"}}};
        const CausalBayesianNetwork det(Dag({"A", "B"}, {{"A", "B"}}), vars,
                                        {Cpt{"A", {}, 2, {0, 1}}, Cpt{"B", {"A"}, 2, {1, 0, 0, 1}}});
        const auto d = sample(det, 100, 3);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            CHECK(d.cell(r, 0) == 1);
            CHECK(d.cell(r, 1) == 1);
        }
        const auto ab = two_node(0.3, 0.8, 0.1);
        CHECK(sample(ab, 500, 42) == sample(ab, 500, 42));
        CHECK_FALSE(sample(ab, 500, 42) == sample(ab, 500, 43));

        const std::size_t n = 50000;
        const auto big = sample(ab, n, 5);
        CHECK(big.complete());
        double ones = 0, a1 = 0, b1_a1 = 0, a0 = 0, b1_a0 = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const bool a = big.cell(r, 0) == 1, b = big.cell(r, 1) == 1;
            ones += a;
            (a ? a1 : a0) += 1;
            if (a && b) b1_a1 += 1;
            if (!a && b) b1_a0 += 1;
        }
        CHECK(std::abs(ones / n - 0.3) <= 3 * std::sqrt(0.3 * 0.7 / n));
        CHECK(std::abs(b1_a1 / a1 - 0.8) <= 3 * std::sqrt(0.8 * 0.2 / a1));
        CHECK(std::abs(b1_a0 / a0 - 0.1) <= 3 * std::sqrt(0.1 * 0.9 / a0));
        CHECK_THROWS_AS(sample(ab, 0, 1), ValidationError);
    }

    TEST_CASE("log_likelihood") {
        const std::vector<Variable> one = {{"X", {"0", "1"}}};
        const CausalBayesianNetwork single(Dag({"X"}), one, {Cpt{"X", {}, 2, {0.5, 0.5}}});
        CHECK(log_likelihood(single, Dataset(one, {0})) == doctest::Approx(std::log(0.5)));

        Rng rng(3);
        const auto bn = testing::random_network(rng, 4, 2, 3, 0.5);
        const auto d = sample(bn, 20, 8);
        double expect = 0.0;
        for (std::size_t r = 0; r < d.rows(); ++r) {
            const std::vector<int> a(d.row(r).begin(), d.row(r).end());
            expect += std::log(testing::oracle_joint(bn, a));
        }
        CHECK(std::abs(log_likelihood(bn, d) - expect) < 1e-9);

        std::vector<int> doubled = d.cells();
        doubled.insert(doubled.end(), d.cells().begin(), d.cells().end());
        CHECK(log_likelihood(bn, Dataset(d.variables(), doubled)) == 2 * log_likelihood(bn, d));

        const auto ab = two_node(0.0, 0.8);
        CHECK(std::isinf(log_likelihood(ab, Dataset(ab.variables(), {1, 1}))));
        CHECK_THROWS_AS(log_likelihood(ab, Dataset(ab.variables(), {kMissing, 1})), ValidationError);
    }

    TEST_CASE("enumerate_completions returns normalized posteriors over missing cells") {
        Rng rng(5);
        for (int t = 0; t < 30; ++t) {
            const auto bn = testing::random_network(rng, 5, 2, 3, 0.5);
            std::vector<int> rec(5);
            for (std::size_t i = 0; i < 5; ++i)
                rec[i] = rng.uniform() < 0.5 ? kMissing : static_cast<int>(rng.below(bn.cardinality(i)));
            const auto c = enumerate_completions(bn, rec, 4096);
            REQUIRE(c.has_value());
            CHECK(c->evidence_probability == doctest::Approx(testing::oracle_evidence_probability(bn, rec)));
            double sum = 0.0;
            for (std::size_t k = 0; k < c->count(); ++k) {
                auto full = rec;
                for (std::size_t j = 0; j < c->missing.size(); ++j)
                    full[c->missing[j]] = c->states[k * c->missing.size() + j];
                CHECK(c->weights[k] ==
                      doctest::Approx(testing::oracle_joint(bn, full) / c->evidence_probability).epsilon(1e-9));
                sum += c->weights[k];
            }
            CHECK(sum == doctest::Approx(1.0));
        }
        const auto bn = testing::random_network(rng, 5, 3, 3, 0.5);
        CHECK_FALSE(enumerate_completions(bn, std::vector<int>(5, kMissing), 10).has_value());
    }

    TEST_CASE("label conversion") {
        const auto ab = two_node(0.3, 0.8);
        CHECK(ab.to_indices(StateMap{{"B", "1"}}) == std::vector<int>{kMissing, 1});
        CHECK_THROWS_AS(ab.to_indices(StateMap{{"Z", "1"}}), UnknownNode);
        CHECK_THROWS_AS(ab.to_indices(StateMap{{"A", "x"}}), ValidationError);
    }
}
