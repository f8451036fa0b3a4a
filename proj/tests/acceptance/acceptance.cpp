// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "cbn/bootstrap.hpp"
#include "cbn/cli.hpp"
#include "cbn/cohort.hpp"
#include "cbn/error.hpp"
#include "cbn/eval.hpp"
#include "cbn/io.hpp"
#include "cbn/params.hpp"
#include "cbn/structure.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace cbn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string p(const fs::path& path) { return path.string(); }

int cli_run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

// ---------------------------------------------------------------------------

Outcome inference_oracle() {
    Outcome o;
    Rng rng(20240601);
    double worst = 0.0;
    std::size_t queries = 0;
    for (int net = 0; net < 200; ++net) {
        const std::size_t n = 2 + rng.below(7);  // 2..8 nodes
        const auto bn = testing::random_network(rng, n, 2, 4, 0.45);
        for (int e = 0; e < 5; ++e) {
            std::vector<int> ev(n, kMissing);
            for (std::size_t i = 0; i < n; ++i)
                if (rng.uniform() < 0.4) ev[i] = static_cast<int>(rng.below(bn.cardinality(i)));
            for (std::size_t t = 0; t < n; ++t) {
                if (ev[t] != kMissing) continue;
                const auto expect = testing::oracle_posterior(bn, ev, t);
                const auto got = posterior(bn, ev, t);
                for (std::size_t s = 0; s < expect.size(); ++s) worst = std::max(worst, std::abs(got[s] - expect[s]));
                ++queries;
            }
        }
    }
    if (worst > 1e-9) o.fail("max |VE - enumeration| = " + fmt("%.3g", worst));
    o.detail = o.pass ? std::to_string(queries) + " queries, max error " + fmt("%.2g", worst) : o.detail;
    return o;
}

Outcome em_guarantees() {
    Outcome o;
    Rng rng(777);
    double worst_drop = 0.0;
    std::size_t mle_mismatch = 0;
    for (int pair = 0; pair < 50; ++pair) {
        const auto bn = testing::random_network(rng, 3 + rng.below(4), 2, 3, 0.5);
        const auto complete = sample(bn, 300, static_cast<std::uint64_t>(pair));
        auto d = complete;
        for (std::size_t c = 0; c < bn.size(); ++c)
            d = inject_missing(d, {Mechanism::MCAR, 0.2, bn.variables()[c].name, "", 1000u + pair * 16u + c});
        for (double ess : {0.0, 1.0}) {
            EmConfig cfg;
            cfg.ess = ess;
            cfg.tolerance = 1e-9;
            cfg.max_iterations = 200;
            const auto r = em_fit(bn.dag(), d, cfg);
            // With ess = 0 the objective is the observed-data log-likelihood.
            for (std::size_t i = 1; i < r.trace.size(); ++i) {
                worst_drop = std::max(worst_drop, r.trace[i - 1] - r.trace[i]);
                if (ess == 0.0) worst_drop = std::max(worst_drop, r.log_likelihood[i - 1] - r.log_likelihood[i]);
            }
            if (em_fit(bn.dag(), complete, cfg).cpts != mle_fit(bn.dag(), complete, ess)) ++mle_mismatch;
        }
    }
    if (worst_drop > 1e-9) o.fail("trace decreased by " + fmt("%.3g", worst_drop));
    if (mle_mismatch) o.fail(std::to_string(mle_mismatch) + " complete-data fits differ from mle_fit");
    if (o.pass) o.detail = "50 pairs, largest decrease " + fmt("%.2g", std::max(worst_drop, 0.0)) + ", em == mle";
    return o;
}

Outcome structure_recovery() {
    Outcome o;
    const auto bn = testing::chain_network({"A", "B", "C"}, 0.5, 0.9);
    const PriorKnowledge tiers({}, {}, {{"A"}, {"B"}, {"C"}});
    const EdgeSet truth = {{"A", "B"}, {"B", "C"}};
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto d = sample(bn, 5000, 100 + seed);
        for (std::size_t c = 0; c < 3; ++c)
            d = inject_missing(d, {Mechanism::MCAR, 0.1, bn.variables()[c].name, "", 500 + seed * 3 + c});
        if (structural_em(d, tiers, SemConfig{}).edges() == truth) ++hits;
    }
    if (hits < 19) o.fail("exact recovery in " + std::to_string(hits) + "/20 runs");
    else o.detail = "exact recovery in " + std::to_string(hits) + "/20 runs";
    return o;
}

Outcome algorithm1_exactness() {
    Outcome o;
    Rng rng(31);
    for (int trial = 0; trial < 6 && o.pass; ++trial) {
        const auto bn = testing::random_network(rng, 5, 2, 3, 0.5);
        auto d = sample(bn, 200, static_cast<std::uint64_t>(trial));
        d = inject_missing(d, {Mechanism::MCAR, 0.1, "X2", "", 9});
        const PriorKnowledge k({}, {{"X0", "X1"}, {"X3", "X4"}}, {{"X4"}, {"X0", "X1", "X2", "X3"}});
        BootstrapConfig cfg;
        cfg.n = 7;
        cfg.seed = 50 + trial;
        cfg.threads = 3;
        const auto c = confidence_matrix(d, k, cfg);

        // Independent recount from one structural EM run per resample.
        std::vector<std::size_t> counts(25, 0);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            const auto g = structural_em(resample(d, d.rows(), cfg.seed + i), k, cfg.sem);
            for (std::size_t s = 0; s < 5; ++s)
                for (std::size_t t = 0; t < 5; ++t) counts[s * 5 + t] += g.has_edge(s, t);
        }
        for (std::size_t s = 0; s < 5; ++s)
            for (std::size_t t = 0; t < 5; ++t) {
                const double v = c(s, t);
                if (v != static_cast<double>(counts[s * 5 + t]) / 7.0) o.fail("entry differs from inclusion frequency");
                if (std::abs(v * 7.0 - std::round(v * 7.0)) > 1e-12) o.fail("entry is not a multiple of 1/n");
                if (k.is_forbidden(Edge{c.nodes()[s], c.nodes()[t]}) && v != 0.0) o.fail("forbidden entry nonzero");
            }
        cfg.n = 1;
        const auto one = confidence_matrix(d, k, cfg);
        const auto g = structural_em(resample(d, d.rows(), cfg.seed), k, cfg.sem);
        for (std::size_t s = 0; s < 5; ++s)
            for (std::size_t t = 0; t < 5; ++t)
                if (one(s, t) != (g.has_edge(s, t) ? 1.0 : 0.0)) o.fail("n = 1 is not the learned adjacency");
    }
    if (o.pass) o.detail = "6 datasets, n = 7 recount exact, n = 1 adjacency, forbidden = 0";
    return o;
}

Outcome algorithm2_properties() {
    Outcome o;
    Rng rng(4242);
    const std::vector<std::string> nodes = {"A", "B", "C", "D", "E", "F"};
    std::size_t sweeps = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<std::size_t> counts(36, 0);
        for (std::size_t s = 0; s < 6; ++s)
            for (std::size_t t = 0; t < 6; ++t)
                if (s != t && rng.uniform() < 0.6) counts[s * 6 + t] = rng.below(n + 1);
        const ConfidenceMatrix c(nodes, counts, n);
        PriorKnowledge k;
        if (trial % 2 == 1) {
            // Required edges that form a DAG, plus a few forbidden ones.
            EdgeSet req, forb;
            for (int e = 0; e < 2; ++e) {
                auto a = rng.below(5);
                auto b = a + 1 + rng.below(5 - a);
                req.insert(Edge{nodes[a], nodes[b]});
            }
            for (int e = 0; e < 3; ++e) {
                auto a = rng.below(6), b = rng.below(6);
                if (a != b && !req.contains(Edge{nodes[a], nodes[b]})) forb.insert(Edge{nodes[a], nodes[b]});
            }
            try {
                k = PriorKnowledge(req, forb);
            } catch (const InfeasibleKnowledge&) {
                continue;
            }
        }
        std::optional<EdgeSet> previous;
        for (int i = 0; i <= 20; ++i) {
            const double lambda = i / 20.0;
            const auto g = average_graph(c, lambda, k);  // a Dag: acyclic by construction, re-checked below
            topological_order(g);
            for (const auto& e : k.required())
                if (!g.has_edge(e)) o.fail("required edge missing");
            for (const auto& e : g.edges())
                if (k.is_forbidden(e)) o.fail("forbidden edge present");
            if (previous)
                for (const auto& e : g.edges())
                    if (!previous->contains(e)) o.fail("edge set grew as lambda increased");
            previous = g.edges();
        }
        ++sweeps;
    }
    if (o.pass) o.detail = std::to_string(sweeps) + " matrices x 21 lambda values, nested edge sets";
    return o;
}

Outcome auc_exactness() {
    Outcome o;
    Rng rng(606);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(200);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 3 == 0 ? static_cast<double>(rng.below(6)) : rng.uniform();
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 1;
        y[1] = 0;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (y[i] == 1 && y[j] == 0) {
                    pairs += 1;
                    wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                }
        const auto r = roc_auc(s, y);
        worst = std::max(worst, std::abs(r.auc - wins / pairs));
        const auto& f = r.curve.points.front();
        const auto& b = r.curve.points.back();
        if (f.fpr != 0.0 || f.tpr != 0.0) o.fail("ROC does not start at (0,0)");
        if (b.fpr != 1.0 || b.tpr != 1.0) o.fail("ROC does not end at (1,1)");
    }
    if (worst > 1e-12) o.fail("max |trapezoid - pairwise| = " + fmt("%.3g", worst));
    if (o.pass) o.detail = "100 sets, max difference " + fmt("%.2g", worst) + ", endpoints anchored";
    return o;
}

Outcome paper_scale_pipeline(const fs::path& dir) {
    Outcome o;
    if (cli_run({"cohort", "--out", p(dir / "cohort")}) != 0) {
        o.fail("cohort command failed");
        return o;
    }
    if (cli_run({"simulate", "--model", p(dir / "cohort" / "model.json"), "--rows", "763", "--seed", "2024",
                 "--mechanism", "MCAR", "--rate", "0.15", "--out", p(dir / "sim")}) != 0) {
        o.fail("simulate command failed");
        return o;
    }
    write_file(p(dir / "grid.json"), R"({"n": [10, 25], "lambda": [0.3, 0.5]})");
    if (cli_run({"gridsearch", "--data", p(dir / "sim" / "data.csv"), "--schema", p(dir / "cohort" / "schema.json"),
                 "--grid", p(dir / "grid.json"), "--target", kCohortTarget, "--positive", kCohortPositive,
                 "--split", "0.7", "--split-seed", "1", "--threads", "0", "--out", p(dir / "grid")}) != 0) {
        o.fail("gridsearch command failed");
        return o;
    }
    const auto report = json::parse(read_file(p(dir / "grid" / "gridsearch.json")));
    if (report["train_records"] != 534 || report["test_records"] != 229) o.fail("split is not 534/229");
    const double baseline = report["baseline_out_of_sample_auc"];
    const auto& results = report["results"];
    if (results.size() != 4) o.fail("expected 4 configurations");
    double lo = 1.0, hi = 0.0;
    std::map<std::string, std::set<std::pair<std::size_t, double>>> by_parents;
    for (const auto& r : results) {
        if (!r["error"].is_null() || r["out_of_sample_auc"].is_null()) {
            o.fail("a configuration did not complete");
            continue;
        }
        const double auc = r["out_of_sample_auc"];
        lo = std::min(lo, auc);
        hi = std::max(hi, auc);
        if (!(auc > baseline)) o.fail("out-of-sample AUC " + fmt("%.4f", auc) + " <= baseline");
        std::string key;
        for (const auto& name : r["target_parents"]) key += (key.empty() ? "" : "+") + name.get<std::string>();
        by_parents[key].insert({r["config"]["n"].get<std::size_t>(), r["config"]["lambda"].get<double>()});
    }

    // Every configuration appears once in the figure export, grouped by parent set.
    std::istringstream fig(read_file(p(dir / "grid" / "auc_scatter.tsv")));
    std::string line;
    std::getline(fig, line);
    std::map<std::string, std::string> group_of_key;
    std::map<std::string, std::string> key_of_group;
    std::size_t lines = 0;
    std::string last_group;
    std::set<std::string> closed;
    while (std::getline(fig, line)) {
        if (line.empty()) continue;
        ++lines;
        std::vector<std::string> cols;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
        if (cols.size() != 7) {
            o.fail("malformed figure row");
            break;
        }
        const auto& group = cols[0];
        const auto& key = cols[2];
        if (group != last_group) {
            if (closed.contains(group)) o.fail("group rows are not contiguous");
            closed.insert(last_group);
            last_group = group;
        }
        if (group_of_key.contains(key) && group_of_key[key] != group) o.fail("one parent set in two groups");
        if (key_of_group.contains(group) && key_of_group[group] != key) o.fail("one group holds two parent sets");
        group_of_key[key] = group;
        key_of_group[group] = key;
        if (!by_parents[key == "(none)" ? "" : key].contains({std::stoul(cols[3]), std::stod(cols[4])}))
            o.fail("figure row does not match the grid results");
    }
    if (lines != 4) o.fail("figure export holds " + std::to_string(lines) + " rows");
    if (o.pass)
        o.detail = "4/4 configs, out-of-sample AUC " + fmt("%.3f", lo) + ".." + fmt("%.3f", hi) + " > baseline " +
                   fmt("%.3f", baseline) + ", " + std::to_string(key_of_group.size()) + " parent-set groups";
    return o;
}

Outcome determinism(const fs::path& dir) {
    Outcome o;
    const auto model = p(dir / "cohort" / "model.json");
    const auto schema = p(dir / "cohort" / "schema.json");
    const auto data = p(dir / "sim" / "data.csv");
    if (!fs::exists(data)) {
        o.fail("pipeline artifacts missing");
        return o;
    }
    struct Job {
        std::string name;
        std::vector<std::string> args;
    };
    const std::vector<Job> jobs = {
        {"discover", {"discover", "--data", data, "--schema", schema, "--n", "8", "--seed", "5"}},
        {"fit", {"fit", "--data", data, "--graph", p(dir / "cohort" / "graph.txt"), "--schema", schema, "--init",
                 "random", "--seed", "3"}},
        {"simulate", {"simulate", "--model", model, "--rows", "300", "--seed", "9", "--mechanism", "MNAR", "--rate",
                      "0.2", "--targets", "LVSI,CA125"}},
        {"gridsearch", {"gridsearch", "--data", data, "--schema", schema, "--grid", p(dir / "grid.json"), "--target",
                        kCohortTarget, "--positive", kCohortPositive, "--stratify"}},
    };
    for (const auto& job : jobs) {
        auto serial = job.args, parallel = job.args;
        const auto a = dir / ("det-" + job.name + "-1");
        const auto b = dir / ("det-" + job.name + "-4");
        serial.insert(serial.end(), {"--out", p(a)});
        parallel.insert(parallel.end(), {"--out", p(b)});
        if (job.name == "discover" || job.name == "gridsearch") {
            serial.insert(serial.end(), {"--threads", "1"});
            parallel.insert(parallel.end(), {"--threads", "4"});
        }
        if (cli_run(serial) != 0 || cli_run(parallel) != 0) {
            o.fail(job.name + " failed");
            continue;
        }
        for (const auto& entry : fs::directory_iterator(a))
            if (read_file(p(entry.path())) != read_file(p(b / entry.path().filename())))
                o.fail(job.name + ": " + entry.path().filename().string() + " differs between 1 and 4 threads");
        const auto r = dir / ("det-" + job.name + "-replay");
        if (cli_run({"replay", "--manifest", p(a / "manifest.json"), "--out", p(r), "--check", "--threads", "3"}) != 0)
            o.fail(job.name + ": replay --check failed");
        for (const auto& entry : fs::directory_iterator(a))
            if (!fs::exists(r / entry.path().filename()) ||
                read_file(p(entry.path())) != read_file(p(r / entry.path().filename())))
                o.fail(job.name + ": replayed " + entry.path().filename().string() + " differs");
    }
    if (o.pass) o.detail = "discover, fit, simulate, gridsearch: 1 vs 4 threads and replays byte-identical";
    return o;
}

}  // namespace

int main() {
    const auto dir = testing::temp_dir("acceptance");
    struct Criterion {
        const char* id;
        double limit_seconds;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria = {
        {"inference-oracle", 60, inference_oracle},
        {"em-guarantees", 120, em_guarantees},
        {"structure-recovery", 300, structure_recovery},
        {"algorithm1-exactness", 300, algorithm1_exactness},
        {"algorithm2-properties", 300, algorithm2_properties},
        {"auc-exactness", 300, auc_exactness},
        {"paper-scale-pipeline", 900, [&] { return paper_scale_pipeline(dir); }},
        {"determinism", 900, [&] { return determinism(dir); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = seconds_since(t0);
        if (secs > c.limit_seconds) o.fail("took " + fmt("%.1f", secs) + " s, limit " + fmt("%.0f", c.limit_seconds));
        std::printf("%s %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, secs, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    fs::remove_all(dir);
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
