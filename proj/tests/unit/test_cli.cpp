#include <sstream>

#include "cbn/cli.hpp"
#include "cbn/data.hpp"
#include "cbn/io.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace cbn;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

// Writes a chain model and a sample from it; returns the data path.
std::string chain_fixture(const fs::path& dir, std::size_t rows = 600) {
    const auto bn = testing::chain_network({"A", "B", "C"}, 0.5, 0.92);
    write_file(p(dir / "truth.json"), format_model(bn));
    const auto r = run({"simulate", "--model", p(dir / "truth.json"), "--rows", std::to_string(rows), "--seed", "4",
                        "--rate", "0.1", "--out", p(dir / "sim")});
    REQUIRE(r.code == 0);
    write_file(p(dir / "knowledge.txt"), "[tiers]\nA\nB\nC\n");
    return p(dir / "sim" / "data.csv");
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit with 2") {
        CHECK(run({}).code == cli::kUsage);
        CHECK(run({"frobnicate"}).code == cli::kUsage);
        CHECK(run({"discover"}).code == cli::kUsage);
        const auto r = run({"discover", "--data", "x.csv", "--n", "abc"});
        CHECK(r.code == cli::kUsage);
        CHECK(r.err.rfind("cbn: ", 0) == 0);
        CHECK(run({"eval", "--scores", "s.csv", "--level", "2"}).code == cli::kUsage);
    }

    TEST_CASE("missing input files exit with 3, malformed with 4") {
        const auto dir = testing::temp_dir("cli-err");
        CHECK(run({"predict", "--model", "/nonexistent.json", "--data", "/nonexistent.csv", "--target", "A",
                   "--positive", "1", "--out", p(dir)})
                  .code == cli::kIo);
        write_file(p(dir / "bad.json"), "{");
        CHECK(run({"simulate", "--model", p(dir / "bad.json"), "--rows", "3", "--out", p(dir / "o")}).code ==
              cli::kValidation);
        fs::remove_all(dir);
    }

    TEST_CASE("simulate at rate 0 yields complete data of the requested size") {
        const auto dir = testing::temp_dir("cli-sim");
        write_file(p(dir / "m.json"), format_model(testing::chain_network({"A", "B"})));
        REQUIRE(run({"simulate", "--model", p(dir / "m.json"), "--rows", "50", "--out", p(dir / "s")}).code == 0);
        const auto bn = read_model(p(dir / "m.json"));
        const auto d = read_table(p(dir / "s" / "data.csv"), bn.variables());
        CHECK(d.rows() == 50);
        CHECK(d.complete());
        fs::remove_all(dir);
    }

    TEST_CASE("discover recovers a strong chain and is byte-identical across runs and thread counts") {
        const auto dir = testing::temp_dir("cli-disc");
        const auto data = chain_fixture(dir);
        const std::vector<std::string> base = {"discover", "--data", data, "--knowledge", p(dir / "knowledge.txt"),
                                               "--n", "6", "--seed", "3"};
        auto a = base, b = base;
        a.insert(a.end(), {"--threads", "1", "--out", p(dir / "a")});
        b.insert(b.end(), {"--threads", "4", "--out", p(dir / "b")});
        const auto ra = run(a);
        REQUIRE(ra.code == 0);
        REQUIRE(run(b).code == 0);
        for (const char* f : {"confidence.tsv", "strengths.tsv", "graph.txt", "model.json", "manifest.json"})
            CHECK(read_file(p(dir / "a" / f)) == read_file(p(dir / "b" / f)));
        const auto c = parse_confidence(read_file(p(dir / "a" / "confidence.tsv")), 6);
        CHECK(c.at("A", "B") >= 0.9);
        CHECK(c.at("B", "C") >= 0.9);
        CHECK(parse_edge_list(read_file(p(dir / "a" / "graph.txt"))) == EdgeSet{{"A", "B"}, {"B", "C"}});
        CHECK(ra.out.find("manifest.json") != std::string::npos);

        const auto replay = run({"replay", "--manifest", p(dir / "a" / "manifest.json"), "--out", p(dir / "r"),
                                 "--check", "--threads", "2"});
        CHECK(replay.code == 0);
        CHECK(read_file(p(dir / "r" / "model.json")) == read_file(p(dir / "a" / "model.json")));

        // A changed input is detected before anything runs.
        write_file(data, read_file(data) + "\n");
        CHECK(run({"replay", "--manifest", p(dir / "a" / "manifest.json"), "--out", p(dir / "r2")}).code ==
              cli::kValidation);
        fs::remove_all(dir);
    }

    TEST_CASE("fit, predict and eval compose") {
        const auto dir = testing::temp_dir("cli-pipe");
        const auto data = chain_fixture(dir);
        write_file(p(dir / "g.txt"), "A -> B\nB -> C\n");
        REQUIRE(run({"fit", "--data", data, "--graph", p(dir / "g.txt"), "--knowledge", p(dir / "knowledge.txt"),
                     "--out", p(dir / "fit")})
                    .code == 0);
        const auto bn = read_model(p(dir / "fit" / "model.json"));
        CHECK(bn.dag().edges() == EdgeSet{{"A", "B"}, {"B", "C"}});
        CHECK(std::abs(bn.cpts()[1].table[0] - 0.92) < 0.05);

        REQUIRE(run({"predict", "--model", p(dir / "fit" / "model.json"), "--data", data, "--target", "C",
                     "--positive", "1", "--out", p(dir / "pr")})
                    .code == 0);
        const auto rows = parse_scores(read_file(p(dir / "pr" / "scores.csv")));
        CHECK(rows.size() == 600);
        REQUIRE(run({"eval", "--scores", p(dir / "pr" / "scores.csv"), "--resamples", "300", "--out", p(dir / "ev")})
                    .code == 0);
        const auto report = nlohmann::json::parse(read_file(p(dir / "ev" / "report.json")));
        const double auc = report["auc"];
        CHECK(auc > 0.7);
        CHECK(report["ci"]["lower"].get<double>() <= auc);
        CHECK(auc <= report["ci"]["upper"].get<double>());
        CHECK(report["roc"][0]["threshold"] == "+inf");

        // Impossible target state is a validation error.
        CHECK(run({"predict", "--model", p(dir / "fit" / "model.json"), "--data", data, "--target", "C",
                   "--positive", "7", "--out", p(dir / "pr2")})
                  .code == cli::kValidation);
        fs::remove_all(dir);
    }

    TEST_CASE("cohort writes a consistent bundle") {
        const auto dir = testing::temp_dir("cli-cohort");
        REQUIRE(run({"cohort", "--hospital", "--out", p(dir)}).code == 0);
        const auto schema = read_schema(p(dir / "schema.json"));
        const auto bn = read_model(p(dir / "model.json"));
        CHECK(schema.variables() == bn.variables());
        CHECK(satisfies(bn.dag(), merge_knowledge(schema.knowledge(), read_knowledge(p(dir / "knowledge.txt")))));
        fs::remove_all(dir);
    }
}
