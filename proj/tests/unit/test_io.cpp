#include <cmath>

#include "cbn/error.hpp"
#include "cbn/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cbn;

TEST_SUITE("io") {
    TEST_CASE("edge list round trip and errors") {
        const Dag d({"A", "B", "C"}, {{"A", "B"}, {"C", "B"}});
        const auto text = format_edge_list(d);
        CHECK(parse_edge_list(text) == d.edges());
        CHECK(parse_edge_list("# comment\n\n  A -> B  \n") == EdgeSet{{"A", "B"}});
        CHECK_THROWS_AS(parse_edge_list("A B\n"), ParseError);
        CHECK_THROWS_AS(parse_edge_list("A -> \n"), ParseError);
    }

    TEST_CASE("knowledge round trip") {
        const PriorKnowledge k({{"A", "B"}}, {{"C", "A"}}, {{"A"}, {"B", "C"}});
        const auto back = parse_knowledge(format_knowledge(k));
        CHECK(back.required() == k.required());
        CHECK(back.forbidden() == k.forbidden());
        CHECK(back.tiers() == k.tiers());
        CHECK_THROWS_AS(parse_knowledge("A -> B\n"), ParseError);
        CHECK_THROWS_AS(parse_knowledge("[required]\nA -> B\n[required]\n"), ParseError);
        CHECK_THROWS_AS(parse_knowledge("[other]\n"), ParseError);
        CHECK_THROWS_AS(parse_knowledge("[required]\nA -> B\n[forbidden]\nA -> B\n"), InfeasibleKnowledge);

        const auto merged = merge_knowledge(k, PriorKnowledge({{"B", "C"}}, {}));
        CHECK(merged.required() == EdgeSet{{"A", "B"}, {"B", "C"}});
        CHECK(merged.tiers() == k.tiers());
    }

    TEST_CASE("model save/load is bit-exact on random networks") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            const auto bn = testing::random_network(rng, 6, 2, 4, 0.5, trial % 2 == 1);
            const auto text = format_model(bn);
            const auto back = parse_model(text);
            CHECK(back == bn);
            CHECK(format_model(back) == text);
        }
        CHECK_THROWS_AS(parse_model("{"), ParseError);
        CHECK_THROWS_AS(parse_model("{\"format\":\"other\"}"), ValidationError);
    }

    TEST_CASE("model file I/O errors") {
        CHECK_THROWS_AS(read_model("/nonexistent/model.json"), IoError);
        CHECK_THROWS_AS(write_file("/nonexistent/dir/file", "x"), IoError);
        const auto dir = testing::temp_dir("io");
        const auto bn = testing::chain_network({"A", "B"});
        write_file((dir / "m.json").string(), format_model(bn));
        CHECK(read_model((dir / "m.json").string()) == bn);
        CHECK(file_hash((dir / "m.json").string()) == fnv1a_hex(format_model(bn)));
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("FNV-1a reference values") {
        CHECK(fnv1a_hex("") == "cbf29ce484222325");
        CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
        CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    }

    TEST_CASE("confidence and strengths round trip") {
        const ConfidenceMatrix c({"A", "B", "C"}, {0, 7, 1, 3, 0, 7, 0, 0, 0}, 7);
        CHECK(parse_confidence(format_confidence(c), 7) == c);
        CHECK_THROWS_AS(parse_confidence("x\n", 7), ParseError);

        const auto text = format_strengths(c);
        CHECK(text.rfind("source\ttarget\tconfidence\n", 0) == 0);
        const auto s = parse_strengths(text);
        REQUIRE(s.size() == 4);
        CHECK(s[0].edge == Edge{"A", "B"});
        CHECK(s[1].edge == Edge{"B", "C"});
        CHECK(s[2].edge == Edge{"B", "A"});
        CHECK(s[3].edge == Edge{"A", "C"});
        CHECK(s[0].confidence == 1.0);
        CHECK(std::abs(s[2].confidence - 3.0 / 7.0) < 1e-6);
    }

    TEST_CASE("score files keep undefined cells") {
        const std::vector<std::optional<double>> scores = {0.25, std::nullopt, 1.0 / 3.0};
        const std::vector<std::optional<int>> labels = {1, 0, std::nullopt};
        const auto rows = parse_scores(format_scores(scores, labels));
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].score == 0.25);
        CHECK(rows[0].label == 1);
        CHECK_FALSE(rows[1].score.has_value());
        CHECK(rows[2].score == 1.0 / 3.0);
        CHECK_FALSE(rows[2].label.has_value());
        CHECK_THROWS_AS(parse_scores("row,score,label\n0,abc,1\n"), ParseError);
        CHECK(format_double(0.1) == "0.1");
    }
}
