#ifndef CBN_IO_HPP
#define CBN_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cbn/bn.hpp"
#include "cbn/bootstrap.hpp"
#include "cbn/eval.hpp"
#include "cbn/graph.hpp"

namespace cbn {

// Whole-file helpers. Throw IoError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::string& path);

// ---------------------------------------------------------------------------
// Edge list: one "source -> target" per line. Blank lines and lines starting
// with '#' are ignored.
EdgeSet parse_edge_list(std::string_view text);
EdgeSet read_edge_list(const std::string& path);
std::string format_edge_list(const Dag& dag);

// Prior knowledge: sections [required], [forbidden] (edge-list lines) and
// [tiers] (one tier per line, comma-separated names, earliest first).
PriorKnowledge parse_knowledge(std::string_view text);
PriorKnowledge read_knowledge(const std::string& path);
std::string format_knowledge(const PriorKnowledge& knowledge);

/// Union of required and forbidden edges; tiers from `overlay` when it has
/// any, otherwise from `base`.
PriorKnowledge merge_knowledge(const PriorKnowledge& base, const PriorKnowledge& overlay);

// ---------------------------------------------------------------------------
// Model file (JSON): nodes with ordered states, edges, and one CPT per node
// with rows in mixed-radix parent order. Doubles are written in shortest
// round-trip form, so save/load is bit-exact.
std::string format_model(const CausalBayesianNetwork& bn);
CausalBayesianNetwork parse_model(std::string_view text);
CausalBayesianNetwork read_model(const std::string& path);

// ---------------------------------------------------------------------------
// Confidence matrix: tab-separated, node names as header row and first
// column, entries with 6 decimals. Parsing recovers the counts given n.
std::string format_confidence(const ConfidenceMatrix& confidence);
ConfidenceMatrix parse_confidence(std::string_view text, std::size_t bootstraps);

/// "source<TAB>target<TAB>confidence" with header, every nonzero entry in
/// descending confidence, ties by node position.
std::string format_strengths(const ConfidenceMatrix& confidence);

struct Strength {
    Edge edge;
    double confidence;
};
std::vector<Strength> parse_strengths(std::string_view text);

// ---------------------------------------------------------------------------
// Score files: CSV with columns row,score,label. Undefined scores and missing
// labels are empty cells.
struct ScoreRow {
    std::size_t row = 0;
    std::optional<double> score;
    std::optional<int> label;
};
std::string format_scores(const std::vector<std::optional<double>>& scores,
                          const std::vector<std::optional<int>>& labels);
std::vector<ScoreRow> parse_scores(std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

}  // namespace cbn

#endif  // CBN_IO_HPP
