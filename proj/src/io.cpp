#include "cbn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cbn/error.hpp"
#include "json.hpp"

namespace cbn {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> lines_of(std::string_view text) {
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return lines;
}

bool skippable(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

Edge parse_edge_line(std::string_view line, std::size_t line_number) {
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) throw ParseError("expected 'source -> target'", line_number);
    const auto source = trim(line.substr(0, arrow));
    const auto target = trim(line.substr(arrow + 2));
    if (source.empty() || target.empty()) throw ParseError("edge needs a source and a target", line_number);
    if (target.find("->") != std::string_view::npos) throw ParseError("one edge per line", line_number);
    return Edge{std::string(source), std::string(target)};
}

double parse_double(std::string_view text, std::size_t line, std::size_t column) {
    const auto t = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw ParseError("not a number: '" + std::string(t) + "'", line, column);
    }
    return value;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("error writing '" + path + "'");
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) { return fnv1a_hex(read_file(path)); }

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw Error("cannot format number");
    return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------

EdgeSet parse_edge_list(std::string_view text) {
    EdgeSet edges;
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (skippable(lines[i])) continue;
        auto edge = parse_edge_line(lines[i], i + 1);
        if (!edges.insert(edge).second) throw ParseError("duplicate edge " + to_string(edge), i + 1);
    }
    return edges;
}

EdgeSet read_edge_list(const std::string& path) { return parse_edge_list(read_file(path)); }

std::string format_edge_list(const Dag& dag) {
    std::string out;
    for (auto [s, t] : dag.edge_indices()) out += dag.nodes()[s] + " -> " + dag.nodes()[t] + "\n";
    return out;
}

PriorKnowledge parse_knowledge(std::string_view text) {
    enum class Section { None, Required, Forbidden, Tiers };
    Section section = Section::None;
    EdgeSet required;
    EdgeSet forbidden;
    Tiers tiers;
    bool seen[3] = {false, false, false};
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (skippable(lines[i])) continue;
        const auto line = trim(lines[i]);
        if (line.front() == '[') {
            int idx = -1;
            if (line == "[required]") {
                section = Section::Required;
                idx = 0;
            } else if (line == "[forbidden]") {
                section = Section::Forbidden;
                idx = 1;
            } else if (line == "[tiers]") {
                section = Section::Tiers;
                idx = 2;
            } else {
                throw ParseError("unknown section " + std::string(line), i + 1);
            }
            if (seen[idx]) throw ParseError("section " + std::string(line) + " appears twice", i + 1);
            seen[idx] = true;
            continue;
        }
        switch (section) {
            case Section::None:
                throw ParseError("content before the first section header", i + 1);
            case Section::Required:
                required.insert(parse_edge_line(line, i + 1));
                break;
            case Section::Forbidden:
                forbidden.insert(parse_edge_line(line, i + 1));
                break;
            case Section::Tiers: {
                std::vector<std::string> tier;
                for (auto name : split(line, ',')) {
                    const auto n = trim(name);
                    if (n.empty()) throw ParseError("empty name in tier", i + 1);
                    tier.emplace_back(n);
                }
                tiers.push_back(std::move(tier));
                break;
            }
        }
    }
    return PriorKnowledge(std::move(required), std::move(forbidden), std::move(tiers));
}

PriorKnowledge read_knowledge(const std::string& path) { return parse_knowledge(read_file(path)); }

std::string format_knowledge(const PriorKnowledge& knowledge) {
    std::string out = "[required]\n";
    for (const auto& e : knowledge.required()) out += e.source + " -> " + e.target + "\n";
    out += "\n[forbidden]\n";
    for (const auto& e : knowledge.forbidden()) out += e.source + " -> " + e.target + "\n";
    out += "\n[tiers]\n";
    for (const auto& tier : knowledge.tiers()) {
        for (std::size_t i = 0; i < tier.size(); ++i) out += (i ? ", " : "") + tier[i];
        out += "\n";
    }
    return out;
}

PriorKnowledge merge_knowledge(const PriorKnowledge& base, const PriorKnowledge& overlay) {
    EdgeSet required = base.required();
    required.insert(overlay.required().begin(), overlay.required().end());
    EdgeSet forbidden = base.forbidden();
    forbidden.insert(overlay.forbidden().begin(), overlay.forbidden().end());
    Tiers tiers = overlay.tiers().empty() ? base.tiers() : overlay.tiers();
    return PriorKnowledge(std::move(required), std::move(forbidden), std::move(tiers));
}

// ---------------------------------------------------------------------------

std::string format_model(const CausalBayesianNetwork& bn) {
    nlohmann::ordered_json j;
    j["format"] = "cbn-model";
    j["version"] = 1;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& v : bn.variables()) nodes.push_back({{"name", v.name}, {"states", v.states}});
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& [s, t] : bn.dag().edge_indices())
        edges.push_back(nlohmann::ordered_json::array({bn.dag().nodes()[s], bn.dag().nodes()[t]}));
    j["edges"] = std::move(edges);
    auto cpts = nlohmann::ordered_json::array();
    for (const auto& cpt : bn.cpts()) {
        auto rows = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < cpt.rows(); ++r) {
            const auto row = cpt.row(r);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        cpts.push_back({{"node", cpt.child}, {"parents", cpt.parents}, {"rows", std::move(rows)}});
    }
    j["cpts"] = std::move(cpts);
    return j.dump(2) + "\n";
}

CausalBayesianNetwork parse_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", std::string()) != "cbn-model") throw ParseError("not a cbn-model file");
        if (j.value("version", 0) != 1) throw ParseError("unsupported model version");
        std::vector<Variable> variables;
        std::vector<std::string> names;
        for (const auto& n : j.at("nodes")) {
            variables.push_back(Variable{n.at("name").get<std::string>(), n.at("states").get<std::vector<std::string>>()});
            names.push_back(variables.back().name);
        }
        validate_variables(variables);
        EdgeSet edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ParseError("edge must be [source, target]");
            edges.insert(Edge{e[0].get<std::string>(), e[1].get<std::string>()});
        }
        Dag dag(names, edges);
        std::vector<Cpt> cpts(variables.size());
        std::vector<bool> seen(variables.size(), false);
        for (const auto& c : j.at("cpts")) {
            const auto node = c.at("node").get<std::string>();
            const auto idx = dag.index_of(node);
            if (seen[idx]) throw ParseError("two CPTs for '" + node + "'");
            seen[idx] = true;
            Cpt cpt;
            cpt.child = node;
            cpt.parents = c.at("parents").get<std::vector<std::string>>();
            cpt.cardinality = variables[idx].cardinality();
            for (const auto& row : c.at("rows")) {
                const auto values = row.get<std::vector<double>>();
                if (values.size() != cpt.cardinality) {
                    throw ParseError("CPT row of '" + node + "' has " + std::to_string(values.size()) +
                                     " entries, expected " + std::to_string(cpt.cardinality));
                }
                cpt.table.insert(cpt.table.end(), values.begin(), values.end());
            }
            cpts[idx] = std::move(cpt);
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i]) throw ParseError("no CPT for '" + names[i] + "'");
        return CausalBayesianNetwork(std::move(dag), std::move(variables), std::move(cpts));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
}

CausalBayesianNetwork read_model(const std::string& path) { return parse_model(read_file(path)); }

// ---------------------------------------------------------------------------

std::string format_confidence(const ConfidenceMatrix& confidence) {
    const auto& nodes = confidence.nodes();
    std::string out;
    for (const auto& n : nodes) out += "\t" + n;
    out += "\n";
    for (std::size_t s = 0; s < nodes.size(); ++s) {
        out += nodes[s];
        for (std::size_t t = 0; t < nodes.size(); ++t) out += "\t" + fixed6(confidence(s, t));
        out += "\n";
    }
    return out;
}

ConfidenceMatrix parse_confidence(std::string_view text, std::size_t bootstraps) {
    if (bootstraps == 0) throw ValidationError("number of bootstraps must be at least 1");
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError("empty confidence matrix");
    auto header = split(lines[0], '\t');
    if (header.empty() || !header[0].empty()) throw ParseError("header must start with an empty cell", 1);
    std::vector<std::string> nodes;
    for (std::size_t i = 1; i < header.size(); ++i) nodes.emplace_back(header[i]);
    const std::size_t n = nodes.size();
    if (lines.size() != n + 1) throw ParseError("expected one row per node", lines.size());
    std::vector<std::size_t> counts(n * n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto cells = split(lines[s + 1], '\t');
        if (cells.size() != n + 1) throw ParseError("wrong number of columns", s + 2);
        if (cells[0] != nodes[s]) throw ParseError("row label does not match header", s + 2, 1);
        for (std::size_t t = 0; t < n; ++t) {
            const double v = parse_double(cells[t + 1], s + 2, t + 2);
            if (v < 0.0 || v > 1.0) throw ParseError("confidence outside [0, 1]", s + 2, t + 2);
            counts[s * n + t] = static_cast<std::size_t>(std::llround(v * static_cast<double>(bootstraps)));
        }
    }
    return ConfidenceMatrix(std::move(nodes), std::move(counts), bootstraps);
}

std::string format_strengths(const ConfidenceMatrix& confidence) {
    struct Entry {
        std::size_t count, s, t;
    };
    std::vector<Entry> entries;
    const auto n = confidence.size();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < n; ++t)
            if (confidence.count(s, t) > 0) entries.push_back({confidence.count(s, t), s, t});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.count > b.count; });
    std::string out = "source\ttarget\tconfidence\n";
    for (const auto& e : entries)
        out += confidence.nodes()[e.s] + "\t" + confidence.nodes()[e.t] + "\t" + fixed6(confidence(e.s, e.t)) + "\n";
    return out;
}

std::vector<Strength> parse_strengths(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "source\ttarget\tconfidence") {
        throw ParseError("strength file must start with 'source<TAB>target<TAB>confidence'", 1);
    }
    std::vector<Strength> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], '\t');
        if (cells.size() != 3) throw ParseError("expected three columns", i + 1);
        out.push_back({Edge{std::string(cells[0]), std::string(cells[1])}, parse_double(cells[2], i + 1, 3)});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string format_scores(const std::vector<std::optional<double>>& scores,
                          const std::vector<std::optional<int>>& labels) {
    if (!labels.empty() && labels.size() != scores.size()) throw ValidationError("scores and labels differ in length");
    std::string out = "row,score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += std::to_string(i) + ",";
        if (scores[i]) out += format_double(*scores[i]);
        out += ",";
        if (!labels.empty() && labels[i]) out += std::to_string(*labels[i]);
        out += "\n";
    }
    return out;
}

std::vector<ScoreRow> parse_scores(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty() || trim(lines[0]) != "row,score,label") throw ParseError("score file must start with 'row,score,label'", 1);
    std::vector<ScoreRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != 3) throw ParseError("expected three columns", i + 1);
        ScoreRow r;
        const auto row = trim(cells[0]);
        const auto [ptr, ec] = std::from_chars(row.data(), row.data() + row.size(), r.row);
        if (ec != std::errc() || ptr != row.data() + row.size()) throw ParseError("bad row index", i + 1, 1);
        if (!trim(cells[1]).empty()) {
            r.score = parse_double(cells[1], i + 1, 2);
            if (!(*r.score >= 0.0 && *r.score <= 1.0)) throw ParseError("score outside [0, 1]", i + 1, 2);
        }
        const auto label = trim(cells[2]);
        if (label == "0" || label == "1") {
            r.label = label == "1" ? 1 : 0;
        } else if (!label.empty()) {
            throw ParseError("label must be 0, 1 or empty", i + 1, 3);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace cbn
