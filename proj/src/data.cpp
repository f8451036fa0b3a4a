#include "cbn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cbn/error.hpp"
#include "cbn/rng.hpp"

namespace cbn {

std::optional<int> Variable::find_state(std::string_view label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == label) return static_cast<int>(i);
    return std::nullopt;
}

int Variable::state_index(std::string_view label) const {
    auto s = find_state(label);
    if (!s) throw ValidationError("variable '" + name + "' has no state '" + std::string(label) + "'");
    return *s;
}

void validate_variables(const std::vector<Variable>& variables) {
    std::set<std::string> names;
    for (const auto& v : variables) {
        if (v.name.empty()) throw SchemaError("variable with empty name");
        if (!names.insert(v.name).second) throw SchemaError("duplicate variable '" + v.name + "'");
        if (v.states.size() < 2) throw SchemaError("variable '" + v.name + "' needs at least two states");
        std::set<std::string> labels(v.states.begin(), v.states.end());
        if (labels.size() != v.states.size()) {
            throw SchemaError("variable '" + v.name + "' has duplicate state labels");
        }
    }
}

Dataset::Dataset(std::vector<Variable> variables) : variables_(std::move(variables)) {
    validate_variables(variables_);
}

Dataset::Dataset(std::vector<Variable> variables, std::vector<int> cells)
    : Dataset(std::move(variables)) {
    if (columns() == 0 ? !cells.empty() : cells.size() % columns() != 0) {
        throw ValidationError("cell count is not a multiple of the column count");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) check_cell(i % columns(), cells[i]);
    cells_ = std::move(cells);
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    out.reserve(columns());
    for (const auto& v : variables_) out.push_back(v.name);
    return out;
}

std::size_t Dataset::column_of(std::string_view name) const {
    auto c = find_column(name);
    if (!c) throw UnknownNode(std::string(name));
    return *c;
}

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].name == name) return i;
    return std::nullopt;
}

void Dataset::check_cell(std::size_t column, int value) const {
    if (value == kMissing) return;
    if (value < 0 || static_cast<std::size_t>(value) >= variables_[column].cardinality()) {
        throw ValidationError("state index " + std::to_string(value) + " out of range for '" +
                              variables_[column].name + "'");
    }
}

void Dataset::add_row(std::span<const int> values) {
    if (values.size() != columns()) throw ValidationError("row width does not match column count");
    for (std::size_t c = 0; c < values.size(); ++c) check_cell(c, values[c]);
    cells_.insert(cells_.end(), values.begin(), values.end());
}

void Dataset::set_cell(std::size_t row, std::size_t column, int value) {
    check_cell(column, value);
    cells_[row * columns() + column] = value;
}

bool Dataset::complete() const {
    return std::find(cells_.begin(), cells_.end(), kMissing) == cells_.end();
}

std::size_t Dataset::missing_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), kMissing));
}

std::size_t Dataset::missing_count(std::size_t column) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows(); ++r) n += cell(r, column) == kMissing;
    return n;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    Dataset out(variables_);
    out.cells_.reserve(rows.size() * columns());
    for (auto r : rows) {
        auto src = row(r);
        out.cells_.insert(out.cells_.end(), src.begin(), src.end());
    }
    return out;
}

std::vector<RowGroup> group_rows(const Dataset& data) {
    std::map<std::vector<int>, RowGroup> groups;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto row = data.row(r);
        std::vector<int> key(row.begin(), row.end());
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
            it->second.cells = std::move(key);
            it->second.first_row = r;
        }
        ++it->second.count;
    }
    std::vector<RowGroup> out;
    out.reserve(groups.size());
    for (auto& [key, g] : groups) out.push_back(std::move(g));
    return out;
}

void require_same_schema(const std::vector<Variable>& expected, const std::vector<Variable>& actual) {
    if (expected.size() != actual.size()) throw SchemaError("schema mismatch: different variable count");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].name != actual[i].name) {
            throw SchemaError("schema mismatch at column " + std::to_string(i) + ": '" + expected[i].name +
                              "' vs '" + actual[i].name + "'");
        }
        if (expected[i].states != actual[i].states) {
            throw SchemaError("schema mismatch: states of '" + expected[i].name + "' differ");
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_number) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            if (!field.empty() || was_quoted) throw ParseError("stray quote", line_number, fields.size() + 1);
            quoted = was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else if (ch == '\r' && i + 1 == line.size()) {
            break;
        } else {
            if (was_quoted) throw ParseError("text after closing quote", line_number, fields.size() + 1);
            field.push_back(ch);
        }
    }
    if (quoted) throw ParseError("unterminated quote", line_number, fields.size() + 1);
    fields.push_back(std::move(field));
    return fields;
}

std::string quote_csv(std::string_view field) {
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

Dataset read_table(std::istream& in, const std::vector<Variable>& schema, const std::string& missing_token) {
    Dataset data(schema);
    std::string line;
    std::size_t line_number = 0;
    std::vector<std::size_t> column_map;  // file column -> schema column
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line, line_number);
        if (column_map.empty()) {
            if (fields.size() != schema.size()) {
                throw SchemaError("header has " + std::to_string(fields.size()) + " columns, schema has " +
                                  std::to_string(schema.size()));
            }
            std::vector<bool> seen(schema.size(), false);
            for (const auto& name : fields) {
                auto c = data.find_column(name);
                if (!c) throw SchemaError("header column '" + name + "' is not in the schema");
                if (seen[*c]) throw SchemaError("header column '" + name + "' repeated");
                seen[*c] = true;
                column_map.push_back(*c);
            }
            continue;
        }
        if (fields.size() != schema.size()) {
            throw ParseError("ragged row: expected " + std::to_string(schema.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_number);
        }
        std::vector<int> row(schema.size(), kMissing);
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const auto& text = fields[f];
            if (text.empty() || text == "NA" || text == missing_token) continue;
            const auto c = column_map[f];
            auto s = schema[c].find_state(text);
            if (!s) {
                throw ParseError("unknown label '" + text + "' for variable '" + schema[c].name + "'", line_number,
                                 f + 1);
            }
            row[c] = *s;
        }
        data.add_row(row);
    }
    if (column_map.empty()) throw SchemaError("table has no header row");
    return data;
}

Dataset read_table(const std::string& path, const std::vector<Variable>& schema, const std::string& missing_token) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_table(in, schema, missing_token);
}

void write_table(std::ostream& out, const Dataset& data) {
    for (std::size_t c = 0; c < data.columns(); ++c) {
        if (c) out << ',';
        out << quote_csv(data.variables()[c].name);
    }
    out << '\n';
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < data.columns(); ++c) {
            if (c) out << ',';
            const int v = data.cell(r, c);
            if (v != kMissing) out << quote_csv(data.variables()[c].states[v]);
        }
        out << '\n';
    }
}

void write_table(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_table(out, data);
}

// ---------------------------------------------------------------------------

std::vector<Variable> Schema::variables() const {
    std::vector<Variable> out;
    for (const auto& e : entries) out.push_back(e.variable);
    return out;
}

Tiers Schema::tiers() const {
    std::map<std::size_t, std::vector<std::string>> by_tier;
    for (const auto& e : entries)
        if (e.tier) by_tier[*e.tier].push_back(e.variable.name);
    Tiers out;
    for (auto& [t, names] : by_tier) out.push_back(std::move(names));
    return out;
}

PriorKnowledge Schema::knowledge() const {
    std::vector<std::string> names;
    for (const auto& e : entries) names.push_back(e.variable.name);
    PriorKnowledge k({}, {}, tiers());
    for (const auto& c : context) k = with_context_variable(k, c, names);
    return k;
}

Schema read_schema(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("schema is not valid JSON: ") + e.what());
    }
    Schema schema;
    try {
        for (const auto& v : j.at("variables")) {
            SchemaEntry entry;
            entry.variable.name = v.at("name").get<std::string>();
            entry.variable.states = v.at("states").get<std::vector<std::string>>();
            if (v.contains("tier") && !v.at("tier").is_null()) entry.tier = v.at("tier").get<std::size_t>();
            schema.entries.push_back(std::move(entry));
        }
        if (j.contains("context")) schema.context = j.at("context").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema: ") + e.what());
    }
    validate_variables(schema.variables());
    for (const auto& c : schema.context) {
        auto it = std::find_if(schema.entries.begin(), schema.entries.end(),
                               [&](const SchemaEntry& e) { return e.variable.name == c; });
        if (it == schema.entries.end()) throw SchemaError("context variable '" + c + "' is not in the schema");
    }
    return schema;
}

Schema read_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_schema(in);
}

void write_schema(std::ostream& out, const Schema& schema) {
    nlohmann::ordered_json j;
    j["variables"] = nlohmann::ordered_json::array();
    for (const auto& e : schema.entries) {
        nlohmann::ordered_json v;
        v["name"] = e.variable.name;
        v["states"] = e.variable.states;
        if (e.tier) v["tier"] = *e.tier;
        j["variables"].push_back(std::move(v));
    }
    j["context"] = schema.context;
    out << j.dump(2) << '\n';
}

void write_schema(const std::string& path, const Schema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_schema(out, schema);
}

PriorKnowledge with_context_variable(const PriorKnowledge& knowledge, const std::string& context,
                                     const std::vector<std::string>& nodes) {
    if (std::find(nodes.begin(), nodes.end(), context) == nodes.end()) throw UnknownNode(context);
    Tiers tiers{{context}};
    for (const auto& tier : knowledge.tiers()) {
        std::vector<std::string> rest;
        for (const auto& n : tier)
            if (n != context) rest.push_back(n);
        if (!rest.empty()) tiers.push_back(std::move(rest));
    }
    EdgeSet forbidden = knowledge.forbidden();
    for (const auto& n : nodes)
        if (n != context) forbidden.insert(Edge{n, context});
    return PriorKnowledge(knowledge.required(), std::move(forbidden), std::move(tiers));
}

// ---------------------------------------------------------------------------

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double ratio, std::uint64_t seed,
                                             const std::optional<std::string>& stratify_on) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie strictly between 0 and 1");
    const std::size_t n = data.rows();
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    Rng rng(seed);
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    if (!stratify_on) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng);
        train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
        const auto column = data.column_of(*stratify_on);
        const auto card = data.variables()[column].cardinality();
        // Group `card` collects Missing.
        std::vector<std::vector<std::size_t>> groups(card + 1);
        for (std::size_t r = 0; r < n; ++r) {
            const int v = data.cell(r, column);
            groups[v == kMissing ? card : static_cast<std::size_t>(v)].push_back(r);
        }
        std::vector<std::size_t> quota(groups.size());
        std::vector<double> remainder(groups.size());
        std::size_t allocated = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double share = ratio * static_cast<double>(groups[g].size());
            quota[g] = static_cast<std::size_t>(std::floor(share));
            remainder[g] = share - static_cast<double>(quota[g]);
            allocated += quota[g];
        }
        std::vector<std::size_t> by_remainder(groups.size());
        std::iota(by_remainder.begin(), by_remainder.end(), 0);
        std::stable_sort(by_remainder.begin(), by_remainder.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t i = 0; allocated < n_train && i < by_remainder.size(); ++i) {
            const auto g = by_remainder[i];
            if (quota[g] < groups[g].size()) {
                ++quota[g];
                ++allocated;
            }
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            shuffle(groups[g], rng);
            for (std::size_t i = 0; i < groups[g].size(); ++i) (i < quota[g] ? train : test).push_back(groups[g][i]);
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {data.select_rows(train), data.select_rows(test)};
}

std::string to_string(Mechanism mechanism) {
    switch (mechanism) {
        case Mechanism::MCAR: return "mcar";
        case Mechanism::MAR: return "mar";
        case Mechanism::MNAR: return "mnar";
    }
    return "?";
}

Mechanism parse_mechanism(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "mcar") return Mechanism::MCAR;
    if (lower == "mar") return Mechanism::MAR;
    if (lower == "mnar") return Mechanism::MNAR;
    throw ValidationError("unknown missingness mechanism '" + std::string(text) + "'");
}

std::vector<double> state_missingness(double rate, std::size_t cardinality) {
    constexpr double kEps = 1e-9;
    std::vector<double> weight(cardinality);
    double mean = 0.0;
    for (std::size_t j = 0; j < cardinality; ++j) {
        weight[j] = 2.0 * static_cast<double>(j) / (static_cast<double>(cardinality) - 1.0 + kEps);
        mean += weight[j];
    }
    mean /= static_cast<double>(cardinality);
    std::vector<double> p(cardinality);
    for (std::size_t j = 0; j < cardinality; ++j) p[j] = std::clamp(rate * weight[j] / mean, 0.0, 1.0);
    return p;
}

Dataset inject_missing(const Dataset& data, const MissingnessSpec& spec) {
    if (!(spec.rate >= 0.0 && spec.rate <= 1.0)) throw ValidationError("missingness rate must lie in [0, 1]");
    const auto target = data.column_of(spec.target);
    if (data.missing_count(target) != 0) {
        throw ValidationError("target column '" + spec.target + "' must be complete before injection");
    }
    std::size_t driver = target;
    if (spec.mechanism == Mechanism::MAR) {
        driver = data.column_of(spec.driver);
        if (driver == target) throw ValidationError("MAR driver must differ from the target");
    }
    const auto per_state = state_missingness(spec.rate, data.variables()[driver].cardinality());

    Dataset out = data;
    Rng rng(spec.seed);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        double p = spec.rate;
        if (spec.mechanism != Mechanism::MCAR) {
            const int s = data.cell(r, driver);
            if (s != kMissing) p = per_state[static_cast<std::size_t>(s)];
        }
        if (rng.uniform() < p) out.set_cell(r, target, kMissing);
    }
    return out;
}

}  // namespace cbn
