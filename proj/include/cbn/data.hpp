#ifndef CBN_DATA_HPP
#define CBN_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbn/graph.hpp"

namespace cbn {

/// Cell value for an unobserved entry.
inline constexpr int kMissing = -1;

/// A categorical variable with ordered, unique state labels.
struct Variable {
    std::string name;
    std::vector<std::string> states;

    std::size_t cardinality() const noexcept { return states.size(); }
    std::optional<int> find_state(std::string_view label) const;
    /// Throws ValidationError naming the variable and label.
    int state_index(std::string_view label) const;

    friend bool operator==(const Variable&, const Variable&) = default;
};

/// Throws SchemaError on fewer than two states, duplicate labels or duplicate
/// variable names.
void validate_variables(const std::vector<Variable>& variables);

/// Categorical table, row-major, one state index (or kMissing) per cell.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Variable> variables);
    /// Throws ValidationError when a cell is out of range or the size is not
    /// a multiple of the column count.
    Dataset(std::vector<Variable> variables, std::vector<int> cells);

    const std::vector<Variable>& variables() const noexcept { return variables_; }
    std::vector<std::string> names() const;
    std::size_t rows() const noexcept { return columns() == 0 ? 0 : cells_.size() / columns(); }
    std::size_t columns() const noexcept { return variables_.size(); }
    bool empty() const noexcept { return cells_.empty(); }

    int cell(std::size_t row, std::size_t column) const { return cells_[row * columns() + column]; }
    std::span<const int> row(std::size_t r) const {
        return {cells_.data() + r * columns(), columns()};
    }
    const std::vector<int>& cells() const noexcept { return cells_; }

    std::size_t column_of(std::string_view name) const;
    std::optional<std::size_t> find_column(std::string_view name) const;

    void add_row(std::span<const int> values);
    void set_cell(std::size_t row, std::size_t column, int value);

    bool complete() const;
    std::size_t missing_count() const;
    std::size_t missing_count(std::size_t column) const;

    Dataset select_rows(std::span<const std::size_t> rows) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    void check_cell(std::size_t column, int value) const;

    std::vector<Variable> variables_;
    std::vector<int> cells_;
};

/// Distinct records with their multiplicity and first row index, sorted by
/// content so downstream sums do not depend on record order.
struct RowGroup {
    std::vector<int> cells;
    std::size_t count = 0;
    std::size_t first_row = 0;
};
std::vector<RowGroup> group_rows(const Dataset& data);

/// Throws SchemaError unless both carry identical variable lists.
void require_same_schema(const std::vector<Variable>& expected, const std::vector<Variable>& actual);

// ---------------------------------------------------------------------------
// Table files: comma-separated, header row, labels double-quoted on output.
// A cell equal to the missing token, empty or "NA" reads as Missing.

Dataset read_table(std::istream& in, const std::vector<Variable>& schema, const std::string& missing_token = "");
Dataset read_table(const std::string& path, const std::vector<Variable>& schema,
                   const std::string& missing_token = "");
void write_table(std::ostream& out, const Dataset& data);
void write_table(const std::string& path, const Dataset& data);

/// Splits one CSV line, honouring double quotes ("" escapes a quote).
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_number = 0);
std::string quote_csv(std::string_view field);

// ---------------------------------------------------------------------------
// Schema files (JSON): variables with ordered states and an optional tier,
// plus context variables that may have children but never parents.

struct SchemaEntry {
    Variable variable;
    std::optional<std::size_t> tier;
};

struct Schema {
    std::vector<SchemaEntry> entries;
    std::vector<std::string> context;

    std::vector<Variable> variables() const;
    /// Tiers ordered by tier number; empty tiers dropped.
    Tiers tiers() const;
    /// Tier-derived knowledge plus the context-variable rule.
    PriorKnowledge knowledge() const;
};

Schema read_schema(std::istream& in);
Schema read_schema(const std::string& path);
void write_schema(std::ostream& out, const Schema& schema);
void write_schema(const std::string& path, const Schema& schema);

/// Places `context` alone in a new earliest tier and forbids every edge into
/// it, so it may have children but never parents.
PriorKnowledge with_context_variable(const PriorKnowledge& knowledge, const std::string& context,
                                     const std::vector<std::string>& nodes);

// ---------------------------------------------------------------------------

/// Seeded shuffle, then the first floor(ratio * rows) records form the train
/// set. With `stratify_on`, each state (and the Missing group) is allocated
/// floor(ratio * size) train records plus largest-remainder rounding, so every
/// group lands within one record of its proportional share.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double ratio, std::uint64_t seed,
                                             const std::optional<std::string>& stratify_on = std::nullopt);

enum class Mechanism { MCAR, MAR, MNAR };

std::string to_string(Mechanism mechanism);
Mechanism parse_mechanism(std::string_view text);

struct MissingnessSpec {
    Mechanism mechanism = Mechanism::MCAR;
    double rate = 0.0;
    std::string target;
    std::string driver;  // MAR only
    std::uint64_t seed = 0;
};

/// Per-state blanking probability used by MAR (driver state) and MNAR (own
/// state): weight_j = 2j / (J - 1 + 1e-9), rescaled to mean 1 over the J
/// states, then p_j = clamp(rate * weight_j, 0, 1).
std::vector<double> state_missingness(double rate, std::size_t cardinality);

/// Blanks cells of the target column. One uniform draw is consumed per record
/// in row order; cell r is blanked iff draw < p(r). Other cells never change.
Dataset inject_missing(const Dataset& data, const MissingnessSpec& spec);

}  // namespace cbn

#endif  // CBN_DATA_HPP
