#ifndef CBN_FACTOR_HPP
#define CBN_FACTOR_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace cbn {

/// Nonnegative table over a set of variables. Scope is sorted ascending by
/// variable position; the last scope variable varies fastest in `values`.
struct Factor {
    std::vector<std::size_t> scope;
    std::vector<std::size_t> cards;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    bool contains(std::size_t var) const;
    /// Scalar factor with value `v`.
    static Factor constant(double v) { return Factor{{}, {}, {v}}; }
};

Factor multiply(const Factor& a, const Factor& b);
Factor sum_out(const Factor& f, std::size_t var);
/// Fixes every scope variable with evidence[var] != kMissing to its state.
Factor reduce(const Factor& f, std::span<const int> evidence);
double total(const Factor& f);

}  // namespace cbn

#endif  // CBN_FACTOR_HPP
