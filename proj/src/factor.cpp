#include "cbn/factor.hpp"

#include <algorithm>
#include <numeric>

#include "cbn/data.hpp"

namespace cbn {

namespace {

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& cards) {
    std::vector<std::size_t> s(cards.size(), 1);
    for (std::size_t i = cards.size(); i-- > 1;) s[i - 1] = s[i] * cards[i];
    return s;
}

// Stride of each `target` scope variable inside `source`, 0 when absent.
std::vector<std::size_t> projected_strides(const Factor& source, const std::vector<std::size_t>& target) {
    const auto strides = strides_of(source.cards);
    std::vector<std::size_t> out(target.size(), 0);
    for (std::size_t i = 0; i < target.size(); ++i) {
        auto it = std::lower_bound(source.scope.begin(), source.scope.end(), target[i]);
        if (it != source.scope.end() && *it == target[i]) out[i] = strides[static_cast<std::size_t>(it - source.scope.begin())];
    }
    return out;
}

}  // namespace

bool Factor::contains(std::size_t var) const { return std::binary_search(scope.begin(), scope.end(), var); }

Factor multiply(const Factor& a, const Factor& b) {
    Factor out;
    std::set_union(a.scope.begin(), a.scope.end(), b.scope.begin(), b.scope.end(), std::back_inserter(out.scope));
    out.cards.resize(out.scope.size());
    for (std::size_t i = 0; i < out.scope.size(); ++i) {
        auto it = std::lower_bound(a.scope.begin(), a.scope.end(), out.scope[i]);
        if (it != a.scope.end() && *it == out.scope[i]) {
            out.cards[i] = a.cards[static_cast<std::size_t>(it - a.scope.begin())];
        } else {
            auto jt = std::lower_bound(b.scope.begin(), b.scope.end(), out.scope[i]);
            out.cards[i] = b.cards[static_cast<std::size_t>(jt - b.scope.begin())];
        }
    }
    const std::size_t total_size =
        std::accumulate(out.cards.begin(), out.cards.end(), std::size_t{1}, std::multiplies<>());
    out.values.resize(total_size);
    const auto sa = projected_strides(a, out.scope);
    const auto sb = projected_strides(b, out.scope);

    std::vector<std::size_t> state(out.scope.size(), 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    for (std::size_t k = 0; k < total_size; ++k) {
        out.values[k] = a.values[ia] * b.values[ib];
        // Odometer increment, last variable fastest.
        for (std::size_t d = out.scope.size(); d-- > 0;) {
            if (++state[d] < out.cards[d]) {
                ia += sa[d];
                ib += sb[d];
                break;
            }
            ia -= sa[d] * (out.cards[d] - 1);
            ib -= sb[d] * (out.cards[d] - 1);
            state[d] = 0;
        }
    }
    return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
    auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
    if (it == f.scope.end() || *it != var) return f;
    const auto pos = static_cast<std::size_t>(it - f.scope.begin());
    const auto strides = strides_of(f.cards);
    const std::size_t inner = strides[pos];
    const std::size_t card = f.cards[pos];
    const std::size_t outer = f.values.size() / (inner * card);

    Factor out;
    out.scope = f.scope;
    out.cards = f.cards;
    out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(pos));
    out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(pos));
    out.values.assign(outer * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t s = 0; s < card; ++s)
            for (std::size_t i = 0; i < inner; ++i) out.values[o * inner + i] += f.values[(o * card + s) * inner + i];
    return out;
}

Factor reduce(const Factor& f, std::span<const int> evidence) {
    Factor out;
    const auto strides = strides_of(f.cards);
    std::size_t base = 0;
    std::vector<std::size_t> keep_strides;
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        const int e = evidence[f.scope[i]];
        if (e == kMissing) {
            out.scope.push_back(f.scope[i]);
            out.cards.push_back(f.cards[i]);
            keep_strides.push_back(strides[i]);
        } else {
            base += static_cast<std::size_t>(e) * strides[i];
        }
    }
    if (out.scope.size() == f.scope.size()) return f;
    const std::size_t total_size =
        std::accumulate(out.cards.begin(), out.cards.end(), std::size_t{1}, std::multiplies<>());
    out.values.resize(total_size);
    std::vector<std::size_t> state(out.scope.size(), 0);
    std::size_t idx = base;
    for (std::size_t k = 0; k < total_size; ++k) {
        out.values[k] = f.values[idx];
        for (std::size_t d = out.scope.size(); d-- > 0;) {
            if (++state[d] < out.cards[d]) {
                idx += keep_strides[d];
                break;
            }
            idx -= keep_strides[d] * (out.cards[d] - 1);
            state[d] = 0;
        }
    }
    return out;
}

double total(const Factor& f) { return std::accumulate(f.values.begin(), f.values.end(), 0.0); }

}  // namespace cbn
