#pragma once

// Finite posets with a least element, their zeta and Moebius functions, and
// the four inversion transforms built on them.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tbal/error.hpp"

namespace tbal {

using Index = std::size_t;

namespace detail {

template <class T, class = void>
struct is_index_range : std::false_type {};

template <class T>
struct is_index_range<T, std::void_t<decltype(std::begin(std::declval<const T&>())),
                                     decltype(std::end(std::declval<const T&>()))>>
    : std::bool_constant<std::is_integral_v<std::decay_t<decltype(*std::begin(std::declval<const T&>()))>>> {};

template <class Label>
std::string label_string(const Label& label) {
    if constexpr (std::is_convertible_v<Label, std::string>) {
        return std::string(label);
    } else if constexpr (std::is_arithmetic_v<Label>) {
        std::ostringstream os;
        os << label;
        return os.str();
    } else if constexpr (is_index_range<Label>::value) {
        std::ostringstream os;
        os << '(';
        bool first = true;
        for (const auto& v : label) {
            if (!first) os << ',';
            os << v;
            first = false;
        }
        os << ')';
        return os.str();
    } else {
        static_assert(sizeof(Label) == 0, "label type has no string form");
    }
}

// Fixed-width bitset over poset elements; only used during validation.
class BitRows {
public:
    BitRows(std::size_t rows, std::size_t cols) : words_((cols + 63) / 64), bits_(rows * words_, 0) {}

    void set(std::size_t r, std::size_t c) { bits_[r * words_ + c / 64] |= (std::uint64_t{1} << (c % 64)); }

    [[nodiscard]] bool test(std::size_t r, std::size_t c) const {
        return (bits_[r * words_ + c / 64] >> (c % 64)) & 1U;
    }

    // First column set in row b but not in row a, or npos.
    [[nodiscard]] std::size_t first_missing(std::size_t a, std::size_t b) const {
        for (std::size_t w = 0; w < words_; ++w) {
            std::uint64_t extra = bits_[b * words_ + w] & ~bits_[a * words_ + w];
            if (extra != 0) return w * 64 + static_cast<std::size_t>(__builtin_ctzll(extra));
        }
        return npos;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::size_t words_;
    std::vector<std::uint64_t> bits_;
};

}  // namespace detail

class Poset;

namespace detail {
struct PosetAccess;
}  // namespace detail

struct PosetOptions {
    /// Posets up to this size are validated exhaustively; larger ones by sampling.
    std::size_t exhaustive_cap = 4096;
    std::size_t transitivity_samples = 1 << 18;
    std::uint64_t sample_seed = 0x9e3779b97f4a7c15ULL;
};

/// Immutable finite poset with a least element. Elements are 0-based indices;
/// labels are kept only for reporting.
class Poset {
public:
    [[nodiscard]] std::size_t size() const noexcept { return up_.size(); }
    [[nodiscard]] Index bottom() const noexcept { return bottom_; }

    [[nodiscard]] bool leq(Index s, Index x) const {
        const auto& u = up_[s];
        return std::binary_search(u.begin(), u.end(), x);
    }

    /// Elements s with x <= s, ascending index order, x included.
    [[nodiscard]] std::span<const Index> up(Index x) const noexcept { return up_[x]; }
    /// Elements s with s <= x, ascending index order, x included.
    [[nodiscard]] std::span<const Index> down(Index x) const noexcept { return down_[x]; }

    /// A linear extension: s < x implies s appears before x.
    [[nodiscard]] std::span<const Index> topological_order() const noexcept { return topo_; }
    [[nodiscard]] std::size_t rank(Index x) const noexcept { return rank_[x]; }

    [[nodiscard]] const std::string& label(Index x) const noexcept { return labels_[x]; }

    /// S+ = S without the bottom, ascending index order.
    [[nodiscard]] std::vector<Index> upper() const {
        std::vector<Index> out;
        out.reserve(size() - 1);
        for (Index x = 0; x < size(); ++x)
            if (x != bottom_) out.push_back(x);
        return out;
    }

    /// Same order, different display names.
    [[nodiscard]] Poset with_labels(std::vector<std::string> labels) && {
        if (labels.size() != size()) throw Error(ErrorKind::InvalidArgument, "label count mismatch");
        labels_ = std::move(labels);
        return std::move(*this);
    }

    /// Number of comparable pairs (s, x) with s <= x.
    [[nodiscard]] std::size_t relation_size() const noexcept { return relation_size_; }

private:
    friend struct detail::PosetAccess;

    Poset() = default;

    std::vector<std::string> labels_;
    std::vector<std::vector<Index>> up_;
    std::vector<std::vector<Index>> down_;
    std::vector<Index> topo_;
    std::vector<std::size_t> rank_;
    Index bottom_ = 0;
    std::size_t relation_size_ = 0;
};

namespace detail {

struct PosetAccess {
    template <class Label, class Leq>
    static Poset build(std::span<const Label> labels, Leq& leq, const PosetOptions& opts);
};

template <class Label, class Leq>
Poset PosetAccess::build(std::span<const Label> labels, Leq& leq, const PosetOptions& opts) {
    const std::size_t n = labels.size();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "poset needs at least one element");

    Poset P;
    P.labels_.reserve(n);
    for (const auto& l : labels) P.labels_.push_back(detail::label_string(l));
    P.up_.assign(n, {});
    P.down_.assign(n, {});

    auto witness = [&](Index a, Index b) { return P.labels_[a] + " and " + P.labels_[b]; };

    for (Index s = 0; s < n; ++s) {
        for (Index x = 0; x < n; ++x) {
            if (leq(labels[s], labels[x])) {
                P.up_[s].push_back(x);
                P.down_[x].push_back(s);
            }
        }
    }
    for (Index x = 0; x < n; ++x) {
        P.relation_size_ += P.up_[x].size();
        if (!std::binary_search(P.up_[x].begin(), P.up_[x].end(), x))
            throw Error(ErrorKind::NotAPartialOrder, "reflexivity fails at " + P.labels_[x]);
    }
    for (Index s = 0; s < n; ++s) {
        for (Index x : P.up_[s]) {
            if (x != s && P.leq(x, s))
                throw Error(ErrorKind::NotAPartialOrder, "antisymmetry fails for " + witness(s, x));
        }
    }

    if (n <= opts.exhaustive_cap) {
        detail::BitRows up_bits(n, n);
        for (Index s = 0; s < n; ++s)
            for (Index x : P.up_[s]) up_bits.set(s, x);
        for (Index x = 0; x < n; ++x) {
            for (Index y : P.up_[x]) {
                std::size_t z = up_bits.first_missing(x, y);
                if (z != detail::BitRows::npos)
                    throw Error(ErrorKind::NotAPartialOrder,
                                "transitivity fails for " + witness(x, y) + " and " + P.labels_[z]);
            }
        }
    } else {
        std::mt19937_64 rng(opts.sample_seed);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (std::size_t t = 0; t < opts.transitivity_samples; ++t) {
            Index x = pick(rng);
            const auto& ux = P.up_[x];
            Index y = ux[std::uniform_int_distribution<std::size_t>(0, ux.size() - 1)(rng)];
            const auto& uy = P.up_[y];
            Index z = uy[std::uniform_int_distribution<std::size_t>(0, uy.size() - 1)(rng)];
            if (!P.leq(x, z))
                throw Error(ErrorKind::NotAPartialOrder,
                            "transitivity fails for " + witness(x, y) + " and " + P.labels_[z]);
        }
    }

    bool found = false;
    for (Index x = 0; x < n; ++x) {
        if (P.up_[x].size() == n) {
            P.bottom_ = x;
            found = true;
            break;
        }
    }
    if (!found) throw Error(ErrorKind::NoBottom, "no element is below all others");

    // Down-set sizes strictly grow along the order, so sorting by them is a
    // linear extension.
    P.topo_.resize(n);
    std::iota(P.topo_.begin(), P.topo_.end(), Index{0});
    std::stable_sort(P.topo_.begin(), P.topo_.end(),
                     [&](Index a, Index b) { return P.down_[a].size() < P.down_[b].size(); });
    P.rank_.resize(n);
    for (std::size_t r = 0; r < n; ++r) P.rank_[P.topo_[r]] = r;
    return P;
}

}  // namespace detail

/// Builds and validates a poset from labels and a binary predicate
/// `leq(label_a, label_b)`. Throws NotAPartialOrder with a witness or NoBottom.
template <class Label, class Leq>
Poset build_poset(std::span<const Label> labels, Leq leq, const PosetOptions& opts = {}) {
    return detail::PosetAccess::build(labels, leq, opts);
}

template <class Label, class Leq>
Poset build_poset(const std::vector<Label>& labels, Leq leq, const PosetOptions& opts = {}) {
    return build_poset(std::span<const Label>(labels), std::move(leq), opts);
}

using MultiIndex = std::vector<std::size_t>;

/// True iff a <= b componentwise.
inline bool componentwise_leq(const MultiIndex& a, const MultiIndex& b) {
    for (std::size_t m = 0; m < a.size(); ++m)
        if (a[m] > b[m]) return false;
    return true;
}

/// Points of a grid (or any subset of one) under the componentwise order.
/// Labels are printed 1-based.
inline Poset make_componentwise_poset(const std::vector<MultiIndex>& points, const PosetOptions& opts = {}) {
    std::vector<MultiIndex> labels = points;
    for (auto& l : labels)
        for (auto& v : l) ++v;
    return build_poset(labels, componentwise_leq, opts);
}

/// [n_1] x ... x [n_N] in row-major element order.
inline Poset make_grid_poset(const std::vector<std::size_t>& shape) {
    std::size_t total = 1;
    for (auto s : shape) total *= s;
    std::vector<MultiIndex> pts;
    pts.reserve(total);
    MultiIndex idx(shape.size(), 0);
    for (std::size_t t = 0; t < total; ++t) {
        pts.push_back(idx);
        for (std::size_t m = shape.size(); m-- > 0;) {
            if (++idx[m] < shape[m]) break;
            idx[m] = 0;
        }
    }
    return make_componentwise_poset(pts);
}

inline Poset make_chain(std::size_t n) {
    std::vector<std::size_t> labels(n);
    std::iota(labels.begin(), labels.end(), std::size_t{1});
    return build_poset(labels, [](std::size_t a, std::size_t b) { return a <= b; });
}

/// Subsets of {1..k} ordered by inclusion; element i is the bitmask i.
inline Poset make_power_set(std::size_t k) {
    std::vector<std::string> labels;
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        std::string s = "{";
        for (std::size_t b = 0; b < k; ++b)
            if (mask & (std::size_t{1} << b)) s += (s.size() > 1 ? "," : "") + std::to_string(b + 1);
        labels.push_back(s + "}");
    }
    std::vector<std::size_t> masks(labels.size());
    std::iota(masks.begin(), masks.end(), std::size_t{0});
    return build_poset(masks, [](std::size_t a, std::size_t b) { return (a & b) == a; })
        .with_labels(std::move(labels));
}

/// Coordinate-list sparse matrix, entries sorted by (row, col).
template <class T>
struct SparseMatrix {
    struct Entry {
        Index row;
        Index col;
        T value;
    };
    std::size_t dim = 0;
    std::vector<Entry> entries;

    [[nodiscard]] T at(Index r, Index c) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{r, c},
                                   [](const Entry& e, const std::pair<Index, Index>& k) {
                                       return std::pair{e.row, e.col} < k;
                                   });
        return (it != entries.end() && it->row == r && it->col == c) ? it->value : T{0};
    }

    [[nodiscard]] std::size_t nonzeros() const noexcept { return entries.size(); }
};

/// zeta(s, x) = 1 iff s <= x.
inline SparseMatrix<int> zeta_matrix(const Poset& P) {
    SparseMatrix<int> Z;
    Z.dim = P.size();
    Z.entries.reserve(P.relation_size());
    for (Index s = 0; s < P.size(); ++s)
        for (Index x : P.up(s)) Z.entries.push_back({s, x, 1});
    return Z;
}

/// Moebius function by the row recursion mu(x,x) = 1,
/// mu(x,y) = -sum_{x <= s < y} mu(x,s), in exact integer arithmetic.
inline SparseMatrix<std::int64_t> mobius_matrix(const Poset& P) {
    const std::size_t n = P.size();
    SparseMatrix<std::int64_t> M;
    M.dim = n;
    M.entries.reserve(P.relation_size());

    std::vector<std::int64_t> row(n, 0);
    std::vector<char> in_up(n, 0);
    std::vector<Index> order;
    for (Index x = 0; x < n; ++x) {
        auto ux = P.up(x);
        order.assign(ux.begin(), ux.end());
        std::sort(order.begin(), order.end(), [&](Index a, Index b) { return P.rank(a) < P.rank(b); });
        for (Index y : ux) in_up[y] = 1;
        for (Index y : order) {
            if (y == x) {
                row[y] = 1;
                continue;
            }
            std::int64_t acc = 0;
            for (Index s : P.down(y))
                if (s != y && in_up[s]) acc += row[s];
            row[y] = -acc;
        }
        for (Index y : ux) {
            if (row[y] != 0) M.entries.push_back({x, y, row[y]});
            in_up[y] = 0;
            row[y] = 0;
        }
    }
    return M;
}

struct IncidencePair {
    SparseMatrix<int> zeta;
    SparseMatrix<std::int64_t> mobius;
};

inline IncidencePair incidence(const Poset& P) { return {zeta_matrix(P), mobius_matrix(P)}; }

/// Column x of the Moebius function: pairs (s, mu(s, x)) for s <= x with mu != 0.
inline std::vector<std::pair<Index, std::int64_t>> mobius_column(const Poset& P, Index x) {
    auto dx = P.down(x);
    std::vector<Index> order(dx.begin(), dx.end());
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return P.rank(a) > P.rank(b); });
    std::vector<std::int64_t> col(P.size(), 0);
    std::vector<char> in_down(P.size(), 0);
    for (Index s : dx) in_down[s] = 1;
    std::vector<std::pair<Index, std::int64_t>> out;
    // Column form of the same inverse: sum_{s <= t <= x} mu(t, x) = delta(s, x).
    for (Index s : order) {
        if (s == x) {
            col[s] = 1;
        } else {
            std::int64_t acc = 0;
            for (Index t : P.up(s))
                if (t != s && in_down[t]) acc += col[t];
            col[s] = -acc;
        }
    }
    for (Index s : dx)
        if (col[s] != 0) out.emplace_back(s, col[s]);
    return out;
}

// ---------------------------------------------------------------------------
// Transforms. The inversions use triangular substitution along a linear
// extension, which computes the same sums as the Moebius matrix without
// materializing it.

/// g(x) = sum_{s <= x} f(s)
inline std::vector<double> sum_below(const Poset& P, std::span<const double> f) {
    std::vector<double> g(P.size(), 0.0);
    for (Index x = 0; x < P.size(); ++x) {
        double acc = 0.0;
        for (Index s : P.down(x)) acc += f[s];
        g[x] = acc;
    }
    return g;
}

/// h(x) = sum_{s >= x} f(s)
inline std::vector<double> sum_above(const Poset& P, std::span<const double> f) {
    std::vector<double> h(P.size(), 0.0);
    for (Index x = 0; x < P.size(); ++x) {
        double acc = 0.0;
        for (Index s : P.up(x)) acc += f[s];
        h[x] = acc;
    }
    return h;
}

/// Inverse of sum_below: f(x) = sum_s mu(s, x) g(s).
inline std::vector<double> invert_sum_below(const Poset& P, std::span<const double> g) {
    std::vector<double> f(P.size(), 0.0);
    for (Index x : P.topological_order()) {
        double acc = g[x];
        for (Index s : P.down(x))
            if (s != x) acc -= f[s];
        f[x] = acc;
    }
    return f;
}

/// Inverse of sum_above: f(x) = sum_s mu(x, s) h(s).
inline std::vector<double> invert_sum_above(const Poset& P, std::span<const double> h) {
    std::vector<double> f(P.size(), 0.0);
    auto topo = P.topological_order();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Index x = *it;
        double acc = h[x];
        for (Index s : P.up(x))
            if (s != x) acc -= f[s];
        f[x] = acc;
    }
    return f;
}

}  // namespace tbal
