#pragma once

// Matrix and tensor balancing as e-projection onto the submanifold of
// multistochastic arrays, plus the Sinkhorn-Knopp baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tbal/dense_array.hpp"
#include "tbal/error.hpp"
#include "tbal/loglinear.hpp"
#include "tbal/newton.hpp"
#include "tbal/poset.hpp"
#include "tbal/projection.hpp"

namespace tbal {

/// Support of a preprocessed array together with the bookkeeping needed to
/// map results back to the caller's indexing. Offsets refer to the reduced,
/// permuted grid in row-major order.
struct GridModel {
    std::vector<std::size_t> original_shape;
    std::vector<std::size_t> shape;
    /// kept[m][k]: original index of reduced position k along mode m.
    std::vector<std::vector<std::size_t>> kept;
    /// dropped[m]: original indices of all-zero slices along mode m.
    std::vector<std::vector<std::size_t>> dropped;
    /// Reduced, permuted input.
    DenseArray reduced;
    /// Grid offsets of the support, ascending; the bottom is support[0].
    std::vector<std::size_t> support;
    /// iota[m][y]: support position of the least element of the fiber that
    /// runs along mode m, y indexing the remaining modes row-major. For
    /// matrices iota[1][i] is the least element of row i.
    std::vector<std::vector<Index>> iota;
    double total = 0.0;

    [[nodiscard]] std::size_t order() const noexcept { return shape.size(); }
    [[nodiscard]] bool full_support() const noexcept { return support.size() == reduced.size(); }
    [[nodiscard]] bool equilateral() const noexcept { return reduced.equilateral(); }

    [[nodiscard]] MultiIndex point(Index s) const { return reduced.unravel(support[s]); }

    /// The support as a poset under the componentwise order. Element i is
    /// support position i.
    [[nodiscard]] Poset poset(std::size_t cap = 4096) const {
        if (support.size() > cap)
            throw Error(ErrorKind::SizeCap, "support of " + std::to_string(support.size()) + " exceeds " + std::to_string(cap));
        std::vector<MultiIndex> pts;
        pts.reserve(support.size());
        for (Index s = 0; s < support.size(); ++s) pts.push_back(point(s));
        return make_componentwise_poset(pts);
    }
};

namespace detail {

inline std::vector<std::size_t> without(const std::vector<std::size_t>& v, std::size_t m) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < v.size(); ++q)
        if (q != m) out.push_back(v[q]);
    return out;
}

inline std::string index_label(const MultiIndex& x) {
    std::string s = "(";
    for (std::size_t m = 0; m < x.size(); ++m) s += (m ? "," : "") + std::to_string(x[m] + 1);
    return s + ")";
}

// Reorders the slices of mode m by the lexicographically smallest support
// index among the remaining modes. Returns true if the order changed.
inline bool sort_mode(DenseArray& A, std::vector<std::size_t>& kept, std::size_t m) {
    const std::size_t N = A.order(), len = A.shape()[m];
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<MultiIndex> key(len, MultiIndex(N - 1, none));
    const auto& d = A.data();
    for (std::size_t off = 0; off < d.size(); ++off) {
        if (d[off] == 0.0) continue;
        MultiIndex x = A.unravel(off), rest;
        rest.reserve(N - 1);
        for (std::size_t q = 0; q < N; ++q)
            if (q != m) rest.push_back(x[q]);
        if (rest < key[x[m]]) key[x[m]] = std::move(rest);
    }
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    bool changed = false;
    for (std::size_t k = 0; k < len; ++k) changed |= order[k] != k;
    if (!changed) return false;

    DenseArray B = DenseArray::zeros(A.shape());
    std::vector<std::size_t> inverse(len);
    for (std::size_t k = 0; k < len; ++k) inverse[order[k]] = k;
    for (std::size_t off = 0; off < d.size(); ++off) {
        MultiIndex x = A.unravel(off);
        x[m] = inverse[x[m]];
        B(x) = d[off];
    }
    std::vector<std::size_t> next(len);
    for (std::size_t k = 0; k < len; ++k) next[k] = kept[order[k]];
    kept = std::move(next);
    A = std::move(B);
    return true;
}

}  // namespace detail

/// Drops all-zero slices, permutes each mode so that the least elements of
/// consecutive slices form a chain, and normalizes the support to a
/// distribution. The returned Distribution is indexed by support position.
/// Entries at or below zero_floor count as zero.
inline std::pair<GridModel, Distribution> preprocess(const DenseArray& A, double zero_floor = 0.0) {
    if (!(zero_floor >= 0.0)) throw Error(ErrorKind::InvalidArgument, "zero floor must be nonnegative");
    A.require_nonnegative();
    if (zero_floor > 0.0) {
        DenseArray B = A;
        for (auto& v : B.data())
            if (v <= zero_floor) v = 0.0;
        return preprocess(B);
    }
    const std::size_t N = A.order();
    GridModel g;
    g.original_shape = A.shape();
    g.kept.resize(N);
    g.dropped.resize(N);

    for (std::size_t m = 0; m < N; ++m) {
        std::vector<double> mass(A.shape()[m], 0.0);
        const auto& d = A.data();
        for (std::size_t off = 0; off < d.size(); ++off) mass[(off / A.stride(m)) % A.shape()[m]] += d[off];
        for (std::size_t k = 0; k < mass.size(); ++k) (mass[k] > 0.0 ? g.kept[m] : g.dropped[m]).push_back(k);
    }
    for (std::size_t m = 0; m < N; ++m) g.shape.push_back(g.kept[m].size());

    DenseArray R = DenseArray::zeros(g.shape);
    for (std::size_t off = 0; off < R.size(); ++off) {
        MultiIndex x = R.unravel(off);
        for (std::size_t m = 0; m < N; ++m) x[m] = g.kept[m][x[m]];
        R.data()[off] = A(x);
    }

    std::size_t longest = *std::max_element(g.shape.begin(), g.shape.end());
    const std::size_t cap = std::max<std::size_t>(1, longest * N);
    bool settled = false;
    for (std::size_t round = 0; round < cap && !settled; ++round) {
        settled = true;
        for (std::size_t m = 0; m < N; ++m) settled &= !detail::sort_mode(R, g.kept[m], m);
    }
    if (!settled)
        throw Error(ErrorKind::PermutationFailed, "slice order did not settle within " + std::to_string(cap) + " rounds");
    if (R.data()[0] == 0.0) throw Error(ErrorKind::BottomMissing, "corner entry is zero after reordering");

    const auto& d = R.data();
    std::vector<Index> position(d.size(), std::numeric_limits<Index>::max());
    for (std::size_t off = 0; off < d.size(); ++off)
        if (d[off] > 0.0) {
            position[off] = g.support.size();
            g.support.push_back(off);
            g.total += d[off];
        }

    // Least element of every fiber: the first nonzero along the fiber's mode.
    // It must not move backwards when any other index grows.
    g.iota.assign(N, {});
    for (std::size_t m = 0; m < N; ++m) {
        const std::size_t st = R.stride(m), len = g.shape[m];
        const auto rest = detail::without(g.shape, m);
        const std::size_t count = R.size() / len;
        std::vector<std::size_t> first(count, std::numeric_limits<std::size_t>::max());
        auto& iota = g.iota[m];
        iota.assign(count, 0);
        for (std::size_t off : g.support) {
            std::size_t y = (off / (st * len)) * st + off % st;
            if (first[y] == std::numeric_limits<std::size_t>::max()) {
                first[y] = (off / st) % len;
                iota[y] = position[off];
            }
        }
        std::vector<std::size_t> rstride(rest.size(), 1);
        for (std::size_t q = rest.size(); q-- > 1;) rstride[q - 1] = rstride[q] * rest[q];
        for (std::size_t y = 0; y < count; ++y) {
            if (first[y] == std::numeric_limits<std::size_t>::max()) {
                MultiIndex x(N, 0);
                for (std::size_t q = 0, j = 0; q < N; ++q)
                    if (q != m) x[q] = (y / rstride[j]) % rest[j], ++j;
                x[m] = 0;
                throw Error(ErrorKind::ZeroFiber, "fiber along mode " + std::to_string(m + 1) + " through " +
                                                      detail::index_label(x) + " has no nonzero entry");
            }
            for (std::size_t j = 0; j < rest.size(); ++j)
                if ((y / rstride[j]) % rest[j] + 1 < rest[j] && first[y + rstride[j]] < first[y])
                    throw Error(ErrorKind::PermutationFailed,
                                "least elements " + detail::index_label(R.unravel(g.support[iota[y]])) + " and " +
                                    detail::index_label(R.unravel(g.support[iota[y + rstride[j]]])) + " are not ordered");
        }
    }

    std::vector<double> p;
    p.reserve(g.support.size());
    for (std::size_t off : g.support) p.push_back(d[off] / g.total);
    g.reduced = std::move(R);
    return {std::move(g), Distribution::normalize(std::move(p))};
}

/// The e-kind constraints of balancing together with the bookkeeping that
/// says which scaling factor each constrained element feeds.
struct BalanceConstraints {
    ConstraintSet beta;
    /// owner[m][y]: position in beta.dom() of iota[m][y] if this (m, y) is the
    /// first to name that element, otherwise npos.
    std::vector<std::vector<std::size_t>> owner;
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

/// The fiber along mode m at y sums to 1 / n^(N-1) in p exactly when, for all
/// such fibers, eta(iota[m][y]) = prod_{q != m} (n - y_q) / n^(N-1) (0-based
/// y). Elements named by several fibers keep the first target.
inline BalanceConstraints balance_constraints(const GridModel& g) {
    if (!g.equilateral())
        throw Error(ErrorKind::ShapeMismatch, "balancing needs equal sides after dropping zero slices");
    const std::size_t N = g.order(), n = g.shape[0];
    const std::size_t count = g.reduced.size() / n;
    const double cells = static_cast<double>(count);
    std::vector<Index> dom;
    std::vector<double> target;
    std::vector<std::size_t> where(g.support.size(), BalanceConstraints::npos);
    std::vector<std::vector<std::size_t>> owner(N, std::vector<std::size_t>(count, BalanceConstraints::npos));
    for (std::size_t m = N; m-- > 0;)
        for (std::size_t y = 0; y < count; ++y) {
            Index e = g.iota[m][y];
            if (where[e] != BalanceConstraints::npos) continue;
            where[e] = dom.size();
            owner[m][y] = dom.size();
            dom.push_back(e);
            double above = 1.0;
            for (std::size_t rest = y, j = 0; j + 1 < N; ++j, rest /= n) above *= static_cast<double>(n - rest % n);
            target.push_back(above / cells);
        }
    return {ConstraintSet::e_kind(0, g.support.size(), std::move(dom), std::move(target)), std::move(owner)};
}

inline ConstraintSet constraints(const GridModel& g) { return balance_constraints(g).beta; }

/// Per-mode scaling factors. For matrices factors[0] = r over rows and
/// factors[1] = s over columns. For order N >= 3, factors[m] is R^m, an
/// order-(N-1) array over the indices of every mode except m. The global
/// normalizer n^(N-1) / sum(a) is already folded into factors[0].
struct Scalings {
    std::vector<DenseArray> factors;
    double global = 1.0;
};

/// Scaling factors from theta on dom(beta) before and after balancing, both
/// listed in the order of balance_constraints(g).beta.dom(). The factor of
/// the fibers along mode m is exp of the prefix sum of the theta change over
/// the elements that mode owns.
inline Scalings extract_scalings(const GridModel& g, std::span<const double> theta_start, std::span<const double> theta_final) {
    auto bc = balance_constraints(g);
    if (theta_start.size() != bc.beta.size() || theta_final.size() != bc.beta.size())
        throw Error(ErrorKind::ShapeMismatch, "theta vectors do not match dom(beta)");
    const std::size_t N = g.order(), n = g.shape[0];
    const double global = std::pow(static_cast<double>(n), static_cast<double>(N - 1)) / g.total;

    std::vector<std::vector<std::size_t>> pos(N);
    for (std::size_t m = 0; m < N; ++m) {
        pos[m].assign(g.original_shape[m], BalanceConstraints::npos);
        for (std::size_t k = 0; k < g.kept[m].size(); ++k) pos[m][g.kept[m][k]] = k;
    }

    Scalings out;
    out.global = global;
    std::vector<DenseArray> per_mode;
    for (std::size_t m = 0; m < N; ++m) {
        DenseArray F = DenseArray::filled(N - 1, n, 0.0);
        for (std::size_t y = 0; y < F.size(); ++y) {
            std::size_t i = bc.owner[m][y];
            if (i != BalanceConstraints::npos) F.data()[y] = theta_final[i] - theta_start[i];
        }
        for (std::size_t q = 0; q + 1 < N; ++q) {
            const std::size_t st = F.stride(q);
            for (std::size_t off = 0; off < F.size(); ++off)
                if ((off / st) % n != 0) F.data()[off] += F.data()[off - st];
        }
        const bool carries_global = N == 2 ? m == 1 : m == 0;
        DenseArray f = DenseArray::zeros(detail::without(g.original_shape, m));
        for (std::size_t off = 0; off < f.size(); ++off) {
            MultiIndex y = f.unravel(off);
            bool live = true;
            for (std::size_t j = 0, q = 0; q < N; ++q) {
                if (q == m) continue;
                y[j] = pos[q][y[j]];
                live &= y[j] != BalanceConstraints::npos;
                ++j;
            }
            f.data()[off] = live ? std::exp(F(y)) * (carries_global ? global : 1.0) : 1.0;
        }
        per_mode.push_back(std::move(f));
    }
    if (N == 2) std::swap(per_mode[0], per_mode[1]);
    out.factors = std::move(per_mode);
    return out;
}

/// a(x) times the product of the factors that apply to x.
inline DenseArray apply_scalings(const DenseArray& A, const Scalings& s) {
    const std::size_t N = A.order();
    if (s.factors.size() != N) throw Error(ErrorKind::ShapeMismatch, "one factor per mode expected");
    DenseArray out = A;
    for (std::size_t off = 0; off < A.size(); ++off) {
        MultiIndex x = A.unravel(off);
        double f = 1.0;
        if (N == 2) {
            f = s.factors[0].data()[x[0]] * s.factors[1].data()[x[1]];
        } else {
            for (std::size_t m = 0; m < N; ++m) f *= s.factors[m](detail::without(x, m));
        }
        out.data()[off] *= f;
    }
    return out;
}

enum class BalanceMethod { newton, sinkhorn };

inline const char* to_string(BalanceMethod m) { return m == BalanceMethod::newton ? "newton" : "sinkhorn"; }

struct BalanceTraceRow {
    std::size_t iteration = 0;
    double residual = 0.0;
    double elapsed_seconds = 0.0;
};

struct BalanceResult {
    DenseArray balanced;
    Scalings scalings;
    std::size_t iterations = 0;
    std::vector<BalanceTraceRow> trace;
    bool converged = false;
    double residual = 0.0;
    BalanceMethod method = BalanceMethod::newton;
};

/// Which engine evaluates the e-projection.
enum class BalancePath {
    automatic,  ///< grid for full support, poset for small sparse supports, grid otherwise
    grid,       ///< dense prefix / suffix sums over the grid, zeros masked
    poset,      ///< generic zeta sums over the materialized support poset
};

namespace detail {

/// e-projection state on the reduced grid. Coordinates are the change of
/// theta on dom(beta) since the start; log p is recovered by an N-dimensional
/// prefix sum of that change.
class GridEModel {
public:
    GridEModel(const GridModel& g, const Distribution& p0, const ConstraintSet& beta)
        : g_(g), beta_(beta), shape_(g.shape), strides_(g.order()) {
        const std::size_t N = g.order();
        for (std::size_t m = 0; m < N; ++m) strides_[m] = g.reduced.stride(m);
        cells_ = g.reduced.size();
        logp0_.resize(g.support.size());
        for (Index s = 0; s < g.support.size(); ++s) logp0_[s] = std::log(p0[s]);
        p_.assign(p0.values().begin(), p0.values().end());
        delta_.assign(beta.size(), 0.0);
        dom_points_.reserve(beta.size());
        for (Index d : beta.dom()) dom_points_.push_back(g.point(d));
        refresh_eta();
    }

    [[nodiscard]] Eigen::VectorXd coords() const { return Eigen::Map<const Eigen::VectorXd>(delta_.data(), static_cast<Eigen::Index>(delta_.size())); }

    bool evaluate(const Eigen::VectorXd& c) {
        std::vector<double> delta(delta_.size());
        delta[0] = delta_[0];
        for (std::size_t i = 1; i < delta.size(); ++i) delta[i] = c(static_cast<Eigen::Index>(i));

        std::vector<double> field(cells_, 0.0);
        for (std::size_t i = 0; i < delta.size(); ++i) field[g_.support[beta_.dom()[i]]] += delta[i];
        prefix_sum(field);

        std::vector<double> logp(g_.support.size());
        double top = -std::numeric_limits<double>::infinity();
        for (Index s = 0; s < logp.size(); ++s) top = std::max(top, logp[s] = logp0_[s] + field[g_.support[s]]);
        if (!std::isfinite(top)) return false;
        std::vector<double> p(logp.size());
        double mass = 0.0;
        for (Index s = 0; s < p.size(); ++s) {
            p[s] = std::exp(logp[s] - top);
            if (!(p[s] > 0.0)) return false;
            mass += p[s];
        }
        for (auto& v : p) v /= mass;
        delta[0] -= top + std::log(mass);
        delta_ = std::move(delta);
        p_ = std::move(p);
        refresh_eta();
        return true;
    }

    [[nodiscard]] Eigen::VectorXd defect() const {
        Eigen::VectorXd d(static_cast<Eigen::Index>(beta_.size()));
        for (std::size_t i = 0; i < beta_.size(); ++i)
            d(static_cast<Eigen::Index>(i)) = eta_[g_.support[beta_.dom()[i]]] - beta_.target()[i];
        return d;
    }

    /// J_xy = eta(x v y) - |S| eta(x) eta(y), with eta extended by zero off
    /// the support so the join may leave it.
    [[nodiscard]] Eigen::MatrixXd jacobian() const {
        const auto m = static_cast<Eigen::Index>(beta_.size());
        const std::size_t N = shape_.size();
        const double scale = g_.support.size() > 1 ? static_cast<double>(g_.support.size()) : 0.0;
        std::vector<double> e(beta_.size());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = eta_[g_.support[beta_.dom()[i]]];
        Eigen::MatrixXd J(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            const auto& x = dom_points_[static_cast<std::size_t>(a)];
            for (Eigen::Index b = a; b < m; ++b) {
                const auto& y = dom_points_[static_cast<std::size_t>(b)];
                std::size_t off = 0;
                for (std::size_t q = 0; q < N; ++q) off += std::max(x[q], y[q]) * strides_[q];
                double v = eta_[off] - scale * e[static_cast<std::size_t>(a)] * e[static_cast<std::size_t>(b)];
                J(a, b) = v;
                J(b, a) = v;
            }
        }
        return J;
    }

    /// p over support positions.
    [[nodiscard]] const std::vector<double>& p() const noexcept { return p_; }
    [[nodiscard]] const std::vector<double>& delta() const noexcept { return delta_; }

private:
    void prefix_sum(std::vector<double>& f) const {
        for (std::size_t m = 0; m < shape_.size(); ++m) {
            const std::size_t st = strides_[m], len = shape_[m];
            for (std::size_t off = 0; off < cells_; ++off)
                if ((off / st) % len != 0) f[off] += f[off - st];
        }
    }

    void suffix_sum(std::vector<double>& f) const {
        for (std::size_t m = 0; m < shape_.size(); ++m) {
            const std::size_t st = strides_[m], len = shape_[m];
            for (std::size_t off = cells_; off-- > 0;)
                if ((off / st) % len != len - 1) f[off] += f[off + st];
        }
    }

    void refresh_eta() {
        eta_.assign(cells_, 0.0);
        for (Index s = 0; s < p_.size(); ++s) eta_[g_.support[s]] = p_[s];
        suffix_sum(eta_);
    }

    const GridModel& g_;
    const ConstraintSet& beta_;
    std::vector<std::size_t> shape_, strides_;
    std::size_t cells_ = 0;
    std::vector<double> logp0_;
    std::vector<double> p_;
    std::vector<double> delta_;
    std::vector<double> eta_;  // dense suffix sums
    std::vector<MultiIndex> dom_points_;
};

// n^(N-1) p written into the reduced grid.
inline DenseArray scaled_reduced(const GridModel& g, std::span<const double> p) {
    const double f = std::pow(static_cast<double>(g.shape[0]), static_cast<double>(g.order() - 1));
    DenseArray out = DenseArray::zeros(g.shape);
    for (Index s = 0; s < p.size(); ++s) out.data()[g.support[s]] = f * p[s];
    return out;
}

inline DenseArray restore(const GridModel& g, const DenseArray& reduced) {
    DenseArray out = DenseArray::zeros(g.original_shape);
    for (std::size_t off = 0; off < reduced.size(); ++off) {
        MultiIndex x = reduced.unravel(off);
        for (std::size_t m = 0; m < x.size(); ++m) x[m] = g.kept[m][x[m]];
        out(x) = reduced.data()[off];
    }
    return out;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Drives a model to the balancing constraints; the fiber residual of the
/// current iterate must also reach tol.
template <class Model, class OnIterate>
NewtonOutcome run_balance(Model& model, const GridModel& g, const ProjectionOptions& opts, BalanceResult& res,
                          Clock::time_point t0, OnIterate&& on_iterate) {
    double fiber = residual(scaled_reduced(g, model.p()));
    if (opts.record_trace) res.trace.push_back({0, fiber, seconds_since(t0)});
    auto on_step = [&](std::size_t t, double) {
        fiber = residual(scaled_reduced(g, model.p()));
        if (opts.record_trace) res.trace.push_back({t, fiber, seconds_since(t0)});
        on_iterate(t, model.p());
    };
    auto done = [&] { return fiber <= opts.tol; };
    return newton_match(model, opts, on_step, done);
}

}  // namespace detail

/// Balancing by Newton's method on the e-projection. `on_iterate(t, p)` sees
/// p over support positions after every accepted step.
template <class OnIterate>
BalanceResult balance_newton(const DenseArray& A, const ProjectionOptions& opts, BalancePath path, OnIterate&& on_iterate,
                             std::size_t poset_cap = 4096, double zero_floor = 0.0) {
    const auto t0 = detail::Clock::now();
    auto [g, p0] = preprocess(A, zero_floor);
    auto bc = balance_constraints(g);

    if (path == BalancePath::automatic)
        path = g.full_support() || g.support.size() > poset_cap ? BalancePath::grid : BalancePath::poset;

    BalanceResult res;
    res.method = BalanceMethod::newton;
    std::vector<double> start, final_theta, p;
    NewtonOutcome out;
    if (path == BalancePath::grid) {
        detail::GridEModel model(g, p0, bc.beta);
        out = detail::run_balance(model, g, opts, res, t0, on_iterate);
        start.assign(bc.beta.size(), 0.0);
        final_theta = model.delta();
        p = model.p();
    } else {
        Poset S = g.poset(poset_cap);
        detail::PosetEModel model(S, p0, bc.beta);
        out = detail::run_balance(model, g, opts, res, t0, on_iterate);
        auto theta0 = theta_from_p(S, p0);
        for (Index d : bc.beta.dom()) {
            start.push_back(theta0[d]);
            final_theta.push_back(model.theta()[d]);
        }
        p = model.p();
    }

    res.iterations = out.iterations;
    auto reduced = detail::scaled_reduced(g, p);
    res.residual = residual(reduced);
    res.balanced = detail::restore(g, reduced);
    res.converged = out.converged && res.residual <= opts.tol;
    res.scalings = extract_scalings(g, start, final_theta);
    return res;
}

inline BalanceResult balance_newton(const DenseArray& A, const ProjectionOptions& opts = {},
                                    BalancePath path = BalancePath::automatic) {
    return balance_newton(A, opts, path, [](std::size_t, const std::vector<double>&) {});
}

/// Cyclic fiber normalization over modes 1..N until the residual reaches
/// tol. For matrices one sweep is r = 1/(A s) followed by s = 1/(A^T r).
inline BalanceResult sinkhorn(const DenseArray& A, double tol = 1e-6, std::size_t max_iter = 1000000,
                              bool record_trace = true) {
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
    A.require_nonnegative();
    if (!A.equilateral()) throw Error(ErrorKind::ShapeMismatch, "balancing needs equal sides");
    const auto t0 = detail::Clock::now();
    const std::size_t N = A.order(), n = A.shape()[0];
    const std::size_t fibers = A.size() / n;

    // Support entries with their fiber index along every mode.
    std::vector<std::size_t> cells;
    for (std::size_t off = 0; off < A.size(); ++off)
        if (A.data()[off] > 0.0) cells.push_back(off);
    std::vector<std::vector<std::size_t>> fiber_of(N, std::vector<std::size_t>(cells.size()));
    for (std::size_t m = 0; m < N; ++m) {
        const std::size_t st = A.stride(m);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            std::size_t off = cells[i];
            fiber_of[m][i] = (off / (st * n)) * st + off % st;
        }
    }
    std::vector<double> v(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) v[i] = A.data()[cells[i]];
    std::vector<std::vector<double>> factor(N, std::vector<double>(fibers, 1.0));

    std::vector<std::vector<double>> sums(N, std::vector<double>(fibers));
    auto compute_sums = [&](std::size_t m) {
        auto& s = sums[m];
        std::fill(s.begin(), s.end(), 0.0);
        const auto& f = fiber_of[m];
        for (std::size_t i = 0; i < v.size(); ++i) s[f[i]] += v[i];
    };
    auto current_residual = [&] {
        double acc = 0.0;
        for (std::size_t m = 0; m < N; ++m) {
            compute_sums(m);
            for (double s : sums[m]) acc += (s - 1.0) * (s - 1.0);
        }
        return std::sqrt(acc);
    };

    BalanceResult res;
    res.method = BalanceMethod::sinkhorn;
    double r = current_residual();
    for (std::size_t m = 0; m < N; ++m)
        for (std::size_t f = 0; f < fibers; ++f)
            if (sums[m][f] == 0.0)
                throw Error(ErrorKind::ZeroFiber, "fiber " + std::to_string(f + 1) + " along mode " + std::to_string(m + 1) + " is zero");
    if (record_trace) res.trace.push_back({0, r, detail::seconds_since(t0)});

    // Matrices normalize rows first.
    std::vector<std::size_t> modes(N);
    std::iota(modes.begin(), modes.end(), std::size_t{0});
    if (N == 2) std::swap(modes[0], modes[1]);

    std::size_t sweep = 0;
    while (r > tol && sweep < max_iter) {
        ++sweep;
        for (std::size_t m : modes) {
            if (m != modes.front()) compute_sums(m);  // the first mode's sums are current from the residual pass
            auto& s = sums[m];
            auto& fac = factor[m];
            for (std::size_t f = 0; f < fibers; ++f) {
                s[f] = 1.0 / s[f];
                fac[f] *= s[f];
            }
            const auto& fo = fiber_of[m];
            for (std::size_t i = 0; i < v.size(); ++i) v[i] *= s[fo[i]];
        }
        r = current_residual();
        if (record_trace) res.trace.push_back({sweep, r, detail::seconds_since(t0)});
    }

    res.iterations = sweep;
    res.residual = r;
    res.converged = r <= tol;
    res.balanced = DenseArray::zeros(A.shape());
    for (std::size_t i = 0; i < cells.size(); ++i) res.balanced.data()[cells[i]] = v[i];

    // factor[m] is indexed by the fiber along mode m, i.e. by every index but m.
    if (N == 2) {
        res.scalings.factors.push_back(DenseArray({n}, factor[1]));
        res.scalings.factors.push_back(DenseArray({n}, factor[0]));
    } else {
        for (std::size_t m = 0; m < N; ++m) res.scalings.factors.emplace_back(std::vector<std::size_t>(N - 1, n), factor[m]);
    }
    return res;
}

}  // namespace tbal
