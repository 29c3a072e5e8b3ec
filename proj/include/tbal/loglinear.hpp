#pragma once

// Log-linear model on a poset: theta / eta coordinates, the potentials psi and
// phi, the KL divergence, and the closed-form metric and connection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tbal/error.hpp"
#include "tbal/poset.hpp"

namespace tbal {

/// Strictly positive probability vector over poset elements.
class Distribution {
public:
    /// Checks positivity and that the entries sum to one within `tol`.
    static Distribution from_probabilities(std::vector<double> p, double tol = 1e-12) {
        check_positive(p);
        double total = std::accumulate(p.begin(), p.end(), 0.0);
        if (std::abs(total - 1.0) > tol)
            throw Error(ErrorKind::InvalidArgument, "probabilities sum to " + std::to_string(total));
        return Distribution(std::move(p));
    }

    /// Rescales strictly positive weights to unit mass.
    static Distribution normalize(std::vector<double> w) {
        check_positive(w);
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& v : w) v /= total;
        return Distribution(std::move(w));
    }

    [[nodiscard]] std::size_t size() const noexcept { return p_.size(); }
    [[nodiscard]] double operator[](Index i) const noexcept { return p_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return p_; }

private:
    explicit Distribution(std::vector<double> p) : p_(std::move(p)) {}

    static void check_positive(const std::vector<double>& p) {
        if (p.empty()) throw Error(ErrorKind::InvalidArgument, "empty distribution");
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!(p[i] > 0.0) || !std::isfinite(p[i]))
                throw Error(ErrorKind::NonPositiveEntry, "p[" + std::to_string(i) + "] = " + std::to_string(p[i]));
    }

    std::vector<double> p_;
};

enum class Coord { theta, eta };

struct CoordinateVector {
    Coord kind = Coord::theta;
    std::vector<double> values;

    [[nodiscard]] double operator[](Index i) const noexcept { return values[i]; }
};

struct LoglinearOptions {
    /// p_from_theta refuses prefix sums of log p above this bound.
    double log_bound = 700.0;
    /// Budget on |S+|^3 for the connection array.
    std::size_t connection_budget = std::size_t{1} << 24;
};

namespace detail {

inline void require_size(const Poset& P, std::size_t n, const char* what) {
    if (n != P.size())
        throw Error(ErrorKind::InvalidArgument,
                    std::string(what) + " has " + std::to_string(n) + " entries, poset has " + std::to_string(P.size()));
}

}  // namespace detail

/// theta(x) = sum_s mu(s, x) log p(s)
inline CoordinateVector theta_from_p(const Poset& P, const Distribution& p) {
    detail::require_size(P, p.size(), "distribution");
    std::vector<double> logp(p.size());
    for (Index x = 0; x < p.size(); ++x) logp[x] = std::log(p[x]);
    return {Coord::theta, invert_sum_below(P, logp)};
}

/// eta(x) = sum_{s >= x} p(s)
inline CoordinateVector eta_from_p(const Poset& P, const Distribution& p) {
    detail::require_size(P, p.size(), "distribution");
    return {Coord::eta, sum_above(P, p.values())};
}

struct ThetaDecode {
    Distribution p;
    /// log of the mass before normalization; theta(bottom) - shift normalizes.
    double shift = 0.0;
};

/// log p(x) = sum_{s <= x} theta(s), evaluated in the log domain with the
/// maximum subtracted before exponentiating.
inline ThetaDecode p_from_theta(const Poset& P, const CoordinateVector& theta, const LoglinearOptions& opts = {}) {
    detail::require_size(P, theta.values.size(), "theta");
    std::vector<double> logp = sum_below(P, theta.values);
    double top = -std::numeric_limits<double>::infinity();
    for (Index x = 0; x < logp.size(); ++x) {
        if (!std::isfinite(logp[x]) || logp[x] > opts.log_bound)
            throw Error(ErrorKind::OverflowRisk, "log p at " + P.label(x) + " is " + std::to_string(logp[x]));
        top = std::max(top, logp[x]);
    }
    double mass = 0.0;
    for (auto& v : logp) {
        v = std::exp(v - top);
        mass += v;
    }
    for (auto& v : logp) v /= mass;
    return {Distribution::normalize(std::move(logp)), top + std::log(mass)};
}

/// p(x) = sum_s mu(x, s) eta(s); fails if the result leaves the simplex.
inline Distribution p_from_eta(const Poset& P, const CoordinateVector& eta) {
    detail::require_size(P, eta.values.size(), "eta");
    if (std::abs(eta[P.bottom()] - 1.0) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "eta(bottom) must be 1");
    std::vector<double> p = invert_sum_above(P, eta.values);
    for (Index x = 0; x < p.size(); ++x)
        if (!(p[x] > 0.0))
            throw Error(ErrorKind::NonPositiveResult, "p at " + P.label(x) + " is " + std::to_string(p[x]));
    return Distribution::from_probabilities(std::move(p), 1e-10);
}

/// psi(theta) = -theta(bottom).
inline double psi(const Poset& P, const CoordinateVector& theta) { return -theta[P.bottom()]; }

/// log sum_x exp(sum_{bottom < s <= x} theta(s)); equals psi for normalized theta
/// and does not read theta(bottom).
inline double log_partition(const Poset& P, std::span<const double> theta) {
    std::vector<double> t(theta.begin(), theta.end());
    t[P.bottom()] = 0.0;
    std::vector<double> e = sum_below(P, t);
    double top = *std::max_element(e.begin(), e.end());
    double acc = 0.0;
    for (double v : e) acc += std::exp(v - top);
    return top + std::log(acc);
}

/// Negative entropy sum_x p(x) log p(x).
inline double phi(const Poset& P, const Distribution& p) {
    detail::require_size(P, p.size(), "distribution");
    double acc = 0.0;
    for (double v : p.values()) acc += v * std::log(v);
    return acc;
}

/// Bregman divergence D[P, Q] = sum_x q(x) log(q(x) / p(x)), i.e. KL(Q || P).
inline double kl_divergence(const Poset& S, const Distribution& P, const Distribution& Q) {
    detail::require_size(S, P.size(), "P");
    detail::require_size(S, Q.size(), "Q");
    double acc = 0.0;
    for (Index x = 0; x < P.size(); ++x) acc += Q[x] * std::log(Q[x] / P[x]);
    return acc;
}

/// sum_{s >= x, s >= y} p(s) for all x, y in `idx`.
inline Eigen::MatrixXd joint_upper_mass(const Poset& P, std::span<const double> p, std::span<const Index> idx) {
    const std::size_t m = idx.size();
    Eigen::MatrixXd G(m, m);
    std::vector<double> w(P.size(), 0.0);
    for (std::size_t a = 0; a < m; ++a) {
        for (Index s : P.up(idx[a])) w[s] = p[s];
        for (std::size_t b = a; b < m; ++b) {
            double acc = 0.0;
            for (Index s : P.up(idx[b])) acc += w[s];
            G(a, b) = acc;
            G(b, a) = acc;
        }
        for (Index s : P.up(idx[a])) w[s] = 0.0;
    }
    return G;
}

/// Riemannian metric g(theta) or g(eta) restricted to the elements `idx`.
inline Eigen::MatrixXd metric(const Poset& P, const Distribution& p, Coord coord, std::span<const Index> idx) {
    detail::require_size(P, p.size(), "distribution");
    const std::size_t m = idx.size();
    if (coord == Coord::theta) {
        Eigen::MatrixXd G = joint_upper_mass(P, p.values(), idx);
        std::vector<double> eta = sum_above(P, p.values());
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) G(a, b) -= eta[idx[a]] * eta[idx[b]];
        return G;
    }
    // g_xy(eta) = sum_s mu(s,x) mu(s,y) / p(s)
    Eigen::MatrixXd Mu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P.size()), static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a)
        for (auto [s, mu] : mobius_column(P, idx[a])) Mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = static_cast<double>(mu);
    Eigen::VectorXd inv_p(static_cast<Eigen::Index>(P.size()));
    for (Index s = 0; s < P.size(); ++s) inv_p(static_cast<Eigen::Index>(s)) = 1.0 / p[s];
    return Mu.transpose() * inv_p.asDiagonal() * Mu;
}

/// Metric over all of S+.
inline Eigen::MatrixXd metric(const Poset& P, const Distribution& p, Coord coord) {
    auto up = P.upper();
    return metric(P, p, coord, up);
}

/// Dense symmetric rank-3 array.
struct Tensor3 {
    std::size_t dim = 0;
    std::vector<double> data;

    [[nodiscard]] double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * dim + j) * dim + k];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data[(i * dim + j) * dim + k]; }
};

/// Connection Gamma(theta) or Gamma(eta) over S+ (ordered as Poset::upper()).
inline Tensor3 connection(const Poset& P, const Distribution& p, Coord coord, const LoglinearOptions& opts = {}) {
    detail::require_size(P, p.size(), "distribution");
    const auto idx = P.upper();
    const std::size_t m = idx.size();
    if (m > 0 && m * m * m > opts.connection_budget)
        throw Error(ErrorKind::SizeCap, std::to_string(m) + "^3 entries exceed the connection budget");

    // Per element s, a factor c_x(s) so that Gamma_xyz = k * sum_s w(s) c_x c_y c_z.
    const std::size_t n = P.size();
    std::vector<double> c(n * m, 0.0);
    std::vector<double> w(n);
    double k = 0.5;
    if (coord == Coord::theta) {
        std::vector<double> eta = sum_above(P, p.values());
        for (std::size_t a = 0; a < m; ++a) {
            for (Index s = 0; s < n; ++s) c[s * m + a] = -eta[idx[a]];
            for (Index s : P.up(idx[a])) c[s * m + a] += 1.0;
        }
        for (Index s = 0; s < n; ++s) w[s] = p[s];
    } else {
        k = -0.5;
        for (std::size_t a = 0; a < m; ++a)
            for (auto [s, mu] : mobius_column(P, idx[a])) c[s * m + a] = static_cast<double>(mu);
        for (Index s = 0; s < n; ++s) w[s] = 1.0 / (p[s] * p[s]);
    }

    Tensor3 G{m, std::vector<double>(m * m * m, 0.0)};
    for (std::size_t x = 0; x < m; ++x)
        for (std::size_t y = x; y < m; ++y)
            for (std::size_t z = y; z < m; ++z) {
                double acc = 0.0;
                for (Index s = 0; s < n; ++s) acc += w[s] * c[s * m + x] * c[s * m + y] * c[s * m + z];
                acc *= k;
                const std::size_t v[3] = {x, y, z};
                // all six permutations
                G(v[0], v[1], v[2]) = acc;
                G(v[0], v[2], v[1]) = acc;
                G(v[1], v[0], v[2]) = acc;
                G(v[1], v[2], v[0]) = acc;
                G(v[2], v[0], v[1]) = acc;
                G(v[2], v[1], v[0]) = acc;
            }
    return G;
}

}  // namespace tbal
