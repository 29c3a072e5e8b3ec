#pragma once

// e- and m-projection of a distribution onto the submanifold that fixes
// coordinates on dom(beta), by Newton's method with closed-form Jacobians.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbal/error.hpp"
#include "tbal/loglinear.hpp"
#include "tbal/newton.hpp"
#include "tbal/poset.hpp"

namespace tbal {

enum class ProjectionKind { e, m };

/// The function beta: constrained elements with their target values. An
/// e-kind set fixes eta and always contains the bottom with target 1; an
/// m-kind set fixes theta on a subset of S+.
class ConstraintSet {
public:
    static ConstraintSet e_kind(const Poset& P, std::vector<Index> dom, std::vector<double> target) {
        return e_kind(P.bottom(), P.size(), std::move(dom), std::move(target));
    }

    /// Same as above for an outcome space known only by its size and bottom.
    static ConstraintSet e_kind(Index bottom, std::size_t size, std::vector<Index> dom, std::vector<double> target) {
        check_common(size, dom, target);
        auto it = std::find(dom.begin(), dom.end(), bottom);
        if (it == dom.end()) {
            dom.insert(dom.begin(), bottom);
            target.insert(target.begin(), 1.0);
        } else if (target[static_cast<std::size_t>(it - dom.begin())] != 1.0) {
            throw Error(ErrorKind::InvalidConstraint, "eta(bottom) target must be 1");
        }
        for (double v : target)
            if (!(v > 0.0 && v <= 1.0))
                throw Error(ErrorKind::InvalidConstraint, "eta target " + std::to_string(v) + " outside (0, 1]");
        return ConstraintSet(ProjectionKind::e, std::move(dom), std::move(target));
    }

    static ConstraintSet m_kind(const Poset& P, std::vector<Index> dom, std::vector<double> target) {
        check_common(P.size(), dom, target);
        for (Index d : dom)
            if (d == P.bottom()) throw Error(ErrorKind::InvalidConstraint, "m-kind domain must lie in S+");
        for (double v : target)
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidConstraint, "theta target not finite");
        return ConstraintSet(ProjectionKind::m, std::move(dom), std::move(target));
    }

    [[nodiscard]] ProjectionKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::span<const Index> dom() const noexcept { return dom_; }
    [[nodiscard]] std::span<const double> target() const noexcept { return target_; }
    [[nodiscard]] std::size_t size() const noexcept { return dom_.size(); }

private:
    ConstraintSet(ProjectionKind k, std::vector<Index> d, std::vector<double> t)
        : kind_(k), dom_(std::move(d)), target_(std::move(t)) {}

    static void check_common(std::size_t size, const std::vector<Index>& dom, const std::vector<double>& target) {
        if (dom.size() != target.size()) throw Error(ErrorKind::InvalidConstraint, "dom and target differ in length");
        std::vector<Index> sorted = dom;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(ErrorKind::InvalidConstraint, "duplicate element in dom");
        if (!sorted.empty() && sorted.back() >= size)
            throw Error(ErrorKind::InvalidConstraint, "element index out of range");
    }

    ProjectionKind kind_;
    std::vector<Index> dom_;
    std::vector<double> target_;
};

struct ProjectionTraceRow {
    std::size_t iteration = 0;
    double residual = 0.0;
    double kl_to_start = 0.0;
};

struct ProjectionResult {
    Distribution distribution;
    std::size_t iterations = 0;
    std::vector<ProjectionTraceRow> trace;
    bool converged = false;
    double residual = 0.0;
};

/// Optional callbacks for callers that need more than the projection itself.
struct ProjectionHooks {
    /// Extra convergence condition evaluated on the current p.
    std::function<bool(std::span<const double>)> accept;
    /// Called after every accepted step with the current p.
    std::function<void(std::size_t, double, std::span<const double>)> on_iteration;
};

namespace detail {

// Log-domain evaluation of p from theta with the bottom renormalized; false if
// some entry underflows to zero.
inline bool decode_theta(const Poset& P, std::vector<double>& theta, std::vector<double>& p) {
    std::vector<double> logp = sum_below(P, theta);
    double top = *std::max_element(logp.begin(), logp.end());
    if (!std::isfinite(top)) return false;
    double mass = 0.0;
    for (Index x = 0; x < logp.size(); ++x) {
        p[x] = std::exp(logp[x] - top);
        if (!(p[x] > 0.0)) return false;
        mass += p[x];
    }
    for (auto& v : p) v /= mass;
    theta[P.bottom()] -= top + std::log(mass);
    return true;
}

/// e-projection state: theta is the free coordinate on dom(beta) minus the
/// bottom, which only absorbs normalization.
class PosetEModel {
public:
    PosetEModel(const Poset& P, const Distribution& start, const ConstraintSet& beta)
        : P_(P), beta_(beta), theta_(theta_from_p(P, start).values), p_(start.values().begin(), start.values().end()) {
        refresh_eta();
    }

    [[nodiscard]] Eigen::VectorXd coords() const {
        Eigen::VectorXd c(static_cast<Eigen::Index>(beta_.size()));
        for (std::size_t i = 0; i < beta_.size(); ++i) c(static_cast<Eigen::Index>(i)) = theta_[beta_.dom()[i]];
        return c;
    }

    bool evaluate(const Eigen::VectorXd& c) {
        std::vector<double> theta = theta_;
        for (std::size_t i = 0; i < beta_.size(); ++i) {
            Index d = beta_.dom()[i];
            if (d != P_.bottom()) theta[d] = c(static_cast<Eigen::Index>(i));
        }
        std::vector<double> p(p_.size());
        if (!decode_theta(P_, theta, p)) return false;
        theta_ = std::move(theta);
        p_ = std::move(p);
        refresh_eta();
        return true;
    }

    [[nodiscard]] Eigen::VectorXd defect() const {
        Eigen::VectorXd d(static_cast<Eigen::Index>(beta_.size()));
        for (std::size_t i = 0; i < beta_.size(); ++i) d(static_cast<Eigen::Index>(i)) = eta_dom_[i] - beta_.target()[i];
        return d;
    }

    /// J'_xy = sum_s zeta(x,s) zeta(y,s) p(s) - |S| eta(x) eta(y)
    [[nodiscard]] Eigen::MatrixXd jacobian() const {
        Eigen::MatrixXd J = joint_upper_mass(P_, p_, beta_.dom());
        // With a single outcome the bottom row would vanish; any factor other
        // than 1 yields the same step.
        const double scale = P_.size() > 1 ? static_cast<double>(P_.size()) : 0.0;
        const auto m = static_cast<Eigen::Index>(beta_.size());
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b)
                J(a, b) -= scale * eta_dom_[static_cast<std::size_t>(a)] * eta_dom_[static_cast<std::size_t>(b)];
        return J;
    }

    [[nodiscard]] const std::vector<double>& p() const noexcept { return p_; }
    [[nodiscard]] const std::vector<double>& theta() const noexcept { return theta_; }

private:
    void refresh_eta() {
        eta_dom_.resize(beta_.size());
        for (std::size_t i = 0; i < beta_.size(); ++i) {
            double acc = 0.0;
            for (Index s : P_.up(beta_.dom()[i])) acc += p_[s];
            eta_dom_[i] = acc;
        }
    }

    const Poset& P_;
    const ConstraintSet& beta_;
    std::vector<double> theta_;
    std::vector<double> p_;
    std::vector<double> eta_dom_;
};

/// m-projection state: eta on dom(beta) is free, eta elsewhere is held.
class PosetMModel {
public:
    PosetMModel(const Poset& P, const Distribution& start, const ConstraintSet& beta)
        : P_(P), beta_(beta), eta_(eta_from_p(P, start).values), p_(start.values().begin(), start.values().end()) {
        const auto m = static_cast<Eigen::Index>(beta.size());
        mu_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P.size()), m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (auto [s, mu] : mobius_column(P, beta.dom()[static_cast<std::size_t>(a)]))
                mu_(static_cast<Eigen::Index>(s), a) = static_cast<double>(mu);
        refresh_theta();
    }

    [[nodiscard]] Eigen::VectorXd coords() const {
        Eigen::VectorXd c(static_cast<Eigen::Index>(beta_.size()));
        for (std::size_t i = 0; i < beta_.size(); ++i) c(static_cast<Eigen::Index>(i)) = eta_[beta_.dom()[i]];
        return c;
    }

    bool evaluate(const Eigen::VectorXd& c) {
        std::vector<double> eta = eta_;
        for (std::size_t i = 0; i < beta_.size(); ++i) eta[beta_.dom()[i]] = c(static_cast<Eigen::Index>(i));
        std::vector<double> p = invert_sum_above(P_, eta);
        for (double v : p)
            if (!(v > 0.0) || !std::isfinite(v)) return false;
        eta_ = std::move(eta);
        p_ = std::move(p);
        refresh_theta();
        return true;
    }

    [[nodiscard]] Eigen::VectorXd defect() const {
        Eigen::VectorXd d(static_cast<Eigen::Index>(beta_.size()));
        for (std::size_t i = 0; i < beta_.size(); ++i)
            d(static_cast<Eigen::Index>(i)) = theta_[beta_.dom()[i]] - beta_.target()[i];
        return d;
    }

    /// J_xy = sum_s mu(s,x) mu(s,y) / p(s)
    [[nodiscard]] Eigen::MatrixXd jacobian() const {
        Eigen::VectorXd inv_p(static_cast<Eigen::Index>(p_.size()));
        for (std::size_t s = 0; s < p_.size(); ++s) inv_p(static_cast<Eigen::Index>(s)) = 1.0 / p_[s];
        return mu_.transpose() * inv_p.asDiagonal() * mu_;
    }

    [[nodiscard]] const std::vector<double>& p() const noexcept { return p_; }
    [[nodiscard]] const std::vector<double>& eta() const noexcept { return eta_; }

private:
    void refresh_theta() {
        std::vector<double> logp(p_.size());
        for (std::size_t s = 0; s < p_.size(); ++s) logp[s] = std::log(p_[s]);
        theta_ = invert_sum_below(P_, logp);
    }

    const Poset& P_;
    const ConstraintSet& beta_;
    std::vector<double> eta_;
    std::vector<double> p_;
    std::vector<double> theta_;
    Eigen::MatrixXd mu_;
};

inline double kl_forward(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::log(a[i] / b[i]);
    return acc;
}

template <class Model>
ProjectionResult run_projection(Model& model, std::span<const double> start, const ProjectionOptions& opts,
                                const ProjectionHooks& hooks) {
    std::vector<ProjectionTraceRow> trace;
    if (opts.record_trace) trace.push_back({0, max_abs(model.defect()), 0.0});
    auto on_step = [&](std::size_t t, double r) {
        if (opts.record_trace) trace.push_back({t, r, kl_forward(model.p(), start)});
        if (hooks.on_iteration) hooks.on_iteration(t, r, model.p());
    };
    auto done = [&] { return !hooks.accept || hooks.accept(model.p()); };
    NewtonOutcome out = newton_match(model, opts, on_step, done);
    return {Distribution::normalize(model.p()), out.iterations, std::move(trace), out.converged, out.residual};
}

}  // namespace detail

/// e-projection: eta is driven to beta on dom(beta); theta on S+ outside dom
/// is never modified.
inline ProjectionResult e_project(const Poset& S, const Distribution& P, const ConstraintSet& beta,
                                  const ProjectionOptions& opts = {}, const ProjectionHooks& hooks = {}) {
    if (beta.kind() != ProjectionKind::e) throw Error(ErrorKind::InvalidConstraint, "e_project needs an e-kind set");
    detail::require_size(S, P.size(), "distribution");
    detail::PosetEModel model(S, P, beta);
    return detail::run_projection(model, P.values(), opts, hooks);
}

/// m-projection: theta is driven to beta on dom(beta); eta on S+ outside dom
/// is held at its starting value.
inline ProjectionResult m_project(const Poset& S, const Distribution& P, const ConstraintSet& beta,
                                  const ProjectionOptions& opts = {}, const ProjectionHooks& hooks = {}) {
    if (beta.kind() != ProjectionKind::m) throw Error(ErrorKind::InvalidConstraint, "m_project needs an m-kind set");
    detail::require_size(S, P.size(), "distribution");
    detail::PosetMModel model(S, P, beta);
    return detail::run_projection(model, P.values(), opts, hooks);
}

/// Pythagorean defect for Q in the same submanifold as the projection Pb of P.
/// m-kind: |KL(P||Q) - KL(P||Pb) - KL(Pb||Q)|; e-kind swaps every argument pair.
inline double pythagorean_check(const Poset& S, const Distribution& P, const Distribution& Pb, const Distribution& Q,
                                ProjectionKind kind) {
    detail::require_size(S, P.size(), "P");
    detail::require_size(S, Pb.size(), "P_beta");
    detail::require_size(S, Q.size(), "Q");
    auto p = P.values(), pb = Pb.values(), q = Q.values();
    if (kind == ProjectionKind::m)
        return std::abs(detail::kl_forward(p, q) - detail::kl_forward(p, pb) - detail::kl_forward(pb, q));
    return std::abs(detail::kl_forward(q, p) - detail::kl_forward(pb, p) - detail::kl_forward(q, pb));
}

}  // namespace tbal
