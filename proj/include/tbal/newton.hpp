#pragma once

// Newton iteration that drives a set of coordinates on dom(beta) until the
// dual coordinates match their targets. Both the poset projections and the
// grid balancing engine plug a model into the same loop, so their iterates
// agree step for step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "tbal/error.hpp"

namespace tbal {

enum class StepControl { off, halving };

struct ProjectionOptions {
    double tol = 1e-6;
    std::size_t max_iter = 100;
    StepControl step_control = StepControl::halving;
    std::size_t max_halvings = 30;
    /// Convergence also needs the accepted step to be this small in max-norm.
    /// Iterates whose coordinates keep drifting toward a boundary at a steady
    /// rate never satisfy it.
    double step_tol = 1e-3;
    bool record_trace = true;
};

struct NewtonOutcome {
    std::size_t iterations = 0;
    bool converged = false;
    double residual = 0.0;
};

/// Solves J x = r by LU with partial pivoting. Throws SingularJacobian when
/// the reciprocal condition estimate vanishes or the solution is not finite.
inline Eigen::VectorXd solve_jacobian(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    const double rcond = lu.rcond();
    Eigen::VectorXd x = lu.solve(r);
    if (!(rcond > std::numeric_limits<double>::epsilon()) || !x.allFinite()) {
        std::ostringstream os;
        os << "reciprocal condition estimate " << rcond << " for a " << J.rows() << "x" << J.cols() << " system";
        throw Error(ErrorKind::SingularJacobian, os.str());
    }
    return x;
}

inline double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Model requirements:
///   Eigen::VectorXd coords() const       current coordinates on dom(beta)
///   bool evaluate(const Eigen::VectorXd&) move to new coordinates; false if infeasible
///   Eigen::VectorXd defect() const       dual coordinates minus targets on dom(beta)
///   Eigen::MatrixXd jacobian() const     d(defect)/d(coords), possibly regularized
///
/// `on_step(iteration, residual)` fires after each accepted step; `done()` may
/// veto convergence (the balancing caller checks fiber sums there).
template <class Model, class OnStep, class Done>
NewtonOutcome newton_match(Model& model, const ProjectionOptions& opts, OnStep&& on_step, Done&& done) {
    if (!(opts.tol > 0.0) || opts.max_iter < 1 || !(opts.step_tol > 0.0))
        throw Error(ErrorKind::InvalidArgument, "tol and step_tol must be positive and max_iter at least 1");

    NewtonOutcome out;
    Eigen::VectorXd defect = model.defect();
    out.residual = max_abs(defect);
    if (defect.size() == 0) {
        out.converged = done();
        return out;
    }

    const bool halving = opts.step_control == StepControl::halving;
    for (std::size_t t = 1; t <= opts.max_iter; ++t) {
        const Eigen::VectorXd x = model.coords();
        Eigen::VectorXd step;
        try {
            step = solve_jacobian(model.jacobian(), defect);
        } catch (const Error&) {
            // Degenerate at the start is an input problem; later it means the
            // iterates ran into the boundary.
            if (t == 1) throw;
            return out;
        }

        double alpha = 1.0;
        bool any_feasible = false;
        std::size_t halvings = 0;
        double trial_residual = std::numeric_limits<double>::infinity();
        for (;;) {
            const bool feasible = model.evaluate(x - alpha * step);
            if (feasible) {
                any_feasible = true;
                defect = model.defect();
                trial_residual = max_abs(defect);
            }
            const bool finite = feasible && std::isfinite(trial_residual);
            if (finite && (!halving || trial_residual <= std::max(out.residual, opts.tol))) break;
            if (!halving) {
                if (!feasible) throw Error(ErrorKind::NonPositiveResult, "full Newton step left the feasible region");
                out.iterations = t;
                out.residual = trial_residual;
                return out;
            }
            if (++halvings > opts.max_halvings) {
                model.evaluate(x);
                if (!any_feasible)
                    throw Error(ErrorKind::NonPositiveResult,
                                "no feasible point after " + std::to_string(opts.max_halvings) + " step halvings");
                // Stalled: no halving reduces the residual.
                out.iterations = t;
                return out;
            }
            alpha *= 0.5;
        }

        out.iterations = t;
        out.residual = trial_residual;
        on_step(t, trial_residual);
        if (trial_residual <= opts.tol && alpha * max_abs(step) <= opts.step_tol && done()) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

}  // namespace tbal
