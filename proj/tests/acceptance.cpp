// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tbal/balancing.hpp"
#include "tbal/generators.hpp"
#include "tbal/loglinear.hpp"
#include "tbal/projection.hpp"

using namespace tbal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& why) {
        if (!ok && pass) detail << "[failed: " << why << "] ";
        pass = pass && ok;
    }
};

double max_fiber_error(const DenseArray& A) {
    double worst = 0.0;
    for (std::size_t m = 0; m < A.order(); ++m)
        for (double s : fiber_sums(A, m)) worst = std::max(worst, std::abs(s - 1.0));
    return worst;
}

double max_diff(const DenseArray& a, const DenseArray& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

Poset random_poset(std::mt19937_64& rng, std::size_t max_size) {
    std::uniform_int_distribution<std::size_t> size(2, max_size);
    std::uniform_real_distribution<double> density(0.05, 0.4);
    return oracle::build(oracle::random_poset(size(rng), density(rng), rng));
}

double dot_upper(const Poset& P, const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (Index x : P.upper()) acc += a[x] * b[x];
    return acc;
}

// Least-squares slope of log r(t+1) against log r(t) over consecutive pairs.
double loglog_slope(const std::vector<double>& r) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(r.size() - 1);
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        double x = std::log(r[i]), y = std::log(r[i + 1]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

void hessenberg_convergence(Verdict& v) {
    const auto t0 = Clock::now();
    v.detail << "iterations";
    for (std::size_t n : {10, 20, 50, 100, 200, 500, 1000}) {
        auto r = balance_newton(gen_hessenberg(n));
        v.detail << ' ' << n << ':' << r.iterations;
        v.require(r.converged && r.residual < 1e-6, "H_" + std::to_string(n) + " residual");
        v.require(r.iterations <= 30, "H_" + std::to_string(n) + " iteration count");
    }
    const double elapsed = seconds_since(t0);
    v.detail << "; " << elapsed << " s";
    v.require(elapsed < 300.0, "runtime");
}

void iteration_separation(Verdict& v) {
    auto H = gen_hessenberg(100);
    auto nt = balance_newton(H);
    auto sk = sinkhorn(H, 1e-6);
    v.require(nt.converged && sk.converged, "convergence");
    const double ratio = static_cast<double>(sk.iterations) / static_cast<double>(nt.iterations);
    v.detail << "sinkhorn " << sk.iterations << " / newton " << nt.iterations << " = " << ratio;
    v.require(ratio >= 100.0, "ratio");
}

void convergence_shape(Verdict& v) {
    auto H = gen_hessenberg(20);
    auto nt = balance_newton(H);
    std::vector<double> tail;
    for (auto& row : nt.trace)
        if (row.residual < 1e-2) tail.push_back(row.residual);
    if (tail.size() > 4) tail.erase(tail.begin(), tail.end() - 4);
    v.require(tail.size() >= 3, "too few Newton residuals below 1e-2");
    const double slope = tail.size() >= 3 ? loglog_slope(tail) : std::nan("");
    v.detail << "newton slope " << slope << " over " << tail.size() << " residuals";
    v.require(slope >= 1.8, "newton slope");

    auto sk = sinkhorn(H, 1e-6);
    v.require(sk.trace.size() >= 21, "sinkhorn trace too short");
    std::vector<double> ratios;
    for (std::size_t i = sk.trace.size() - 20; i < sk.trace.size(); ++i)
        ratios.push_back(sk.trace[i].residual / sk.trace[i - 1].residual);
    double mean = 0, var = 0, lo = 1e300, hi = -1e300;
    for (double q : ratios) mean += q, lo = std::min(lo, q), hi = std::max(hi, q);
    mean /= static_cast<double>(ratios.size());
    for (double q : ratios) var += (q - mean) * (q - mean);
    var /= static_cast<double>(ratios.size());
    v.detail << "; sinkhorn ratio in [" << lo << ", " << hi << "], variance " << var;
    v.require(lo >= 0.5 && hi < 1.0, "sinkhorn ratio range");
    v.require(var < 0.05, "sinkhorn ratio variance");
}

void two_by_two_oracle(Verdict& v) {
    auto r = balance_newton(DenseArray::matrix({{1, 2}, {3, 4}}));
    const double q = std::sqrt(2.0 / 3.0), t = q / (1.0 + q);
    const double expect[] = {t, 1 - t, 1 - t, t};
    double err = 0.0;
    for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(r.balanced.data()[i] - expect[i]));
    v.detail << "max error " << err << " after " << r.iterations << " iterations";
    v.require(r.converged && err <= 1e-8, "entrywise error");
}

void method_agreement(Verdict& v) {
    std::mt19937_64 rng(2024);
    double diff = 0.0, fiber = 0.0;
    auto check = [&](const DenseArray& A) {
        auto nt = balance_newton(A);
        auto sk = sinkhorn(A, 1e-6);
        v.require(nt.converged && sk.converged, "convergence");
        diff = std::max(diff, max_diff(nt.balanced, sk.balanced));
        fiber = std::max({fiber, max_fiber_error(nt.balanced), max_fiber_error(sk.balanced)});
    };
    std::uniform_int_distribution<std::size_t> mat_side(2, 20), ten_side(2, 6);
    for (int k = 0; k < 50; ++k) check(gen_random(2, mat_side(rng), rng()));
    for (int k = 0; k < 20; ++k) check(gen_random(3, ten_side(rng), rng()));
    v.detail << "max entry difference " << diff << ", max fiber error " << fiber;
    v.require(diff <= 1e-4, "entry difference");
    v.require(fiber <= 1e-6, "fiber sums");
}

void coordinate_roundtrips(Verdict& v) {
    std::mt19937_64 rng(6);
    double worst = 0.0;
    bool identity = true;
    for (int rep = 0; rep < 200; ++rep) {
        Poset P = random_poset(rng, 64);
        auto pv = oracle::random_distribution(P.size(), rng);
        auto p = Distribution::from_probabilities(pv);
        auto p1 = p_from_theta(P, theta_from_p(P, p)).p;
        auto p2 = p_from_eta(P, eta_from_p(P, p));
        for (Index x = 0; x < P.size(); ++x)
            worst = std::max({worst, std::abs(p1[x] - pv[x]), std::abs(p2[x] - pv[x])});

        const std::size_t n = P.size();
        std::vector<std::int64_t> Z(n * n, 0), M(n * n, 0);
        for (auto& e : zeta_matrix(P).entries) Z[e.row * n + e.col] = e.value;
        for (auto& e : mobius_matrix(P).entries) M[e.row * n + e.col] = e.value;
        for (std::size_t i = 0; i < n && identity; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                std::int64_t acc = 0;
                for (std::size_t k = 0; k < n; ++k) acc += Z[i * n + k] * M[k * n + j];
                if (acc != (i == j ? 1 : 0)) identity = false;
            }
    }
    v.detail << "max round-trip error " << worst << ", zeta*mobius " << (identity ? "= I" : "!= I");
    v.require(worst <= 1e-10, "round trip");
    v.require(identity, "zeta*mobius");
}

void geometry_identities(Verdict& v) {
    std::mt19937_64 rng(7);
    const double h = 1e-5;
    double metric_fd = 0.0, dual = 0.0, conn_fd = 0.0, gap = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        Poset P = random_poset(rng, 12);
        auto p = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto up = P.upper();
        const std::size_t m = up.size();
        auto theta = theta_from_p(P, p);
        auto eta = eta_from_p(P, p);

        auto g = metric(P, p, Coord::theta);
        const double scale = g.cwiseAbs().maxCoeff();
        for (std::size_t a = 0; a < m; ++a) {
            auto tp = theta, tm = theta;
            tp.values[up[a]] += h;
            tm.values[up[a]] -= h;
            auto ep = eta_from_p(P, p_from_theta(P, tp).p), em = eta_from_p(P, p_from_theta(P, tm).p);
            for (std::size_t b = 0; b < m; ++b) {
                double fd = (ep[up[b]] - em[up[b]]) / (2 * h);
                metric_fd = std::max(metric_fd, std::abs(fd - g(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a))) / scale);
            }
        }
        Eigen::MatrixXd prod = metric(P, p, Coord::eta) * g;
        dual = std::max(dual, (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff());

        for (Coord c : {Coord::theta, Coord::eta}) {
            auto G = connection(P, p, c);
            auto coords = c == Coord::theta ? theta : eta;
            std::vector<Eigen::MatrixXd> dg(m);
            for (std::size_t x = 0; x < m; ++x) {
                auto cp = coords, cm = coords;
                cp.values[up[x]] += h;
                cm.values[up[x]] -= h;
                auto pp = c == Coord::theta ? p_from_theta(P, cp).p : p_from_eta(P, cp);
                auto pm = c == Coord::theta ? p_from_theta(P, cm).p : p_from_eta(P, cm);
                dg[x] = (metric(P, pp, c) - metric(P, pm, c)) / (2 * h);
            }
            double gs = 1.0;
            for (double val : G.data) gs = std::max(gs, std::abs(val));
            for (std::size_t x = 0; x < m; ++x)
                for (std::size_t y = 0; y < m; ++y)
                    for (std::size_t z = 0; z < m; ++z) {
                        auto X = static_cast<Eigen::Index>(x), Y = static_cast<Eigen::Index>(y), Z = static_cast<Eigen::Index>(z);
                        double fd = 0.5 * (dg[x](Y, Z) + dg[y](X, Z) - dg[z](X, Y));
                        conn_fd = std::max(conn_fd, std::abs(G(x, y, z) - fd) / gs);
                    }
        }
        gap = std::max(gap, std::abs(psi(P, theta) + phi(P, p) - dot_upper(P, theta.values, eta.values)));
    }

    // Pythagorean relation on the Boltzmann and balancing instances.
    double pyth = 0.0;
    const Poset B = make_power_set(2);
    const auto start = Distribution::from_probabilities({0.1, 0.2, 0.3, 0.4});
    const auto uniform = Distribution::from_probabilities({0.25, 0.25, 0.25, 0.25});
    auto boltz = m_project(B, start, ConstraintSet::m_kind(B, {3}, {0.0}), {.tol = 1e-12});
    pyth = std::max(pyth, pythagorean_check(B, start, boltz.distribution, uniform, ProjectionKind::m));

    const Poset G22 = make_grid_poset({2, 2});
    auto bal = e_project(G22, start, ConstraintSet::e_kind(G22, {1, 2}, {0.5, 0.5}), {.tol = 1e-12});
    pyth = std::max(pyth, pythagorean_check(G22, start, bal.distribution, uniform, ProjectionKind::e));

    // H_6 against another doubly stochastic matrix on the same support.
    auto H = gen_hessenberg(6);
    auto W = H;
    std::mt19937_64 wrng(8);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (auto& x : W.data())
        if (x > 0) x = u(wrng);
    auto [g, p0] = preprocess(H);
    Poset S = g.poset();
    auto on_support = [&](const DenseArray& M) {
        std::vector<double> w;
        for (std::size_t off : g.support) w.push_back(M.data()[off]);
        return Distribution::normalize(std::move(w));
    };
    auto bh = balance_newton(H, {.tol = 1e-13});
    auto bw = balance_newton(W, {.tol = 1e-13});
    pyth = std::max(pyth, pythagorean_check(S, p0, on_support(bh.balanced), on_support(bw.balanced), ProjectionKind::e));

    v.detail << "metric fd " << metric_fd << ", g(theta)g(eta)-I " << dual << ", connection fd " << conn_fd
             << ", duality gap " << gap << ", pythagorean " << pyth;
    v.require(metric_fd <= 1e-5, "metric");
    v.require(dual <= 1e-8, "dual metric");
    v.require(conn_fd <= 1e-4, "connection");
    v.require(gap <= 1e-10, "duality gap");
    v.require(pyth <= 1e-8, "pythagorean");
}

void m_projection_oracle(Verdict& v) {
    const Poset B = make_power_set(2);
    auto res = m_project(B, Distribution::from_probabilities({0.1, 0.2, 0.3, 0.4}), ConstraintSet::m_kind(B, {3}, {0.0}));
    const double expect[] = {0.12, 0.18, 0.28, 0.42};
    double err = 0.0;
    for (Index x = 0; x < 4; ++x) err = std::max(err, std::abs(res.distribution[x] - expect[x]));
    v.detail << "max error " << err << " after " << res.iterations << " iterations";
    v.require(res.converged && err <= 1e-8, "entrywise error");
}

void sparse_support(Verdict& v) {
    double worst = 0.0;
    for (std::size_t n : {2, 3, 5, 8, 10, 20, 30, 40, 50}) {
        auto H = gen_hessenberg(n);
        auto rg = balance_newton(H, {}, BalancePath::grid);
        auto rp = balance_newton(H, {}, BalancePath::poset);
        v.require(rg.converged && rp.converged, "H_" + std::to_string(n) + " convergence");
        worst = std::max(worst, max_diff(rg.balanced, rp.balanced));
    }
    v.detail << "poset vs grid max difference " << worst;
    v.require(worst <= 1e-8, "path agreement");

    auto A = DenseArray::matrix({{1, 1}, {1, 0}});
    for (auto path : {BalancePath::poset, BalancePath::grid}) {
        const auto t0 = Clock::now();
        ProjectionOptions opts;
        auto r = balance_newton(A, opts, path);
        const double elapsed = seconds_since(t0);
        v.detail << "; [[1,1],[1,0]] " << (path == BalancePath::poset ? "poset" : "grid") << ' '
                 << (r.converged ? "converged" : "NotConverged") << " after " << r.iterations << " iterations";
        v.require(!r.converged, "infeasible input reported converged");
        v.require(r.iterations <= opts.max_iter && elapsed < 10.0, "termination");
    }
}

void tensor_scale(Verdict& v) {
    auto T = gen_random(3, 20, 20);
    const auto t0 = Clock::now();
    auto r = balance_newton(T);
    const double elapsed = seconds_since(t0);
    const double fiber = max_fiber_error(r.balanced);
    v.detail << r.iterations << " iterations, max fiber error " << fiber << ", " << elapsed << " s";
    v.require(r.converged && fiber <= 1e-6, "fiber sums");
    v.require(elapsed < 10.0, "runtime");
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void(Verdict&)> run;
    };
    const std::vector<Criterion> criteria = {
        {"hessenberg convergence", hessenberg_convergence},
        {"iteration-count separation", iteration_separation},
        {"convergence-rate shape", convergence_shape},
        {"2x2 closed form", two_by_two_oracle},
        {"method agreement", method_agreement},
        {"coordinate round trips", coordinate_roundtrips},
        {"geometry identities", geometry_identities},
        {"m-projection oracle", m_projection_oracle},
        {"sparse support", sparse_support},
        {"tensor scale", tensor_scale},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            criteria[i].run(v);
        } catch (const std::exception& e) {
            v.require(false, e.what());
        }
        std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, v.detail.str().c_str());
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
