#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tbal/loglinear.hpp"

using namespace tbal;

namespace {

// 2x2 grid ordered (1,1), (1,2), (2,1), (2,2)
const Poset& grid22() {
    static const Poset P = make_grid_poset({2, 2});
    return P;
}

Distribution sample_p() { return Distribution::from_probabilities({0.4, 0.1, 0.3, 0.2}); }
Distribution uniform4() { return Distribution::from_probabilities({0.25, 0.25, 0.25, 0.25}); }

Poset random_poset(std::mt19937_64& rng, std::size_t max_size = 64) {
    std::uniform_int_distribution<std::size_t> size(2, max_size);
    std::uniform_real_distribution<double> density(0.05, 0.4);
    auto r = oracle::random_poset(size(rng), density(rng), rng);
    return oracle::build(r);
}

double dot_upper(const Poset& P, const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (Index x : P.upper()) acc += a[x] * b[x];
    return acc;
}

}  // namespace

TEST(Distribution, RejectsNonPositiveAndUnnormalized) {
    EXPECT_THROW(Distribution::from_probabilities({0.5, 0.5, 0.0}), Error);
    EXPECT_THROW(Distribution::from_probabilities({0.5, 0.6}), Error);
    try {
        Distribution::normalize({1.0, -1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonPositiveEntry);
    }
}

TEST(Theta, UniformGrid) {
    auto th = theta_from_p(grid22(), uniform4());
    EXPECT_EQ(th.kind, Coord::theta);
    EXPECT_NEAR(th[0], std::log(0.25), 1e-15);
    for (Index x = 1; x < 4; ++x) EXPECT_NEAR(th[x], 0.0, 1e-15);
}

TEST(Theta, SampleGrid) {
    auto th = theta_from_p(grid22(), sample_p());
    EXPECT_NEAR(th[0], std::log(0.4), 1e-15);
    EXPECT_NEAR(th[1], -1.3862943611198906, 1e-14);
    EXPECT_NEAR(th[2], -0.28768207245178107, 1e-14);
    EXPECT_NEAR(th[3], 0.9808292530117265, 1e-14);
}

TEST(Theta, Singleton) {
    auto th = theta_from_p(make_chain(1), Distribution::from_probabilities({1.0}));
    EXPECT_EQ(th[0], 0.0);
}

TEST(Eta, Examples) {
    auto eta = eta_from_p(grid22(), sample_p());
    std::vector<double> expect = {1.0, 0.3, 0.5, 0.2};
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(eta[x], expect[x], 1e-15);
    auto eu = eta_from_p(grid22(), uniform4());
    std::vector<double> expect_u = {1.0, 0.5, 0.5, 0.25};
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(eu[x], expect_u[x], 1e-15);
}

TEST(PFromTheta, Examples) {
    const Poset& P = grid22();
    auto back = p_from_theta(P, theta_from_p(P, sample_p()));
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(back.p[x], sample_p()[x], 1e-12);
    EXPECT_NEAR(back.shift, 0.0, 1e-12);

    auto u = p_from_theta(P, {Coord::theta, {std::log(0.25), 0, 0, 0}});
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(u.p[x], 0.25, 1e-15);

    // theta(2,2) = log 2 with the bottom left at 0: weights (1,1,1,2)
    auto w = p_from_theta(P, {Coord::theta, {0.0, 0.0, 0.0, std::log(2.0)}});
    std::vector<double> expect = {0.2, 0.2, 0.2, 0.4};
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(w.p[x], expect[x], 1e-15);
    EXPECT_NEAR(w.shift, std::log(5.0), 1e-15);
}

TEST(PFromTheta, OverflowRisk) {
    try {
        p_from_theta(grid22(), {Coord::theta, {705.0, 0.0, 0.0, 0.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OverflowRisk);
    }
    LoglinearOptions loose;
    loose.log_bound = 1000.0;
    auto d = p_from_theta(grid22(), {Coord::theta, {705.0, 0.0, 0.0, 0.0}}, loose);
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(d.p[x], 0.25, 1e-15);
    EXPECT_NEAR(d.shift, 705.0 + std::log(4.0), 1e-12);
}

TEST(PFromEta, Examples) {
    auto p = p_from_eta(grid22(), {Coord::eta, {1.0, 0.3, 0.5, 0.2}});
    std::vector<double> expect = {0.4, 0.1, 0.3, 0.2};
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(p[x], expect[x], 1e-15);
    auto u = p_from_eta(grid22(), {Coord::eta, {1.0, 0.5, 0.5, 0.25}});
    for (Index x = 0; x < 4; ++x) EXPECT_NEAR(u[x], 0.25, 1e-15);
    try {
        p_from_eta(grid22(), {Coord::eta, {1.0, 0.9, 0.9, 0.1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonPositiveResult);
    }
}

TEST(Potentials, PsiExamples) {
    const Poset& P = grid22();
    auto tu = theta_from_p(P, uniform4());
    EXPECT_NEAR(psi(P, tu), std::log(4.0), 1e-15);
    EXPECT_NEAR(log_partition(P, tu.values), std::log(4.0), 1e-15);
    auto ts = theta_from_p(P, sample_p());
    EXPECT_NEAR(psi(P, ts), -std::log(0.4), 1e-15);
    EXPECT_NEAR(log_partition(P, ts.values), psi(P, ts), 1e-14);
    EXPECT_EQ(psi(make_chain(1), theta_from_p(make_chain(1), Distribution::from_probabilities({1.0}))), 0.0);
}

TEST(Potentials, PhiExamples) {
    const Poset& P = grid22();
    EXPECT_NEAR(phi(P, uniform4()), -std::log(4.0), 1e-15);
    EXPECT_NEAR(phi(P, sample_p()), -1.2798542258336676, 1e-14);
    const double e = 1e-6;
    EXPECT_NEAR(phi(P, Distribution::from_probabilities({1 - 3 * e, e, e, e})), -4.4446527173863564e-05, 1e-15);
}

TEST(KL, Examples) {
    const Poset& P = grid22();
    EXPECT_EQ(kl_divergence(P, sample_p(), sample_p()), 0.0);
    EXPECT_NEAR(kl_divergence(P, uniform4(), sample_p()), 0.10644013528622319, 1e-14);
    EXPECT_NEAR(kl_divergence(P, sample_p(), uniform4()), 0.12177727428716868, 1e-14);
}

TEST(Metric, UniformGridEntries) {
    auto g = metric(grid22(), uniform4(), Coord::theta);
    // rows/cols are S+ = (1,2), (2,1), (2,2)
    EXPECT_NEAR(g(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(g(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(g(1, 0), 0.0, 1e-15);
}

TEST(Metric, FisherExpectationIdentity) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        Poset P = random_poset(rng, 40);
        auto pv = oracle::random_distribution(P.size(), rng);
        auto p = Distribution::from_probabilities(pv);
        auto g = metric(P, p, Coord::theta);
        auto eta = oracle::eta_direct(P, pv);
        auto up = P.upper();
        for (std::size_t a = 0; a < up.size(); ++a)
            for (std::size_t b = 0; b < up.size(); ++b) {
                double acc = 0.0;
                for (Index s = 0; s < P.size(); ++s)
                    acc += pv[s] * ((P.leq(up[a], s) ? 1.0 : 0.0) - eta[up[a]]) *
                           ((P.leq(up[b], s) ? 1.0 : 0.0) - eta[up[b]]);
                ASSERT_NEAR(g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), acc, 1e-12);
            }
    }
}

TEST(Metric, MatchesFiniteDifferenceAndDualIsInverse) {
    std::mt19937_64 rng(22);
    const double h = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
        Poset P = random_poset(rng, 24);
        auto p = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto up = P.upper();
        auto g = metric(P, p, Coord::theta);
        auto theta = theta_from_p(P, p);
        double scale = g.cwiseAbs().maxCoeff();
        for (std::size_t a = 0; a < up.size(); ++a) {
            auto tp = theta, tm = theta;
            tp.values[up[a]] += h;
            tm.values[up[a]] -= h;
            auto ep = eta_from_p(P, p_from_theta(P, tp).p);
            auto em = eta_from_p(P, p_from_theta(P, tm).p);
            for (std::size_t b = 0; b < up.size(); ++b) {
                double fd = (ep[up[b]] - em[up[b]]) / (2 * h);
                ASSERT_NEAR(fd, g(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)), 1e-5 * scale);
            }
        }
        auto ge = metric(P, p, Coord::eta);
        Eigen::MatrixXd prod = ge * g;
        EXPECT_LT((prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Connection, UniformGridExamples) {
    const Poset& P = grid22();
    auto gt = connection(P, uniform4(), Coord::theta);
    EXPECT_NEAR(gt(0, 0, 0), 0.0, 1e-15);
    auto ge = connection(P, uniform4(), Coord::eta);
    // S+ = (1,2), (2,1), (2,2). Moebius columns of (2,2) are +-1 and sum to 0,
    // so the diagonal entry vanishes; the mixed entry picks up s = (1,1) only.
    EXPECT_NEAR(ge(2, 2, 2), 0.0, 1e-12);
    EXPECT_NEAR(ge(0, 1, 2), -8.0, 1e-12);
}

TEST(Connection, SymmetricAndMatchesMetricDerivatives) {
    std::mt19937_64 rng(23);
    const double h = 1e-5;
    for (int rep = 0; rep < 10; ++rep) {
        Poset P = random_poset(rng, 12);
        auto p = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto up = P.upper();
        const std::size_t m = up.size();
        for (Coord c : {Coord::theta, Coord::eta}) {
            auto G = connection(P, p, c);
            // dg[x] = derivative of the metric along coordinate x
            std::vector<Eigen::MatrixXd> dg(m);
            auto coords = c == Coord::theta ? theta_from_p(P, p) : eta_from_p(P, p);
            for (std::size_t x = 0; x < m; ++x) {
                auto cp = coords, cm = coords;
                cp.values[up[x]] += h;
                cm.values[up[x]] -= h;
                auto pp = c == Coord::theta ? p_from_theta(P, cp).p : p_from_eta(P, cp);
                auto pm = c == Coord::theta ? p_from_theta(P, cm).p : p_from_eta(P, cm);
                dg[x] = (metric(P, pp, c) - metric(P, pm, c)) / (2 * h);
            }
            double scale = 0.0;
            for (double v : G.data) scale = std::max(scale, std::abs(v));
            for (std::size_t x = 0; x < m; ++x)
                for (std::size_t y = 0; y < m; ++y)
                    for (std::size_t z = 0; z < m; ++z) {
                        ASSERT_EQ(G(x, y, z), G(y, x, z));
                        ASSERT_EQ(G(x, y, z), G(x, z, y));
                        auto X = static_cast<Eigen::Index>(x), Y = static_cast<Eigen::Index>(y),
                             Z = static_cast<Eigen::Index>(z);
                        double fd = 0.5 * (dg[x](Y, Z) + dg[y](X, Z) - dg[z](X, Y));
                        ASSERT_NEAR(G(x, y, z), fd, 1e-4 * std::max(1.0, scale));
                    }
        }
    }
}

TEST(Connection, SizeCap) {
    LoglinearOptions tight;
    tight.connection_budget = 8;
    try {
        connection(grid22(), uniform4(), Coord::theta, tight);  // 3^3 = 27 > 8
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SizeCap);
    }
}

TEST(Properties, CoordinateRoundTrips) {
    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 100; ++rep) {
        Poset P = random_poset(rng);
        auto pv = oracle::random_distribution(P.size(), rng);
        auto p = Distribution::from_probabilities(pv);
        auto th = theta_from_p(P, p);
        auto et = eta_from_p(P, p);
        auto p1 = p_from_theta(P, th).p;
        auto p2 = p_from_eta(P, et);
        for (Index x = 0; x < P.size(); ++x) {
            ASSERT_NEAR(p1[x], pv[x], 1e-10);
            ASSERT_NEAR(p2[x], pv[x], 1e-10);
        }
        auto th2 = theta_from_p(P, p1);
        auto et2 = eta_from_p(P, p2);
        for (Index x = 0; x < P.size(); ++x) {
            ASSERT_NEAR(th2[x], th[x], 1e-10);
            ASSERT_NEAR(et2[x], et[x], 1e-10);
        }
        // eta is antitone along the order
        for (Index x = 0; x < P.size(); ++x)
            for (Index y : P.up(x)) ASSERT_GE(et[x] + 1e-15, et[y]);
    }
}

TEST(Properties, LegendreGradients) {
    std::mt19937_64 rng(25);
    const double h = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
        Poset P = random_poset(rng, 30);
        auto p = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto th = theta_from_p(P, p);
        auto et = eta_from_p(P, p);
        for (Index x : P.upper()) {
            auto tp = th.values, tm = th.values;
            tp[x] += h;
            tm[x] -= h;
            double d_psi = (log_partition(P, tp) - log_partition(P, tm)) / (2 * h);
            ASSERT_NEAR(d_psi, et[x], 1e-6);

            auto ep = et, em = et;
            ep.values[x] += h;
            em.values[x] -= h;
            double d_phi = (phi(P, p_from_eta(P, ep)) - phi(P, p_from_eta(P, em))) / (2 * h);
            ASSERT_NEAR(d_phi, th[x], 1e-5);
        }
    }
}

TEST(Properties, DualityGapAndCrossEntropy) {
    std::mt19937_64 rng(26);
    for (int rep = 0; rep < 100; ++rep) {
        Poset P = random_poset(rng);
        auto p = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto q = Distribution::from_probabilities(oracle::random_distribution(P.size(), rng));
        auto th = theta_from_p(P, p);
        auto et = eta_from_p(P, p);
        ASSERT_NEAR(psi(P, th) + phi(P, p) - dot_upper(P, th.values, et.values), 0.0, 1e-10);

        // theta' eta - psi(theta') = sum p log p'
        auto thq = theta_from_p(P, q);
        double lhs = dot_upper(P, thq.values, et.values) - psi(P, thq);
        double rhs = 0.0;
        for (Index x = 0; x < P.size(); ++x) rhs += p[x] * std::log(q[x]);
        ASSERT_NEAR(lhs, rhs, 1e-10);

        // Bregman form equals the KL sum
        double bregman = psi(P, th) + phi(P, q) - dot_upper(P, th.values, eta_from_p(P, q).values);
        ASSERT_NEAR(bregman, kl_divergence(P, p, q), 1e-10);
        ASSERT_GE(kl_divergence(P, p, q), 0.0);
    }
}
