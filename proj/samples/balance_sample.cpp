// Balances a Hessenberg matrix and a small random tensor, then prints the
// balanced matrix and its scalings.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tbal/tbal.hpp"

int main() {
    using namespace tbal;

    DenseArray H = gen_hessenberg(5);
    BalanceResult nt = balance_newton(H);
    BalanceResult sk = sinkhorn(H);
    std::printf("H_5: newton %zu iterations (residual %.3e), sinkhorn %zu sweeps (residual %.3e)\n", nt.iterations,
                nt.residual, sk.iterations, sk.residual);

    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) std::printf(" %8.5f", nt.balanced.at(i, j));
        std::printf("\n");
    }
    const auto& f = nt.scalings.factors;
    std::printf("r:");
    for (double v : f[0].data()) std::printf(" %.5f", v);
    std::printf("\ns:");
    for (double v : f[1].data()) std::printf(" %.5f", v);
    std::printf("\nmax |diag(r) H diag(s) - balanced| = %.2e\n",
                [&] {
                    DenseArray R = apply_scalings(H, nt.scalings);
                    double worst = 0.0;
                    for (std::size_t k = 0; k < R.size(); ++k)
                        worst = std::max(worst, std::abs(R.data()[k] - nt.balanced.data()[k]));
                    return worst;
                }());

    DenseArray T = gen_random(3, 4, 1);
    BalanceResult t = balance_newton(T);
    std::printf("random 4x4x4 tensor: %zu iterations, residual %.3e\n", t.iterations, t.residual);
    for (const auto& row : t.trace) std::printf("  %zu %.6e\n", row.iteration, row.residual);
    return t.converged && nt.converged ? 0 : 1;
}
