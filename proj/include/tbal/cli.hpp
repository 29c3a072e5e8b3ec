#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tbal/balancing.hpp"
#include "tbal/dense_array.hpp"
#include "tbal/error.hpp"
#include "tbal/generators.hpp"
#include "tbal/io.hpp"

namespace tbal::cli {

enum class Command { balance, bench, gen };
enum class Method { newton, sinkhorn, both };

struct RunConfig {
    Command command = Command::balance;
    Method method = Method::newton;
    std::string input_path;
    std::optional<std::size_t> hessenberg;
    std::optional<std::size_t> random;
    std::size_t order = 2;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    /// Unset means 100 Newton iterations and 1e6 Sinkhorn sweeps.
    std::optional<std::size_t> max_iter;
    std::string trace_path;
    std::string output_path;
    /// bench only: sweep the generator over these sides.
    std::vector<std::size_t> sizes;
    BalancePath path = BalancePath::automatic;

    void validate() const {
        if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "--tol must be positive");
        const int sources = !input_path.empty() + hessenberg.has_value() + random.has_value();
        if (sources != 1)
            throw Error(ErrorKind::InvalidArgument, "exactly one of --input, --hessenberg, --random is required");
        if (order < 1) throw Error(ErrorKind::InvalidArgument, "--order must be at least 1");
        if (hessenberg && *hessenberg < 1) throw Error(ErrorKind::InvalidArgument, "--hessenberg needs n >= 1");
        if (random && *random < 1) throw Error(ErrorKind::InvalidArgument, "--random needs n >= 1");
        if (hessenberg && order != 2) throw Error(ErrorKind::InvalidArgument, "Hessenberg inputs are matrices");
        if (max_iter && *max_iter < 1) throw Error(ErrorKind::InvalidArgument, "--max-iter must be at least 1");
        if (!sizes.empty() && command != Command::bench)
            throw Error(ErrorKind::InvalidArgument, "--sizes applies to bench only");
        if (!sizes.empty() && !input_path.empty())
            throw Error(ErrorKind::InvalidArgument, "--sizes needs a generator input");
        if (command == Command::gen && !input_path.empty())
            throw Error(ErrorKind::InvalidArgument, "gen needs --hessenberg or --random");
        for (auto n : sizes)
            if (n < 1) throw Error(ErrorKind::InvalidArgument, "--sizes entries must be at least 1");
    }
};

/// "trace.csv" + "-newton" -> "trace-newton.csv".
inline std::string with_suffix(const std::string& path, const std::string& suffix) {
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash) || dot == 0 || dot == slash + 1)
        return path + suffix;
    return path.substr(0, dot) + suffix + path.substr(dot);
}

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_trace(const std::string& path, const std::vector<BalanceTraceRow>& trace) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::IoError, "cannot write " + path);
    os << "iteration,residual,elapsed_seconds\n";
    for (const auto& row : trace)
        os << row.iteration << ',' << format_real(row.residual) << ',' << std::setprecision(9) << row.elapsed_seconds << '\n';
    if (!os) throw Error(ErrorKind::IoError, "write failed for " + path);
}

inline std::string summary_line(const BalanceResult& r, double elapsed) {
    std::ostringstream os;
    os << to_string(r.method) << ' ' << r.iterations << ' ' << format_real(r.residual) << ' ' << std::setprecision(6)
       << elapsed;
    return os.str();
}

/// Numerical breakdowns count as non-convergence; everything else is an
/// input error.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::SingularJacobian:
        case ErrorKind::NonPositiveResult:
        case ErrorKind::OverflowRisk: return 2;
        default: return 1;
    }
}

inline std::size_t worker_limit() {
    std::size_t limit = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BALANCE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) limit = static_cast<std::size_t>(v);
    }
    return limit;
}

struct Source {
    DenseArray array;
    FileFormat format = FileFormat::matrix_market;
    MatrixMarketLayout layout;
};

inline Source make_source(const RunConfig& cfg, std::optional<std::size_t> side = std::nullopt) {
    Source s;
    if (!cfg.input_path.empty()) {
        auto loaded = load_array(cfg.input_path);
        s.array = std::move(loaded.array);
        s.format = loaded.format;
        s.layout = loaded.layout;
        return s;
    }
    if (cfg.hessenberg)
        s.array = gen_hessenberg(side.value_or(*cfg.hessenberg));
    else
        s.array = gen_random(cfg.order, side.value_or(*cfg.random), cfg.seed);
    s.format = s.array.order() == 2 ? FileFormat::matrix_market : FileFormat::tensor_coordinate;
    return s;
}

/// Outcome of one method on one input; `lines` is what goes to stdout.
struct MethodRun {
    int status = 0;
    std::vector<std::string> lines;
    std::string error;
};

inline MethodRun run_one(const RunConfig& cfg, const Source& src, BalanceMethod method, const std::string& suffix) {
    MethodRun out;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        BalanceResult r;
        if (method == BalanceMethod::newton) {
            ProjectionOptions opts;
            opts.tol = cfg.tol;
            opts.max_iter = cfg.max_iter.value_or(100);
            r = balance_newton(src.array, opts, cfg.path);
        } else {
            r = sinkhorn(src.array, cfg.tol, cfg.max_iter.value_or(1000000));
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!cfg.trace_path.empty()) write_trace(with_suffix(cfg.trace_path, suffix), r.trace);
        if (!cfg.output_path.empty() && cfg.command != Command::gen)
            save_array(with_suffix(cfg.output_path, suffix), r.balanced, src.format, src.layout);
        out.lines.push_back(summary_line(r, elapsed));
        out.status = r.converged ? 0 : 2;
    } catch (const Error& e) {
        out.status = exit_code(e.kind());
        out.error = std::string("error: ") + e.what();
    }
    return out;
}

inline std::vector<BalanceMethod> methods_of(Method m) {
    if (m == Method::both) return {BalanceMethod::newton, BalanceMethod::sinkhorn};
    return {m == Method::newton ? BalanceMethod::newton : BalanceMethod::sinkhorn};
}

/// Input errors outrank non-convergence.
inline int combine(int a, int b) { return a == 1 || b == 1 ? 1 : std::max(a, b); }

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        if (cfg.command == Command::gen) {
            auto src = make_source(cfg);
            if (cfg.output_path.empty()) {
                if (src.format == FileFormat::matrix_market)
                    write_matrix_market(out, src.array);
                else
                    write_tensor_coordinate(out, src.array);
            } else {
                save_array(cfg.output_path, src.array, src.format);
            }
            return 0;
        }

        struct Job {
            std::optional<std::size_t> side;
            BalanceMethod method;
            std::string suffix;
        };
        const auto methods = methods_of(cfg.method);
        std::vector<Job> jobs;
        const bool sweep = cfg.command == Command::bench && !cfg.sizes.empty();
        const std::vector<std::optional<std::size_t>> sides =
            sweep ? std::vector<std::optional<std::size_t>>(cfg.sizes.begin(), cfg.sizes.end())
                  : std::vector<std::optional<std::size_t>>{std::nullopt};
        for (auto side : sides)
            for (auto m : methods) {
                std::string suffix = side ? "-n" + std::to_string(*side) : "";
                if (methods.size() > 1) suffix += std::string("-") + to_string(m);
                jobs.push_back({side, m, suffix});
            }

        std::vector<MethodRun> results(jobs.size());
        auto work = [&](std::size_t k) {
            try {
                results[k] = run_one(cfg, make_source(cfg, jobs[k].side), jobs[k].method, jobs[k].suffix);
            } catch (const Error& e) {
                results[k].status = exit_code(e.kind());
                results[k].error = std::string("error: ") + e.what();
            }
        };
        const std::size_t workers = cfg.command == Command::bench ? std::min(worker_limit(), jobs.size()) : 1;
        if (workers <= 1) {
            for (std::size_t k = 0; k < jobs.size(); ++k) work(k);
        } else {
            std::mutex mu;
            std::size_t next = 0;
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (;;) {
                        std::size_t k;
                        {
                            std::lock_guard lock(mu);
                            if (next == jobs.size()) return;
                            k = next++;
                        }
                        work(k);
                    }
                });
            for (auto& t : pool) t.join();
        }

        int status = 0;
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            if (sweep && (k == 0 || jobs[k].side != jobs[k - 1].side)) out << "# n " << *jobs[k].side << '\n';
            for (auto& line : results[k].lines) out << line << '\n';
            if (!results[k].error.empty()) err << results[k].error << '\n';
            status = combine(status, results[k].status);
        }
        return status;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    }
}

/// Parses argv into a RunConfig and runs it. Usage errors exit with 1.
inline int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonnegative matrix and tensor balancing"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string method = "newton", path = "auto";

    auto add_input = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input_path, "MatrixMarket or tensor coordinate file")->check(CLI::ExistingFile);
        sub->add_option("--hessenberg", cfg.hessenberg, "generate the n x n Hessenberg matrix");
        sub->add_option("--random", cfg.random, "generate a random positive array with side n");
        sub->add_option("--order", cfg.order, "order of --random arrays")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "seed for --random")->capture_default_str();
        sub->add_option("--output", cfg.output_path, "write the balanced (or generated) array here");
    };
    auto add_solver = [&](CLI::App* sub) {
        sub->add_option("--method", method, "newton, sinkhorn or both")
            ->check(CLI::IsMember({"newton", "sinkhorn", "both"}))
            ->capture_default_str();
        sub->add_option("--tol", cfg.tol, "residual tolerance")->capture_default_str();
        sub->add_option("--max-iter", cfg.max_iter, "iteration cap (default 100 Newton, 1000000 Sinkhorn)");
        sub->add_option("--trace", cfg.trace_path, "residual trace CSV");
        sub->add_option("--path", path, "Newton engine: auto, grid or poset")
            ->check(CLI::IsMember({"auto", "grid", "poset"}))
            ->capture_default_str();
    };

    auto* balance = app.add_subcommand("balance", "balance one input");
    add_input(balance);
    add_solver(balance);
    auto* bench = app.add_subcommand("bench", "run methods over generated inputs");
    add_input(bench);
    add_solver(bench);
    bench->add_option("--sizes", cfg.sizes, "sides to sweep, e.g. 10,20,50")->delimiter(',');
    auto* gen = app.add_subcommand("gen", "write a generated input");
    add_input(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    cfg.command = balance->parsed() ? Command::balance : bench->parsed() ? Command::bench : Command::gen;
    cfg.method = method == "both" ? Method::both : method == "sinkhorn" ? Method::sinkhorn : Method::newton;
    cfg.path = path == "grid" ? BalancePath::grid : path == "poset" ? BalancePath::poset : BalancePath::automatic;
    return run(cfg, out, err);
}

}  // namespace tbal::cli
