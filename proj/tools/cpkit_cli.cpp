// Command-line front end. Talks to the core exclusively through the C API in
// cpkit.h; every subcommand builds a JSON configuration, runs it, prints the
// fully resolved configuration and emits the report.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpkit.h"

namespace {

struct CommonOpts {
    int order = 3;
    std::vector<std::uint64_t> dims;
    std::vector<int> ranks{1};
    std::string family = "uniform01";
    std::string optimizer = "als";
    std::string reg = "varying";
    std::string reg_shape = "identity";
    double lambda = -1.0;  // <0 means "not provided"
    double mu = 2.0;
    double lambda_upper = 1e-2;
    double lambda_lower = 1e-6;
    bool armijo = false;
    double cg_tol = 1e-3;
    int cg_max_iters = 0;
    double residual_tol = 5e-5;
    double step_tol = 1e-7;
    int max_iters = -1;  // <0 means optimizer default
    int problems = 1;
    int inits = 1;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out = "-";
    std::string format = "json";
};

void add_output_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--out", o.out, "Report destination path ('-' = stdout)");
    cmd->add_option("--format", o.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

void add_run_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--order", o.order,
                    "Tensor order (used when --dims has one entry)");
    cmd->add_option("--dims", o.dims,
                    "Extents; one value is replicated to the order. For "
                    "--family matmul the first value is the matrix side n.")
        ->delimiter(',');
    cmd->add_option("--rank", o.ranks, "CP rank(s); lists sweep likelihood runs")
        ->delimiter(',');
    cmd->add_option("--family", o.family, "Problem family")
        ->check(CLI::IsMember({"uniform01", "uniform11", "gaussian", "matmul"}));
    cmd->add_option("--optimizer", o.optimizer, "Optimizer")
        ->check(CLI::IsMember({"als", "gn"}));
    cmd->add_option("--reg", o.reg, "Gauss-Newton regularization mode")
        ->check(CLI::IsMember({"constant", "varying"}));
    cmd->add_option("--reg-shape", o.reg_shape, "Regularization shape")
        ->check(CLI::IsMember({"identity", "diagonal"}));
    cmd->add_option("--lambda", o.lambda,
                    "Regularization value (ALS lambda0 / GN constant or start)");
    cmd->add_option("--mu", o.mu, "Varying-regularization factor");
    cmd->add_option("--lambda-upper", o.lambda_upper, "Varying upper threshold");
    cmd->add_option("--lambda-lower", o.lambda_lower, "Varying lower threshold");
    cmd->add_flag("--armijo", o.armijo, "Enable Armijo backtracking (GN)");
    cmd->add_option("--cg-tol", o.cg_tol, "Inner CG relative tolerance");
    cmd->add_option("--cg-max-iters", o.cg_max_iters,
                    "Inner CG iteration cap (0 = automatic)");
    cmd->add_option("--residual-tol", o.residual_tol,
                    "Stop when the relative residual drops below this");
    cmd->add_option("--step-tol", o.step_tol,
                    "Stop when the update norm drops below this");
    cmd->add_option("--max-iters", o.max_iters,
                    "Outer iteration cap (default 10000 ALS / 500 GN)");
    cmd->add_option("--problems", o.problems, "Number of random problems");
    cmd->add_option("--inits", o.inits, "Initializations per problem");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--threads", o.threads,
                    "Worker threads (0 = hardware concurrency)")
        ->envname("CPKIT_THREADS");
    add_output_flags(cmd, o);
}

std::string experiment_config(const CommonOpts& o) {
    std::ostringstream js;
    js << std::setprecision(std::numeric_limits<double>::max_digits10);
    js << "{\"problem\":{\"family\":\"" << o.family << "\"";
    if (o.family == "matmul") {
        const std::uint64_t n = o.dims.empty() ? 2 : o.dims[0];
        js << ",\"matmul_n\":" << n;
    } else {
        std::vector<std::uint64_t> dims = o.dims;
        if (dims.empty()) dims.assign(static_cast<std::size_t>(o.order), 4);
        if (dims.size() == 1) {
            dims.assign(static_cast<std::size_t>(o.order), dims[0]);
        }
        js << ",\"dims\":[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            js << (i ? "," : "") << dims[i];
        }
        js << "]";
    }
    js << ",\"ranks\":[";
    for (std::size_t i = 0; i < o.ranks.size(); ++i) {
        js << (i ? "," : "") << o.ranks[i];
    }
    js << "]}";

    js << ",\"optimizer\":\"" << o.optimizer << "\"";

    const int als_iters = o.max_iters >= 0 ? o.max_iters : 10000;
    js << ",\"als\":{\"max_sweeps\":" << als_iters
       << ",\"residual_tol\":" << o.residual_tol
       << ",\"step_tol\":" << o.step_tol;
    if (o.lambda >= 0) js << ",\"lambda0\":" << o.lambda;
    js << "}";

    const int gn_iters = o.max_iters >= 0 ? o.max_iters : 500;
    js << ",\"gn\":{\"max_iters\":" << gn_iters
       << ",\"residual_tol\":" << o.residual_tol
       << ",\"step_tol\":" << o.step_tol << ",\"cg_tol\":" << o.cg_tol
       << ",\"cg_max_iters\":" << o.cg_max_iters;
    js << ",\"reg\":{\"mode\":\"" << o.reg << "\",\"shape\":\"" << o.reg_shape
       << "\"";
    if (o.reg == "varying") {
        js << ",\"upper\":" << o.lambda_upper << ",\"lower\":" << o.lambda_lower
           << ",\"mu\":" << o.mu;
        if (o.lambda >= 0) js << ",\"lambda\":" << o.lambda;
    } else if (o.lambda >= 0) {
        js << ",\"lambda\":" << o.lambda;
    }
    js << "}";
    js << ",\"armijo\":{\"enabled\":" << (o.armijo ? "true" : "false") << "}";
    js << "}";

    js << ",\"problems\":" << o.problems << ",\"inits\":" << o.inits
       << ",\"seed\":" << o.seed << ",\"threads\":" << o.threads << "}";
    return js.str();
}

int emit_and_release(cpkit_report* report, const CommonOpts& o) {
    char* config = nullptr;
    if (cpkit_report_config(report, &config) == CPKIT_OK) {
        std::printf("resolved config:\n%s\n", config);
        cpkit_string_free(config);
    }
    const cpkit_status st = cpkit_report_emit(report, o.format.c_str(), o.out.c_str());
    if (st != CPKIT_OK) {
        std::fprintf(stderr, "error: %s (%s)\n", cpkit_last_error(),
                     cpkit_status_name(st));
        cpkit_report_destroy(report);
        return 2;
    }
    const int ok = cpkit_report_ok(report);
    cpkit_report_destroy(report);
    return ok ? 0 : 1;
}

int run_report(cpkit_status st, cpkit_report* report, const CommonOpts& o) {
    if (st != CPKIT_OK) {
        std::fprintf(stderr, "error: %s (%s)\n", cpkit_last_error(),
                     cpkit_status_name(st));
        return 2;
    }
    return emit_and_release(report, o);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cpkit: CP tensor decomposition experiments"};
    app.set_config("--config", "",
                   "Read options from an INI/TOML file (subcommand flags go "
                   "in a [subcommand] section)");
    app.require_subcommand(1);

    CommonOpts trace_opts, like_opts, matmul_opts, bench_opts, self_opts;

    auto* trace_cmd =
        app.add_subcommand("trace", "One problem, one init, full trace");
    add_run_flags(trace_cmd, trace_opts);

    auto* like_cmd = app.add_subcommand(
        "likelihood", "Convergence-likelihood study over problems x inits");
    add_run_flags(like_cmd, like_opts);

    auto* matmul_cmd = app.add_subcommand(
        "matmul", "Matrix-multiplication tensor protocol (ALS-decay and "
                  "ALS-warm-started Gauss-Newton arms)");
    matmul_opts.inits = 100;
    matmul_cmd->add_option("--dims", matmul_opts.dims, "Matrix side n")
        ->delimiter(',');
    matmul_cmd->add_option("--rank", matmul_opts.ranks, "Target CP rank")
        ->delimiter(',');
    matmul_cmd->add_option("--inits", matmul_opts.inits, "Initializations");
    matmul_cmd->add_option("--seed", matmul_opts.seed, "Master seed");
    matmul_cmd
        ->add_option("--threads", matmul_opts.threads,
                     "Worker threads (0 = hardware concurrency)")
        ->envname("CPKIT_THREADS");
    add_output_flags(matmul_cmd, matmul_opts);

    auto* bench_cmd = app.add_subcommand(
        "bench-matvec", "Time the implicit Gauss-Newton matvec over sizes");
    bench_cmd->add_option("--order", bench_opts.order, "Tensor order");
    bench_cmd->add_option("--dims", bench_opts.dims, "Mode sizes to time")
        ->delimiter(',');
    bench_cmd->add_option("--rank", bench_opts.ranks, "Ranks to time")
        ->delimiter(',');
    bench_cmd->add_option("--seed", bench_opts.seed, "Seed");
    add_output_flags(bench_cmd, bench_opts);

    auto* self_cmd = app.add_subcommand(
        "selftest-oracle",
        "Cross-check implicit operators against dense reference routes");
    self_cmd->add_option("--seed", self_opts.seed, "Seed");
    add_output_flags(self_cmd, self_opts);

    CLI11_PARSE(app, argc, argv);

    if (trace_cmd->parsed()) {
        cpkit_report* report = nullptr;
        const std::string cfg = experiment_config(trace_opts);
        const cpkit_status st = cpkit_run_trace(cfg.c_str(), &report);
        return run_report(st, report, trace_opts);
    }
    if (like_cmd->parsed()) {
        cpkit_report* report = nullptr;
        const std::string cfg = experiment_config(like_opts);
        const cpkit_status st = cpkit_run_likelihood(cfg.c_str(), &report);
        return run_report(st, report, like_opts);
    }
    if (matmul_cmd->parsed()) {
        std::ostringstream js;
        js << std::setprecision(std::numeric_limits<double>::max_digits10);
        const std::uint64_t n = matmul_opts.dims.empty() ? 2 : matmul_opts.dims[0];
        js << "{\"n\":" << n << ",\"rank\":" << matmul_opts.ranks[0]
           << ",\"inits\":" << matmul_opts.inits
           << ",\"seed\":" << matmul_opts.seed
           << ",\"threads\":" << matmul_opts.threads << "}";
        cpkit_report* report = nullptr;
        const cpkit_status st = cpkit_run_matmul(js.str().c_str(), &report);
        return run_report(st, report, matmul_opts);
    }
    if (bench_cmd->parsed()) {
        std::ostringstream js;
        std::vector<std::uint64_t> sizes = bench_opts.dims;
        if (sizes.empty()) sizes = {200};
        js << "{\"order\":" << bench_opts.order << ",\"s\":[";
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            js << (i ? "," : "") << sizes[i];
        }
        js << "],\"ranks\":[";
        for (std::size_t i = 0; i < bench_opts.ranks.size(); ++i) {
            js << (i ? "," : "") << bench_opts.ranks[i];
        }
        js << "],\"seed\":" << bench_opts.seed << "}";
        cpkit_report* report = nullptr;
        const cpkit_status st = cpkit_run_bench_matvec(js.str().c_str(), &report);
        return run_report(st, report, bench_opts);
    }
    if (self_cmd->parsed()) {
        std::ostringstream js;
        js << "{\"seed\":" << self_opts.seed << "}";
        cpkit_report* report = nullptr;
        const cpkit_status st =
            cpkit_run_selftest_oracle(js.str().c_str(), &report);
        return run_report(st, report, self_opts);
    }
    return 0;
}
