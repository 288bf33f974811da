#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cpkit {

enum class TerminalStatus {
    converged_residual,
    converged_step,
    cap_hit,
    numerical_failure,
};

const char* to_string(TerminalStatus s);
TerminalStatus status_from_string(const std::string& s);

struct TraceRecord {
    int iteration = 0;        // 1-based outer iteration / sweep index
    double residual = 0.0;    // relative residual after this iteration
    double fitness = 0.0;
    double lambda = 0.0;      // regularization used by this iteration
    int cg_iters = 0;         // inner CG iterations (0 for ALS)
    double seconds = 0.0;     // cumulative wall time, monotonic clock
};

// Per-iteration trace of one optimizer run. Records are in strictly
// increasing iteration order; seconds are non-decreasing.
struct ConvergenceReport {
    std::vector<TraceRecord> records;
    TerminalStatus status = TerminalStatus::cap_hit;

    double final_residual() const {
        return records.empty() ? 1.0 : records.back().residual;
    }
    double best_residual() const;
};

// Terminal outcome of a single (problem, init) optimization.
struct InstanceResult {
    TerminalStatus status = TerminalStatus::cap_hit;
    int iterations = 0;
    double final_residual = 1.0;
    double best_residual = 1.0;
};

struct LikelihoodRankResult {
    int rank = 0;
    // instances[problem][init]
    std::vector<std::vector<InstanceResult>> instances;
    std::vector<int> converged_inits_per_problem;
    double fraction = 0.0;  // problems with >= 1 converged init / problems
};

struct LikelihoodReport {
    std::vector<LikelihoodRankResult> ranks;
};

struct MatmulArmResult {
    std::string name;
    double success_tol = 0.0;  // best residual below this counts as converged
    std::vector<InstanceResult> inits;
    int converged = 0;
};

struct MatmulReport {
    std::uint64_t n = 0;  // matrix side; tensor is n^2 x n^2 x n^2
    int rank = 0;
    std::vector<MatmulArmResult> arms;
};

struct BenchRow {
    std::size_t order = 0;
    std::uint64_t s = 0;
    int rank = 0;
    int reps = 0;
    double seconds_per_matvec = 0.0;  // min over reps
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

struct SelftestRow {
    std::string name;
    int instances = 0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SelftestReport {
    std::vector<SelftestRow> checks;
    bool all_pass = false;
};

// Tagged union of every report the harness can produce, together with the
// fully resolved configuration that produced it (every default recorded).
struct Report {
    enum class Kind { trace, likelihood, matmul, bench, selftest };

    Kind kind = Kind::trace;
    nlohmann::json config = nlohmann::json::object();

    ConvergenceReport trace;
    LikelihoodReport likelihood;
    MatmulReport matmul;
    BenchReport bench;
    SelftestReport selftest;

    nlohmann::json to_json() const;
    std::string to_csv() const;
    static Report from_json(const nlohmann::json& j);
};

// format is "csv" or "json"; path "-" writes to stdout.
void emit_report(const Report& report, const std::string& format,
                 const std::string& path);

}  // namespace cpkit
