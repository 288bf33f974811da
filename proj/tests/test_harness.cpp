#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/errors.hpp"
#include "core/harness.hpp"

using namespace cpkit;
using nlohmann::json;

namespace {

ExperimentSpec base_spec() {
    ExperimentSpec s;
    s.family = UniformFamily{-1.0, 1.0};
    s.dims = {4, 4, 4};
    s.ranks = {2};
    s.optimizer = OptimizerKind::gn;
    s.master_seed = 3;
    s.threads = 1;
    return s;
}

}  // namespace

TEST_CASE("trace run on an exact rank-2 problem converges") {
    ExperimentSpec s = base_spec();
    Report rep = run_trace(s);
    REQUIRE(rep.kind == Report::Kind::trace);
    CHECK(rep.trace.status == TerminalStatus::converged_residual);
    CHECK(rep.trace.final_residual() < 5e-5);
    CHECK(rep.config.at("kind") == "trace");

    // Iterations strictly increasing, wall time non-decreasing.
    for (std::size_t i = 1; i < rep.trace.records.size(); ++i) {
        REQUIRE(rep.trace.records[i].iteration >
                rep.trace.records[i - 1].iteration);
        REQUIRE(rep.trace.records[i].seconds >=
                rep.trace.records[i - 1].seconds);
    }
}

TEST_CASE("zero iteration cap gives an empty trace with cap_hit") {
    ExperimentSpec s = base_spec();
    s.gn.max_iters = 0;
    Report rep = run_trace(s);
    CHECK(rep.trace.records.empty());
    CHECK(rep.trace.status == TerminalStatus::cap_hit);
}

TEST_CASE("unregularized ALS traces are non-increasing") {
    ExperimentSpec s = base_spec();
    s.optimizer = OptimizerKind::als;
    s.ranks = {6};
    s.master_seed = 1;
    s.als.max_sweeps = 300;
    s.als.residual_tol = 1e-9;
    s.als.step_tol = 0.0;
    Report rep = run_trace(s);
    REQUIRE(rep.trace.records.size() == 300);
    for (std::size_t i = 1; i < rep.trace.records.size(); ++i) {
        REQUIRE(rep.trace.records[i].residual <=
                rep.trace.records[i - 1].residual + 1e-12);
    }
}

TEST_CASE("rank-1 problems converge for every init under both optimizers") {
    for (OptimizerKind opt : {OptimizerKind::als, OptimizerKind::gn}) {
        ExperimentSpec s = base_spec();
        s.optimizer = opt;
        s.ranks = {1};
        s.num_problems = 3;
        s.num_inits = 5;
        Report rep = run_likelihood(s);
        REQUIRE(rep.likelihood.ranks.size() == 1);
        CHECK(rep.likelihood.ranks[0].fraction == 1.0);
        for (int c : rep.likelihood.ranks[0].converged_inits_per_problem) {
            CHECK(c == 5);
        }
    }
}

TEST_CASE("likelihood reports are identical across reruns and thread counts") {
    ExperimentSpec s = base_spec();
    s.ranks = {1, 3};
    s.num_problems = 2;
    s.num_inits = 2;
    s.gn.max_iters = 40;

    Report a = run_likelihood(s);
    Report b = run_likelihood(s);
    CHECK(a.to_json().dump() == b.to_json().dump());

    ExperimentSpec threaded = s;
    threaded.threads = 2;
    Report c = run_likelihood(threaded);
    // Scheduling independence: only the recorded thread count may differ.
    json ja = a.to_json();
    json jc = c.to_json();
    ja["config"].erase("threads");
    jc["config"].erase("threads");
    CHECK(ja.dump() == jc.dump());
}

TEST_CASE("per-rank fractions are recomputable from the raw rows") {
    ExperimentSpec s = base_spec();
    s.ranks = {2, 5};
    s.num_problems = 3;
    s.num_inits = 2;
    s.gn.max_iters = 60;
    Report rep = run_likelihood(s);
    for (const auto& rr : rep.likelihood.ranks) {
        int with_success = 0;
        for (std::size_t p = 0; p < rr.instances.size(); ++p) {
            int converged = 0;
            for (const auto& inst : rr.instances[p]) {
                if (inst.status == TerminalStatus::converged_residual) {
                    ++converged;
                }
            }
            REQUIRE(converged == rr.converged_inits_per_problem[p]);
            if (converged > 0) ++with_success;
        }
        REQUIRE(rr.fraction ==
                doctest::Approx(static_cast<double>(with_success) / 3.0));
    }
}

TEST_CASE("matmul protocol on the trivial instance converges in every arm") {
    MatmulProtocolSpec spec;
    spec.n = 1;
    spec.rank = 1;
    spec.num_inits = 3;
    spec.master_seed = 5;
    spec.threads = 1;
    spec.warm_sweeps = 20;
    Report rep = run_matmul_protocol(spec);
    REQUIRE(rep.kind == Report::Kind::matmul);
    REQUIRE(rep.matmul.arms.size() == 3);
    for (const auto& arm : rep.matmul.arms) {
        CHECK(arm.converged == 3);
    }
}

TEST_CASE("hybrid arms recover the classical rank-8 bilinear algorithm") {
    MatmulProtocolSpec spec;
    spec.n = 2;
    spec.rank = 8;
    spec.num_inits = 10;
    spec.master_seed = 2;
    spec.threads = 2;
    Report rep = run_matmul_protocol(spec);
    for (const auto& arm : rep.matmul.arms) {
        if (arm.name == "hybrid_gn" || arm.name == "hybrid_gn_armijo") {
            CHECK(arm.converged >= 8);
        }
    }
}

TEST_CASE("csv emission shapes") {
    Report rep;
    rep.kind = Report::Kind::trace;
    CHECK(rep.to_csv() == "iter,residual,fitness,lambda,cg_iters,seconds\n");

    rep.trace.records = {{1, 0.5, 0.5, 1e-2, 3, 0.1},
                         {2, 0.25, 0.75, 5e-3, 4, 0.2},
                         {3, 0.125, 0.875, 2.5e-3, 2, 0.3}};
    std::string csv = rep.to_csv();
    int lines = 0;
    for (char ch : csv) {
        if (ch == '\n') ++lines;
    }
    CHECK(lines == 4);
}

TEST_CASE("report json round-trips") {
    ExperimentSpec s = base_spec();
    s.ranks = {1, 2};
    s.num_problems = 2;
    s.num_inits = 2;
    Report rep = run_likelihood(s);
    Report back = Report::from_json(rep.to_json());
    CHECK(back.to_json().dump() == rep.to_json().dump());

    Report trace = run_trace(s);
    Report trace_back = Report::from_json(trace.to_json());
    CHECK(trace_back.to_json().dump() == trace.to_json().dump());
}

TEST_CASE("emit rejects unknown formats") {
    Report rep;
    CHECK_THROWS_AS(emit_report(rep, "xml", "-"), InvalidArgument);
    CHECK_THROWS_AS(emit_report(rep, "json", "/nonexistent-dir/r.json"), IoError);
}

TEST_CASE("experiment specs parse from json with defaults recorded") {
    const json j = json::parse(R"({
      "problem": {"family": "uniform11", "dims": [4,4,4], "ranks": [3,5]},
      "optimizer": "gn",
      "gn": {"reg": {"mode": "varying", "shape": "identity"}},
      "problems": 7, "inits": 5, "seed": 42
    })");
    ExperimentSpec s = ExperimentSpec::from_json(j);
    CHECK(s.ranks == std::vector<int>{3, 5});
    CHECK(s.num_problems == 7);
    CHECK(s.gn.schedule.mode == RegMode::varying);
    CHECK(s.gn.schedule.upper == 1e-2);

    // Resolution is idempotent: parsing the resolved config reproduces it.
    json resolved = s.resolved_json();
    ExperimentSpec s2 = ExperimentSpec::from_json(resolved);
    CHECK(s2.resolved_json().dump() == resolved.dump());
    CHECK(resolved.at("init").at("distribution") == "gaussian");
}

TEST_CASE("matmul family forces the cubed extents") {
    const json j = json::parse(R"({
      "problem": {"family": "matmul", "matmul_n": 3, "rank": 7}
    })");
    ExperimentSpec s = ExperimentSpec::from_json(j);
    CHECK(s.dims == std::vector<std::uint64_t>({9, 9, 9}));
}

TEST_CASE("bad configs are rejected") {
    CHECK_THROWS_AS(
        ExperimentSpec::from_json(json::parse(
            R"({"problem":{"family":"nope","dims":[2,2]}})")),
        ParseError);
    CHECK_THROWS_AS(
        ExperimentSpec::from_json(json::parse(
            R"({"problem":{"family":"gaussian","dims":[2,2]},"optimizer":"sgd"})")),
        ParseError);
    CHECK_THROWS_AS(
        ExperimentSpec::from_json(json::parse(
            R"({"problem":{"family":"gaussian","dims":[2,2]},"problems":0})")),
        InvalidArgument);
    CHECK_THROWS_AS(
        ExperimentSpec::from_json(json::parse(
            R"({"problem":{"family":"gaussian"}})")),
        ParseError);
}

TEST_CASE("derived seeds separate problems and inits") {
    CHECK(problem_seed(1, 3, 0) != problem_seed(1, 3, 1));
    CHECK(problem_seed(1, 3, 0) != problem_seed(1, 4, 0));
    CHECK(problem_seed(1, 3, 0) != problem_seed(2, 3, 0));
    CHECK(init_seed(1, 3, 0, 0) != init_seed(1, 3, 0, 1));
    CHECK(init_seed(1, 3, 0, 0) != problem_seed(1, 3, 0));
}

TEST_CASE("trace records carry the oscillating lambda") {
    ExperimentSpec s = base_spec();
    s.ranks = {5};
    s.gn.max_iters = 12;
    s.gn.residual_tol = 0.0;
    s.gn.step_tol = 0.0;
    s.gn.schedule = RegSchedule::varying(1e-2, 1e-3, 2.0);
    Report rep = run_trace(s);
    REQUIRE(rep.trace.records.size() == 12);
    const double expected[] = {1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4, 1.25e-3,
                               2.5e-3, 5e-3, 1e-2, 2e-2, 1e-2, 5e-3};
    for (std::size_t i = 0; i < 12; ++i) {
        REQUIRE(rep.trace.records[i].lambda == doctest::Approx(expected[i]));
    }
}
