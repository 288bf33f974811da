#include "core/harness.hpp"

#include <atomic>
#include <functional>
#include <thread>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace cpkit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing and resolution.

namespace {

constexpr std::uint64_t kProblemTag = 0x50524F42;  // "PROB"
constexpr std::uint64_t kInitTag = 0x494E4954;     // "INIT"

Family family_from_json(const json& p) {
    const std::string name = p.value("family", "uniform01");
    if (name == "uniform01") return UniformFamily{0.0, 1.0};
    if (name == "uniform11") return UniformFamily{-1.0, 1.0};
    if (name == "uniform") {
        return UniformFamily{p.value("a", 0.0), p.value("b", 1.0)};
    }
    if (name == "gaussian") return GaussianFamily{};
    if (name == "matmul") {
        return MatmulFamily{p.value("matmul_n", std::uint64_t{2})};
    }
    throw ParseError("unknown problem family: " + name);
}

json family_to_json(const Family& f) {
    json p;
    if (const auto* u = std::get_if<UniformFamily>(&f)) {
        p["family"] = "uniform";
        p["a"] = u->a;
        p["b"] = u->b;
    } else if (std::holds_alternative<GaussianFamily>(f)) {
        p["family"] = "gaussian";
    } else {
        p["family"] = "matmul";
        p["matmul_n"] = std::get<MatmulFamily>(f).n;
    }
    return p;
}

InitDistribution init_from_json(const json& j) {
    InitDistribution d;
    if (!j.contains("init")) return d;
    const json& i = j.at("init");
    const std::string name = i.value("distribution", "default");
    if (name == "default") {
        d.kind = InitDistribution::Kind::family_default;
    } else if (name == "uniform") {
        d.kind = InitDistribution::Kind::uniform;
        d.a = i.value("a", 0.0);
        d.b = i.value("b", 1.0);
    } else if (name == "gaussian") {
        d.kind = InitDistribution::Kind::gaussian;
    } else {
        throw ParseError("unknown init distribution: " + name);
    }
    return d;
}

json init_to_json(const InitDistribution& d) {
    json i;
    switch (d.kind) {
        case InitDistribution::Kind::family_default:
            i["distribution"] = "default";
            break;
        case InitDistribution::Kind::uniform:
            i["distribution"] = "uniform";
            i["a"] = d.a;
            i["b"] = d.b;
            break;
        case InitDistribution::Kind::gaussian:
            i["distribution"] = "gaussian";
            break;
    }
    return i;
}

AlsConfig als_from_json(const json& j) {
    AlsConfig c;
    if (!j.contains("als")) return c;
    const json& a = j.at("als");
    c.max_sweeps = a.value("max_sweeps", c.max_sweeps);
    c.residual_tol = a.value("residual_tol", c.residual_tol);
    c.step_tol = a.value("step_tol", c.step_tol);
    c.lambda0 = a.value("lambda0", c.lambda0);
    c.decay_factor = a.value("decay_factor", c.decay_factor);
    if (a.contains("decay_every") && !a.at("decay_every").is_null()) {
        c.decay_every = a.at("decay_every").get<int>();
    }
    return c;
}

json als_to_json(const AlsConfig& c) {
    json a;
    a["max_sweeps"] = c.max_sweeps;
    a["residual_tol"] = c.residual_tol;
    a["step_tol"] = c.step_tol;
    a["lambda0"] = c.lambda0;
    a["decay_factor"] = c.decay_factor;
    a["decay_every"] = c.decay_every ? json(*c.decay_every) : json(nullptr);
    return a;
}

RegShape shape_from_string(const std::string& s) {
    if (s == "identity") return RegShape::identity;
    if (s == "diagonal") return RegShape::diagonal;
    throw ParseError("unknown regularization shape: " + s);
}

GnConfig gn_from_json(const json& j) {
    GnConfig c;
    if (!j.contains("gn")) return c;
    const json& g = j.at("gn");
    c.grad_tol = g.value("grad_tol", c.grad_tol);
    c.residual_tol = g.value("residual_tol", c.residual_tol);
    c.step_tol = g.value("step_tol", c.step_tol);
    c.max_iters = g.value("max_iters", c.max_iters);
    c.cg_tol = g.value("cg_tol", c.cg_tol);
    c.cg_max_iters = g.value("cg_max_iters", c.cg_max_iters);
    if (g.contains("reg")) {
        const json& r = g.at("reg");
        const std::string mode = r.value("mode", "varying");
        const RegShape shape = shape_from_string(r.value("shape", "identity"));
        if (mode == "constant") {
            c.schedule = RegSchedule::constant(r.value("lambda", 1e-3), shape);
        } else if (mode == "varying") {
            const double upper = r.value("upper", 1e-2);
            const double lower = r.value("lower", 1e-6);
            const double mu = r.value("mu", 2.0);
            c.schedule = RegSchedule::varying(upper, lower, mu, shape);
            c.schedule.lambda = r.value("lambda", upper);
        } else {
            throw ParseError("unknown regularization mode: " + mode);
        }
    }
    if (g.contains("armijo")) {
        const json& ar = g.at("armijo");
        if (ar.is_boolean()) {
            if (ar.get<bool>()) c.armijo = ArmijoParams{};
        } else if (ar.value("enabled", true)) {
            ArmijoParams ap;
            ap.c1 = ar.value("c1", ap.c1);
            ap.shrink = ar.value("shrink", ap.shrink);
            ap.max_backtracks = ar.value("max_backtracks", ap.max_backtracks);
            c.armijo = ap;
        }
    }
    const std::string beta = g.value("cg_beta", "standard");
    if (beta == "standard") {
        c.cg_beta = CgBetaVariant::standard;
    } else if (beta == "stale_denominator") {
        c.cg_beta = CgBetaVariant::stale_denominator;
    } else {
        throw ParseError("unknown cg_beta variant: " + beta);
    }
    return c;
}

json gn_to_json(const GnConfig& c) {
    json g;
    g["grad_tol"] = c.grad_tol;
    g["residual_tol"] = c.residual_tol;
    g["step_tol"] = c.step_tol;
    g["max_iters"] = c.max_iters;
    g["cg_tol"] = c.cg_tol;
    g["cg_max_iters"] = c.cg_max_iters;
    json r;
    r["mode"] = c.schedule.mode == RegMode::constant ? "constant" : "varying";
    r["shape"] =
        c.schedule.shape == RegShape::identity ? "identity" : "diagonal";
    r["lambda"] = c.schedule.lambda;
    if (c.schedule.mode == RegMode::varying) {
        r["mu"] = c.schedule.mu;
        r["lower"] = c.schedule.lower;
        r["upper"] = c.schedule.upper;
    }
    g["reg"] = r;
    if (c.armijo) {
        g["armijo"] = json{{"enabled", true},
                           {"c1", c.armijo->c1},
                           {"shrink", c.armijo->shrink},
                           {"max_backtracks", c.armijo->max_backtracks}};
    } else {
        g["armijo"] = json{{"enabled", false}};
    }
    g["cg_beta"] = c.cg_beta == CgBetaVariant::standard ? "standard"
                                                        : "stale_denominator";
    return g;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (ranks.empty()) {
        throw InvalidArgument("experiment: at least one rank required");
    }
    for (int r : ranks) {
        if (r < 1) throw InvalidArgument("experiment: ranks must be positive");
    }
    if (num_problems < 1 || num_inits < 1) {
        throw InvalidArgument("experiment: problems and inits must be >= 1");
    }
    if (init.kind == InitDistribution::Kind::uniform && !(init.a < init.b)) {
        throw InvalidArgument("experiment: init uniform needs a < b");
    }
    ProblemSpec p{family, dims, ranks[0], master_seed};
    p.validate();
    als.validate();
    gn.validate();
}

InitDistribution ExperimentSpec::resolved_init() const {
    if (init.kind != InitDistribution::Kind::family_default) return init;
    if (const auto* u = std::get_if<UniformFamily>(&family); u && u->a >= 0.0) {
        InitDistribution d;
        d.kind = InitDistribution::Kind::uniform;
        d.a = 0.0;
        d.b = 1.0;
        return d;
    }
    InitDistribution d;
    d.kind = InitDistribution::Kind::gaussian;
    return d;
}

int ExperimentSpec::resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
    ExperimentSpec s;
    const json problem = j.value("problem", json::object());
    s.family = family_from_json(problem);
    if (const auto* m = std::get_if<MatmulFamily>(&s.family)) {
        const std::uint64_t sq = m->n * m->n;
        s.dims = {sq, sq, sq};
    } else if (problem.contains("dims")) {
        s.dims = problem.at("dims").get<std::vector<std::uint64_t>>();
    } else {
        throw ParseError("experiment: problem.dims required");
    }
    if (problem.contains("ranks")) {
        s.ranks = problem.at("ranks").get<std::vector<int>>();
    } else if (problem.contains("rank")) {
        s.ranks = {problem.at("rank").get<int>()};
    }
    const std::string opt = j.value("optimizer", "als");
    if (opt == "als") {
        s.optimizer = OptimizerKind::als;
    } else if (opt == "gn") {
        s.optimizer = OptimizerKind::gn;
    } else {
        throw ParseError("unknown optimizer: " + opt);
    }
    s.als = als_from_json(j);
    s.gn = gn_from_json(j);
    s.num_problems = j.value("problems", 1);
    s.num_inits = j.value("inits", 1);
    s.init = init_from_json(j);
    s.master_seed = j.value("seed", std::uint64_t{0});
    s.threads = j.value("threads", 0);
    s.validate();
    return s;
}

json ExperimentSpec::resolved_json() const {
    json j;
    json problem = family_to_json(family);
    problem["dims"] = dims;
    problem["ranks"] = ranks;
    j["problem"] = problem;
    j["optimizer"] = optimizer == OptimizerKind::als ? "als" : "gn";
    j["als"] = als_to_json(als);
    j["gn"] = gn_to_json(gn);
    j["problems"] = num_problems;
    j["inits"] = num_inits;
    j["init"] = init_to_json(resolved_init());
    j["seed"] = master_seed;
    j["threads"] = resolved_threads();
    return j;
}

void MatmulProtocolSpec::validate() const {
    if (n < 1) throw InvalidArgument("matmul protocol: n must be >= 1");
    if (rank < 1) throw InvalidArgument("matmul protocol: rank must be >= 1");
    if (num_inits < 1) {
        throw InvalidArgument("matmul protocol: inits must be >= 1");
    }
    if (als_lambda0 < 0 || warm_lambda < 0 || gn_lambda < 0) {
        throw InvalidArgument("matmul protocol: negative lambda");
    }
    if (als_decay_every < 1 || als_max_sweeps < 0 || warm_sweeps < 0 ||
        gn_max_iters < 0) {
        throw InvalidArgument("matmul protocol: bad iteration counts");
    }
}

int MatmulProtocolSpec::resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

MatmulProtocolSpec MatmulProtocolSpec::from_json(const json& j) {
    MatmulProtocolSpec s;
    s.n = j.value("n", s.n);
    s.rank = j.value("rank", s.rank);
    s.num_inits = j.value("inits", s.num_inits);
    s.master_seed = j.value("seed", s.master_seed);
    s.threads = j.value("threads", 0);
    s.init = init_from_json(j);
    if (j.contains("als")) {
        const json& a = j.at("als");
        s.als_lambda0 = a.value("lambda0", s.als_lambda0);
        s.als_decay_factor = a.value("decay_factor", s.als_decay_factor);
        s.als_decay_every = a.value("decay_every", s.als_decay_every);
        s.als_max_sweeps = a.value("max_sweeps", s.als_max_sweeps);
        s.als_residual_tol = a.value("residual_tol", s.als_residual_tol);
    }
    if (j.contains("warm")) {
        const json& w = j.at("warm");
        s.warm_sweeps = w.value("sweeps", s.warm_sweeps);
        s.warm_lambda = w.value("lambda", s.warm_lambda);
    }
    if (j.contains("gn")) {
        const json& g = j.at("gn");
        s.gn_lambda = g.value("lambda", s.gn_lambda);
        s.gn_max_iters = g.value("max_iters", s.gn_max_iters);
        s.gn_residual_tol = g.value("residual_tol", s.gn_residual_tol);
        s.gn_cg_tol = g.value("cg_tol", s.gn_cg_tol);
    }
    s.hybrid_success_tol = j.value("success_tol", s.hybrid_success_tol);
    s.validate();
    return s;
}

json MatmulProtocolSpec::resolved_json() const {
    json j;
    j["n"] = n;
    j["rank"] = rank;
    j["inits"] = num_inits;
    j["seed"] = master_seed;
    j["threads"] = resolved_threads();
    InitDistribution d = init;
    if (d.kind == InitDistribution::Kind::family_default) {
        d.kind = InitDistribution::Kind::gaussian;
    }
    j["init"] = init_to_json(d);
    j["als"] = json{{"lambda0", als_lambda0},
                    {"decay_factor", als_decay_factor},
                    {"decay_every", als_decay_every},
                    {"max_sweeps", als_max_sweeps},
                    {"residual_tol", als_residual_tol}};
    j["warm"] = json{{"sweeps", warm_sweeps}, {"lambda", warm_lambda}};
    j["gn"] = json{{"lambda", gn_lambda},
                   {"max_iters", gn_max_iters},
                   {"residual_tol", gn_residual_tol},
                   {"cg_tol", gn_cg_tol}};
    j["success_tol"] = hybrid_success_tol;
    return j;
}

// ---------------------------------------------------------------------------
// Runners.

std::uint64_t problem_seed(std::uint64_t master, int rank, int problem) {
    return rng::derive(
        rng::derive(rng::derive(rng::mix64(master), kProblemTag),
                    static_cast<std::uint64_t>(rank)),
        static_cast<std::uint64_t>(problem));
}

std::uint64_t init_seed(std::uint64_t master, int rank, int problem, int init) {
    return rng::derive(
        rng::derive(rng::derive(rng::derive(rng::mix64(master), kInitTag),
                                static_cast<std::uint64_t>(rank)),
                    static_cast<std::uint64_t>(problem)),
        static_cast<std::uint64_t>(init));
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, count);
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

namespace {

KruskalModel draw_init(const std::vector<std::uint64_t>& dims, int rank,
                       std::uint64_t seed, const InitDistribution& dist) {
    if (dist.kind == InitDistribution::Kind::uniform) {
        return random_model(dims, rank, seed, UniformFamily{dist.a, dist.b});
    }
    return random_model(dims, rank, seed, GaussianFamily{});
}

DenseTensor build_problem_tensor(const ExperimentSpec& spec, int rank,
                                 int problem) {
    if (std::holds_alternative<MatmulFamily>(spec.family)) {
        return matmul_tensor(std::get<MatmulFamily>(spec.family).n);
    }
    ProblemSpec p{spec.family, spec.dims,
                  static_cast<Eigen::Index>(rank),
                  problem_seed(spec.master_seed, rank, problem)};
    return random_low_rank(p).second;
}

InstanceResult summarize(const ConvergenceReport& rep) {
    InstanceResult r;
    r.status = rep.status;
    r.iterations = static_cast<int>(rep.records.size());
    r.final_residual = rep.final_residual();
    r.best_residual = rep.best_residual();
    return r;
}

// Runs one optimizer instance; numerical failures become a status.
InstanceResult run_instance(const ExperimentSpec& spec, const DenseTensor& x,
                            KruskalModel init) {
    try {
        if (spec.optimizer == OptimizerKind::als) {
            auto [model, rep] = als_optimize(x, std::move(init), spec.als);
            return summarize(rep);
        }
        auto [model, rep] = gn_optimize(x, std::move(init), spec.gn);
        return summarize(rep);
    } catch (const Error&) {
        InstanceResult r;
        r.status = TerminalStatus::numerical_failure;
        return r;
    }
}

}  // namespace

Report run_trace(const ExperimentSpec& spec) {
    spec.validate();
    Report report;
    report.kind = Report::Kind::trace;
    nlohmann::json config = spec.resolved_json();
    config["kind"] = "trace";
    report.config = config;

    const int rank = spec.ranks[0];
    const DenseTensor x = build_problem_tensor(spec, rank, 0);
    KruskalModel init = draw_init(spec.dims, rank,
                                  init_seed(spec.master_seed, rank, 0, 0),
                                  spec.resolved_init());
    try {
        if (spec.optimizer == OptimizerKind::als) {
            auto [model, rep] = als_optimize(x, std::move(init), spec.als);
            report.trace = std::move(rep);
        } else {
            auto [model, rep] = gn_optimize(x, std::move(init), spec.gn);
            report.trace = std::move(rep);
        }
    } catch (const Error&) {
        report.trace.status = TerminalStatus::numerical_failure;
    }
    return report;
}

Report run_likelihood(const ExperimentSpec& spec) {
    spec.validate();
    Report report;
    report.kind = Report::Kind::likelihood;
    nlohmann::json config = spec.resolved_json();
    config["kind"] = "likelihood";
    report.config = config;

    const InitDistribution dist = spec.resolved_init();
    const int num_ranks = static_cast<int>(spec.ranks.size());
    const int per_rank = spec.num_problems * spec.num_inits;

    // Problem tensors are generated up front (deterministically) and shared
    // read-only by the workers.
    std::vector<std::vector<DenseTensor>> tensors(
        static_cast<std::size_t>(num_ranks));
    for (int ri = 0; ri < num_ranks; ++ri) {
        for (int p = 0; p < spec.num_problems; ++p) {
            tensors[ri].push_back(build_problem_tensor(spec, spec.ranks[ri], p));
        }
    }

    std::vector<InstanceResult> results(
        static_cast<std::size_t>(num_ranks * per_rank));
    parallel_for(num_ranks * per_rank, spec.resolved_threads(), [&](int t) {
        const int ri = t / per_rank;
        const int within = t % per_rank;
        const int p = within / spec.num_inits;
        const int i = within % spec.num_inits;
        const int rank = spec.ranks[ri];
        KruskalModel init =
            draw_init(spec.dims, rank,
                      init_seed(spec.master_seed, rank, p, i), dist);
        results[static_cast<std::size_t>(t)] =
            run_instance(spec, tensors[ri][p], std::move(init));
    });

    for (int ri = 0; ri < num_ranks; ++ri) {
        LikelihoodRankResult rr;
        rr.rank = spec.ranks[ri];
        int problems_with_success = 0;
        for (int p = 0; p < spec.num_problems; ++p) {
            std::vector<InstanceResult> inits;
            int converged = 0;
            for (int i = 0; i < spec.num_inits; ++i) {
                const auto& res =
                    results[static_cast<std::size_t>(ri * per_rank +
                                                     p * spec.num_inits + i)];
                if (res.status == TerminalStatus::converged_residual) {
                    ++converged;
                }
                inits.push_back(res);
            }
            if (converged > 0) ++problems_with_success;
            rr.instances.push_back(std::move(inits));
            rr.converged_inits_per_problem.push_back(converged);
        }
        rr.fraction = static_cast<double>(problems_with_success) /
                      static_cast<double>(spec.num_problems);
        report.likelihood.ranks.push_back(std::move(rr));
    }
    return report;
}

Report run_matmul_protocol(const MatmulProtocolSpec& spec) {
    spec.validate();
    Report report;
    report.kind = Report::Kind::matmul;
    nlohmann::json config = spec.resolved_json();
    config["kind"] = "matmul";
    report.config = config;
    report.matmul.n = spec.n;
    report.matmul.rank = spec.rank;

    const DenseTensor x = matmul_tensor(spec.n);
    InitDistribution dist = spec.init;
    if (dist.kind == InitDistribution::Kind::family_default) {
        dist.kind = InitDistribution::Kind::gaussian;
    }

    AlsConfig als_arm;
    als_arm.max_sweeps = spec.als_max_sweeps;
    als_arm.residual_tol = spec.als_residual_tol;
    als_arm.step_tol = 0.0;  // run the full schedule unless converged
    als_arm.lambda0 = spec.als_lambda0;
    als_arm.decay_factor = spec.als_decay_factor;
    als_arm.decay_every = spec.als_decay_every;

    AlsConfig warm;
    warm.max_sweeps = spec.warm_sweeps;
    warm.residual_tol = 0.0;
    warm.step_tol = 0.0;
    warm.lambda0 = spec.warm_lambda;

    GnConfig gn_plain;
    gn_plain.max_iters = spec.gn_max_iters;
    gn_plain.residual_tol = spec.gn_residual_tol;
    gn_plain.step_tol = 0.0;
    gn_plain.cg_tol = spec.gn_cg_tol;
    gn_plain.schedule = RegSchedule::constant(spec.gn_lambda);

    GnConfig gn_armijo = gn_plain;
    gn_armijo.armijo = spec.armijo;

    const int arms = 3;
    std::vector<InstanceResult> results(
        static_cast<std::size_t>(arms * spec.num_inits));
    parallel_for(spec.num_inits, spec.resolved_threads(), [&](int i) {
        KruskalModel start = draw_init(
            x.dims(), spec.rank,
            init_seed(spec.master_seed, spec.rank, 0, i), dist);

        auto record = [&](int arm, const ConvergenceReport& rep) {
            results[static_cast<std::size_t>(arm * spec.num_inits + i)] =
                summarize(rep);
        };
        auto fail = [&](int arm) {
            InstanceResult r;
            r.status = TerminalStatus::numerical_failure;
            results[static_cast<std::size_t>(arm * spec.num_inits + i)] = r;
        };

        try {
            auto [m, rep] = als_optimize(x, start, als_arm);
            record(0, rep);
        } catch (const Error&) {
            fail(0);
        }

        // Hybrid arms share the warm-started model.
        try {
            auto [warm_model, warm_rep] = als_optimize(x, start, warm);
            try {
                auto [m1, rep1] = gn_optimize(x, warm_model, gn_plain);
                record(1, rep1);
            } catch (const Error&) {
                fail(1);
            }
            try {
                auto [m2, rep2] = gn_optimize(x, warm_model, gn_armijo);
                record(2, rep2);
            } catch (const Error&) {
                fail(2);
            }
        } catch (const Error&) {
            fail(1);
            fail(2);
        }
    });

    const char* names[arms] = {"als_decay", "hybrid_gn", "hybrid_gn_armijo"};
    for (int arm = 0; arm < arms; ++arm) {
        MatmulArmResult ar;
        ar.name = names[arm];
        ar.success_tol =
            arm == 0 ? spec.als_residual_tol : spec.hybrid_success_tol;
        for (int i = 0; i < spec.num_inits; ++i) {
            const auto& res =
                results[static_cast<std::size_t>(arm * spec.num_inits + i)];
            if (res.best_residual < ar.success_tol) ++ar.converged;
            ar.inits.push_back(res);
        }
        report.matmul.arms.push_back(std::move(ar));
    }
    return report;
}

Report run_matmul_protocol(std::uint64_t n, int rank, int num_inits,
                           std::uint64_t seed) {
    MatmulProtocolSpec spec;
    spec.n = n;
    spec.rank = rank;
    spec.num_inits = num_inits;
    spec.master_seed = seed;
    return run_matmul_protocol(spec);
}

}  // namespace cpkit
