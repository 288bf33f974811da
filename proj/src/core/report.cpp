#include "core/report.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "core/errors.hpp"

namespace cpkit {

using nlohmann::json;

const char* to_string(TerminalStatus s) {
    switch (s) {
        case TerminalStatus::converged_residual: return "converged_residual";
        case TerminalStatus::converged_step: return "converged_step";
        case TerminalStatus::cap_hit: return "cap_hit";
        case TerminalStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

TerminalStatus status_from_string(const std::string& s) {
    if (s == "converged_residual") return TerminalStatus::converged_residual;
    if (s == "converged_step") return TerminalStatus::converged_step;
    if (s == "cap_hit") return TerminalStatus::cap_hit;
    if (s == "numerical_failure") return TerminalStatus::numerical_failure;
    throw ParseError("unknown terminal status: " + s);
}

double ConvergenceReport::best_residual() const {
    double best = 1.0;
    for (const auto& rec : records) best = std::min(best, rec.residual);
    return best;
}

namespace {

json record_to_json(const TraceRecord& r) {
    return json{{"iter", r.iteration},   {"residual", r.residual},
                {"fitness", r.fitness},  {"lambda", r.lambda},
                {"cg_iters", r.cg_iters}, {"seconds", r.seconds}};
}

TraceRecord record_from_json(const json& j) {
    TraceRecord r;
    r.iteration = j.at("iter").get<int>();
    r.residual = j.at("residual").get<double>();
    r.fitness = j.at("fitness").get<double>();
    r.lambda = j.at("lambda").get<double>();
    r.cg_iters = j.at("cg_iters").get<int>();
    r.seconds = j.at("seconds").get<double>();
    return r;
}

json instance_to_json(const InstanceResult& r) {
    return json{{"status", to_string(r.status)},
                {"iterations", r.iterations},
                {"final_residual", r.final_residual},
                {"best_residual", r.best_residual}};
}

InstanceResult instance_from_json(const json& j) {
    InstanceResult r;
    r.status = status_from_string(j.at("status").get<std::string>());
    r.iterations = j.at("iterations").get<int>();
    r.final_residual = j.at("final_residual").get<double>();
    r.best_residual = j.at("best_residual").get<double>();
    return r;
}

const char* kind_name(Report::Kind k) {
    switch (k) {
        case Report::Kind::trace: return "trace";
        case Report::Kind::likelihood: return "likelihood";
        case Report::Kind::matmul: return "matmul";
        case Report::Kind::bench: return "bench";
        case Report::Kind::selftest: return "selftest";
    }
    return "unknown";
}

Report::Kind kind_from_name(const std::string& s) {
    if (s == "trace") return Report::Kind::trace;
    if (s == "likelihood") return Report::Kind::likelihood;
    if (s == "matmul") return Report::Kind::matmul;
    if (s == "bench") return Report::Kind::bench;
    if (s == "selftest") return Report::Kind::selftest;
    throw ParseError("unknown report kind: " + s);
}

}  // namespace

json Report::to_json() const {
    json j;
    j["kind"] = kind_name(kind);
    j["config"] = config;
    switch (kind) {
        case Kind::trace: {
            j["status"] = to_string(trace.status);
            json recs = json::array();
            for (const auto& r : trace.records) recs.push_back(record_to_json(r));
            j["records"] = recs;
            break;
        }
        case Kind::likelihood: {
            json ranks = json::array();
            for (const auto& rr : likelihood.ranks) {
                json problems = json::array();
                for (std::size_t p = 0; p < rr.instances.size(); ++p) {
                    json inits = json::array();
                    for (const auto& inst : rr.instances[p]) {
                        inits.push_back(instance_to_json(inst));
                    }
                    problems.push_back(json{
                        {"problem", p},
                        {"converged_inits", rr.converged_inits_per_problem[p]},
                        {"inits", inits}});
                }
                ranks.push_back(json{{"rank", rr.rank},
                                     {"fraction", rr.fraction},
                                     {"problems", problems}});
            }
            j["ranks"] = ranks;
            break;
        }
        case Kind::matmul: {
            j["n"] = matmul.n;
            j["rank"] = matmul.rank;
            json arms = json::array();
            for (const auto& arm : matmul.arms) {
                json inits = json::array();
                for (const auto& inst : arm.inits) inits.push_back(instance_to_json(inst));
                arms.push_back(json{{"name", arm.name},
                                    {"success_tol", arm.success_tol},
                                    {"converged", arm.converged},
                                    {"inits", inits}});
            }
            j["arms"] = arms;
            break;
        }
        case Kind::bench: {
            json rows = json::array();
            for (const auto& r : bench.rows) {
                rows.push_back(json{{"order", r.order},
                                    {"s", r.s},
                                    {"rank", r.rank},
                                    {"reps", r.reps},
                                    {"seconds_per_matvec", r.seconds_per_matvec}});
            }
            j["rows"] = rows;
            break;
        }
        case Kind::selftest: {
            json checks = json::array();
            for (const auto& c : selftest.checks) {
                checks.push_back(json{{"name", c.name},
                                      {"instances", c.instances},
                                      {"max_rel_error", c.max_rel_error},
                                      {"tolerance", c.tolerance},
                                      {"pass", c.pass}});
            }
            j["checks"] = checks;
            j["all_pass"] = selftest.all_pass;
            break;
        }
    }
    return j;
}

Report Report::from_json(const json& j) {
    Report rep;
    rep.kind = kind_from_name(j.at("kind").get<std::string>());
    rep.config = j.value("config", json::object());
    switch (rep.kind) {
        case Kind::trace: {
            rep.trace.status = status_from_string(j.at("status").get<std::string>());
            for (const auto& r : j.at("records")) {
                rep.trace.records.push_back(record_from_json(r));
            }
            break;
        }
        case Kind::likelihood: {
            for (const auto& rj : j.at("ranks")) {
                LikelihoodRankResult rr;
                rr.rank = rj.at("rank").get<int>();
                rr.fraction = rj.at("fraction").get<double>();
                for (const auto& pj : rj.at("problems")) {
                    std::vector<InstanceResult> inits;
                    for (const auto& ij : pj.at("inits")) {
                        inits.push_back(instance_from_json(ij));
                    }
                    rr.instances.push_back(std::move(inits));
                    rr.converged_inits_per_problem.push_back(
                        pj.at("converged_inits").get<int>());
                }
                rep.likelihood.ranks.push_back(std::move(rr));
            }
            break;
        }
        case Kind::matmul: {
            rep.matmul.n = j.at("n").get<std::uint64_t>();
            rep.matmul.rank = j.at("rank").get<int>();
            for (const auto& aj : j.at("arms")) {
                MatmulArmResult arm;
                arm.name = aj.at("name").get<std::string>();
                arm.success_tol = aj.at("success_tol").get<double>();
                arm.converged = aj.at("converged").get<int>();
                for (const auto& ij : aj.at("inits")) {
                    arm.inits.push_back(instance_from_json(ij));
                }
                rep.matmul.arms.push_back(std::move(arm));
            }
            break;
        }
        case Kind::bench: {
            for (const auto& rj : j.at("rows")) {
                BenchRow r;
                r.order = rj.at("order").get<std::size_t>();
                r.s = rj.at("s").get<std::uint64_t>();
                r.rank = rj.at("rank").get<int>();
                r.reps = rj.at("reps").get<int>();
                r.seconds_per_matvec = rj.at("seconds_per_matvec").get<double>();
                rep.bench.rows.push_back(r);
            }
            break;
        }
        case Kind::selftest: {
            rep.selftest.all_pass = j.at("all_pass").get<bool>();
            for (const auto& cj : j.at("checks")) {
                SelftestRow c;
                c.name = cj.at("name").get<std::string>();
                c.instances = cj.at("instances").get<int>();
                c.max_rel_error = cj.at("max_rel_error").get<double>();
                c.tolerance = cj.at("tolerance").get<double>();
                c.pass = cj.at("pass").get<bool>();
                rep.selftest.checks.push_back(std::move(c));
            }
            break;
        }
    }
    return rep;
}

namespace {

// Doubles in CSV use the same shortest-round-trip formatting as the JSON
// emitter so both outputs are reproducible byte for byte.
std::string fmt(double v) { return json(v).dump(); }

}  // namespace

std::string Report::to_csv() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::trace: {
            os << "iter,residual,fitness,lambda,cg_iters,seconds\n";
            for (const auto& r : trace.records) {
                os << r.iteration << ',' << fmt(r.residual) << ',' << fmt(r.fitness)
                   << ',' << fmt(r.lambda) << ',' << r.cg_iters << ','
                   << fmt(r.seconds) << '\n';
            }
            break;
        }
        case Kind::likelihood: {
            os << "rank,problem,init,status,iterations,final_residual,best_residual\n";
            for (const auto& rr : likelihood.ranks) {
                for (std::size_t p = 0; p < rr.instances.size(); ++p) {
                    for (std::size_t i = 0; i < rr.instances[p].size(); ++i) {
                        const auto& inst = rr.instances[p][i];
                        os << rr.rank << ',' << p << ',' << i << ','
                           << to_string(inst.status) << ',' << inst.iterations << ','
                           << fmt(inst.final_residual) << ','
                           << fmt(inst.best_residual) << '\n';
                    }
                }
            }
            break;
        }
        case Kind::matmul: {
            os << "arm,init,status,iterations,final_residual,best_residual\n";
            for (const auto& arm : matmul.arms) {
                for (std::size_t i = 0; i < arm.inits.size(); ++i) {
                    const auto& inst = arm.inits[i];
                    os << arm.name << ',' << i << ',' << to_string(inst.status) << ','
                       << inst.iterations << ',' << fmt(inst.final_residual) << ','
                       << fmt(inst.best_residual) << '\n';
                }
            }
            break;
        }
        case Kind::bench: {
            os << "order,s,rank,reps,seconds_per_matvec\n";
            for (const auto& r : bench.rows) {
                os << r.order << ',' << r.s << ',' << r.rank << ',' << r.reps << ','
                   << fmt(r.seconds_per_matvec) << '\n';
            }
            break;
        }
        case Kind::selftest: {
            os << "check,instances,max_rel_error,tolerance,pass\n";
            for (const auto& c : selftest.checks) {
                os << c.name << ',' << c.instances << ',' << fmt(c.max_rel_error)
                   << ',' << fmt(c.tolerance) << ',' << (c.pass ? 1 : 0) << '\n';
            }
            break;
        }
    }
    return os.str();
}

void emit_report(const Report& report, const std::string& format,
                 const std::string& path) {
    std::string payload;
    if (format == "json") {
        payload = report.to_json().dump(2);
        payload.push_back('\n');
    } else if (format == "csv") {
        payload = report.to_csv();
    } else {
        throw InvalidArgument("emit_report: format must be csv or json");
    }
    if (path == "-") {
        std::cout << payload;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open for writing: " + path);
    }
    os << payload;
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

}  // namespace cpkit
