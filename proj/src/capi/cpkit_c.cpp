#include "cpkit.h"

#include <cstring>
#include <exception>
#include <string>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/generators.hpp"
#include "core/harness.hpp"
#include "core/kruskal.hpp"
#include "core/selftest.hpp"
#include "core/tensor.hpp"

using nlohmann::json;

struct cpkit_tensor {
    cpkit::DenseTensor t;
};
struct cpkit_model {
    cpkit::KruskalModel m;
};
struct cpkit_report {
    cpkit::Report r;
};

namespace {

thread_local std::string g_last_error;

cpkit_status fail(cpkit_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Maps core exceptions onto status codes at the ABI boundary.
template <typename Fn>
cpkit_status guarded(Fn&& fn) {
    try {
        fn();
        return CPKIT_OK;
    } catch (const cpkit::InvalidArgument& e) {
        return fail(CPKIT_ERR_INVALID_ARGUMENT, e.what());
    } catch (const cpkit::ParseError& e) {
        return fail(CPKIT_ERR_PARSE, e.what());
    } catch (const cpkit::IoError& e) {
        return fail(CPKIT_ERR_IO, e.what());
    } catch (const cpkit::SingularSystem& e) {
        return fail(CPKIT_ERR_SINGULAR, e.what());
    } catch (const cpkit::NumericalFailure& e) {
        return fail(CPKIT_ERR_NUMERICAL, e.what());
    } catch (const cpkit::LimitExceeded& e) {
        return fail(CPKIT_ERR_LIMIT, e.what());
    } catch (const json::exception& e) {
        return fail(CPKIT_ERR_PARSE, e.what());
    } catch (const std::exception& e) {
        return fail(CPKIT_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CPKIT_ERR_INTERNAL, "unknown error");
    }
}

cpkit_status require(bool ok, const char* message) {
    return ok ? CPKIT_OK : fail(CPKIT_ERR_INVALID_ARGUMENT, message);
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json parse_config(const char* config_json) {
    if (config_json == nullptr) {
        return json::object();
    }
    return json::parse(config_json);
}

}  // namespace

extern "C" {

const char* cpkit_version(void) { return "1.0.0"; }

const char* cpkit_status_name(cpkit_status status) {
    switch (status) {
        case CPKIT_OK: return "ok";
        case CPKIT_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case CPKIT_ERR_PARSE: return "parse_error";
        case CPKIT_ERR_IO: return "io_error";
        case CPKIT_ERR_SINGULAR: return "singular_system";
        case CPKIT_ERR_NUMERICAL: return "numerical_failure";
        case CPKIT_ERR_LIMIT: return "limit_exceeded";
        case CPKIT_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

const char* cpkit_last_error(void) { return g_last_error.c_str(); }

void cpkit_string_free(char* s) { delete[] s; }

/* ---- tensors ------------------------------------------------------------- */

cpkit_status cpkit_tensor_create(const uint64_t* dims, uint64_t order,
                                 const double* data, cpkit_tensor** out) {
    if (auto st = require(dims && data && out && order > 0,
                          "cpkit_tensor_create: null argument")) {
        return st;
    }
    return guarded([&] {
        std::vector<std::uint64_t> d(dims, dims + order);
        const std::uint64_t total = cpkit::product_of_dims(d);
        std::vector<double> v(data, data + total);
        auto t = cpkit::DenseTensor::from_data(std::move(d), std::move(v));
        t.validate();
        *out = new cpkit_tensor{std::move(t)};
    });
}

cpkit_status cpkit_tensor_load(const char* path, cpkit_tensor** out) {
    if (auto st = require(path && out, "cpkit_tensor_load: null argument")) {
        return st;
    }
    return guarded([&] { *out = new cpkit_tensor{cpkit::read_tensor(path)}; });
}

cpkit_status cpkit_tensor_save(const cpkit_tensor* t, const char* path) {
    if (auto st = require(t && path, "cpkit_tensor_save: null argument")) {
        return st;
    }
    return guarded([&] { cpkit::write_tensor(t->t, path); });
}

uint64_t cpkit_tensor_order(const cpkit_tensor* t) {
    return t ? t->t.order() : 0;
}

uint64_t cpkit_tensor_extent(const cpkit_tensor* t, uint64_t mode) {
    return (t && mode < t->t.order()) ? t->t.extent(mode) : 0;
}

uint64_t cpkit_tensor_element_count(const cpkit_tensor* t) {
    return t ? t->t.size() : 0;
}

const double* cpkit_tensor_data(const cpkit_tensor* t) {
    return t ? t->t.data() : nullptr;
}

void cpkit_tensor_destroy(cpkit_tensor* t) { delete t; }

/* ---- models -------------------------------------------------------------- */

cpkit_status cpkit_model_load(const char* path, cpkit_model** out) {
    if (auto st = require(path && out, "cpkit_model_load: null argument")) {
        return st;
    }
    return guarded([&] { *out = new cpkit_model{cpkit::read_model(path)}; });
}

cpkit_status cpkit_model_save(const cpkit_model* m, const char* path) {
    if (auto st = require(m && path, "cpkit_model_save: null argument")) {
        return st;
    }
    return guarded([&] { cpkit::write_model(m->m, path); });
}

uint64_t cpkit_model_order(const cpkit_model* m) {
    return m ? m->m.order() : 0;
}

uint64_t cpkit_model_rank(const cpkit_model* m) {
    return m ? static_cast<uint64_t>(m->m.rank) : 0;
}

uint64_t cpkit_model_extent(const cpkit_model* m, uint64_t mode) {
    return (m && mode < m->m.order()) ? m->m.dims[mode] : 0;
}

const double* cpkit_model_factor(const cpkit_model* m, uint64_t mode) {
    return (m && mode < m->m.order()) ? m->m.factors[mode].data() : nullptr;
}

cpkit_status cpkit_model_reconstruct(const cpkit_model* m, cpkit_tensor** out) {
    if (auto st = require(m && out, "cpkit_model_reconstruct: null argument")) {
        return st;
    }
    return guarded([&] { *out = new cpkit_tensor{cpkit::reconstruct(m->m)}; });
}

void cpkit_model_destroy(cpkit_model* m) { delete m; }

/* ---- generators ----------------------------------------------------------- */

cpkit_status cpkit_generate_low_rank(const char* spec_json,
                                     cpkit_model** out_model,
                                     cpkit_tensor** out_tensor) {
    if (auto st = require(spec_json && (out_model || out_tensor),
                          "cpkit_generate_low_rank: null argument")) {
        return st;
    }
    return guarded([&] {
        const json j = json::parse(spec_json);
        cpkit::ExperimentSpec probe;  // reuse the family parser via a spec
        json wrapped;
        wrapped["problem"] = j;
        probe = cpkit::ExperimentSpec::from_json(wrapped);
        cpkit::ProblemSpec p{probe.family, probe.dims,
                             static_cast<Eigen::Index>(probe.ranks[0]),
                             j.value("seed", std::uint64_t{0})};
        auto [model, tensor] = cpkit::random_low_rank(p);
        if (out_model) *out_model = new cpkit_model{std::move(model)};
        if (out_tensor) *out_tensor = new cpkit_tensor{std::move(tensor)};
    });
}

cpkit_status cpkit_matmul_tensor(uint64_t n, cpkit_tensor** out) {
    if (auto st = require(out != nullptr, "cpkit_matmul_tensor: null argument")) {
        return st;
    }
    return guarded([&] { *out = new cpkit_tensor{cpkit::matmul_tensor(n)}; });
}

/* ---- decomposition ---------------------------------------------------------- */

cpkit_status cpkit_decompose(const cpkit_tensor* t, const char* config_json,
                             const cpkit_model* init, cpkit_model** out_model,
                             cpkit_report** out_report) {
    if (auto st = require(t != nullptr, "cpkit_decompose: null tensor")) {
        return st;
    }
    return guarded([&] {
        const json j = parse_config(config_json);
        const std::string optimizer = j.value("optimizer", "als");

        // Reuse the experiment-spec parser for the optimizer blocks; dims
        // come from the tensor itself.
        json wrapped = j;
        wrapped["problem"] =
            json{{"family", "gaussian"},
                 {"dims", t->t.dims()},
                 {"rank", j.value("rank", 1)}};
        cpkit::ExperimentSpec spec = cpkit::ExperimentSpec::from_json(wrapped);

        cpkit::KruskalModel start;
        if (init != nullptr) {
            start = init->m;
            if (start.dims != t->t.dims()) {
                throw cpkit::InvalidArgument(
                    "cpkit_decompose: init model extents do not match tensor");
            }
        } else {
            const int rank = j.value("rank", 0);
            if (rank < 1) {
                throw cpkit::InvalidArgument(
                    "cpkit_decompose: rank required when init is null");
            }
            cpkit::InitDistribution dist = spec.init;
            if (dist.kind == cpkit::InitDistribution::Kind::family_default) {
                dist.kind = cpkit::InitDistribution::Kind::gaussian;
            }
            const std::uint64_t seed =
                cpkit::init_seed(spec.master_seed, rank, 0, 0);
            start = dist.kind == cpkit::InitDistribution::Kind::uniform
                        ? cpkit::random_model(t->t.dims(), rank, seed,
                                              cpkit::UniformFamily{dist.a, dist.b})
                        : cpkit::random_model(t->t.dims(), rank, seed,
                                              cpkit::GaussianFamily{});
        }

        cpkit::Report report;
        report.kind = cpkit::Report::Kind::trace;
        json cfg = spec.resolved_json();
        cfg["kind"] = "decompose";
        cfg["optimizer"] = optimizer;
        report.config = cfg;

        cpkit::KruskalModel result;
        if (optimizer == "als") {
            auto [model, rep] = cpkit::als_optimize(t->t, std::move(start), spec.als);
            result = std::move(model);
            report.trace = std::move(rep);
        } else if (optimizer == "gn") {
            auto [model, rep] = cpkit::gn_optimize(t->t, std::move(start), spec.gn);
            result = std::move(model);
            report.trace = std::move(rep);
        } else {
            throw cpkit::ParseError("cpkit_decompose: unknown optimizer " +
                                    optimizer);
        }
        if (out_model) *out_model = new cpkit_model{std::move(result)};
        if (out_report) *out_report = new cpkit_report{std::move(report)};
    });
}

/* ---- runners ---------------------------------------------------------------- */

cpkit_status cpkit_run_trace(const char* config_json, cpkit_report** out) {
    if (auto st = require(config_json && out, "cpkit_run_trace: null argument")) {
        return st;
    }
    return guarded([&] {
        auto spec = cpkit::ExperimentSpec::from_json(json::parse(config_json));
        *out = new cpkit_report{cpkit::run_trace(spec)};
    });
}

cpkit_status cpkit_run_likelihood(const char* config_json, cpkit_report** out) {
    if (auto st =
            require(config_json && out, "cpkit_run_likelihood: null argument")) {
        return st;
    }
    return guarded([&] {
        auto spec = cpkit::ExperimentSpec::from_json(json::parse(config_json));
        *out = new cpkit_report{cpkit::run_likelihood(spec)};
    });
}

cpkit_status cpkit_run_matmul(const char* config_json, cpkit_report** out) {
    if (auto st = require(config_json && out, "cpkit_run_matmul: null argument")) {
        return st;
    }
    return guarded([&] {
        auto spec =
            cpkit::MatmulProtocolSpec::from_json(json::parse(config_json));
        *out = new cpkit_report{cpkit::run_matmul_protocol(spec)};
    });
}

cpkit_status cpkit_run_bench_matvec(const char* config_json,
                                    cpkit_report** out) {
    if (auto st = require(out != nullptr, "cpkit_run_bench_matvec: null output")) {
        return st;
    }
    return guarded([&] {
        *out = new cpkit_report{cpkit::run_bench_matvec(parse_config(config_json))};
    });
}

cpkit_status cpkit_run_selftest_oracle(const char* config_json,
                                       cpkit_report** out) {
    if (auto st =
            require(out != nullptr, "cpkit_run_selftest_oracle: null output")) {
        return st;
    }
    return guarded([&] {
        *out = new cpkit_report{
            cpkit::run_selftest_oracle(parse_config(config_json))};
    });
}

/* ---- reports ----------------------------------------------------------------- */

cpkit_status cpkit_report_emit(const cpkit_report* r, const char* format,
                               const char* path) {
    if (auto st = require(r && format && path, "cpkit_report_emit: null argument")) {
        return st;
    }
    return guarded([&] { cpkit::emit_report(r->r, format, path); });
}

cpkit_status cpkit_report_to_json(const cpkit_report* r, char** out_json) {
    if (auto st = require(r && out_json, "cpkit_report_to_json: null argument")) {
        return st;
    }
    return guarded([&] { *out_json = dup_string(r->r.to_json().dump(2)); });
}

cpkit_status cpkit_report_config(const cpkit_report* r, char** out_json) {
    if (auto st = require(r && out_json, "cpkit_report_config: null argument")) {
        return st;
    }
    return guarded([&] { *out_json = dup_string(r->r.config.dump(2)); });
}

int cpkit_report_ok(const cpkit_report* r) {
    if (r == nullptr) return 0;
    if (r->r.kind == cpkit::Report::Kind::selftest) {
        return r->r.selftest.all_pass ? 1 : 0;
    }
    return 1;
}

void cpkit_report_destroy(cpkit_report* r) { delete r; }

}  // extern "C"
