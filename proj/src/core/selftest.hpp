#pragma once

#include <json.hpp>

#include "core/gauss_newton.hpp"
#include "core/report.hpp"

namespace cpkit {

namespace oracle {

// Dense tensor with i.i.d. standard gaussian entries keyed by (seed, entry).
DenseTensor random_dense_tensor(const std::vector<std::uint64_t>& dims,
                                std::uint64_t seed);

Matrix kron(const Matrix& a, const Matrix& b);

// 0.5 |X - reconstruct(model)|_F^2 evaluated densely.
double dense_objective(const KruskalModel& model, const DenseTensor& x);

// Central finite differences of the dense objective with respect to every
// factor entry.
std::vector<Matrix> finite_difference_gradient(const KruskalModel& model,
                                               const DenseTensor& x, double h);

}  // namespace oracle

// Cross-checks the implicit Gauss-Newton machinery against independent dense
// routes (explicit J^T J, finite differences, dense solves, naive MTTKRP).
// Config keys: {"seed": u64, "instances": int}.
Report run_selftest_oracle(const nlohmann::json& config);

// Times the implicit Hessian matvec over a grid of sizes.
// Config keys: {"order": int, "s": [..], "ranks": [..], "reps": int,
// "seed": u64}.
Report run_bench_matvec(const nlohmann::json& config);

}  // namespace cpkit
