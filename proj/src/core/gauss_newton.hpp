#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "core/kruskal.hpp"
#include "core/report.hpp"

namespace cpkit {

enum class RegMode { constant, varying };
enum class RegShape { identity, diagonal };

// Levenberg-Marquardt damping state. In varying mode lambda oscillates
// between the two thresholds: divided by mu each step until it falls below
// `lower`, then multiplied by mu until it exceeds `upper`, and so on. One
// overshoot step past each threshold occurs at the reversal.
struct RegSchedule {
    RegMode mode = RegMode::constant;
    RegShape shape = RegShape::identity;
    double lambda = 1e-3;
    double mu = 2.0;
    double lower = 1e-6;
    double upper = 1e-2;
    enum class Direction { down, up };
    Direction direction = Direction::down;

    static RegSchedule constant(double lambda, RegShape shape = RegShape::identity);
    static RegSchedule varying(double upper = 1e-2, double lower = 1e-6,
                               double mu = 2.0,
                               RegShape shape = RegShape::identity);
    void validate() const;
};

// Pure advance of the schedule; constant mode returns its input.
RegSchedule schedule_next(RegSchedule s);

// Direction-update coefficient for CG. `standard` uses the usual
// preconditioned-CG recurrence <R_new,Z_new>/<R_old,Z_old>; `stale_denominator`
// reuses <W,Q> in the denominator instead and is kept only for comparison.
enum class CgBetaVariant { standard, stale_denominator };

struct ArmijoParams {
    double c1 = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 20;
};

struct GnConfig {
    double grad_tol = 0.0;  // 0 fires only on an exactly zero gradient
    double residual_tol = 5e-5;
    double step_tol = 1e-7;
    int max_iters = 500;
    double cg_tol = 1e-3;
    int cg_max_iters = 0;  // 0 -> min(total variables, 10 * rank)
    RegSchedule schedule = RegSchedule::varying();
    std::optional<ArmijoParams> armijo;
    CgBetaVariant cg_beta = CgBetaVariant::standard;

    void validate() const;
};

// G^(n) = A^(n) gamma(n,n) - M^(n): the gradient of
// 0.5 |X - X~|_F^2 with respect to each factor matrix.
std::vector<Matrix> gradient(const KruskalModel& model,
                             const std::vector<Matrix>& mttkrps,
                             const GammaSet& gammas);

// Applies the damped approximate Hessian without forming it:
//   U^(n) = lambda * Reg^(n)(W^(n)) + sum_p block(n,p) W^(p),
// where block(n,n) W = W gamma(n,n) and the off-diagonal block contracts
// A^(n), A^(p), gamma(n,p) and W^(p). Reg is the identity, or column-wise
// scaling by diag(gamma(n,n)) for the diagonal shape.
std::vector<Matrix> hessian_matvec(const KruskalModel& model,
                                   const GammaSet& gammas,
                                   const std::vector<Matrix>& w, double lambda,
                                   RegShape shape);

// Dense J^T J assembled column by column from the Jacobian of the residual
// tensor. Variables are ordered mode-major, column-major within each factor.
// Reference route for validating the implicit matvec; guarded by a variable
// cap.
Matrix explicit_jtj(const KruskalModel& model, std::uint64_t var_cap = 2000);

// Block-diagonal preconditioner: per mode, (gamma(n,n) + lambda*Reg)^{-1}
// applied as an explicit inverse.
std::vector<Matrix> build_preconditioner(const GammaSet& gammas, double lambda,
                                         RegShape shape);

// Stacks per-mode matrices into one vector with the explicit_jtj ordering.
Eigen::VectorXd vec_stack(const std::vector<Matrix>& ms);
std::vector<Matrix> vec_unstack(const Eigen::VectorXd& v,
                                const std::vector<std::uint64_t>& dims,
                                Eigen::Index rank);

// Per-mode iterate storage of the inner CG solve.
struct CgState {
    std::vector<Matrix> v, rres, z, w, q;
    int iterations = 0;
};

struct CgResult {
    std::vector<Matrix> v;
    int iterations = 0;
    bool hit_cap = false;
    bool breakdown = false;  // <W, HW> lost positivity; V is still usable
};

// Preconditioned implicit CG for (J^T J + lambda*Reg) vec(V) = -vec(G).
// Stops when sum_n |R^(n)|_F <= cg_tol * sum_n |G^(n)|_F or at the cap.
// Throws NumericalFailure if iterates become non-finite.
CgResult cp_cg(const KruskalModel& model, const GammaSet& gammas,
               const std::vector<Matrix>& g, double lambda,
               const GnConfig& config);

struct GnStepDiag {
    enum class Halt { none, residual, gradient };
    Halt halt = Halt::none;    // set when the step short-circuited
    bool stepped = false;
    double residual_before = 1.0;
    double residual_after = 1.0;
    double grad_norm = 0.0;
    double lambda = 0.0;
    int cg_iters = 0;
    double step_norm = 0.0;
    double alpha = 1.0;
    bool armijo_exhausted = false;
    bool cg_hit_cap = false;
    bool cg_breakdown = false;
};

// One outer iteration: dimension-tree MTTKRPs, Gram/Hadamard set, gradient,
// damped CG solve, optional Armijo backtracking, factor update. The schedule
// advances once per step taken.
GnStepDiag gn_step(const DenseTensor& x, KruskalModel& model,
                   MttkrpWorkspace& ws, const GnConfig& config,
                   RegSchedule& schedule, double xnorm2);

std::pair<KruskalModel, ConvergenceReport> gn_optimize(const DenseTensor& x,
                                                       KruskalModel model,
                                                       const GnConfig& config);

}  // namespace cpkit
