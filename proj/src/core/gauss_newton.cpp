#include "core/gauss_newton.hpp"

#include <chrono>
#include <cmath>

#include "core/errors.hpp"

namespace cpkit {

RegSchedule RegSchedule::constant(double lambda, RegShape shape) {
    RegSchedule s;
    s.mode = RegMode::constant;
    s.shape = shape;
    s.lambda = lambda;
    s.validate();
    return s;
}

RegSchedule RegSchedule::varying(double upper, double lower, double mu,
                                 RegShape shape) {
    RegSchedule s;
    s.mode = RegMode::varying;
    s.shape = shape;
    s.lambda = upper;
    s.mu = mu;
    s.lower = lower;
    s.upper = upper;
    s.direction = Direction::down;
    s.validate();
    return s;
}

void RegSchedule::validate() const {
    if (lambda < 0) {
        throw InvalidArgument("schedule: lambda must be nonnegative");
    }
    if (mode == RegMode::varying) {
        if (!(mu > 1.0)) {
            throw InvalidArgument("schedule: mu must exceed 1");
        }
        if (!(lower > 0.0) || !(lower < upper)) {
            throw InvalidArgument("schedule: need 0 < lower < upper");
        }
    }
}

RegSchedule schedule_next(RegSchedule s) {
    if (s.mode == RegMode::constant) {
        return s;
    }
    if (s.direction == RegSchedule::Direction::down) {
        s.lambda /= s.mu;
        if (s.lambda < s.lower) s.direction = RegSchedule::Direction::up;
    } else {
        s.lambda *= s.mu;
        if (s.lambda > s.upper) s.direction = RegSchedule::Direction::down;
    }
    return s;
}

void GnConfig::validate() const {
    schedule.validate();
    if (grad_tol < 0 || residual_tol < 0 || step_tol < 0) {
        throw InvalidArgument("gn config: negative tolerance");
    }
    if (max_iters < 0 || cg_max_iters < 0) {
        throw InvalidArgument("gn config: negative iteration cap");
    }
    if (!(cg_tol > 0)) {
        throw InvalidArgument("gn config: cg_tol must be positive");
    }
    if (armijo) {
        if (!(armijo->c1 > 0 && armijo->c1 < 1) ||
            !(armijo->shrink > 0 && armijo->shrink < 1) ||
            armijo->max_backtracks < 1) {
            throw InvalidArgument("gn config: bad armijo parameters");
        }
    }
}

std::vector<Matrix> gradient(const KruskalModel& model,
                             const std::vector<Matrix>& mttkrps,
                             const GammaSet& gammas) {
    const std::size_t order = model.order();
    if (mttkrps.size() != order) {
        throw InvalidArgument("gradient: need one MTTKRP per mode");
    }
    std::vector<Matrix> g;
    g.reserve(order);
    for (std::size_t n = 0; n < order; ++n) {
        g.push_back(model.factors[n] * gammas.gamma(n, n) - mttkrps[n]);
    }
    return g;
}

std::vector<Matrix> hessian_matvec(const KruskalModel& model,
                                   const GammaSet& gammas,
                                   const std::vector<Matrix>& w, double lambda,
                                   RegShape shape) {
    const std::size_t order = model.order();
    if (w.size() != order) {
        throw InvalidArgument("hessian_matvec: need one block per mode");
    }
    for (std::size_t n = 0; n < order; ++n) {
        if (w[n].rows() != model.factors[n].rows() ||
            w[n].cols() != model.rank) {
            throw InvalidArgument("hessian_matvec: block shape mismatch");
        }
    }

    std::vector<Matrix> u;
    u.reserve(order);
    for (std::size_t n = 0; n < order; ++n) {
        Matrix un;
        if (shape == RegShape::identity) {
            un = lambda * w[n];
        } else {
            // lambda * diag-scaling: column r scaled by gamma(n,n)_rr.
            un = w[n].array().rowwise() *
                 (lambda * gammas.gamma(n, n).diagonal().transpose().array());
        }
        for (std::size_t p = 0; p < order; ++p) {
            if (p == n) {
                // gamma(n,n) is symmetric, so W gamma == W gamma^T.
                un.noalias() += w[n] * gammas.gamma(n, n);
            } else {
                // U_kr += sum_{l,z} A^(n)_kz A^(p)_lr gamma_rz W_lz.
                Matrix b = model.factors[p].transpose() * w[p];  // (r,z)
                Matrix d = gammas.gamma(n, p).cwiseProduct(b);
                un.noalias() += model.factors[n] * d.transpose();
            }
        }
        u.push_back(std::move(un));
    }
    return u;
}

Matrix explicit_jtj(const KruskalModel& model, std::uint64_t var_cap) {
    model.validate();
    const std::size_t order = model.order();
    const Eigen::Index rank = model.rank;

    std::uint64_t vars = 0;
    std::vector<std::uint64_t> col_offset(order, 0);
    for (std::size_t n = 0; n < order; ++n) {
        col_offset[n] = vars;
        vars += model.dims[n] * static_cast<std::uint64_t>(rank);
    }
    if (vars > var_cap) {
        throw LimitExceeded("explicit_jtj: variable count exceeds cap");
    }
    const std::uint64_t rows = product_of_dims(model.dims);
    if (rows > kDefaultElementCap) {
        throw LimitExceeded("explicit_jtj: tensor too large");
    }

    Matrix jac = Matrix::Zero(static_cast<Eigen::Index>(rows),
                              static_cast<Eigen::Index>(vars));
    std::vector<std::uint64_t> idx(order, 0);
    std::vector<double> pre(order + 1), suf(order + 1);
    for (std::uint64_t f = 0; f < rows; ++f) {
        for (Eigen::Index r = 0; r < rank; ++r) {
            pre[0] = 1.0;
            for (std::size_t m = 0; m < order; ++m) {
                pre[m + 1] =
                    pre[m] *
                    model.factors[m](static_cast<Eigen::Index>(idx[m]), r);
            }
            suf[order] = 1.0;
            for (std::size_t m = order; m-- > 0;) {
                suf[m] = suf[m + 1] *
                         model.factors[m](static_cast<Eigen::Index>(idx[m]), r);
            }
            for (std::size_t n = 0; n < order; ++n) {
                const std::uint64_t col =
                    col_offset[n] +
                    static_cast<std::uint64_t>(r) * model.dims[n] + idx[n];
                jac(static_cast<Eigen::Index>(f),
                    static_cast<Eigen::Index>(col)) = -(pre[n] * suf[n + 1]);
            }
        }
        for (std::size_t m = order; m-- > 0;) {
            if (++idx[m] < model.dims[m]) break;
            idx[m] = 0;
        }
    }
    return gram(jac);
}

std::vector<Matrix> build_preconditioner(const GammaSet& gammas, double lambda,
                                         RegShape shape) {
    if (lambda < 0) {
        throw InvalidArgument("build_preconditioner: lambda must be nonnegative");
    }
    std::vector<Matrix> pinv;
    pinv.reserve(gammas.grams.size());
    for (std::size_t n = 0; n < gammas.grams.size(); ++n) {
        if (shape == RegShape::identity) {
            pinv.push_back(spd_inverse(gammas.gamma(n, n), lambda));
        } else {
            Matrix s = gammas.gamma(n, n);
            s.diagonal() *= (1.0 + lambda);
            pinv.push_back(spd_inverse(s, 0.0));
        }
    }
    return pinv;
}

Eigen::VectorXd vec_stack(const std::vector<Matrix>& ms) {
    Eigen::Index total = 0;
    for (const auto& m : ms) total += m.size();
    Eigen::VectorXd v(total);
    Eigen::Index at = 0;
    for (const auto& m : ms) {
        for (Eigen::Index r = 0; r < m.cols(); ++r) {
            for (Eigen::Index k = 0; k < m.rows(); ++k) {
                v[at++] = m(k, r);
            }
        }
    }
    return v;
}

std::vector<Matrix> vec_unstack(const Eigen::VectorXd& v,
                                const std::vector<std::uint64_t>& dims,
                                Eigen::Index rank) {
    std::vector<Matrix> ms;
    Eigen::Index at = 0;
    for (std::uint64_t d : dims) {
        Matrix m(static_cast<Eigen::Index>(d), rank);
        for (Eigen::Index r = 0; r < rank; ++r) {
            for (Eigen::Index k = 0; k < m.rows(); ++k) {
                m(k, r) = v[at++];
            }
        }
        ms.push_back(std::move(m));
    }
    if (at != v.size()) {
        throw InvalidArgument("vec_unstack: length mismatch");
    }
    return ms;
}

namespace {

double norm_sum(const std::vector<Matrix>& ms) {
    double acc = 0.0;
    for (const auto& m : ms) acc += m.norm();
    return acc;
}

double dot_sum(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double acc = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        acc += a[n].cwiseProduct(b[n]).sum();
    }
    return acc;
}

bool all_finite(const std::vector<Matrix>& ms) {
    for (const auto& m : ms) {
        if (!m.allFinite()) return false;
    }
    return true;
}

int default_cg_cap(const KruskalModel& model) {
    std::uint64_t total_vars = 0;
    for (std::uint64_t d : model.dims) {
        total_vars += d * static_cast<std::uint64_t>(model.rank);
    }
    const std::uint64_t cap =
        std::min<std::uint64_t>(total_vars, 10ull * static_cast<std::uint64_t>(model.rank));
    return static_cast<int>(cap);
}

}  // namespace

CgResult cp_cg(const KruskalModel& model, const GammaSet& gammas,
               const std::vector<Matrix>& g, double lambda,
               const GnConfig& config) {
    const std::size_t order = model.order();
    if (g.size() != order) {
        throw InvalidArgument("cp_cg: need one gradient block per mode");
    }
    const RegShape shape = config.schedule.shape;
    const int cap =
        config.cg_max_iters > 0 ? config.cg_max_iters : default_cg_cap(model);

    CgState st;
    st.v.reserve(order);
    for (std::size_t n = 0; n < order; ++n) {
        st.v.push_back(Matrix::Zero(g[n].rows(), g[n].cols()));
    }

    CgResult out;
    const double gnorm = norm_sum(g);
    if (gnorm == 0.0) {
        out.v = st.v;
        return out;
    }

    const std::vector<Matrix> pinv = build_preconditioner(gammas, lambda, shape);
    st.rres.reserve(order);
    st.z.reserve(order);
    for (std::size_t n = 0; n < order; ++n) {
        st.rres.push_back(-g[n]);
        st.z.push_back(st.rres[n] * pinv[n]);
    }
    st.w = st.z;
    double rz = dot_sum(st.rres, st.z);

    const double target = config.cg_tol * gnorm;
    while (norm_sum(st.rres) > target) {
        if (st.iterations >= cap) {
            out.hit_cap = true;
            break;
        }
        st.q = hessian_matvec(model, gammas, st.w, lambda, shape);
        const double wq = dot_sum(st.w, st.q);
        if (!(wq > 0.0)) {
            // The undamped operator is only positive semidefinite; stop with
            // the current iterate rather than divide by a non-positive value.
            out.breakdown = true;
            break;
        }
        const double alpha = rz / wq;
        for (std::size_t n = 0; n < order; ++n) {
            st.v[n] += alpha * st.w[n];
            st.rres[n] -= alpha * st.q[n];
            st.z[n] = st.rres[n] * pinv[n];
        }
        const double rz_new = dot_sum(st.rres, st.z);
        const double beta = (config.cg_beta == CgBetaVariant::standard)
                                ? rz_new / rz
                                : rz_new / wq;
        for (std::size_t n = 0; n < order; ++n) {
            st.w[n] = st.z[n] + beta * st.w[n];
        }
        rz = rz_new;
        ++st.iterations;
        if (!all_finite(st.v) || !all_finite(st.rres)) {
            throw NumericalFailure("cp_cg: non-finite iterate");
        }
    }
    out.v = std::move(st.v);
    out.iterations = st.iterations;
    return out;
}

namespace {

double evaluate_residual(const KruskalModel& model, const DenseTensor& x,
                         double xnorm2) {
    return residual_fitness(model, x, xnorm2).first;
}

}  // namespace

GnStepDiag gn_step(const DenseTensor& x, KruskalModel& model,
                   MttkrpWorkspace& ws, const GnConfig& config,
                   RegSchedule& schedule, double xnorm2) {
    const std::size_t order = model.order();
    GnStepDiag diag;

    std::vector<Matrix> mttkrps;
    mttkrps.reserve(order);
    for (std::size_t n = 0; n < order; ++n) {
        mttkrps.push_back(mttkrp(x, model.factors, n, ws));
    }
    GammaSet gammas = build_gamma_set(model);

    auto [res, fit] = residual_fitness(model, x, xnorm2, &mttkrps.back());
    diag.residual_before = res;
    diag.residual_after = res;
    if (res < config.residual_tol) {
        diag.halt = GnStepDiag::Halt::residual;
        return diag;
    }

    std::vector<Matrix> g = gradient(model, mttkrps, gammas);
    diag.grad_norm = 0.0;
    for (const auto& gn : g) diag.grad_norm += gn.norm();
    if (diag.grad_norm <= config.grad_tol) {
        diag.halt = GnStepDiag::Halt::gradient;
        return diag;
    }

    diag.lambda = schedule.lambda;
    CgResult cg = cp_cg(model, gammas, g, diag.lambda, config);
    diag.cg_iters = cg.iterations;
    diag.cg_hit_cap = cg.hit_cap;
    diag.cg_breakdown = cg.breakdown;

    double alpha = 1.0;
    double residual_after = -1.0;
    if (config.armijo) {
        const ArmijoParams& ap = *config.armijo;
        const double f0 = 0.5 * res * res * xnorm2;
        double gv = 0.0;
        for (std::size_t n = 0; n < order; ++n) {
            gv += g[n].cwiseProduct(cg.v[n]).sum();
        }
        KruskalModel trial = model;
        bool accepted = false;
        for (int t = 0; t < ap.max_backtracks; ++t) {
            for (std::size_t n = 0; n < order; ++n) {
                trial.factors[n] = model.factors[n] + alpha * cg.v[n];
            }
            const double r_trial = evaluate_residual(trial, x, xnorm2);
            const double f_trial = 0.5 * r_trial * r_trial * xnorm2;
            if (f_trial <= f0 + ap.c1 * alpha * gv) {
                accepted = true;
                residual_after = r_trial;
                break;
            }
            alpha *= ap.shrink;
        }
        if (!accepted) {
            // Backtracking exhausted; take the smallest step anyway.
            diag.armijo_exhausted = true;
            for (std::size_t n = 0; n < order; ++n) {
                trial.factors[n] = model.factors[n] + alpha * cg.v[n];
            }
            residual_after = evaluate_residual(trial, x, xnorm2);
        }
        model = std::move(trial);
    } else {
        for (std::size_t n = 0; n < order; ++n) {
            model.factors[n] += cg.v[n];
        }
    }
    diag.alpha = alpha;
    diag.step_norm = 0.0;
    for (const auto& vn : cg.v) diag.step_norm += alpha * vn.norm();
    for (std::size_t n = 0; n < order; ++n) {
        ws.note_factor_update(n);
    }
    if (!all_finite(model.factors)) {
        throw NumericalFailure("gn_step: non-finite factors after update");
    }
    if (residual_after < 0.0) {
        residual_after = evaluate_residual(model, x, xnorm2);
    }
    diag.residual_after = residual_after;
    diag.stepped = true;
    schedule = schedule_next(schedule);
    return diag;
}

std::pair<KruskalModel, ConvergenceReport> gn_optimize(const DenseTensor& x,
                                                       KruskalModel model,
                                                       const GnConfig& config) {
    config.validate();
    model.validate();
    const double xnorm2 = x.norm2();
    if (!(xnorm2 > 0.0)) {
        throw InvalidArgument("gn_optimize: tensor norm must be positive");
    }

    ConvergenceReport report;
    report.status = TerminalStatus::cap_hit;
    MttkrpWorkspace ws;
    RegSchedule schedule = config.schedule;
    const auto t0 = std::chrono::steady_clock::now();

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        GnStepDiag diag = gn_step(x, model, ws, config, schedule, xnorm2);
        if (diag.halt == GnStepDiag::Halt::residual) {
            report.status = TerminalStatus::converged_residual;
            break;
        }
        if (diag.halt == GnStepDiag::Halt::gradient) {
            // Stationary point: the update is zero.
            report.status = TerminalStatus::converged_step;
            break;
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        report.records.push_back({iter, diag.residual_after,
                                  1.0 - diag.residual_after, diag.lambda,
                                  diag.cg_iters, seconds});
        if (diag.residual_after < config.residual_tol) {
            report.status = TerminalStatus::converged_residual;
            break;
        }
        if (diag.step_norm < config.step_tol) {
            report.status = TerminalStatus::converged_step;
            break;
        }
    }
    return {std::move(model), std::move(report)};
}

}  // namespace cpkit
