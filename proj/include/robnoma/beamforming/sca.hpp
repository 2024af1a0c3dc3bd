#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "../conic/cones.hpp"
#include "../conic/randomization.hpp"
#include "../conic/solver.hpp"
#include "builder.hpp"
#include "model.hpp"
#include "../solution.hpp"

namespace robnoma {

struct ScaOptions {
    double eps_sca = 1e-4;   // relative objective change
    int max_outer = 50;
    conic::SolverSettings solver;
    double backoff = 2e-5;
    int trials = 100;
    double rank_tol = 1e-3;
    std::uint64_t seed = 1;
    bool recover = true;
    int rank_refine = 20;     // penalty rounds when randomization fails
    double rank_weight = 1.0; // initial penalty weight, doubled each round
    std::function<void(BuiltProgram&)> extend;  // extra variables and rows added to every subproblem
};

struct ScaResult {
    std::vector<CMat> X;            // relaxed blocks per scheduled user
    std::vector<CVec> w;            // recovered vectors per scheduled user (on its nodes)
    std::vector<double> objective_trace;
    std::vector<double> residual_trace;
    std::vector<double> step_trace;
    int outer_iterations = 0;
    long solver_iterations = 0;
    double solver_work = 0.0;       // iterations times constraint nonzeros, summed over subproblems
    double ipm_bound = 0.0;         // interior-point bound max(m, n)^4 sqrt(n) log(1/tol), summed over SCA subproblems
    int solver_failures = 0;
    bool converged = false;
    bool anomaly = false;
    bool recovered_feasible = false;
    bool rank_one = false;
    double recovered_objective = 0.0;
};

struct InitResult {
    std::vector<CMat> X;
    bool feasible = false;
    std::string method;
    std::vector<int> infeasible_users;  // schedule indices
    std::vector<double> slack;
    long solver_iterations = 0;
};

namespace detail {

inline std::vector<CMat> project_blocks(const std::vector<CMat>& X) {
    std::vector<CMat> P;
    P.reserve(X.size());
    for (auto& x : X) P.push_back(conic::psd_project(x));
    return P;
}

inline std::vector<CMat> lerp(const std::vector<CMat>& a, const std::vector<CMat>& b, double t) {
    std::vector<CMat> r;
    r.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r.push_back(a[i] + t * (b[i] - a[i]));
    return r;
}

inline std::vector<CMat> scaled(const std::vector<CMat>& X, double c) {
    std::vector<CMat> r;
    for (auto& x : X) r.push_back(c * x);
    return r;
}

inline double nonzeros(const conic::ConicProgram& p) {
    double nz = 0.0;
    for (auto& c : p.constraints())
        for (auto& r : c.rows) nz += static_cast<double>(r.terms.size());
    return nz;
}

inline double ipm_bound(const conic::ConicProgram& p, double tol) {
    const double m = p.num_rows(), n = p.num_vars();
    return std::pow(std::max(m, n), 4) * std::sqrt(n) * std::log(1.0 / tol);
}

inline std::vector<double> fbs_power(const Schedule& s, const std::vector<CVec>& w, int T_f, int F) {
    std::vector<double> p(F, 0.0);
    for (std::size_t u = 0; u < s.users.size(); ++u) {
        const auto& nodes = s.users[u].nodes;
        for (std::size_t t = 0; t < nodes.size(); ++t) p[nodes[t] / T_f] += std::norm(w[u](static_cast<Eigen::Index>(t)));
    }
    return p;
}

}  // namespace detail

// Maximum-ratio start with uniform power, scaled down until feasible; falls back
// to a phase-one program that reports which users cannot be served.
inline InitResult init_beamformers(const RobustModel& M, const NetworkScenario& sc, const ScaOptions& opt = {}) {
    InitResult R;
    const int U = M.num_users();
    if (U == 0) {
        R.feasible = true;
        R.method = "empty";
        return R;
    }
    std::vector<int> users_per_fbs(sc.F, 0);
    for (auto& su : M.sched.users) {
        std::vector<int> f;
        for (int a : su.nodes) f.push_back(sc.fbs_of(a));
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        for (int x : f) ++users_per_fbs[x];
    }
    std::vector<CMat> X0;
    for (auto& su : M.sched.users) {
        double p = std::numeric_limits<double>::infinity();
        for (int a : su.nodes) p = std::min(p, sc.P_max / users_per_fbs[sc.fbs_of(a)]);
        const double hn = su.h.norm();
        CVec w = hn > 0 ? CVec(su.h * (std::sqrt(p) / hn)) : CVec(CVec::Zero(su.h.size()));
        X0.push_back(outer(w));
    }
    // largest common scale allowed by the interference caps
    double cmax = 1.0;
    for (auto& c : M.cons)
        if (c.kind == ConstraintKind::Mue) {
            const double load = c.lin.constant - c.lin.eval(X0);
            if (load > 0) cmax = std::min(cmax, c.lin.constant / load);
        }
    for (int i = 0; i < 60; ++i) {
        const double c = cmax * std::pow(0.8, i) * (1.0 - 1e-9);
        std::vector<CMat> Xc = detail::scaled(X0, c);
        auto fr = check_feasibility(M, Xc, 0.0);
        bool strict = fr.feasible;
        if (strict)
            for (double m : fr.margins) strict = strict && m > 0;
        if (strict) {
            R.X = Xc;
            R.feasible = true;
            R.method = "mrt";
            return R;
        }
    }
    // phase one
    double backoff = std::max(opt.backoff, 1e-6);
    for (int attempt = 0; attempt < 3; ++attempt, backoff *= 10) {
        BuildOptions bo;
        bo.backoff = backoff;
        bo.phase_one = true;
        BuiltProgram B = build_program(M, X0, bo);
        conic::Solver solver(B.prog, opt.solver);
        auto res = solver.solve();
        R.solver_iterations += res.report.iterations;
        R.X = detail::project_blocks(B.blocks(res.x));
        R.slack.assign(U, 0.0);
        R.infeasible_users.clear();
        for (int u = 0; u < U; ++u) {
            R.slack[u] = res.x(B.prog.var(B.t_block, u));
            if (R.slack[u] > 1e-6) R.infeasible_users.push_back(u);
        }
        if (res.report.status == conic::SolveStatus::InfeasibleSuspected && R.infeasible_users.empty())
            for (int u = 0; u < U; ++u) R.infeasible_users.push_back(u);
        R.method = "phase-one";
        if (!R.infeasible_users.empty()) {
            R.feasible = false;
            std::sort(R.infeasible_users.begin(), R.infeasible_users.end(),
                      [&](int a, int b) { return R.slack[a] > R.slack[b]; });
            return R;
        }
        if (check_feasibility(M, R.X).feasible) {
            R.feasible = true;
            return R;
        }
    }
    // slacks vanished but the exact check still fails: report the worst row's owner
    R.feasible = false;
    auto fr = check_feasibility(M, R.X);
    const int owner = fr.worst_index >= 0 ? M.cons[fr.worst_index].owner : -1;
    R.infeasible_users = {owner >= 0 ? owner : 0};
    return R;
}

// Largest t in [0, 1] with a + t (b - a) feasible, assuming a is feasible and
// the feasible set is convex along the segment.
inline double feasible_step(const RobustModel& M, const std::vector<CMat>& a, const std::vector<CMat>& b) {
    if (check_feasibility(M, b).feasible) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 30; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (check_feasibility(M, detail::lerp(a, b, mid)).feasible)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

// Rank-one recovery by joint Gaussian randomization with the mode's exact check.
// Penalized subproblems pushing every block toward rank one: the objective gains
// mu * sum(trace X_u - v_u^H X_u v_u) with v_u the current principal vector.
inline std::vector<CMat> refine_rank(const RobustModel& M, std::vector<CMat> X, const ScaOptions& opt, ScaResult& R) {
    BuildOptions bo;
    bo.backoff = opt.backoff;
    double mu = opt.rank_weight;
    for (int it = 0; it < opt.rank_refine; ++it, mu *= 2.0) {
        std::vector<CMat> P;
        std::vector<CVec> V;
        bool rank_one = true;
        for (auto& x : X) {
            double ratio = 0.0;
            V.push_back(conic::principal_component(x, &ratio));
            rank_one = rank_one && ratio <= opt.rank_tol;
            P.push_back(outer(V.back()));
        }
        if (rank_one || check_feasibility(M, P).feasible) break;
        BuiltProgram B = build_program(M, X, bo);
        conic::LinExpr obj = B.prog.objective();
        for (std::size_t u = 0; u < X.size(); ++u) {
            const double nv = V[u].norm();
            const CVec v = nv > 0 ? CVec(V[u] / nv) : V[u];
            const CMat E = CMat::Identity(X[u].rows(), X[u].cols()) - outer(v);
            conic::LinExpr pen = B.prog.trace_with(B.X_block[u], E);
            pen *= mu;
            obj += pen;
        }
        B.prog.set_objective(obj, true);
        conic::Solver solver(B.prog, opt.solver);
        auto res = solver.solve();
        R.solver_iterations += res.report.iterations;
        R.solver_work += static_cast<double>(res.report.iterations) * detail::nonzeros(B.prog);
        if (res.report.status == conic::SolveStatus::InfeasibleSuspected ||
            res.report.status == conic::SolveStatus::UnboundedSuspected)
            break;
        const std::vector<CMat> Xs = detail::project_blocks(B.blocks(res.x));
        const double step = feasible_step(M, X, Xs);
        if (step <= 0.0) break;
        X = detail::lerp(X, Xs, step);
    }
    return X;
}

inline void recover_rank_one(const RobustModel& M, const NetworkScenario& sc, const ScaOptions& opt, ScaResult& R,
                             const std::vector<CVec>* fallback = nullptr) {
    auto to_mats = [](const std::vector<CVec>& w) {
        std::vector<CMat> X;
        for (auto& v : w) X.push_back(outer(v));
        return X;
    };
    auto margin = [&](const std::vector<CVec>& w) { return check_feasibility(M, to_mats(w)).worst_margin + 1e-12; };
    auto objective = [&](const std::vector<CVec>& w) { return model_objective(M, to_mats(w)); };
    auto rescale = [&](std::vector<CVec>& w) {
        const auto p = detail::fbs_power(M.sched, w, sc.T_f, sc.F);
        const double worst = *std::max_element(p.begin(), p.end());
        if (worst > sc.P_max) {
            const double s = std::sqrt(sc.P_max / worst);
            for (auto& v : w) v *= s;
        }
    };
    auto rr = conic::gaussian_randomization(R.X, margin, objective, rescale, opt.trials, opt.seed, opt.rank_tol);
    if (!rr.feasible && opt.rank_refine > 0) {
        R.X = refine_rank(M, R.X, opt, R);
        rr = conic::gaussian_randomization(R.X, margin, objective, rescale, opt.trials, opt.seed, opt.rank_tol);
    }
    R.w = rr.w;
    R.recovered_feasible = rr.feasible;
    R.rank_one = rr.rank_one;
    R.recovered_objective = rr.feasible ? rr.objective : objective(rr.w);
    if (!rr.feasible && fallback && margin(*fallback) >= 0.0) {
        R.w = *fallback;
        R.recovered_feasible = true;
        R.recovered_objective = objective(*fallback);
    }
}

// D.C. successive convex approximation from a feasible start.
inline ScaResult sca_iterate(const RobustModel& M, const std::vector<CMat>& X_init, const NetworkScenario& sc,
                             const ScaOptions& opt = {}, const std::vector<CVec>* fallback = nullptr) {
    ScaResult R;
    R.X = X_init;
    const int U = M.num_users();
    if (U == 0) {
        R.converged = true;
        R.recovered_feasible = true;
        return R;
    }
    if (!check_feasibility(M, R.X).feasible) throw InfeasibleError("SCA start point is infeasible; run init_beamformers first");
    double obj = model_objective(M, R.X);
    R.objective_trace.push_back(obj);
    conic::WarmStart warm;
    bool have_warm = false;
    BuildOptions bo;
    bo.backoff = opt.backoff;
    for (int t = 1; t <= opt.max_outer; ++t) {
        R.outer_iterations = t;
        BuiltProgram B = build_program(M, R.X, bo);
        if (opt.extend) opt.extend(B);
        conic::Solver solver(B.prog, opt.solver);
        auto res = solver.solve(have_warm ? &warm : nullptr);
        R.solver_iterations += res.report.iterations;
        R.solver_work += static_cast<double>(res.report.iterations) * detail::nonzeros(B.prog);
        R.ipm_bound += detail::ipm_bound(B.prog, opt.solver.tol);
        R.residual_trace.push_back(std::max(res.report.primal_residual, res.report.dual_residual));
        if (res.report.status == conic::SolveStatus::InfeasibleSuspected ||
            res.report.status == conic::SolveStatus::UnboundedSuspected) {
            ++R.solver_failures;
            break;
        }
        if (res.report.status != conic::SolveStatus::Optimal) ++R.solver_failures;
        warm.x = res.x;
        warm.y = res.y;
        have_warm = true;
        const std::vector<CMat> Xs = detail::project_blocks(B.blocks(res.x));
        const double step = feasible_step(M, R.X, Xs);
        R.step_trace.push_back(step);
        const std::vector<CMat> Xn = detail::lerp(R.X, Xs, step);
        const double obj_new = model_objective(M, Xn);
        const double scale = std::max(1.0, std::abs(obj));
        if (obj_new < obj - 10.0 * opt.solver.tol * scale) R.anomaly = true;
        if (obj_new < obj) {
            // no ascent: keep the current point
            R.objective_trace.push_back(obj);
            R.converged = true;
            break;
        }
        R.X = Xn;
        const double delta = obj_new - obj;
        obj = obj_new;
        R.objective_trace.push_back(obj);
        if (delta <= opt.eps_sca * scale) {
            R.converged = true;
            break;
        }
    }
    if (opt.recover) recover_rank_one(M, sc, opt, R, fallback);
    return R;
}

// Full-size solution for reporting: W from the relaxed blocks, w from recovery.
inline BeamformingSolution to_solution(const RobustModel& M, const ScaResult& R) {
    const Schedule& s = M.sched;
    BeamformingSolution sol(s.K, s.N, s.A);
    for (std::size_t u = 0; u < s.users.size(); ++u) {
        const auto& su = s.users[u];
        sol.Wk(su.k, su.n) = embed(R.X[u], su.nodes, s.A);
        if (u < R.w.size()) sol.wk(su.k, su.n) = embed(R.w[u], su.nodes, s.A);
        double ratio = 0.0;
        conic::principal_component(R.X[u], &ratio);
        sol.rank_gap[su.k * s.N + su.n] = ratio;
    }
    for (std::size_t ci = 0; ci < M.cons.size(); ++ci) {
        const auto& c = M.cons[ci];
        if (!c.bern || c.owner < 0) continue;
        const auto& su = s.users[c.owner];
        const double xv = bernstein_norm(*c.bern, s, R.X);
        const double yv = bernstein_y(*c.bern, s, R.X, M.slack);
        if (c.kind == ConstraintKind::Rate) {
            sol.x[su.k * s.N + su.n] = xv;
            sol.y[su.k * s.N + su.n] = yv;
        } else {
            sol.xp[su.k * s.N + su.n] = std::max(sol.xp[su.k * s.N + su.n], xv);
        }
    }
    sol.objective_trace = R.objective_trace;
    sol.residual_trace = R.residual_trace;
    sol.outer_iterations = R.outer_iterations;
    sol.solver_iterations = R.solver_iterations;
    sol.converged = R.converged;
    sol.anomaly = R.anomaly;
    return sol;
}

}  // namespace robnoma
