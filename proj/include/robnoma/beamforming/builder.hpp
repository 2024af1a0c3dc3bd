#pragma once

#include <cmath>
#include <vector>

#include "../conic/program.hpp"
#include "model.hpp"

namespace robnoma {

struct BuildOptions {
    double backoff = 2e-5;    // relative tightening of inequality rows
    bool phase_one = false;   // minimize per-user slacks instead of the rate surrogate
};

// Program plus the variable layout needed to read a solution back.
struct BuiltProgram {
    conic::ConicProgram prog;
    std::vector<int> X_block;     // per scheduled user
    int s_block = -1;             // epigraph variables of the log minorant
    int t_block = -1;             // phase-one slacks
    std::vector<double> f0, g0;   // linearization points
    std::vector<int> x_var, y_var;  // per constraint, -1 if absent

    std::vector<CMat> blocks(const RVec& x) const {
        std::vector<CMat> X;
        for (int b : X_block) X.push_back(prog.hermitian_value(b, x));
        return X;
    }
};

namespace detail {

inline conic::LinExpr affine_expr(const conic::ConicProgram& p, const std::vector<int>& X_block, const AffineForm& f) {
    conic::LinExpr e(f.constant);
    for (auto& t : f.terms) e += p.trace_with(X_block[t.first], t.second);
    return e;
}

// Real matrix mapping the stacked block variables to the Bernstein norm vector
// [hvec(C^{1/2} D C^{1/2}); sqrt(2) C^{1/2} D h] of every component.
inline void bernstein_map(const conic::ConicProgram& p, const std::vector<int>& X_block, const Schedule& s,
                          const BernsteinPart& b, RMat& Mmap, std::vector<int>& cols) {
    cols.clear();
    for (auto& c : b.comps)
        for (auto& [u, a] : c.d) {
            const auto& blk = p.block(X_block[u]);
            for (int q = 0; q < blk.size; ++q)
                if (std::find(cols.begin(), cols.end(), blk.offset + q) == cols.end()) cols.push_back(blk.offset + q);
        }
    std::sort(cols.begin(), cols.end());
    const int A = s.A;
    const int per = A * A + 2 * A;
    Mmap = RMat::Zero(per * static_cast<int>(b.comps.size()), cols.size());
    for (std::size_t ci = 0; ci < b.comps.size(); ++ci) {
        const auto& c = b.comps[ci];
        for (auto& [u, a] : c.d) {
            const auto& blk = p.block(X_block[u]);
            const auto& nodes = s.users[u].nodes;
            for (int q = 0; q < blk.size; ++q) {
                const CMat E = a * embed(conic::hbasis(blk.dim, q), nodes, A);
                const RVec v1 = conic::hvec(c.c_sqrt * E * c.c_sqrt);
                const CVec v2 = std::sqrt(2.0) * (c.c_sqrt * E * c.h);
                const int col = static_cast<int>(std::lower_bound(cols.begin(), cols.end(), blk.offset + q) - cols.begin());
                const int r0 = static_cast<int>(ci) * per;
                Mmap.block(r0, col, A * A, 1) += v1;
                for (int i = 0; i < A; ++i) {
                    Mmap(r0 + A * A + 2 * i, col) += v2(i).real();
                    Mmap(r0 + A * A + 2 * i + 1, col) += v2(i).imag();
                }
            }
        }
    }
}

}  // namespace detail

inline BuiltProgram build_program(const RobustModel& M, const std::vector<CMat>& X_prev, const BuildOptions& opt = {}) {
    BuiltProgram B;
    conic::ConicProgram& p = B.prog;
    const int U = M.num_users();
    require_structure(static_cast<int>(X_prev.size()) == U, "previous iterate does not match the schedule");
    for (int u = 0; u < U; ++u) {
        const auto& su = M.sched.users[u];
        B.X_block.push_back(p.add_hermitian("W_" + std::to_string(su.k) + "_" + std::to_string(su.n), M.block_dim(u)));
    }
    if (U > 0) {
        if (opt.phase_one)
            B.t_block = p.add_scalars("t", U);
        else
            B.s_block = p.add_scalars("s", U);
    }

    // constraints
    for (std::size_t ci = 0; ci < M.cons.size(); ++ci) {
        const RobustConstraint& c = M.cons[ci];
        conic::LinExpr row = detail::affine_expr(p, B.X_block, c.lin);
        double scale = row.max_abs_coef();
        if (scale <= 0.0) scale = 1.0;
        int xv = -1, yv = -1;
        if (c.bern) {
            const BernsteinPart& b = *c.bern;
            const int xb = p.add_scalars("x_" + c.tag, 1);
            xv = p.var(xb);
            row.add(xv, -b.c_x);
            RMat Mmap;
            std::vector<int> cols;
            detail::bernstein_map(p, B.X_block, M.sched, b, Mmap, cols);
            std::vector<conic::LinExpr> soc{p.scalar(xb)};
            const int nc = static_cast<int>(cols.size());
            RMat R = Mmap;
            if (Mmap.rows() > nc) {
                Eigen::HouseholderQR<RMat> qr(Mmap);
                R = qr.matrixQR().topRows(nc).triangularView<Eigen::Upper>();
            }
            for (int r = 0; r < R.rows(); ++r) {
                conic::LinExpr e;
                for (int j = 0; j < nc; ++j) e.add(cols[j], R(r, j));
                if (!e.terms.empty()) soc.push_back(e);
            }
            if (b.varsigma > 0.0) soc.push_back(conic::LinExpr(std::sqrt(b.varsigma)));
            p.add_soc(std::move(soc), "bern:" + c.tag);
            if (M.slack == BernsteinSlack::Exact) {
                const int yb = p.add_scalars("y_" + c.tag, 1);
                yv = p.var(yb);
                row.add(yv, -b.c_y);
                p.add_nonneg(p.scalar(yb) + conic::LinExpr(-b.y_const), "ymin:" + c.tag);
                const int A = M.sched.A;
                for (std::size_t k = 0; k < b.comps.size(); ++k) {
                    const auto& comp = b.comps[k];
                    // rows: hvec(y I + sign * C^{1/2} D C^{1/2}) restricted to its support
                    std::vector<int> J;
                    std::vector<int> touched;
                    for (auto& [u, a] : comp.d)
                        for (int nd : M.sched.users[u].nodes) touched.push_back(nd);
                    for (int i = 0; i < A; ++i)
                        for (int nd : touched)
                            if (std::abs(comp.c_sqrt(i, nd)) > 0.0) {
                                J.push_back(i);
                                break;
                            }
                    if (J.empty()) continue;
                    const int nJ = static_cast<int>(J.size());
                    std::vector<conic::LinExpr> rows(conic::hvec_size(nJ));
                    const RVec eye = conic::hvec(CMat::Identity(nJ, nJ));
                    for (int q = 0; q < conic::hvec_size(nJ); ++q) rows[q].add(yv, eye(q));
                    for (auto& [u, a] : comp.d) {
                        const auto& blk = p.block(B.X_block[u]);
                        for (int q = 0; q < blk.size; ++q) {
                            const CMat E = a * embed(conic::hbasis(blk.dim, q), M.sched.users[u].nodes, A);
                            const RVec v = conic::hvec(restrict(CMat(comp.c_sqrt * E * comp.c_sqrt), J));
                            for (int r = 0; r < v.size(); ++r) rows[r].add(blk.offset + q, comp.sign * v(r));
                        }
                    }
                    p.add_psd(nJ, std::move(rows), "ypsd" + std::to_string(k) + ":" + c.tag);
                }
            } else {
                row += conic::LinExpr(-b.c_y * b.y_const);
            }
        }
        if (opt.phase_one && c.owner >= 0) row.add(p.var(B.t_block, c.owner), scale);
        row += conic::LinExpr(-opt.backoff * scale);
        row *= 1.0 / scale;
        p.add_nonneg(std::move(row), c.tag);
        B.x_var.push_back(xv);
        B.y_var.push_back(yv);
    }
    for (int u = 0; u < U; ++u) p.add_psd_block(B.X_block[u], "psd:" + std::to_string(u));

    // objective
    conic::LinExpr obj;
    if (opt.phase_one) {
        for (int u = 0; u < U; ++u) {
            p.add_nonneg(p.scalar(B.t_block, u), "t:" + std::to_string(u));
            obj.add(p.var(B.t_block, u), 1.0);
        }
    } else {
        for (int u = 0; u < U; ++u) {
            const double f0 = M.f_form[u].eval(X_prev);
            const double g0 = M.g_form[u].eval(X_prev);
            require_parameter(f0 > 0 && g0 > 0, "nonpositive log argument at the linearization point");
            B.f0.push_back(f0);
            B.g0.push_back(g0);
            conic::LinExpr fu = detail::affine_expr(p, B.X_block, M.f_form[u]);
            fu *= 1.0 / f0;
            conic::LinExpr su = p.scalar(B.s_block, u);
            // s * (f / f0) >= 1 as a rotated cone
            p.add_soc({su + fu, conic::LinExpr(2.0), su - fu}, "minorant:" + std::to_string(u));
            conic::LinExpr gu = detail::affine_expr(p, B.X_block, M.g_form[u]);
            gu *= 1.0 / g0;
            obj += su;
            obj += gu;
        }
        obj *= 1.0 / ln2();
    }
    p.set_objective(obj, true);
    return B;
}

// Value of the concave surrogate at X given the linearization point of B.
inline double surrogate_value(const RobustModel& M, const BuiltProgram& B, const std::vector<CMat>& X) {
    double s = 0.0;
    for (int u = 0; u < M.num_users(); ++u) {
        const double f = M.f_form[u].eval(X), g = M.g_form[u].eval(X);
        s += std::log2(B.f0[u]) + (1.0 - B.f0[u] / f) / ln2() - std::log2(B.g0[u]) - (g / B.g0[u] - 1.0) / ln2();
    }
    return s;
}

inline conic::ConicProgram build_perfect_program(const ChannelSet& ch, const AssignmentState& asg,
                                                 const std::vector<CMat>& W_prev, const NetworkScenario& sc,
                                                 const BuildOptions& opt = {}) {
    RobustModel M = build_model(RobustMode::Perfect, ch, asg, sc);
    return build_program(M, to_blocks(M.sched, W_prev), opt).prog;
}

inline conic::ConicProgram build_worstcase_program(const ChannelSet& ch, const AssignmentState& asg,
                                                   const std::vector<CMat>& W_prev, const NetworkScenario& sc,
                                                   InflationVariant v = InflationVariant::Corrected,
                                                   const BuildOptions& opt = {}) {
    ModelOptions mo;
    mo.inflation = v;
    RobustModel M = build_model(RobustMode::WorstCase, ch, asg, sc, mo);
    return build_program(M, to_blocks(M.sched, W_prev), opt).prog;
}

inline conic::ConicProgram build_bernstein_program(const ChannelSet& ch, const AssignmentState& asg,
                                                   const std::vector<CMat>& W_prev, const NetworkScenario& sc,
                                                   BernsteinSlack slack = BernsteinSlack::ClosedForm,
                                                   const BuildOptions& opt = {}) {
    ModelOptions mo;
    mo.slack = slack;
    RobustModel M = build_model(RobustMode::Bernstein, ch, asg, sc, mo);
    return build_program(M, to_blocks(M.sched, W_prev), opt).prog;
}

}  // namespace robnoma
