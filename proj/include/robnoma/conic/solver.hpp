#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "../errors.hpp"
#include "cones.hpp"
#include "program.hpp"

namespace robnoma::conic {

struct SolverSettings {
    double tol = 1e-6;
    int max_iters = 20000;
    double alpha = 1.6;        // over-relaxation
    double sigma = 1e-6;
    double rho = 0.1;
    double rho_eq_factor = 1e3;
    bool adaptive_rho = true;
    int adapt_every = 50;
    int check_every = 10;
    int scaling_iters = 15;
    double eps_infeasible = 1e-6;
    int dense_limit = 400;     // dense factorization up to this many variables
};

enum class SolveStatus { Optimal, MaxIters, InfeasibleSuspected, UnboundedSuspected };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::MaxIters: return "MaxIters";
        case SolveStatus::InfeasibleSuspected: return "Infeasible-suspected";
        case SolveStatus::UnboundedSuspected: return "Unbounded-suspected";
    }
    return "?";
}

struct SolveReport {
    SolveStatus status = SolveStatus::MaxIters;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double eps_primal = 0.0;
    double eps_dual = 0.0;
    int iterations = 0;
    int refactorizations = 0;
    double wall_ms = 0.0;
    std::vector<double> primal_trace;
    std::vector<double> dual_trace;
};

// Primal x, dual y (in the dual cone) and slack s = b - A x.
struct WarmStart {
    RVec x;
    RVec y;
};

struct SolveResult {
    RVec x;
    RVec y;
    RVec s;
    SolveReport report;
};

// Operator-splitting solver for
//   minimize c'x  subject to  A x + s = b,  s in K,
// K a product of zero, nonnegative, second-order and Hermitian PSD cones.
// Each iteration solves one linear system with a cached factorization of
// sigma I + A' R A and projects onto K.
class Solver {
public:
    Solver(const ConicProgram& prog, SolverSettings st = {}) : st_(st) { compile(prog); }

    int num_vars() const { return n_; }
    int num_rows() const { return m_; }

    SolveResult solve(const WarmStart* ws = nullptr) {
        const auto t0 = std::chrono::steady_clock::now();
        SolveResult res;
        SolveReport& rep = res.report;

        RVec x = RVec::Zero(n_), z = RVec::Zero(m_), y = RVec::Zero(m_);
        if (ws) {
            if (ws->x.size() == n_) x = ws->x.cwiseQuotient(D_);
            if (ws->y.size() == m_) y = cs_ * ws->y.cwiseQuotient(E_);
            z = Abar_ * x;
            project_C(z);
        }

        set_rho(st_.rho);
        factor();
        rep.refactorizations = 1;

        RVec xt(n_), zt(m_), rhs(n_), zr(m_), v(m_), xprev(n_), yprev(m_);
        RVec Ax(m_), Aty(n_);
        int it = 0;
        rep.status = SolveStatus::MaxIters;
        for (it = 1; it <= st_.max_iters; ++it) {
            xprev = x;
            yprev = y;
            rhs = st_.sigma * x - cbar_ + Abar_.transpose() * (rho_vec_.cwiseProduct(z) - y);
            xt = linsolve(rhs);
            zt = Abar_ * xt;
            x = st_.alpha * xt + (1.0 - st_.alpha) * x;
            zr = st_.alpha * zt + (1.0 - st_.alpha) * z;
            v = zr + y.cwiseQuotient(rho_vec_);
            project_C(v);
            y += rho_vec_.cwiseProduct(zr - v);
            z = v;

            if (it % st_.check_every != 0 && it != st_.max_iters) continue;
            if (!x.allFinite() || !y.allFinite())
                throw NumericalError("non-finite iterate at iteration " + std::to_string(it) +
                                     " (rho=" + std::to_string(rho_) + ")");

            Ax = Abar_ * x;
            Aty = Abar_.transpose() * y;
            // unscaled quantities
            const double rp = (Ax - z).cwiseQuotient(E_).lpNorm<Eigen::Infinity>();
            const double rd = (cbar_ + Aty).cwiseQuotient(D_).lpNorm<Eigen::Infinity>() / cs_;
            const double nAx = Ax.cwiseQuotient(E_).lpNorm<Eigen::Infinity>();
            const double nz = z.cwiseQuotient(E_).lpNorm<Eigen::Infinity>();
            const double nAty = Aty.cwiseQuotient(D_).lpNorm<Eigen::Infinity>() / cs_;
            const double pobj = cbar_.dot(x) / cs_;
            const double dobj = -bbar_.dot(y) / cs_;
            const double eps_p = st_.tol * (1.0 + std::max(nAx, nz));
            const double eps_d = st_.tol * (1.0 + std::max(nAty, cnorm_));
            const double gap = std::abs(pobj - dobj);
            rep.primal_trace.push_back(rp);
            rep.dual_trace.push_back(rd);
            rep.primal_residual = rp;
            rep.dual_residual = rd;
            rep.gap = gap;
            rep.eps_primal = eps_p;
            rep.eps_dual = eps_d;
            if (rp <= eps_p && rd <= eps_d && gap <= st_.tol * (1.0 + std::abs(pobj) + std::abs(dobj))) {
                rep.status = SolveStatus::Optimal;
                break;
            }
            if (primal_infeasible(y - yprev)) {
                rep.status = SolveStatus::InfeasibleSuspected;
                break;
            }
            if (unbounded(x - xprev)) {
                rep.status = SolveStatus::UnboundedSuspected;
                break;
            }
            if (st_.adaptive_rho && it % st_.adapt_every == 0) {
                const double sp = (Ax - z).lpNorm<Eigen::Infinity>() /
                                  std::max({Ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>(), 1e-10});
                const double sd = (cbar_ + Aty).lpNorm<Eigen::Infinity>() /
                                  std::max({Aty.lpNorm<Eigen::Infinity>(), cbar_.lpNorm<Eigen::Infinity>(), 1e-10});
                double rnew = rho_ * std::sqrt(sp / std::max(sd, 1e-12));
                rnew = std::clamp(rnew, 1e-6, 1e6);
                if (rnew > 5.0 * rho_ || rnew < 0.2 * rho_) {
                    set_rho(rnew);
                    factor();
                    ++rep.refactorizations;
                }
            }
        }
        rep.iterations = std::min(it, st_.max_iters);

        res.x = x.cwiseProduct(D_);
        res.y = y.cwiseProduct(E_) / cs_;
        res.s = b_ - z.cwiseQuotient(E_);
        const double cx = c_.dot(res.x);
        rep.objective = (minimize_ ? cx : -cx) + obj_const_;
        rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return res;
    }

private:
    using SpMat = Eigen::SparseMatrix<double>;

    struct Segment {
        ConeKind kind;
        int start;
        int len;
        int psd_dim;
    };

    void compile(const ConicProgram& p) {
        n_ = p.num_vars();
        m_ = p.num_rows();
        require_structure(n_ > 0, "program has no variables");
        minimize_ = p.minimize();
        obj_const_ = p.objective().constant;
        c_ = RVec::Zero(n_);
        for (auto& t : p.objective().terms) c_(t.first) += minimize_ ? t.second : -t.second;
        b_ = RVec::Zero(m_);
        std::vector<Eigen::Triplet<double>> trip;
        int row = 0;
        for (auto& con : p.constraints()) {
            segs_.push_back({con.kind, row, static_cast<int>(con.rows.size()), con.psd_dim});
            for (auto& r : con.rows) {
                for (auto& t : r.terms) trip.emplace_back(row, t.first, -t.second);
                b_(row) = r.constant;
                ++row;
            }
        }
        SpMat A(m_, n_);
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        equilibrate(A);
        cnorm_ = c_.lpNorm<Eigen::Infinity>();
    }

    void equilibrate(const SpMat& A) {
        D_ = RVec::Ones(n_);
        E_ = RVec::Ones(m_);
        Abar_ = A;
        for (int iter = 0; iter < st_.scaling_iters; ++iter) {
            RVec cn = RVec::Zero(n_), rn = RVec::Zero(m_);
            for (int j = 0; j < Abar_.outerSize(); ++j)
                for (SpMat::InnerIterator itA(Abar_, j); itA; ++itA) {
                    const double a = std::abs(itA.value());
                    cn(j) = std::max(cn(j), a);
                    rn(itA.row()) = std::max(rn(itA.row()), a);
                }
            for (auto& s : segs_) {
                if (s.kind == ConeKind::SOC || s.kind == ConeKind::PSD) {
                    const double mx = rn.segment(s.start, s.len).maxCoeff();
                    rn.segment(s.start, s.len).setConstant(mx);
                }
            }
            RVec d(n_), e(m_);
            for (int j = 0; j < n_; ++j) d(j) = cn(j) < 1e-8 ? 1.0 : std::clamp(1.0 / std::sqrt(cn(j)), 1e-4, 1e4);
            for (int i = 0; i < m_; ++i) e(i) = rn(i) < 1e-8 ? 1.0 : std::clamp(1.0 / std::sqrt(rn(i)), 1e-4, 1e4);
            Abar_ = e.asDiagonal() * Abar_ * d.asDiagonal();
            D_ = D_.cwiseProduct(d);
            E_ = E_.cwiseProduct(e);
        }
        Abar_.makeCompressed();
        RVec cd = D_.cwiseProduct(c_);
        const double cmax = cd.lpNorm<Eigen::Infinity>();
        cs_ = cmax < 1e-8 ? 1.0 : std::clamp(1.0 / cmax, 1e-4, 1e4);
        cbar_ = cs_ * cd;
        bbar_ = E_.cwiseProduct(b_);
    }

    void set_rho(double r) {
        rho_ = r;
        rho_vec_ = RVec::Constant(m_, r);
        for (auto& s : segs_)
            if (s.kind == ConeKind::Zero) rho_vec_.segment(s.start, s.len).setConstant(r * st_.rho_eq_factor);
    }

    void factor() {
        SpMat K = SpMat(Abar_.transpose()) * rho_vec_.asDiagonal() * Abar_;
        if (n_ <= st_.dense_limit) {
            RMat Kd = RMat(K);
            Kd.diagonal().array() += st_.sigma;
            dense_.compute(Kd);
            if (dense_.info() != Eigen::Success) throw NumericalError("KKT factorization failed");
            use_dense_ = true;
        } else {
            SpMat I(n_, n_);
            I.setIdentity();
            K = K + st_.sigma * I;
            if (!sparse_) sparse_ = std::make_unique<Eigen::SimplicialLLT<SpMat>>();
            sparse_->compute(K);
            if (sparse_->info() != Eigen::Success) throw NumericalError("KKT factorization failed");
            use_dense_ = false;
        }
    }

    RVec linsolve(const RVec& r) const { return use_dense_ ? RVec(dense_.solve(r)) : RVec(sparse_->solve(r)); }

    // In-place projection onto K for each segment.
    void project_K(RVec& s) const {
        for (auto& g : segs_) {
            double* p = s.data() + g.start;
            switch (g.kind) {
                case ConeKind::Zero: std::fill(p, p + g.len, 0.0); break;
                case ConeKind::NonNeg:
                    for (int i = 0; i < g.len; ++i) p[i] = std::max(p[i], 0.0);
                    break;
                case ConeKind::SOC: project_soc(p, g.len); break;
                case ConeKind::PSD: project_psd_hvec(p, g.psd_dim); break;
            }
        }
    }

    // z <- b - proj_K(b - z)
    void project_C(RVec& z) const {
        RVec s = bbar_ - z;
        project_K(s);
        z = bbar_ - s;
    }

    // Distance from v to K restricted to non-zero-cone segments (zero segments
    // are either ignored or required to vanish).
    double cone_distance(const RVec& v, bool zero_rows_free) const {
        RVec p = v;
        double d2 = 0.0;
        for (auto& g : segs_) {
            if (g.kind == ConeKind::Zero) {
                if (!zero_rows_free) d2 += v.segment(g.start, g.len).squaredNorm();
                continue;
            }
            double* q = p.data() + g.start;
            if (g.kind == ConeKind::NonNeg)
                for (int i = 0; i < g.len; ++i) q[i] = std::max(q[i], 0.0);
            else if (g.kind == ConeKind::SOC)
                project_soc(q, g.len);
            else
                project_psd_hvec(q, g.psd_dim);
            d2 += (v.segment(g.start, g.len) - p.segment(g.start, g.len)).squaredNorm();
        }
        return std::sqrt(d2);
    }

    bool primal_infeasible(const RVec& dybar) const {
        const RVec dy = dybar.cwiseProduct(E_);
        const double ndy = dy.lpNorm<Eigen::Infinity>();
        if (ndy < 1e-12) return false;
        const double eps = st_.eps_infeasible;
        if ((Abar_.transpose() * dybar).cwiseQuotient(D_).lpNorm<Eigen::Infinity>() > eps * ndy) return false;
        if (b_.dot(dy) >= -eps * ndy) return false;
        return cone_distance(dy, true) <= eps * ndy * std::sqrt(static_cast<double>(m_));
    }

    bool unbounded(const RVec& dxbar) const {
        const RVec dx = dxbar.cwiseProduct(D_);
        const double ndx = dx.lpNorm<Eigen::Infinity>();
        if (ndx < 1e-12) return false;
        const double eps = st_.eps_infeasible;
        if (c_.dot(dx) >= -eps * ndx) return false;
        const RVec mAdx = -(Abar_ * dxbar).cwiseQuotient(E_);
        return cone_distance(mAdx, false) <= eps * ndx * std::sqrt(static_cast<double>(m_));
    }

    SolverSettings st_;
    int n_ = 0, m_ = 0;
    bool minimize_ = true;
    double obj_const_ = 0.0;
    RVec c_, b_, cbar_, bbar_, D_, E_, rho_vec_;
    double cs_ = 1.0, rho_ = 0.1, cnorm_ = 0.0;
    SpMat Abar_;
    std::vector<Segment> segs_;
    Eigen::LLT<RMat> dense_;
    std::unique_ptr<Eigen::SimplicialLLT<SpMat>> sparse_;
    bool use_dense_ = true;
};

inline SolveResult solve(const ConicProgram& p, const SolverSettings& st = {}, const WarmStart* ws = nullptr) {
    Solver s(p, st);
    return s.solve(ws);
}

}  // namespace robnoma::conic
