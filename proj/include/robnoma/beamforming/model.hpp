#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "../assignment.hpp"
#include "../channels.hpp"
#include "../errors.hpp"
#include "../linalg.hpp"
#include "../rate.hpp"
#include "../scenario.hpp"

namespace robnoma {

enum class InflationVariant { Corrected, AsPrinted };
enum class BernsteinSlack { ClosedForm, Exact };

struct WorstCaseInflation {
    std::vector<double> eps_F;   // K*N
    std::vector<double> eps_FM;  // K*N
    std::vector<double> eps_MF;  // N
};

// Spectral-norm bound on (h+e)(h+e)^H - h h^H over ||e|| <= r.
inline double inflation(double r, double hnorm, InflationVariant v) {
    return v == InflationVariant::Corrected ? r * r + 2.0 * r * hnorm : r * r + 2.0 * r * r * hnorm;
}

inline WorstCaseInflation inflate_bounds(const ChannelSet& ch, InflationVariant v = InflationVariant::Corrected) {
    const UncertaintySpec& u = ch.uncertainty;
    WorstCaseInflation out;
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n) {
            out.eps_F.push_back(inflation(u.zeta_at(k, n), ch.hF(k, n).norm(), v));
            out.eps_FM.push_back(inflation(u.kappa_at(k, n), ch.hFM(k, n).norm(), v));
        }
    for (int n = 0; n < ch.N; ++n) out.eps_MF.push_back(inflation(u.eta_at(n), ch.hMF(n).norm(), v));
    return out;
}

// One scheduled (user, subcarrier) pair with its cooperating nodes.
struct ScheduledUser {
    int k;
    int n;
    std::vector<int> nodes;
    std::vector<int> stronger;  // schedule indices of stronger users on n
    CVec h;                     // estimated channel restricted to nodes
};

struct Schedule {
    int K = 0, N = 0, A = 0;
    std::vector<ScheduledUser> users;

    int index_of(int k, int n) const {
        for (std::size_t u = 0; u < users.size(); ++u)
            if (users[u].k == k && users[u].n == n) return static_cast<int>(u);
        return -1;
    }
};

inline Schedule make_schedule(const AssignmentState& asg, const ChannelSet& ch) {
    require_structure(asg.K() == ch.K && asg.A() == ch.A && asg.N() == ch.N, "assignment/channel mismatch");
    Schedule s;
    s.K = ch.K;
    s.N = ch.N;
    s.A = ch.A;
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n)
            if (asg.nu(k, n) && asg.chi.row(k).sum() > 0) s.users.push_back({k, n, asg.nodes_of(k), {}, restrict(ch.hF(k, n), asg.nodes_of(k))});
    for (auto& u : s.users)
        for (std::size_t v = 0; v < s.users.size(); ++v)
            if (s.users[v].n == u.n && stronger(ch, s.users[v].k, u.k, u.n)) u.stronger.push_back(static_cast<int>(v));
    return s;
}

// constant + sum_u trace(M_u X_u), with X_u the user's block on its nodes.
struct AffineForm {
    double constant = 0.0;
    std::vector<std::pair<int, CMat>> terms;

    void add(int u, const CMat& M_restricted) {
        for (auto& t : terms)
            if (t.first == u) {
                t.second += M_restricted;
                return;
            }
        terms.emplace_back(u, M_restricted);
    }
    double eval(const std::vector<CMat>& X) const {
        double v = constant;
        for (auto& t : terms) v += trace_product(t.second, X[t.first]);
        return v;
    }
};

// Bernstein penalty: c_x * sqrt(sum_comp ||C^{1/2} D C^{1/2}||_F^2 + 2||C^{1/2} D h||^2 + varsigma) + c_y * y,
// with D = sum_u a_u X_u embedded and y >= max(y_const, lambda_max(-sign * C^{1/2} D C^{1/2})) in the exact variant.
struct BernsteinPart {
    struct Component {
        CMat c_sqrt;
        CVec h;
        std::vector<std::pair<int, double>> d;
        int sign = 1;
    };
    std::vector<Component> comps;
    double varsigma = 0.0;
    double y_const = 0.0;
    double c_x = 0.0;
    double c_y = 0.0;
};

enum class ConstraintKind { Rate, Sic, Mue, Power };

struct RobustConstraint {
    ConstraintKind kind;
    std::string tag;
    AffineForm lin;
    std::optional<BernsteinPart> bern;
    int owner = -1;  // scheduled user whose rate or ordering the row protects
};

struct ModelOptions {
    InflationVariant inflation = InflationVariant::Corrected;
    BernsteinSlack slack = BernsteinSlack::ClosedForm;
    bool qos = true;  // rate and SIC rows
};

// Everything mode-specific about the beamforming subproblem for a fixed assignment.
struct RobustModel {
    RobustMode mode = RobustMode::Perfect;
    BernsteinSlack slack = BernsteinSlack::ClosedForm;
    Schedule sched;
    double P_max = 0.0;
    double xi = 0.0;
    std::vector<RobustConstraint> cons;
    std::vector<AffineForm> f_form;  // per scheduled user: argument of the concave log term
    std::vector<AffineForm> g_form;  // per scheduled user: argument of the subtracted log term

    int num_users() const { return static_cast<int>(sched.users.size()); }
    int block_dim(int u) const { return static_cast<int>(sched.users[u].nodes.size()); }
};

namespace detail {

inline CMat identity_restricted(int s) { return CMat::Identity(s, s); }

inline CMat restricted_gain(const CVec& h, const std::vector<int>& nodes) { return outer(restrict(h, nodes)); }

inline bool is_zero(const CMat& m) { return m.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace detail

inline RobustModel build_model(RobustMode mode, const ChannelSet& ch, const AssignmentState& asg,
                               const NetworkScenario& sc, const ModelOptions& opt = {}) {
    RobustModel M;
    M.mode = mode;
    M.slack = opt.slack;
    M.sched = make_schedule(asg, ch);
    M.P_max = sc.P_max;
    M.xi = -std::log(sc.beta);
    const double gamma = sc.gamma();
    const double s2 = sc.sigma2;
    const auto& users = M.sched.users;
    const int U = static_cast<int>(users.size());
    const UncertaintySpec& unc = ch.uncertainty;

    WorstCaseInflation inf;
    if (mode == RobustMode::WorstCase) inf = inflate_bounds(ch, opt.inflation);
    auto epsF = [&](int k, int n) { return mode == RobustMode::WorstCase ? inf.eps_F[k * ch.N + n] : 0.0; };
    auto epsFM = [&](int k, int n) { return mode == RobustMode::WorstCase ? inf.eps_FM[k * ch.N + n] : 0.0; };

    // Gain matrices (full A x A) seen by user (k, n) for its own signal and for interference.
    auto CF = [&](int k, int n) -> CMat {
        if (mode != RobustMode::Bernstein || unc.C_e_F.empty()) return CMat::Zero(ch.A, ch.A);
        return unc.C_e_F[k * ch.N + n];
    };
    auto CFM = [&](int k, int n) -> CMat {
        if (mode != RobustMode::Bernstein || unc.C_e_FM.empty()) return CMat::Zero(ch.T_m, ch.T_m);
        return unc.C_e_FM[k * ch.N + n];
    };
    auto desired = [&](int k, int n) -> CMat {
        CMat H = outer(ch.hF(k, n)) + CF(k, n);
        H.diagonal().array() -= epsF(k, n);
        return H;
    };
    auto interfering = [&](int k, int n) -> CMat {
        CMat H = outer(ch.hF(k, n)) + CF(k, n);
        H.diagonal().array() += epsF(k, n);
        return H;
    };
    auto desired_low = [&](int k, int n) -> CMat {  // lower bound of the channel gain
        CMat H = outer(ch.hF(k, n));
        H.diagonal().array() -= epsF(k, n);
        return H;
    };
    auto interfering_low = [&](int k, int n) -> CMat {
        CMat H = outer(ch.hF(k, n));
        H.diagonal().array() -= epsF(k, n);
        return H;
    };
    auto interfering_high = [&](int k, int n) -> CMat {
        CMat H = outer(ch.hF(k, n));
        H.diagonal().array() += epsF(k, n);
        return H;
    };
    const auto mbs_upper = [&](int k, int n) {
        return std::norm(ch.hFM(k, n).dot(ch.m[n])) + epsFM(k, n) * ch.m[n].squaredNorm();
    };
    const auto mbs_lower = [&](int k, int n) {
        return std::norm(ch.hFM(k, n).dot(ch.m[n])) - epsFM(k, n) * ch.m[n].squaredNorm();
    };
    const auto mbs_mean = [&](int k, int n) {
        const CVec& m = ch.m[n];
        return std::norm(ch.hFM(k, n).dot(m)) + (m.adjoint() * CFM(k, n) * m)(0, 0).real();
    };
    const auto ifm_sq = [&](int k, int n) {  // ||C_FM^{1/2} m||^2
        const CVec& m = ch.m[n];
        return (m.adjoint() * CFM(k, n) * m)(0, 0).real();
    };
    const auto varsigma = [&](int k, int n) {
        const CVec& m = ch.m[n];
        const CMat Cs = hermitian_sqrt(CFM(k, n));
        const CVec cm = Cs * m;
        const double t1 = std::pow(cm.squaredNorm(), 2);  // ||C^{1/2} m m^H C^{1/2}||_F^2
        const double t2 = cm.squaredNorm() * std::norm(m.dot(ch.hFM(k, n)));
        return t1 + 2.0 * t2;
    };

    // objective forms
    M.f_form.resize(U);
    M.g_form.resize(U);
    for (int u = 0; u < U; ++u) {
        const int k = users[u].k, n = users[u].n;
        AffineForm g;
        g.constant = (mode == RobustMode::WorstCase ? mbs_upper(k, n)
                      : mode == RobustMode::Bernstein ? mbs_mean(k, n)
                                                      : ch.mbs_interference(k, n)) +
                     s2;
        const CMat Hi = interfering(k, n);
        for (int i : users[u].stronger) g.add(i, restrict(Hi, users[i].nodes));
        AffineForm f = g;
        f.add(u, restrict(desired(k, n), users[u].nodes));
        M.f_form[u] = f;
        M.g_form[u] = g;
    }

    // rate and SIC constraints
    if (opt.qos) {
        for (int u = 0; u < U; ++u) {
            const int k = users[u].k, n = users[u].n;
            RobustConstraint c{ConstraintKind::Rate, "rate:" + std::to_string(k) + ":" + std::to_string(n), {}, {}, u};
            if (mode != RobustMode::Bernstein) {
                c.lin.add(u, restrict(desired(k, n), users[u].nodes));
                const CMat Hi = interfering(k, n);
                for (int i : users[u].stronger) c.lin.add(i, -gamma * restrict(Hi, users[i].nodes));
                c.lin.constant = -gamma * ((mode == RobustMode::WorstCase ? mbs_upper(k, n) : ch.mbs_interference(k, n)) + s2);
            } else {
                // scaled by gamma: trace((C + H)(X_u - gamma sum X_i)) - gamma(sigma2 + m^H(C_FM + H_FM)m) - ...
                const CMat G = outer(ch.hF(k, n)) + CF(k, n);
                c.lin.add(u, restrict(G, users[u].nodes));
                for (int i : users[u].stronger) c.lin.add(i, -gamma * restrict(G, users[i].nodes));
                c.lin.constant = -gamma * (s2 + mbs_mean(k, n));
                const CMat Cf = CF(k, n);
                const double vs = varsigma(k, n);
                if (!detail::is_zero(Cf) || vs > 0.0) {
                    BernsteinPart b;
                    BernsteinPart::Component comp;
                    comp.c_sqrt = hermitian_sqrt(Cf);
                    comp.h = ch.hF(k, n);
                    comp.d.emplace_back(u, 1.0 / gamma);
                    for (int i : users[u].stronger) comp.d.emplace_back(i, -1.0);
                    comp.sign = 1;
                    b.comps.push_back(comp);
                    b.varsigma = vs;
                    b.y_const = ifm_sq(k, n);
                    b.c_x = gamma * std::sqrt(2.0 * M.xi);
                    b.c_y = gamma * M.xi;
                    // the mean MBS term already holds m^H C_FM m once; the bound adds xi * y on top
                    c.bern = b;
                }
            }
            M.cons.push_back(std::move(c));
        }

        // SIC ordering: for j stronger than k on n, j's margin for k's signal >= k's own margin
        for (int uk = 0; uk < U; ++uk) {
            const int k = users[uk].k, n = users[uk].n;
            for (int uj : users[uk].stronger) {
                const int j = users[uj].k;
                RobustConstraint c{ConstraintKind::Sic, "sic:" + std::to_string(j) + ">" + std::to_string(k) + ":" + std::to_string(n), {}, {}, uk};
                if (mode != RobustMode::Bernstein) {
                    // lower bound of margin_j(X_k) ...
                    c.lin.add(uk, restrict(desired_low(j, n), users[uk].nodes));
                    for (int i : users[uj].stronger) c.lin.add(i, -restrict(interfering_high(j, n), users[i].nodes));
                    // ... minus upper bound of margin_k(X_k)
                    c.lin.add(uk, -restrict(interfering_high(k, n), users[uk].nodes));
                    for (int i : users[uk].stronger) c.lin.add(i, restrict(interfering_low(k, n), users[i].nodes));
                    if (mode == RobustMode::WorstCase)
                        c.lin.constant = -mbs_upper(j, n) + mbs_lower(k, n);
                    else
                        c.lin.constant = -ch.mbs_interference(j, n) + ch.mbs_interference(k, n);
                } else {
                    const CMat Gj = outer(ch.hF(j, n)) + CF(j, n);
                    const CMat Gk = outer(ch.hF(k, n)) + CF(k, n);
                    c.lin.add(uk, restrict(Gj, users[uk].nodes));
                    for (int i : users[uj].stronger) c.lin.add(i, -restrict(Gj, users[i].nodes));
                    c.lin.add(uk, -restrict(Gk, users[uk].nodes));
                    for (int i : users[uk].stronger) c.lin.add(i, restrict(Gk, users[i].nodes));
                    c.lin.constant = -mbs_mean(j, n) + mbs_mean(k, n);
                    const CMat Cj = CF(j, n), Ck = CF(k, n);
                    const double vs = varsigma(j, n) + varsigma(k, n);
                    if (!detail::is_zero(Cj) || !detail::is_zero(Ck) || vs > 0.0) {
                        BernsteinPart b;
                        BernsteinPart::Component cj, ck;
                        cj.c_sqrt = hermitian_sqrt(Cj);
                        cj.h = ch.hF(j, n);
                        cj.d.emplace_back(uk, 1.0);
                        for (int i : users[uj].stronger) cj.d.emplace_back(i, -1.0);
                        cj.sign = 1;
                        ck.c_sqrt = hermitian_sqrt(Ck);
                        ck.h = ch.hF(k, n);
                        ck.d.emplace_back(uk, 1.0);
                        for (int i : users[uk].stronger) ck.d.emplace_back(i, -1.0);
                        ck.sign = -1;
                        b.comps = {cj, ck};
                        b.varsigma = vs;
                        b.y_const = ifm_sq(j, n);
                        b.c_x = std::sqrt(2.0 * M.xi);
                        b.c_y = M.xi;
                        c.bern = b;
                    }
                }
                M.cons.push_back(std::move(c));
            }
        }
    }

    // MUE interference cap per subcarrier
    for (int n = 0; n < ch.N; ++n) {
        RobustConstraint c{ConstraintKind::Mue, "mue:" + std::to_string(n), {}, {}, -1};
        CMat G = outer(ch.hMF(n));
        double cap = sc.eps_M;
        if (mode == RobustMode::WorstCase) {
            G.diagonal().array() += inf.eps_MF[n];
        } else if (mode == RobustMode::Bernstein && !unc.C_e_MF.empty() && !detail::is_zero(unc.C_e_MF[n])) {
            G += unc.C_e_MF[n];
            cap = sc.eps_M / std::log(1.0 / sc.alpha);
        }
        bool any = false;
        for (int u = 0; u < U; ++u)
            if (users[u].n == n) {
                c.lin.add(u, -restrict(G, users[u].nodes));
                any = true;
            }
        if (!any) continue;
        c.lin.constant = cap;
        M.cons.push_back(std::move(c));
    }

    // per-FBS power budget
    for (int f = 0; f < sc.F; ++f) {
        RobustConstraint c{ConstraintKind::Power, "power:" + std::to_string(f), {}, {}, -1};
        bool any = false;
        for (int u = 0; u < U; ++u) {
            const auto& nodes = users[u].nodes;
            CMat S = CMat::Zero(nodes.size(), nodes.size());
            for (std::size_t t = 0; t < nodes.size(); ++t)
                if (sc.fbs_of(nodes[t]) == f) S(t, t) = -1.0;
            if (S.cwiseAbs().sum() > 0) {
                c.lin.add(u, S);
                any = true;
            }
        }
        if (!any) continue;
        c.lin.constant = sc.P_max;
        M.cons.push_back(std::move(c));
    }
    return M;
}

// D = sum_u a_u X_u embedded into A x A.
inline CMat bernstein_matrix(const BernsteinPart::Component& c, const Schedule& s, const std::vector<CMat>& X) {
    CMat D = CMat::Zero(s.A, s.A);
    for (auto& [u, a] : c.d) D += a * embed(X[u], s.users[u].nodes, s.A);
    return D;
}

inline double bernstein_norm(const BernsteinPart& b, const Schedule& s, const std::vector<CMat>& X) {
    double q = b.varsigma;
    for (auto& c : b.comps) {
        const CMat D = bernstein_matrix(c, s, X);
        q += (c.c_sqrt * D * c.c_sqrt).squaredNorm() + 2.0 * (c.c_sqrt * D * c.h).squaredNorm();
    }
    return std::sqrt(q);
}

inline double bernstein_y(const BernsteinPart& b, const Schedule& s, const std::vector<CMat>& X, BernsteinSlack slack) {
    double y = b.y_const;
    if (slack == BernsteinSlack::Exact)
        for (auto& c : b.comps) {
            const CMat D = bernstein_matrix(c, s, X);
            y = std::max(y, lambda_max(-static_cast<double>(c.sign) * (c.c_sqrt * D * c.c_sqrt)));
        }
    return std::max(y, 0.0);
}

// Exact value of a constraint (>= 0 means satisfied), slacks at their optimal values.
inline double margin(const RobustModel& M, const RobustConstraint& c, const std::vector<CMat>& X) {
    double v = c.lin.eval(X);
    if (c.bern) v -= c.bern->c_x * bernstein_norm(*c.bern, M.sched, X) + c.bern->c_y * bernstein_y(*c.bern, M.sched, X, M.slack);
    return v;
}

// Scale of a constraint's terms, used for relative feasibility tolerances.
inline double margin_scale(const RobustConstraint& c, const std::vector<CMat>& X) {
    double s = std::abs(c.lin.constant);
    for (auto& t : c.lin.terms) s += std::abs(trace_product(t.second, X[t.first]));
    return s;
}

struct FeasibilityReport {
    bool feasible = true;
    double worst_margin = 0.0;  // relative
    int worst_index = -1;
    std::vector<double> margins;
};

inline FeasibilityReport check_feasibility(const RobustModel& M, const std::vector<CMat>& X, double rel_tol = 1e-12) {
    FeasibilityReport r;
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M.cons.size(); ++i) {
        const double m = margin(M, M.cons[i], X);
        const double rel = m / (1.0 + margin_scale(M.cons[i], X));
        r.margins.push_back(m);
        if (rel < r.worst_margin) {
            r.worst_margin = rel;
            r.worst_index = static_cast<int>(i);
        }
        if (rel < -rel_tol) r.feasible = false;
    }
    for (int u = 0; u < M.num_users(); ++u) {
        const double lmin = lambda_min(X[u]);
        if (lmin < -rel_tol * (1.0 + X[u].trace().real())) r.feasible = false;
    }
    if (M.cons.empty()) r.worst_margin = 0.0;
    return r;
}

// Mode-specific rate bound summed over scheduled users: sum log2(f) - log2(g).
inline double model_objective(const RobustModel& M, const std::vector<CMat>& X) {
    double s = 0.0;
    for (int u = 0; u < M.num_users(); ++u) {
        const double f = M.f_form[u].eval(X), g = M.g_form[u].eval(X);
        s += std::log2(std::max(f, 1e-300)) - std::log2(g);
    }
    return s;
}

// Gradient of g_u = log2(g_form_u) with respect to each block X_i (zero for i = u and non-interferers).
inline std::vector<std::vector<CMat>> dc_gradient(const RobustModel& M, const std::vector<CMat>& X) {
    const int U = M.num_users();
    std::vector<std::vector<CMat>> grad(U);
    for (int u = 0; u < U; ++u) {
        grad[u].resize(U);
        for (int i = 0; i < U; ++i) grad[u][i] = CMat::Zero(M.block_dim(i), M.block_dim(i));
        const double g = M.g_form[u].eval(X);
        for (auto& t : M.g_form[u].terms) grad[u][t.first] = t.second / (ln2() * g);
    }
    return grad;
}

// Conversions between per-(k, n) full matrices and per-scheduled-user blocks.
inline std::vector<CMat> to_blocks(const Schedule& s, const std::vector<CMat>& W_full) {
    std::vector<CMat> X;
    for (auto& u : s.users) X.push_back(restrict(W_full[u.k * s.N + u.n], u.nodes));
    return X;
}

inline std::vector<CMat> to_full(const Schedule& s, const std::vector<CMat>& X) {
    std::vector<CMat> W(s.K * s.N, CMat::Zero(s.A, s.A));
    for (std::size_t u = 0; u < s.users.size(); ++u)
        W[s.users[u].k * s.N + s.users[u].n] = embed(X[u], s.users[u].nodes, s.A);
    return W;
}

}  // namespace robnoma
