#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "assignment.hpp"
#include "channels.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "solution.hpp"

namespace robnoma {

struct WilsonInterval {
    double lo = 0.0, hi = 1.0;
};

inline WilsonInterval wilson_interval(long violations, long trials, double z = 1.959963984540054) {
    require_parameter(trials > 0 && violations >= 0 && violations <= trials, "bad Wilson counts");
    const double n = static_cast<double>(trials);
    const double p = violations / n;
    const double z2 = z * z;
    const double den = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Empirical violation frequency of one probabilistic constraint.
struct OutageEstimate {
    std::string label;
    int k = -1, n = -1, j = -1;
    long trials = 0, violations = 0;
    double p = 0.0;
    WilsonInterval ci;
    double nominal_margin = 0.0;                                   // relative margin at the estimates
    double surrogate = std::numeric_limits<double>::quiet_NaN();   // exponential-tail prediction, MUE only
};

struct OutageReport {
    long trials = 0;
    std::vector<OutageEstimate> rate;
    std::vector<OutageEstimate> sic_joint;        // both users driven by one shared standard draw
    std::vector<OutageEstimate> sic_independent;  // independent draws per user
    std::vector<OutageEstimate> interference;     // per subcarrier

    static double worst_upper(const std::vector<OutageEstimate>& v) {
        double m = 0.0;
        for (auto& e : v) m = std::max(m, e.ci.hi);
        return m;
    }
    static double worst_p(const std::vector<OutageEstimate>& v) {
        double m = 0.0;
        for (auto& e : v) m = std::max(m, e.p);
        return m;
    }
};

struct McOptions {
    long trials = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
    double z = 1.959963984540054;
};

// Per-(k, n) transmit covariances: outer products of recovered vectors when present, else W.
inline std::vector<CMat> transmit_covariances(const BeamformingSolution& sol) {
    bool any = false;
    for (auto& v : sol.w) any = any || (v.size() > 0 && v.squaredNorm() > 0.0);
    if (!any) return sol.W;
    std::vector<CMat> Q;
    Q.reserve(sol.w.size());
    for (auto& v : sol.w) Q.push_back(v.size() > 0 ? outer(v) : CMat::Zero(sol.A, sol.A));
    return Q;
}

namespace detail {

// Served streams, stronger sets and covariances, evaluated from raw channels only.
struct Audience {
    struct Stream {
        int k, n;
        CMat Q;                 // masked transmit covariance
        std::vector<int> above; // stream indices decoded as interference
    };
    std::vector<Stream> streams;
    std::vector<std::vector<int>> on_sub;  // per n
    std::vector<std::pair<int, int>> sic;  // (stream j, stream k), j stronger than k
};

inline Audience audience(const AssignmentState& asg, const BeamformingSolution& sol, const ChannelSet& ch) {
    require_structure(asg.K() == ch.K && asg.A() == ch.A && asg.N() == ch.N, "assignment/channel mismatch");
    require_structure(sol.K == ch.K && sol.N == ch.N && sol.A == ch.A, "solution/channel mismatch");
    const std::vector<CMat> Q = transmit_covariances(sol);
    Audience a;
    a.on_sub.assign(ch.N, {});
    std::vector<int> index(ch.K * ch.N, -1);
    for (int n = 0; n < ch.N; ++n)
        for (int k = 0; k < ch.K; ++k) {
            if (!asg.nu(k, n)) continue;
            index[k * ch.N + n] = static_cast<int>(a.streams.size());
            a.streams.push_back({k, n, masked(Q[k * ch.N + n], asg, k, n), {}});
            a.on_sub[n].push_back(index[k * ch.N + n]);
        }
    for (auto& s : a.streams)
        for (int i : a.on_sub[s.n])
            if (stronger(ch, a.streams[i].k, s.k, s.n)) s.above.push_back(i);
    for (std::size_t u = 0; u < a.streams.size(); ++u)
        for (int j : a.streams[u].above) a.sic.emplace_back(j, static_cast<int>(u));
    return a;
}

inline double qf(const CVec& h, const CMat& Q) { return (h.adjoint() * Q * h)(0, 0).real(); }

// Relative margins: positive means satisfied.
inline double rate_margin(const Audience& a, int u, const CVec& h, const CVec& hFM, const CVec& m, double gamma,
                          double sigma2) {
    const auto& s = a.streams[u];
    const double sig = qf(h, s.Q);
    double intf = std::norm(hFM.dot(m)) + sigma2;
    for (int i : s.above) intf += qf(h, a.streams[i].Q);
    const double d = sig - gamma * intf;
    return d / (sig + gamma * intf);
}

// Stream k's signal seen at j minus k's own margin, in desired-minus-interference form.
inline double sic_margin(const Audience& a, int uj, int uk, const CVec& hj, const CVec& hFMj, const CVec& hk,
                         const CVec& hFMk, const CVec& m) {
    const auto& sk = a.streams[uk];
    const auto& sj = a.streams[uj];
    const double at_j = qf(hj, sk.Q), own = qf(hk, sk.Q);
    double ij = std::norm(hFMj.dot(m)), ik = std::norm(hFMk.dot(m));
    for (int i : sj.above) ij += qf(hj, a.streams[i].Q);
    for (int i : sk.above) ik += qf(hk, a.streams[i].Q);
    const double d = (at_j - ij) - (own - ik);
    const double scale = std::abs(at_j) + ij + std::abs(own) + ik;
    return scale > 0 ? d / scale : 0.0;
}

inline double mue_load(const Audience& a, int n, const CVec& hMF) {
    double s = 0.0;
    for (int u : a.on_sub[n]) s += qf(hMF, a.streams[u].Q);
    return s;
}

inline double mue_margin(double load, double cap) { return (cap - load) / (cap + load); }

template <class F>
void parallel_chunks(long total, int threads, F&& body) {
    threads = std::max(1, threads);
    if (threads == 1 || total < 2) {
        body(0, 0L, total);
        return;
    }
    std::vector<std::thread> pool;
    const long chunk = (total + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const long lo = t * chunk, hi = std::min(total, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, t, lo, hi] { body(t, lo, hi); });
    }
    for (auto& th : pool) th.join();
}

inline CMat root_or_zero(const std::vector<CMat>& v, std::size_t i, int dim) {
    if (i < v.size() && v[i].rows() == dim) return covariance_sqrt(v[i]);
    return CMat::Zero(dim, dim);
}

struct Roots {
    std::vector<CMat> F, FM;  // per stream
    std::vector<CMat> MF;     // per n
};

inline Roots error_roots(const Audience& a, const ChannelSet& ch) {
    const auto& unc = ch.uncertainty;
    Roots r;
    for (auto& s : a.streams) {
        r.F.push_back(root_or_zero(unc.C_e_F, s.k * ch.N + s.n, ch.A));
        r.FM.push_back(root_or_zero(unc.C_e_FM, s.k * ch.N + s.n, ch.T_m));
    }
    for (int n = 0; n < ch.N; ++n) r.MF.push_back(root_or_zero(unc.C_e_MF, n, ch.A));
    return r;
}

inline OutageEstimate make_estimate(std::string label, int k, int n, int j, long trials, long viol, double z) {
    OutageEstimate e;
    e.label = std::move(label);
    e.k = k;
    e.n = n;
    e.j = j;
    e.trials = trials;
    e.violations = viol;
    e.p = static_cast<double>(viol) / trials;
    e.ci = wilson_interval(viol, trials, z);
    return e;
}

inline std::string pair_label(int k, int n) { return std::to_string(k) + ":" + std::to_string(n); }

}  // namespace detail

// Rate and SIC outage under Gaussian channel errors. Each trial draws from its own counter-derived stream.
inline OutageReport mc_outage_rate(const AssignmentState& asg, const BeamformingSolution& sol, const ChannelSet& ch,
                                   const NetworkScenario& sc, const McOptions& opt = {}) {
    require_parameter(opt.trials >= 100, "at least 100 trials are required");
    const detail::Audience a = detail::audience(asg, sol, ch);
    const detail::Roots roots = detail::error_roots(a, ch);
    const int S = static_cast<int>(a.streams.size()), P = static_cast<int>(a.sic.size());
    const double gamma = sc.gamma();
    const int T = std::max(1, opt.threads);
    std::vector<std::vector<long>> rv(T, std::vector<long>(S, 0)), jv(T, std::vector<long>(P, 0)),
        iv(T, std::vector<long>(P, 0));
    detail::parallel_chunks(opt.trials, T, [&](int t, long lo, long hi) {
        std::vector<CVec> hF(S), hFM(S), gF(S), gFM(S);
        for (long trial = lo; trial < hi; ++trial) {
            Rng rng(derive_seed(opt.seed, {0x7261746555ULL, static_cast<std::uint64_t>(trial)}));
            const CVec zF = rng.complex_normal_vector(ch.A), zFM = rng.complex_normal_vector(ch.T_m);
            for (int u = 0; u < S; ++u) {
                const auto& s = a.streams[u];
                hF[u] = ch.hF(s.k, s.n) + roots.F[u] * rng.complex_normal_vector(ch.A);
                hFM[u] = ch.hFM(s.k, s.n) + roots.FM[u] * rng.complex_normal_vector(ch.T_m);
                gF[u] = ch.hF(s.k, s.n) + roots.F[u] * zF;
                gFM[u] = ch.hFM(s.k, s.n) + roots.FM[u] * zFM;
            }
            for (int u = 0; u < S; ++u)
                if (detail::rate_margin(a, u, hF[u], hFM[u], ch.m[a.streams[u].n], gamma, sc.sigma2) < 0) ++rv[t][u];
            for (int p = 0; p < P; ++p) {
                const auto [j, k] = a.sic[p];
                const CVec& m = ch.m[a.streams[k].n];
                if (detail::sic_margin(a, j, k, hF[j], hFM[j], hF[k], hFM[k], m) < 0) ++iv[t][p];
                if (detail::sic_margin(a, j, k, gF[j], gFM[j], gF[k], gFM[k], m) < 0) ++jv[t][p];
            }
        }
    });
    OutageReport rep;
    rep.trials = opt.trials;
    for (int u = 0; u < S; ++u) {
        long v = 0;
        for (int t = 0; t < T; ++t) v += rv[t][u];
        const auto& s = a.streams[u];
        auto e = detail::make_estimate("rate:" + detail::pair_label(s.k, s.n), s.k, s.n, -1, opt.trials, v, opt.z);
        e.nominal_margin =
            detail::rate_margin(a, u, ch.hF(s.k, s.n), ch.hFM(s.k, s.n), ch.m[s.n], gamma, sc.sigma2);
        rep.rate.push_back(e);
    }
    for (int p = 0; p < P; ++p) {
        long vj = 0, vi = 0;
        for (int t = 0; t < T; ++t) {
            vj += jv[t][p];
            vi += iv[t][p];
        }
        const auto [j, k] = a.sic[p];
        const auto& sj = a.streams[j];
        const auto& sk = a.streams[k];
        const std::string label = "sic:" + std::to_string(sj.k) + ">" + detail::pair_label(sk.k, sk.n);
        const double nm = detail::sic_margin(a, j, k, ch.hF(sj.k, sj.n), ch.hFM(sj.k, sj.n), ch.hF(sk.k, sk.n),
                                             ch.hFM(sk.k, sk.n), ch.m[sk.n]);
        auto ej = detail::make_estimate(label, sk.k, sk.n, sj.k, opt.trials, vj, opt.z);
        auto ei = detail::make_estimate(label, sk.k, sk.n, sj.k, opt.trials, vi, opt.z);
        ej.nominal_margin = ei.nominal_margin = nm;
        rep.sic_joint.push_back(ej);
        rep.sic_independent.push_back(ei);
    }
    return rep;
}

// Per-subcarrier MUE interference outage against eps_M, with the exponential-tail prediction.
inline OutageReport mc_outage_interference(const AssignmentState& asg, const BeamformingSolution& sol,
                                           const ChannelSet& ch, const NetworkScenario& sc,
                                           const McOptions& opt = {}) {
    require_parameter(opt.trials >= 100, "at least 100 trials are required");
    const detail::Audience a = detail::audience(asg, sol, ch);
    const detail::Roots roots = detail::error_roots(a, ch);
    const int T = std::max(1, opt.threads);
    std::vector<std::vector<long>> viol(T, std::vector<long>(ch.N, 0));
    detail::parallel_chunks(opt.trials, T, [&](int t, long lo, long hi) {
        for (long trial = lo; trial < hi; ++trial) {
            Rng rng(derive_seed(opt.seed, {0x6d7565ULL, static_cast<std::uint64_t>(trial)}));
            for (int n = 0; n < ch.N; ++n) {
                const CVec h = ch.hMF(n) + roots.MF[n] * rng.complex_normal_vector(ch.A);
                if (!a.on_sub[n].empty() && detail::mue_load(a, n, h) > sc.eps_M) ++viol[t][n];
            }
        }
    });
    OutageReport rep;
    rep.trials = opt.trials;
    for (int n = 0; n < ch.N; ++n) {
        long v = 0;
        for (int t = 0; t < T; ++t) v += viol[t][n];
        auto e = detail::make_estimate("mue:" + std::to_string(n), -1, n, -1, opt.trials, v, opt.z);
        const double load = detail::mue_load(a, n, ch.hMF(n));
        e.nominal_margin = detail::mue_margin(load, sc.eps_M);
        double mean = load;
        if (static_cast<std::size_t>(n) < ch.uncertainty.C_e_MF.size())
            for (int u : a.on_sub[n]) mean += trace_product(ch.uncertainty.C_e_MF[n], a.streams[u].Q);
        e.surrogate = mean > 0 ? std::exp(-sc.eps_M / mean) : 0.0;
        rep.interference.push_back(e);
    }
    return rep;
}

struct ConstraintMargin {
    std::string label;
    double nominal = 0.0;
    double worst = 0.0;
};

struct StressReport {
    double min_margin = std::numeric_limits<double>::infinity();
    std::string worst_label;
    long evaluations = 0;
    std::vector<ConstraintMargin> margins;
};

struct StressOptions {
    long samples = 10000;
    std::uint64_t seed = 1;
    double radius_scale = 1.0;
    int threads = 1;
};

namespace detail {

// Boundary perturbations steering h^H v for every eigenvector v of P, plus the radial ones.
inline std::vector<CVec> adversarial_errors(const CVec& h, const CMat& P, double r) {
    std::vector<CVec> out{CVec::Zero(h.size())};
    if (r <= 0) return out;
    const double hn = h.norm();
    if (hn > 0) {
        out.push_back(r * h / hn);
        out.push_back(-r * h / hn);
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(P));
    for (int i = 0; i < es.eigenvectors().cols(); ++i) {
        const CVec v = es.eigenvectors().col(i);
        const cplx c = h.dot(v);
        const cplx ph = std::abs(c) > 0 ? c / std::abs(c) : cplx(1.0, 0.0);
        // (h + e)^H v = h^H v + r conj(phase): choose conj(phase) = +-ph
        out.push_back(r * std::conj(ph) * v);
        out.push_back(-r * std::conj(ph) * v);
    }
    return out;
}

// Perturbations of h_FM raising or lowering |h_FM^H m|.
inline std::vector<CVec> mbs_errors(const CVec& h, const CVec& m, double r) {
    std::vector<CVec> out{CVec::Zero(h.size())};
    const double mn = m.norm();
    if (r <= 0 || mn == 0) return out;
    const CVec v = m / mn;
    const cplx c = h.dot(v);
    const cplx ph = std::abs(c) > 0 ? c / std::abs(c) : cplx(1.0, 0.0);
    out.push_back(r * std::conj(ph) * v);
    out.push_back(-r * std::conj(ph) * v);
    return out;
}

}  // namespace detail

// Minimum relative margin of rate, SIC and MUE constraints over the uncertainty balls.
inline StressReport worstcase_stress(const AssignmentState& asg, const BeamformingSolution& sol, const ChannelSet& ch,
                                     const NetworkScenario& sc, const StressOptions& opt = {}) {
    const detail::Audience a = detail::audience(asg, sol, ch);
    const auto& unc = ch.uncertainty;
    const int S = static_cast<int>(a.streams.size()), P = static_cast<int>(a.sic.size());
    const double gamma = sc.gamma();
    std::vector<double> rz(S), rk(S), re(ch.N);
    for (int u = 0; u < S; ++u) {
        rz[u] = opt.radius_scale * unc.zeta_at(a.streams[u].k, a.streams[u].n);
        rk[u] = opt.radius_scale * unc.kappa_at(a.streams[u].k, a.streams[u].n);
    }
    for (int n = 0; n < ch.N; ++n) re[n] = opt.radius_scale * unc.eta_at(n);
    auto hF = [&](int u) -> const CVec& { return ch.hF(a.streams[u].k, a.streams[u].n); };
    auto hFM = [&](int u) -> const CVec& { return ch.hFM(a.streams[u].k, a.streams[u].n); };

    StressReport rep;
    std::vector<ConstraintMargin> rate(S), sic(P), mue;
    std::vector<int> mue_n;
    for (int u = 0; u < S; ++u) {
        const auto& s = a.streams[u];
        rate[u].label = "rate:" + detail::pair_label(s.k, s.n);
        rate[u].nominal = rate[u].worst = detail::rate_margin(a, u, hF(u), hFM(u), ch.m[s.n], gamma, sc.sigma2);
    }
    for (int p = 0; p < P; ++p) {
        const auto [j, k] = a.sic[p];
        const auto& sk = a.streams[k];
        sic[p].label = "sic:" + std::to_string(a.streams[j].k) + ">" + detail::pair_label(sk.k, sk.n);
        sic[p].nominal = sic[p].worst = detail::sic_margin(a, j, k, hF(j), hFM(j), hF(k), hFM(k), ch.m[sk.n]);
    }
    for (int n = 0; n < ch.N; ++n) {
        if (a.on_sub[n].empty()) continue;
        const double v = detail::mue_margin(detail::mue_load(a, n, ch.hMF(n)), sc.eps_M);
        mue.push_back({"mue:" + std::to_string(n), v, v});
        mue_n.push_back(n);
    }

    // analytic directions, one constraint at a time
    for (int u = 0; u < S; ++u) {
        const auto& s = a.streams[u];
        CMat Pm = s.Q;
        for (int i : s.above) Pm -= gamma * a.streams[i].Q;
        for (const CVec& e : detail::adversarial_errors(hF(u), Pm, rz[u]))
            for (const CVec& f : detail::mbs_errors(hFM(u), ch.m[s.n], rk[u])) {
                rate[u].worst = std::min(rate[u].worst,
                                         detail::rate_margin(a, u, hF(u) + e, hFM(u) + f, ch.m[s.n], gamma, sc.sigma2));
                ++rep.evaluations;
            }
    }
    for (int p = 0; p < P; ++p) {
        const auto [j, k] = a.sic[p];
        const CVec& m = ch.m[a.streams[k].n];
        CMat Pj = a.streams[k].Q, Pk = a.streams[k].Q;
        for (int i : a.streams[j].above) Pj -= a.streams[i].Q;
        for (int i : a.streams[k].above) Pk -= a.streams[i].Q;
        const auto ej = detail::adversarial_errors(hF(j), Pj, rz[j]);
        const auto ek = detail::adversarial_errors(hF(k), Pk, rz[k]);
        const auto fj = detail::mbs_errors(hFM(j), m, rk[j]);
        const auto fk = detail::mbs_errors(hFM(k), m, rk[k]);
        for (auto& x : ej)
            for (auto& y : ek)
                for (auto& fx : fj)
                    for (auto& fy : fk) {
                        sic[p].worst = std::min(
                            sic[p].worst, detail::sic_margin(a, j, k, hF(j) + x, hFM(j) + fx, hF(k) + y, hFM(k) + fy, m));
                        ++rep.evaluations;
                    }
    }
    for (std::size_t i = 0; i < mue.size(); ++i) {
        const int n = mue_n[i];
        CMat Sn = CMat::Zero(ch.A, ch.A);
        for (int u : a.on_sub[n]) Sn += a.streams[u].Q;
        for (const CVec& e : detail::adversarial_errors(ch.hMF(n), Sn, re[n])) {
            mue[i].worst = std::min(mue[i].worst, detail::mue_margin(detail::mue_load(a, n, ch.hMF(n) + e), sc.eps_M));
            ++rep.evaluations;
        }
    }

    // random boundary samples, every link perturbed at once
    const int T = std::max(1, opt.threads);
    std::vector<std::vector<double>> wr(T, std::vector<double>(S, 1.0)), ws(T, std::vector<double>(P, 1.0)),
        wm(T, std::vector<double>(mue.size(), 1.0));
    detail::parallel_chunks(opt.samples, T, [&](int t, long lo, long hi) {
        std::vector<CVec> gF(S), gFM(S), gMF(ch.N);
        for (long smp = lo; smp < hi; ++smp) {
            Rng rng(derive_seed(opt.seed, {0x7374726573ULL, static_cast<std::uint64_t>(smp)}));
            for (int u = 0; u < S; ++u) {
                gF[u] = hF(u) + sample_error_ball(ch.A, rz[u], rng, BallSampling::Boundary);
                gFM[u] = hFM(u) + sample_error_ball(ch.T_m, rk[u], rng, BallSampling::Boundary);
            }
            for (int n = 0; n < ch.N; ++n) gMF[n] = ch.hMF(n) + sample_error_ball(ch.A, re[n], rng, BallSampling::Boundary);
            for (int u = 0; u < S; ++u)
                wr[t][u] = std::min(wr[t][u],
                                    detail::rate_margin(a, u, gF[u], gFM[u], ch.m[a.streams[u].n], gamma, sc.sigma2));
            for (int p = 0; p < P; ++p) {
                const auto [j, k] = a.sic[p];
                ws[t][p] = std::min(ws[t][p],
                                    detail::sic_margin(a, j, k, gF[j], gFM[j], gF[k], gFM[k], ch.m[a.streams[k].n]));
            }
            for (std::size_t i = 0; i < mue.size(); ++i)
                wm[t][i] = std::min(wm[t][i],
                                    detail::mue_margin(detail::mue_load(a, mue_n[i], gMF[mue_n[i]]), sc.eps_M));
        }
    });
    rep.evaluations += opt.samples * (S + P + static_cast<long>(mue.size()));
    for (int t = 0; t < T; ++t) {
        for (int u = 0; u < S; ++u) rate[u].worst = std::min(rate[u].worst, wr[t][u]);
        for (int p = 0; p < P; ++p) sic[p].worst = std::min(sic[p].worst, ws[t][p]);
        for (std::size_t i = 0; i < mue.size(); ++i) mue[i].worst = std::min(mue[i].worst, wm[t][i]);
    }
    for (auto* group : {&rate, &sic, &mue})
        for (auto& c : *group) {
            if (c.worst < rep.min_margin) {
                rep.min_margin = c.worst;
                rep.worst_label = c.label;
            }
            rep.margins.push_back(c);
        }
    return rep;
}

struct Violation {
    std::string kind;  // node_quota, subcarrier_count, node_load, subcarrier_load, binary, power, psd, rank, support, sic_order
    int index = -1;
    std::string message;
};

struct AuditOptions {
    double power_rel_tol = 1e-6;
    double psd_tol = 1e-8;     // relative to the largest eigenvalue
    double rank_tol = 1e-3;    // lambda_2 / lambda_1 of transmit covariances
    double support_tol = 1e-9;
};

// Structural audit of an output triple: quotas, per-FBS power, PSD and rank, support, decoding order.
inline std::vector<Violation> audit_solution(const AssignmentState& asg, const BeamformingSolution& sol,
                                             const NetworkScenario& sc, const ChannelSet& ch,
                                             const AuditOptions& opt = {}) {
    std::vector<Violation> out;
    auto flag = [&](std::string kind, int idx, std::string msg) { out.push_back({std::move(kind), idx, std::move(msg)}); };
    const int K = sc.K, A = sc.A(), N = sc.N;
    if (asg.K() != K || asg.A() != A || asg.N() != N || sol.K != K || sol.N != N || sol.A != A) {
        flag("dimension", -1, "dimensions disagree with the scenario");
        return out;
    }
    bool binary = true;
    for (Eigen::Index i = 0; i < asg.chi.size(); ++i) binary = binary && (asg.chi.data()[i] == 0 || asg.chi.data()[i] == 1);
    for (Eigen::Index i = 0; i < asg.nu.size(); ++i) binary = binary && (asg.nu.data()[i] == 0 || asg.nu.data()[i] == 1);
    if (!binary) flag("binary", -1, "chi or nu has a non-binary entry");
    for (int k = 0; k < K; ++k) {
        const int nodes = asg.chi.row(k).sum(), subs = asg.nu.row(k).sum();
        if (nodes > sc.F_max)
            flag("node_quota", k, "user " + std::to_string(k) + " holds " + std::to_string(nodes) + " nodes");
        if (subs > 1) flag("subcarrier_count", k, "user " + std::to_string(k) + " holds " + std::to_string(subs) + " subcarriers");
    }
    for (int a = 0; a < A; ++a) {
        const int load = asg.chi.col(a).sum();
        if (load > sc.N_hat_a) flag("node_load", a, "node " + std::to_string(a) + " serves " + std::to_string(load) + " users");
    }
    for (int n = 0; n < N; ++n) {
        const int load = asg.nu.col(n).sum();
        if (load > sc.q_max)
            flag("subcarrier_load", n, "subcarrier " + std::to_string(n) + " carries " + std::to_string(load) + " users");
    }

    const std::vector<CMat> Q = transmit_covariances(sol);
    std::vector<double> power(sc.F, 0.0);
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
            const int i = k * N + n;
            const CMat& q = Q[i];
            const double top = q.size() ? q.cwiseAbs().maxCoeff() : 0.0;
            if (top == 0.0) continue;
            double off = 0.0;
            for (int a = 0; a < A; ++a)
                for (int b = 0; b < A; ++b)
                    if (!(asg.rho(k, n, a) && asg.rho(k, n, b))) off = std::max(off, std::abs(q(a, b)));
            if (off > opt.support_tol * std::max(1.0, top))
                flag("support", i, "stream " + detail::pair_label(k, n) + " radiates outside its cooperative set");
            Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(q));
            const auto& ev = es.eigenvalues();
            const double l1 = ev(A - 1);
            if (ev(0) < -opt.psd_tol * std::max(1.0, std::abs(l1)))
                flag("psd", i, "stream " + detail::pair_label(k, n) + " covariance is not positive semidefinite");
            if (A > 1 && l1 > 0 && ev(A - 2) / l1 > opt.rank_tol)
                flag("rank", i, "stream " + detail::pair_label(k, n) + " is not rank one");
            for (int a = 0; a < A; ++a) power[sc.fbs_of(a)] += q(a, a).real();
        }
    for (int f = 0; f < sc.F; ++f)
        if (power[f] > sc.P_max * (1.0 + opt.power_rel_tol))
            flag("power", f, "FBS " + std::to_string(f) + " radiates " + std::to_string(power[f]) + " W");

    // decoding order: co-channel served users must have distinct estimated gains
    for (int n = 0; n < N; ++n) {
        std::vector<int> users;
        for (int k = 0; k < K; ++k)
            if (asg.nu(k, n) && Q[k * N + n].cwiseAbs().maxCoeff() > 0) users.push_back(k);
        bool tie = false;
        for (std::size_t x = 0; x < users.size(); ++x)
            for (std::size_t y = x + 1; y < users.size(); ++y)
                tie = tie || ch.hF(users[x], n).squaredNorm() == ch.hF(users[y], n).squaredNorm();
        if (tie) flag("sic_order", n, "subcarrier " + std::to_string(n) + " has tied channel gains");
    }
    return out;
}

}  // namespace robnoma
