#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "beamforming/builder.hpp"
#include "beamforming/model.hpp"
#include "beamforming/sca.hpp"
#include "channels.hpp"
#include "conic/randomization.hpp"
#include "matching.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "solution.hpp"

namespace robnoma {

// Beamforming for a fixed assignment, with users the start-point search cannot serve removed.
struct BeamformingOutcome {
    AssignmentState asg;
    RobustModel model;
    ScaResult sca;
    BeamformingSolution sol;
    bool feasible = false;
    double sum_rate = -std::numeric_limits<double>::infinity();
    double nominal_sum_rate = 0.0;
    std::vector<int> dropped;
    long solver_iterations = 0;
    double solver_work = 0.0;
    std::string diagnostic;
};

namespace detail {

inline double wall_ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Principal vectors of blocks that are numerically rank one, or empty.
inline std::vector<CVec> rank_one_vectors(const std::vector<CMat>& X) {
    std::vector<CVec> w;
    for (auto& x : X) {
        double ratio = 0.0;
        CVec v = conic::principal_component(x, &ratio);
        if (ratio > 1e-9) return {};
        w.push_back(v);
    }
    return w;
}

inline double nominal_rate(const BeamformingSolution& sol, const AssignmentState& asg, const ChannelSet& ch, double s2) {
    if (asg.nu.sum() == 0) return 0.0;
    return sum_rate(outer_products(sol.w), asg, ch, s2);
}

}  // namespace detail

inline BeamformingOutcome optimize_beamformers(RobustMode mode, const ChannelSet& ch, AssignmentState asg,
                                               const NetworkScenario& sc, const ModelOptions& mopt = {},
                                               const ScaOptions& sopt = {}) {
    BeamformingOutcome out;
    for (int attempt = 0; attempt <= sc.K; ++attempt) {
        out.model = build_model(mode, ch, asg, sc, mopt);
        if (out.model.num_users() == 0) {
            out.asg = asg;
            out.sol = BeamformingSolution(ch.K, ch.N, ch.A);
            out.feasible = true;
            out.sum_rate = 0.0;
            out.sca.converged = true;
            out.sca.recovered_feasible = true;
            return out;
        }
        InitResult init = init_beamformers(out.model, sc, sopt);
        out.solver_iterations += init.solver_iterations;
        if (!init.feasible) {
            const int u = init.infeasible_users.front();
            const int k = out.model.sched.users[u].k;
            asg.nu.row(k).setZero();
            out.dropped.push_back(k);
            continue;
        }
        const std::vector<CVec> fallback = detail::rank_one_vectors(init.X);
        out.sca = sca_iterate(out.model, init.X, sc, sopt, fallback.empty() ? nullptr : &fallback);
        out.solver_iterations += out.sca.solver_iterations;
        out.solver_work += out.sca.solver_work;
        out.asg = asg;
        out.sol = to_solution(out.model, out.sca);
        out.feasible = out.sca.recovered_feasible;
        if (out.feasible) {
            out.sum_rate = out.sca.recovered_objective;
            out.nominal_sum_rate = detail::nominal_rate(out.sol, asg, ch, sc.sigma2);
        } else {
            out.diagnostic = "rank-one recovery found no feasible candidate";
        }
        return out;
    }
    out.asg = asg;
    out.diagnostic = "no user could be served";
    return out;
}

struct OrchestratorOptions {
    int max_rounds = 30;
    double eps_c = -1.0;  // negative: take the scenario value
    ScaOptions sca;
    ModelOptions model;
    MatchingOptions matching;
    std::uint64_t seed = 1;
};

struct RoundRecord {
    int round = 0;
    double sum_rate = -std::numeric_limits<double>::infinity();
    double best_sum_rate = -std::numeric_limits<double>::infinity();
    double nominal_sum_rate = 0.0;
    long cs_proposals = 0, ca_proposals = 0;
    long cs_moves = 0, ca_moves = 0;
    int sca_outer = 0;
    long solver_iterations = 0;
    double solver_work = 0.0;
    int scheduled = 0;
    std::vector<int> dropped;
    bool feasible = false;
    bool reused = false;
    double wall_ms = 0.0;
    std::vector<std::string> trace;  // matching log lines when tracing is on
};

struct RunHistory {
    std::vector<RoundRecord> rounds;
    std::vector<std::string> diagnostics;
    bool converged = false;
};

struct RunResult {
    RobustMode mode = RobustMode::Perfect;
    AssignmentState asg;
    BeamformingSolution sol;
    RobustModel model;
    double sum_rate = -std::numeric_limits<double>::infinity();
    double nominal_sum_rate = 0.0;
    bool feasible = false;
    std::vector<int> dropped;
    RunHistory history;
};

// Each user takes the least loaded subcarrier with room, strongest first among equals.
inline IntMat initial_subcarriers(const NetworkScenario& sc, const ChannelSet& ch) {
    IntMat nu = IntMat::Zero(ch.K, ch.N);
    std::vector<int> load(ch.N, 0);
    for (int k = 0; k < ch.K; ++k) {
        int best = -1;
        for (int n = 0; n < ch.N; ++n)
            if (load[n] < sc.q_max &&
                (best < 0 || load[n] < load[best] ||
                 (load[n] == load[best] && ch.hF(k, n).squaredNorm() > ch.hF(k, best).squaredNorm())))
                best = n;
        if (best >= 0) {
            nu(k, best) = 1;
            ++load[best];
        }
    }
    return nu;
}

// Alternating node association, subcarrier allocation and beamforming rounds. Each round
// starts from the best round so far; the run stops once that best moves by at most eps_c.
inline RunResult alternate(const NetworkScenario& sc, const ChannelSet& ch, RobustMode mode,
                           const OrchestratorOptions& opt = {}) {
    sc.validate();
    ch.validate();
    require_structure(ch.K == sc.K && ch.A == sc.A() && ch.N == sc.N, "channels do not match scenario");
    const double eps_c = opt.eps_c >= 0 ? opt.eps_c : sc.eps_c;
    RunResult best;
    best.mode = mode;
    AssignmentState asg(sc.K, sc.A(), sc.N);
    asg.nu = initial_subcarriers(sc, ch);
    BeamformingSolution sol;
    bool have_sol = false;
    AssignmentState last_input;
    BeamformingOutcome last;
    bool have_last = false;
    double prev_best = 0.0;
    for (int l = 1; l <= opt.max_rounds; ++l) {
        const auto t0 = std::chrono::steady_clock::now();
        RoundRecord rec;
        rec.round = l;
        const ReferenceBeams ref =
            have_sol ? reference_beams(sc, ch, &sol, &asg.chi, &asg.nu) : reference_beams(sc, ch);
        CsGame cs(sc, ch, ref, asg.nu);
        MatchingResult mcs = run_cs_game(cs, opt.matching);
        CaGame ca(sc, ch, ref, mcs.mu);
        MatchingResult mca = eca(ca, opt.matching);
        rec.cs_proposals = mcs.state.proposals;
        rec.ca_proposals = mca.state.proposals;
        rec.cs_moves = mcs.state.moves;
        rec.ca_moves = mca.state.moves;
        rec.trace = mcs.state.trace;
        rec.trace.insert(rec.trace.end(), mca.state.trace.begin(), mca.state.trace.end());
        AssignmentState next(sc.K, sc.A(), sc.N);
        next.chi = mcs.mu;
        next.nu = mca.mu;
        if (have_last && next == last_input) {
            rec.reused = true;
        } else {
            ScaOptions sopt = opt.sca;
            sopt.seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(l)});
            last = optimize_beamformers(mode, ch, next, sc, opt.model, sopt);
            last_input = next;
            have_last = true;
            if (!last.diagnostic.empty())
                best.history.diagnostics.push_back("round " + std::to_string(l) + ": " + last.diagnostic);
        }
        rec.feasible = last.feasible;
        rec.sum_rate = last.sum_rate;
        rec.nominal_sum_rate = last.nominal_sum_rate;
        rec.dropped = last.dropped;
        rec.scheduled = last.model.num_users();
        if (!rec.reused) {
            rec.sca_outer = last.sca.outer_iterations;
            rec.solver_iterations = last.solver_iterations;
            rec.solver_work = last.solver_work;
        }
        if (last.feasible && last.sum_rate > best.sum_rate) {
            best.sum_rate = last.sum_rate;
            best.nominal_sum_rate = last.nominal_sum_rate;
            best.asg = last.asg;
            best.sol = last.sol;
            best.model = last.model;
            best.dropped = last.dropped;
            best.feasible = true;
        }
        rec.best_sum_rate = best.sum_rate;
        // the next round starts from the incumbent
        if (best.feasible) {
            asg = best.asg;
            sol = best.sol;
            have_sol = true;
        } else {
            asg = last.asg;
        }
        rec.wall_ms = detail::wall_ms_since(t0);
        best.history.rounds.push_back(rec);
        // a reused round repeats itself from here on
        const double delta = rec.reused ? 0.0
                             : best.feasible ? std::abs(best.sum_rate - prev_best)
                                             : std::numeric_limits<double>::infinity();
        if (best.feasible) prev_best = best.sum_rate;
        if (delta <= eps_c || (std::isinf(eps_c) && eps_c > 0)) {
            best.history.converged = true;
            break;
        }
    }
    if (!best.feasible) best.history.diagnostics.push_back("no feasible round");
    return best;
}

struct JointOptions {
    int candidate_subcarriers = 0;  // per user, strongest first; 0 means all
    double threshold = 0.5;         // relaxed allocations at or above are kept first
    ScaOptions sca;
    ModelOptions model;
};

struct JointHistory {
    double relaxed_objective = 0.0;
    double rounded_sum_rate = -std::numeric_limits<double>::infinity();
    std::vector<double> relaxed_trace;
    int repairs = 0;        // threshold picks dropped for quota reasons
    bool integral = false;  // relaxation already binary on the chosen entries
    long solver_iterations = 0;
};

struct JointResult {
    AssignmentState asg;
    BeamformingSolution sol;
    double sum_rate = -std::numeric_limits<double>::infinity();
    bool feasible = false;
    std::vector<int> dropped;
    JointHistory history;
};

// Relaxed per-entry shares: rate share of each candidate (k, n) and node power over P_max.
struct RelaxedShares {
    std::vector<std::vector<double>> sub;                 // [k][n]
    std::vector<std::vector<std::vector<double>>> node;   // [k][n][a]
};

// Greedy rounding of relaxed shares under the quotas.
inline AssignmentState round_relaxation(const NetworkScenario& sc, const ChannelSet& ch, const RelaxedShares& s,
                                        double threshold, int* repairs = nullptr, bool* integral = nullptr) {
    const int K = ch.K, N = ch.N, A = ch.A;
    AssignmentState asg(K, A, N);
    struct Entry {
        double v;
        int k, p;
    };
    std::vector<Entry> subs;
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n)
            if (s.sub[k][n] > 0) subs.push_back({s.sub[k][n], k, n});
    std::stable_sort(subs.begin(), subs.end(), [](const Entry& a, const Entry& b) { return a.v > b.v; });
    int rep = 0;
    bool integ = true;
    std::vector<int> load(N, 0);
    for (int pass = 0; pass < 2; ++pass)
        for (auto& e : subs) {
            const bool above = e.v >= threshold;
            if ((pass == 0) != above) continue;
            if (asg.nu.row(e.k).sum() > 0) {
                if (pass == 0) ++rep;
                continue;
            }
            if (load[e.p] >= sc.q_max) {
                if (pass == 0) ++rep;
                continue;
            }
            asg.nu(e.k, e.p) = 1;
            ++load[e.p];
        }
    for (auto& e : subs)
        if (std::abs(e.v - std::round(e.v)) > 1e-6) integ = false;
    std::vector<Entry> nodes;
    for (int k = 0; k < K; ++k) {
        const int n = asg.subcarrier_of(k);
        if (n < 0) continue;
        for (int a = 0; a < A; ++a)
            if (s.node[k][n][a] > 1e-9) nodes.push_back({s.node[k][n][a], k, a});
    }
    std::stable_sort(nodes.begin(), nodes.end(), [](const Entry& a, const Entry& b) { return a.v > b.v; });
    std::vector<int> nload(A, 0);
    for (auto& e : nodes) {
        if (asg.chi.row(e.k).sum() >= sc.F_max || nload[e.p] >= sc.N_hat_a) {
            if (e.v >= threshold) ++rep;
            continue;
        }
        asg.chi(e.k, e.p) = 1;
        ++nload[e.p];
    }
    // users left without a node take their strongest free one
    for (int k = 0; k < K; ++k) {
        const int n = asg.subcarrier_of(k);
        if (n < 0 || asg.chi.row(k).sum() > 0) continue;
        int best = -1;
        for (int a = 0; a < A; ++a)
            if (nload[a] < sc.N_hat_a && (best < 0 || std::norm(ch.hF(k, n)(a)) > std::norm(ch.hF(k, n)(best)))) best = a;
        if (best >= 0) {
            asg.chi(k, best) = 1;
            ++nload[best];
        } else {
            asg.nu(k, n) = 0;
            ++rep;
        }
    }
    if (repairs) *repairs = rep;
    if (integral) *integral = integ;
    return asg;
}

// Joint relaxation: every user holds its strongest candidate subcarriers on all nodes,
// linked to relaxed association variables, followed by rounding and a fixed-assignment pass.
inline JointResult joint_sca(const NetworkScenario& sc, const ChannelSet& ch, RobustMode mode,
                             const JointOptions& opt = {}) {
    sc.validate();
    ch.validate();
    const int K = ch.K, N = ch.N, A = ch.A;
    const int L = opt.candidate_subcarriers <= 0 ? N : std::min(opt.candidate_subcarriers, N);
    AssignmentState relaxed(K, A, N);
    relaxed.chi.setOnes();
    for (int k = 0; k < K; ++k) {
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return ch.hF(k, a).squaredNorm() > ch.hF(k, b).squaredNorm(); });
        for (int i = 0; i < L; ++i) relaxed.nu(k, order[i]) = 1;
    }
    ModelOptions mopt = opt.model;
    mopt.qos = false;
    const RobustModel M = build_model(mode, ch, relaxed, sc, mopt);
    const auto& users = M.sched.users;
    const int U = M.num_users();

    // consistent starting shares
    const double chi0 = std::min({1.0, static_cast<double>(sc.F_max) / A, static_cast<double>(sc.N_hat_a) / K});
    std::vector<int> cand(N, 0);
    for (auto& su : users) ++cand[su.n];
    std::vector<CMat> X0;
    for (auto& su : users) {
        const double nu0 = std::min(1.0 / L, static_cast<double>(sc.q_max) / cand[su.n]);
        const double p = 0.5 * sc.P_max * std::min(chi0, nu0);
        const double hn = su.h.norm();
        X0.push_back(hn > 0 ? CMat(p * outer(su.h) / (hn * hn)) : CMat(CMat::Zero(A, A)));
    }
    for (int i = 0; i < 200 && !check_feasibility(M, X0).feasible; ++i)
        for (auto& x : X0) x *= 0.8;

    ScaOptions sopt = opt.sca;
    sopt.recover = false;
    sopt.extend = [&](BuiltProgram& B) {
        auto& P = B.prog;
        const int chi_b = P.add_scalars("chi", K * A);
        const int nu_b = P.add_scalars("nu", K * N);
        const int rho_b = P.add_scalars("rho", U * A);
        for (int k = 0; k < K; ++k) {
            conic::LinExpr row;
            row += static_cast<double>(sc.F_max);
            for (int a = 0; a < A; ++a) {
                row.add(P.var(chi_b, k * A + a), -1.0);
                conic::LinExpr up;
                up += 1.0;
                up.add(P.var(chi_b, k * A + a), -1.0);
                P.add_nonneg(up, "chi<=1");
            }
            P.add_nonneg(row, "quota:user-nodes");
            conic::LinExpr one;
            one += 1.0;
            for (int n = 0; n < N; ++n) one.add(P.var(nu_b, k * N + n), -1.0);
            P.add_nonneg(one, "quota:user-subcarriers");
        }
        for (int a = 0; a < A; ++a) {
            conic::LinExpr row;
            row += static_cast<double>(sc.N_hat_a);
            for (int k = 0; k < K; ++k) row.add(P.var(chi_b, k * A + a), -1.0);
            P.add_nonneg(row, "quota:node");
        }
        for (int n = 0; n < N; ++n) {
            conic::LinExpr row;
            row += static_cast<double>(sc.q_max);
            for (int k = 0; k < K; ++k) row.add(P.var(nu_b, k * N + n), -1.0);
            P.add_nonneg(row, "quota:subcarrier");
        }
        for (int u = 0; u < U; ++u) {
            const int k = users[u].k, n = users[u].n;
            for (int t = 0; t < A; ++t) {
                const int a = users[u].nodes[t];
                const int r = P.var(rho_b, u * A + t);
                conic::LinExpr lo;
                lo.add(r, 1.0);
                P.add_nonneg(lo, "rho>=0");
                conic::LinExpr c1;
                c1.add(P.var(chi_b, k * A + a), 1.0).add(r, -1.0);
                P.add_nonneg(c1, "rho<=chi");
                conic::LinExpr c2;
                c2.add(P.var(nu_b, k * N + n), 1.0).add(r, -1.0);
                P.add_nonneg(c2, "rho<=nu");
                CMat E = CMat::Zero(A, A);
                E(t, t) = 1.0;
                conic::LinExpr link;
                link.add(r, sc.P_max);
                conic::LinExpr d = P.trace_with(B.X_block[u], E);
                d *= -1.0;
                link += d;
                P.add_nonneg(link, "link");
            }
        }
    };
    ScaResult R = sca_iterate(M, X0, sc, sopt);
    JointResult out;
    out.history.relaxed_trace = R.objective_trace;
    out.history.relaxed_objective = R.objective_trace.empty() ? 0.0 : R.objective_trace.back();
    out.history.solver_iterations = R.solver_iterations;

    RelaxedShares s;
    s.sub.assign(K, std::vector<double>(N, 0.0));
    s.node.assign(K, std::vector<std::vector<double>>(N, std::vector<double>(A, 0.0)));
    // subcarrier share: fraction of the user's relaxed rate carried by each candidate
    std::vector<double> user_total(K, 0.0);
    std::vector<double> cand_rate(U, 0.0);
    for (int u = 0; u < U; ++u) {
        const double f = M.f_form[u].eval(R.X), g = M.g_form[u].eval(R.X);
        cand_rate[u] = std::max(0.0, std::log2(f / g));
        user_total[users[u].k] += cand_rate[u];
    }
    for (int u = 0; u < U; ++u) {
        const int k = users[u].k, n = users[u].n;
        for (int t = 0; t < A; ++t)
            s.node[k][n][users[u].nodes[t]] = std::clamp(R.X[u](t, t).real() / sc.P_max, 0.0, 1.0);
        s.sub[k][n] = user_total[k] > 0 ? cand_rate[u] / user_total[k] : 0.0;
    }
    const AssignmentState asg = round_relaxation(sc, ch, s, opt.threshold, &out.history.repairs, &out.history.integral);
    ScaOptions fopt = opt.sca;
    BeamformingOutcome bf = optimize_beamformers(mode, ch, asg, sc, opt.model, fopt);
    out.history.solver_iterations += bf.solver_iterations;
    out.asg = bf.asg;
    out.sol = bf.sol;
    out.feasible = bf.feasible;
    out.sum_rate = bf.sum_rate;
    out.dropped = bf.dropped;
    out.history.rounded_sum_rate = bf.sum_rate;
    return out;
}

struct ComplexityReport {
    std::vector<long> cs_proposals;  // per round
    std::vector<long> ca_proposals;
    long cs_bound = 0;
    long ca_bound = 0;
    bool cs_within = true;
    bool ca_within = true;
    long solver_iterations = 0;
    double solver_work = 0.0;
};

// Node-selection bound sum over the first F_max picks of K times the nodes still open,
// counted as at least one per pick; subcarrier bound K N A.
inline long ctnsa_bound(const NetworkScenario& sc) {
    long b = 0;
    for (int a = 1; a <= sc.F_max; ++a) b += static_cast<long>(sc.K) * std::max(sc.A() - a, 1);
    return b;
}

inline long eca_bound(const NetworkScenario& sc) { return static_cast<long>(sc.K) * sc.N * sc.A(); }

inline ComplexityReport complexity_counters(const RunHistory& h, const NetworkScenario& sc) {
    ComplexityReport r;
    r.cs_bound = ctnsa_bound(sc);
    r.ca_bound = eca_bound(sc);
    for (auto& rec : h.rounds) {
        r.cs_proposals.push_back(rec.cs_proposals);
        r.ca_proposals.push_back(rec.ca_proposals);
        r.cs_within = r.cs_within && rec.cs_proposals <= r.cs_bound;
        r.ca_within = r.ca_within && rec.ca_proposals <= r.ca_bound;
        r.solver_iterations += rec.solver_iterations;
        r.solver_work += rec.solver_work;
    }
    return r;
}

}  // namespace robnoma
