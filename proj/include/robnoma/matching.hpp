#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "channels.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rate.hpp"
#include "scenario.hpp"
#include "solution.hpp"

namespace robnoma {

using IntMat = Eigen::MatrixXi;

// Per-(k, n) per-node beamformer entries used to score candidate links, indexed k*N + n.
struct ReferenceBeams {
    int K = 0, N = 0, A = 0;
    std::vector<CVec> w;

    const CVec& at(int k, int n) const { return w[k * N + n]; }
};

// Per-node MRT phases at power P_max / (T_f * N_hat_a); entries carried by a previous
// solution replace the reference on the nodes that solution used.
inline ReferenceBeams reference_beams(const NetworkScenario& sc, const ChannelSet& ch,
                                      const BeamformingSolution* prev = nullptr,
                                      const IntMat* prev_chi = nullptr, const IntMat* prev_nu = nullptr) {
    ReferenceBeams r;
    r.K = ch.K;
    r.N = ch.N;
    r.A = ch.A;
    const double p_ref = sc.P_max / (sc.T_f * std::max(1, sc.N_hat_a));
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n) {
            CVec v(ch.A);
            const CVec& h = ch.hF(k, n);
            for (int a = 0; a < ch.A; ++a) {
                const double m = std::abs(h(a));
                v(a) = m > 0 ? std::sqrt(p_ref) * h(a) / m : cplx(std::sqrt(p_ref), 0.0);
            }
            if (prev && prev_chi && prev_nu && (*prev_nu)(k, n))
                for (int a = 0; a < ch.A; ++a)
                    if ((*prev_chi)(k, a)) v(a) = prev->wk(k, n)(a);
            r.w.push_back(v);
        }
    return r;
}

// Candidates of one player ranked by decreasing utility, lower index first on ties.
struct PreferenceList {
    enum class Owner { User, Node, Subcarrier };
    Owner owner = Owner::User;
    int id = 0;
    std::vector<std::pair<int, double>> ranked;
    std::set<int> rejected;

    static PreferenceList build(Owner o, int id, const std::vector<double>& utility) {
        PreferenceList p;
        p.owner = o;
        p.id = id;
        for (int c = 0; c < static_cast<int>(utility.size()); ++c) p.ranked.emplace_back(c, utility[c]);
        std::stable_sort(p.ranked.begin(), p.ranked.end(),
                         [](const auto& x, const auto& y) { return x.second > y.second; });
        return p;
    }
    // Best candidate not yet rejected and not in `held`, or -1.
    int next(const std::set<int>& held = {}) const {
        for (auto& [c, u] : ranked)
            if (!rejected.count(c) && !held.count(c)) return c;
        return -1;
    }
};

struct MatchingState {
    IntMat mu;                             // users x partners
    std::vector<std::vector<int>> L_req;   // per partner, users that ever requested
    std::vector<std::vector<int>> L_rej;   // per partner, users rejected or evicted
    std::vector<PreferenceList> prefs;     // per user
    long proposals = 0;
    long accepts = 0;
    long rejects = 0;
    long evictions = 0;
    long moves = 0;                        // accepted local-search moves
    long evaluations = 0;                  // aggregate utility evaluations
    bool empty_flag = false;               // no edge could be formed
    std::vector<int> unmatched;            // eligible users left without a partner
    std::vector<std::string> trace;
};

struct MatchingOptions {
    bool swap = true;
    bool trace = false;
    long max_moves = 100000;
    std::function<void(const IntMat&)> on_step;  // called after every change to the matching
};

// Strict improvement used by local search and by the blocking-pair audit alike.
inline bool improves(double after, double before) {
    if (!std::isfinite(after)) return false;
    if (!std::isfinite(before)) return true;
    return after > before + 1e-9 * (1.0 + std::abs(before));
}

// Two-sided game with quotas and externalities; the matching is a binary users x partners matrix.
class TwoSidedGame {
public:
    virtual ~TwoSidedGame() = default;
    virtual std::string name() const = 0;
    virtual int users() const = 0;
    virtual int partners() const = 0;
    virtual int user_quota() const = 0;
    virtual int partner_quota() const = 0;
    // Quota a partner applies while answering proposals; the swap phase uses partner_quota.
    virtual int proposal_quota() const { return partner_quota(); }
    virtual bool eligible(int k) const { return k >= 0; }
    // Value of user k's current partner set under matching M.
    virtual double user_value(int k, const IntMat& M) const = 0;
    // Utility partner p draws from user k, evaluated with k matched to p in M.
    virtual double partner_utility(int p, int k, const IntMat& M) const = 0;
    // Score of partner p in user k's preference list under M.
    virtual double user_preference(int k, int p, const IntMat& M) const = 0;
    // Minimum value gain for a user to take an extra partner.
    virtual double add_threshold() const { return 0.0; }

    double aggregate(const IntMat& M) const {
        double s = 0.0;
        for (int k = 0; k < users(); ++k) {
            s += user_value(k, M);
            for (int p = 0; p < partners(); ++p)
                if (M(k, p)) s += partner_utility(p, k, M);
        }
        return s;
    }
    int user_load(const IntMat& M, int k) const { return M.row(k).sum(); }
    int partner_load(const IntMat& M, int p) const { return M.col(p).sum(); }
};

namespace detail {

inline void emit(MatchingState& st, const MatchingOptions& opt, const std::string& line) {
    if (opt.trace) st.trace.push_back(line);
}

inline std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

inline void notify(const MatchingOptions& opt, const IntMat& M) {
    if (opt.on_step) opt.on_step(M);
}

// Partner p decides on a request from k: accept into a free slot, replace its least
// preferred user, or reject. Returns the evicted user, k itself when rejected, or -1.
inline int partner_decides(const TwoSidedGame& g, IntMat& M, int p, int k, MatchingState& st,
                           const MatchingOptions& opt, const std::string& tag) {
    st.L_req[p].push_back(k);
    IntMat trial = M;
    trial(k, p) = 1;
    const double uk = g.partner_utility(p, k, trial);
    if (!std::isfinite(uk)) {
        st.L_rej[p].push_back(k);
        ++st.rejects;
        emit(st, opt, tag + " reject " + std::to_string(k) + " " + std::to_string(p));
        return k;
    }
    if (g.partner_load(M, p) < g.proposal_quota()) {
        M(k, p) = 1;
        ++st.accepts;
        emit(st, opt, tag + " accept " + std::to_string(k) + " " + std::to_string(p));
        notify(opt, M);
        return -1;
    }
    int worst = -1;
    double worst_u = std::numeric_limits<double>::infinity();
    for (int j = 0; j < g.users(); ++j)
        if (M(j, p)) {
            const double u = g.partner_utility(p, j, M);
            if (u < worst_u || (u == worst_u && j > worst)) {
                worst_u = u;
                worst = j;
            }
        }
    IntMat swapped = M;
    if (worst >= 0) swapped(worst, p) = 0;
    swapped(k, p) = 1;
    const double uk_swapped = g.partner_utility(p, k, swapped);
    if (worst >= 0 && (uk_swapped > worst_u || (uk_swapped == worst_u && k < worst))) {
        M = swapped;
        st.L_rej[p].push_back(worst);
        st.prefs[worst].rejected.insert(p);
        ++st.evictions;
        ++st.accepts;
        emit(st, opt, tag + " evict " + std::to_string(worst) + " " + std::to_string(p));
        emit(st, opt, tag + " accept " + std::to_string(k) + " " + std::to_string(p));
        notify(opt, M);
        return worst;
    }
    st.L_rej[p].push_back(k);
    ++st.rejects;
    emit(st, opt, tag + " reject " + std::to_string(k) + " " + std::to_string(p));
    return k;
}

inline MatchingState fresh_state(const TwoSidedGame& g) {
    MatchingState st;
    st.mu = IntMat::Zero(g.users(), g.partners());
    st.L_req.assign(g.partners(), {});
    st.L_rej.assign(g.partners(), {});
    return st;
}

inline void finish_state(const TwoSidedGame& g, MatchingState& st) {
    st.unmatched.clear();
    for (int k = 0; k < g.users(); ++k)
        if (g.eligible(k) && g.user_load(st.mu, k) == 0) st.unmatched.push_back(k);
    st.empty_flag = st.mu.sum() == 0;
}

}  // namespace detail

// Users that can still improve the aggregate while both sides of (k, p) strictly gain,
// adding into free slots or replacing one partner on each full side.
struct BlockingPair {
    int user;
    int partner;
    bool operator==(const BlockingPair& o) const { return user == o.user && partner == o.partner; }
};

inline std::vector<BlockingPair> find_blocking_pairs(const TwoSidedGame& g, const IntMat& M) {
    std::vector<BlockingPair> out;
    const double U = g.aggregate(M);
    for (int k = 0; k < g.users(); ++k) {
        if (!g.eligible(k)) continue;
        const double vk = g.user_value(k, M);
        const bool user_full = g.user_load(M, k) >= g.user_quota();
        for (int p = 0; p < g.partners(); ++p) {
            if (M(k, p)) continue;
            const bool partner_full = g.partner_load(M, p) >= g.partner_quota();
            std::vector<int> drop_p = {-1}, drop_k = {-1};
            if (user_full) {
                drop_p.clear();
                for (int q = 0; q < g.partners(); ++q)
                    if (M(k, q)) drop_p.push_back(q);
            }
            if (partner_full) {
                drop_k.clear();
                for (int j = 0; j < g.users(); ++j)
                    if (M(j, p)) drop_k.push_back(j);
            }
            bool blocking = false;
            for (int q : drop_p) {
                for (int j : drop_k) {
                    IntMat T = M;
                    if (q >= 0) T(k, q) = 0;
                    if (j >= 0) T(j, p) = 0;
                    T(k, p) = 1;
                    const double thr = q < 0 ? g.add_threshold() : 0.0;
                    if (!(g.user_value(k, T) > vk + thr) || !improves(g.user_value(k, T), vk)) continue;
                    const double up = g.partner_utility(p, k, T);
                    if (!std::isfinite(up)) continue;
                    if (j >= 0 && !(up > g.partner_utility(p, j, M))) continue;
                    if (!improves(g.aggregate(T), U)) continue;
                    blocking = true;
                    break;
                }
                if (blocking) break;
            }
            if (blocking) out.push_back({k, p});
        }
    }
    return out;
}

// Local search on the aggregate utility over add, remove, replace (either side) and
// exchange moves; each accepted move strictly increases the aggregate.
inline IntMat swap_matching(const TwoSidedGame& g, IntMat M, MatchingState& st, const MatchingOptions& opt = {}) {
    const int K = g.users(), P = g.partners();
    const std::string tag = g.name();
    double U = g.aggregate(M);
    ++st.evaluations;
    for (long it = 0; it < opt.max_moves; ++it) {
        double best = U;
        IntMat bestM;
        std::string best_desc;
        auto consider = [&](const IntMat& T, const std::string& desc) {
            const double v = g.aggregate(T);
            ++st.evaluations;
            if (improves(v, best)) {
                best = v;
                bestM = T;
                best_desc = desc;
            }
        };
        for (int k = 0; k < K; ++k) {
            const bool ok = g.eligible(k);
            const int uload = g.user_load(M, k);
            for (int p = 0; p < P; ++p) {
                if (M(k, p)) {
                    IntMat T = M;
                    T(k, p) = 0;
                    consider(T, "remove " + std::to_string(k) + " " + std::to_string(p));
                    continue;
                }
                if (!ok) continue;
                const int pload = g.partner_load(M, p);
                const bool ufree = uload < g.user_quota(), pfree = pload < g.partner_quota();
                if (ufree && pfree) {
                    IntMat T = M;
                    T(k, p) = 1;
                    consider(T, "add " + std::to_string(k) + " " + std::to_string(p));
                }
                for (int q = 0; q < P; ++q) {
                    if (!M(k, q)) continue;
                    if (pfree) {
                        IntMat T = M;
                        T(k, q) = 0;
                        T(k, p) = 1;
                        consider(T, "replace-partner " + std::to_string(k) + " " + std::to_string(q) + " " +
                                        std::to_string(p));
                    }
                    for (int j = 0; j < K; ++j) {
                        if (j == k || !M(j, p)) continue;
                        IntMat T = M;
                        T(k, q) = 0;
                        T(j, p) = 0;
                        T(k, p) = 1;
                        consider(T, "replace-both " + std::to_string(k) + " " + std::to_string(p) + " " +
                                        std::to_string(q) + " " + std::to_string(j));
                    }
                }
                if (ufree)
                    for (int j = 0; j < K; ++j) {
                        if (j == k || !M(j, p)) continue;
                        IntMat T = M;
                        T(j, p) = 0;
                        T(k, p) = 1;
                        consider(T, "replace-user " + std::to_string(p) + " " + std::to_string(j) + " " +
                                        std::to_string(k));
                    }
            }
        }
        // exchange: (k, a), (m, i) -> (k, i), (m, a)
        for (int k = 0; k < K; ++k)
            for (int a = 0; a < P; ++a) {
                if (!M(k, a)) continue;
                for (int m = k + 1; m < K; ++m)
                    for (int i = 0; i < P; ++i) {
                        if (i == a || !M(m, i) || M(k, i) || M(m, a)) continue;
                        if (!g.eligible(k) || !g.eligible(m)) continue;
                        IntMat T = M;
                        T(k, a) = 0;
                        T(m, i) = 0;
                        T(k, i) = 1;
                        T(m, a) = 1;
                        consider(T, "exchange " + std::to_string(k) + " " + std::to_string(a) + " " +
                                        std::to_string(m) + " " + std::to_string(i));
                    }
            }
        if (bestM.size() == 0) break;
        M = bestM;
        ++st.moves;
        detail::emit(st, opt, tag + " move " + best_desc + " " + detail::fmt_num(best - U));
        U = best;
        detail::notify(opt, M);
    }
    st.mu = M;
    detail::finish_state(g, st);
    return M;
}

// Node-association game: users x antenna nodes with the subcarrier plan held fixed.
class CsGame : public TwoSidedGame {
public:
    CsGame(const NetworkScenario& sc, const ChannelSet& ch, const ReferenceBeams& ref, const IntMat& nu)
        : sc_(sc), K_(ch.K), N_(ch.N), A_(ch.A), nu_(nu) {
        require_structure(nu.rows() == K_ && nu.cols() == N_, "nu dimension mismatch");
        require_structure(ref.K == K_ && ref.N == N_ && ref.A == A_, "reference beam dimension mismatch");
        tables(ch, ref);
        subs_.assign(K_, {});
        for (int k = 0; k < K_; ++k) {
            for (int n = 0; n < N_; ++n)
                if (nu(k, n)) subs_[k].push_back(n);
            if (subs_[k].empty()) {
                int best = 0;
                for (int n = 1; n < N_; ++n)
                    if (ch.hF(k, n).squaredNorm() > ch.hF(k, best).squaredNorm()) best = n;
                subs_[k].push_back(best);
            }
        }
    }

    std::string name() const override { return "cs"; }
    int users() const override { return K_; }
    int partners() const override { return A_; }
    int user_quota() const override { return sc_.F_max; }
    int partner_quota() const override { return sc_.N_hat_a; }
    double add_threshold() const override { return sc_.eps_stop; }

    const std::vector<int>& subcarriers_of(int k) const { return subs_[k]; }

    // SINR of k on n with its nodes taken from row k of chi (coherent over nodes).
    double sinr(int k, int n, const IntMat& chi) const {
        cplx s = 0.0;
        for (int a = 0; a < A_; ++a)
            if (chi(k, a)) s += G(k, n, k, a);
        const double num = std::norm(s);
        if (num <= 0.0) return 0.0;
        return num / denominator(k, n, chi);
    }
    // Average SINR summed over k's subcarriers.
    double phi(int k, const IntMat& chi) const {
        double s = 0.0;
        for (int n : subs_[k]) s += sinr(k, n, chi);
        return std::log2(1.0 + s);
    }
    // Independent effect of node a on user k.
    double utility_user(int k, int a, const IntMat& chi) const {
        double s = 0.0;
        for (int n : subs_[k]) s += std::norm(G(k, n, k, a)) / denominator(k, n, chi);
        return std::log2(1.0 + s);
    }
    // Direct gain less interference cost, with k counted among the users of a.
    double utility_node(int a, int k, const IntMat& chi) const {
        const double gR = std::max(sc_.gamma(), 1e-12);
        double gain = 0.0, theta = 0.0;
        for (int n : subs_[k]) {
            gain += std::norm(G(k, n, k, a)) / gR;
            theta += theta_mf(a, k, n, chi) + theta_f(a, k, n, chi);
        }
        return sc_.Upsilon_CS * gain - theta;
    }
    // Violation degree of the MUE cap at node a on n over its users there plus k.
    double varpi(int a, int k, int n, const IntMat& chi) const {
        double s = 0.0;
        for (int i = 0; i < K_; ++i)
            if ((i == k || (chi(i, a) && nu_(i, n)))) s += mf2(n, i, a);
        return std::max(0.0, (s - sc_.eps_M) / sc_.eps_M);
    }
    double theta_mf(int a, int k, int n, const IntMat& chi) const {
        return sc_.c_MF * varpi(a, k, n, chi) * mf2(n, k, a);
    }
    double theta_f(int a, int k, int n, const IntMat& chi) const {
        double s = 0.0;
        for (int i = 0; i < K_; ++i)
            if (i != k && chi(i, a) && nu_(i, n) && hn2(i, n, a) >= hn2(k, n, a)) s += sc_.c_i * std::norm(G(i, n, k, a));
        return s;
    }

    double user_value(int k, const IntMat& M) const override { return M.row(k).sum() ? phi(k, M) : 0.0; }
    double partner_utility(int p, int k, const IntMat& M) const override { return utility_node(p, k, M); }
    double user_preference(int k, int p, const IntMat& M) const override { return utility_user(k, p, M); }

private:
    void tables(const ChannelSet& ch, const ReferenceBeams& ref) {
        g_.resize(static_cast<std::size_t>(K_) * N_ * K_ * A_);
        mf_.resize(static_cast<std::size_t>(N_) * K_ * A_);
        hn_.resize(static_cast<std::size_t>(K_) * N_ * A_);
        ifm_.resize(static_cast<std::size_t>(K_) * N_);
        strong_.resize(static_cast<std::size_t>(N_) * K_ * K_);
        for (int k = 0; k < K_; ++k)
            for (int n = 0; n < N_; ++n) {
                const CVec& h = ch.hF(k, n);
                ifm_[k * N_ + n] = ch.mbs_interference(k, n);
                for (int a = 0; a < A_; ++a) hn_[(k * N_ + n) * A_ + a] = std::norm(h(a));
                for (int i = 0; i < K_; ++i)
                    for (int a = 0; a < A_; ++a) g_[((k * N_ + n) * K_ + i) * A_ + a] = std::conj(h(a)) * ref.at(i, n)(a);
            }
        for (int n = 0; n < N_; ++n) {
            const CVec& hm = ch.hMF(n);
            for (int i = 0; i < K_; ++i) {
                for (int a = 0; a < A_; ++a) mf_[(n * K_ + i) * A_ + a] = std::norm(std::conj(hm(a)) * ref.at(i, n)(a));
                for (int k = 0; k < K_; ++k) strong_[(n * K_ + i) * K_ + k] = stronger(ch, i, k, n);
            }
        }
    }
    double denominator(int k, int n, const IntMat& chi) const {
        double I = 0.0;
        for (int i = 0; i < K_; ++i) {
            if (i == k || !nu_(i, n) || !strong_[(n * K_ + i) * K_ + k]) continue;
            cplx s = 0.0;
            for (int a = 0; a < A_; ++a)
                if (chi(i, a)) s += G(k, n, i, a);
            I += std::norm(s);
        }
        return ifm_[k * N_ + n] + I + sc_.sigma2;
    }
    const cplx& G(int k, int n, int i, int a) const { return g_[((k * N_ + n) * K_ + i) * A_ + a]; }
    double mf2(int n, int i, int a) const { return mf_[(n * K_ + i) * A_ + a]; }
    double hn2(int k, int n, int a) const { return hn_[(k * N_ + n) * A_ + a]; }

    NetworkScenario sc_;
    int K_, N_, A_;
    IntMat nu_;
    std::vector<std::vector<int>> subs_;
    std::vector<cplx> g_;
    std::vector<double> mf_, hn_, ifm_;
    std::vector<char> strong_;
};

// Subcarrier game: users x subcarriers with node association held fixed.
class CaGame : public TwoSidedGame {
public:
    CaGame(const NetworkScenario& sc, const ChannelSet& ch, const ReferenceBeams& ref, const IntMat& chi)
        : sc_(sc), K_(ch.K), N_(ch.N), A_(ch.A), chi_(chi) {
        require_structure(chi.rows() == K_ && chi.cols() == A_, "chi dimension mismatch");
        require_structure(ref.K == K_ && ref.N == N_ && ref.A == A_, "reference beam dimension mismatch");
        x_.resize(static_cast<std::size_t>(K_) * N_ * K_ * A_);
        g_.resize(static_cast<std::size_t>(K_) * N_ * K_);
        mf_.resize(static_cast<std::size_t>(N_) * K_ * A_);
        hn_.resize(static_cast<std::size_t>(K_) * N_ * A_);
        ifm_.resize(static_cast<std::size_t>(K_) * N_);
        strong_.resize(static_cast<std::size_t>(N_) * K_ * K_);
        for (int k = 0; k < K_; ++k)
            for (int n = 0; n < N_; ++n) {
                const CVec& h = ch.hF(k, n);
                ifm_[k * N_ + n] = ch.mbs_interference(k, n);
                for (int a = 0; a < A_; ++a) hn_[(k * N_ + n) * A_ + a] = std::norm(h(a));
                for (int i = 0; i < K_; ++i) {
                    cplx s = 0.0;
                    for (int a = 0; a < A_; ++a) {
                        x_[((k * N_ + n) * K_ + i) * A_ + a] = std::conj(h(a)) * ref.at(i, n)(a);
                        if (chi(i, a)) s += x_[((k * N_ + n) * K_ + i) * A_ + a];
                    }
                    g_[(k * N_ + n) * K_ + i] = std::norm(s);
                }
            }
        for (int n = 0; n < N_; ++n) {
            const CVec& hm = ch.hMF(n);
            for (int i = 0; i < K_; ++i) {
                for (int a = 0; a < A_; ++a) mf_[(n * K_ + i) * A_ + a] = std::norm(std::conj(hm(a)) * ref.at(i, n)(a));
                for (int k = 0; k < K_; ++k) strong_[(n * K_ + i) * K_ + k] = stronger(ch, i, k, n);
            }
        }
    }

    std::string name() const override { return "ca"; }
    int users() const override { return K_; }
    int partners() const override { return N_; }
    int user_quota() const override { return 1; }
    int partner_quota() const override { return sc_.q_max; }
    // Proposals fill subcarriers evenly; deeper sharing is left to the swap phase.
    int proposal_quota() const override { return std::min(sc_.q_max, (K_ + N_ - 1) / N_); }
    bool eligible(int k) const override { return chi_.row(k).sum() > 0; }

    // Rate of k on n with its users on n taken from column n of nu (k counted in).
    double rate(int k, int n, const IntMat& nu) const {
        const double num = g_[(k * N_ + n) * K_ + k];
        if (num <= 0.0) return 0.0;
        double I = 0.0;
        for (int i = 0; i < K_; ++i)
            if (i != k && nu(i, n) && strong_[(n * K_ + i) * K_ + k]) I += g_[(k * N_ + n) * K_ + i];
        return std::log2(1.0 + num / (ifm_[k * N_ + n] + I + sc_.sigma2));
    }
    double utility_user(int k, int n, const IntMat& nu) const { return rate(k, n, nu); }
    double utility_sub(int n, int k, const IntMat& nu) const {
        const double r = rate(k, n, nu);
        if (r <= 0.0) return -std::numeric_limits<double>::infinity();
        return sc_.Upsilon_CA * (r - sc_.R_k) / r - theta(n, k, nu);
    }
    // Interference cost summed over k's nodes on subcarrier n.
    double theta(int n, int k, const IntMat& nu) const {
        double t = 0.0;
        for (int a = 0; a < A_; ++a) {
            if (!chi_(k, a)) continue;
            double load = 0.0;
            for (int i = 0; i < K_; ++i)
                if (chi_(i, a) && (i == k || nu(i, n))) load += mf2(n, i, a);
            const double varpi = std::max(0.0, (load - sc_.eps_M) / sc_.eps_M);
            t += sc_.c_MF * varpi * mf2(n, k, a);
            for (int i = 0; i < K_; ++i)
                if (i != k && chi_(i, a) && nu(i, n) && hn2(i, n, a) >= hn2(k, n, a))
                    t += sc_.c_i * std::norm(cross(i, n, k, a));
        }
        return t;
    }

    double user_value(int k, const IntMat& M) const override {
        for (int n = 0; n < N_; ++n)
            if (M(k, n)) return rate(k, n, M);
        return 0.0;
    }
    double partner_utility(int p, int k, const IntMat& M) const override { return utility_sub(p, k, M); }
    double user_preference(int k, int p, const IntMat& M) const override {
        IntMat T = M;
        T(k, p) = 1;
        return rate(k, p, T);
    }

private:
    // Part of k's beam at node a that lands on user i.
    const cplx& cross(int i, int n, int k, int a) const { return x_[((i * N_ + n) * K_ + k) * A_ + a]; }
    double mf2(int n, int i, int a) const { return mf_[(n * K_ + i) * A_ + a]; }
    double hn2(int k, int n, int a) const { return hn_[(k * N_ + n) * A_ + a]; }

    NetworkScenario sc_;
    int K_, N_, A_;
    IntMat chi_;
    std::vector<cplx> x_;
    std::vector<double> g_;
    std::vector<double> mf_, hn_, ifm_;
    std::vector<char> strong_;
};

struct MatchingResult {
    IntMat mu;
    MatchingState state;
};

// Node-association proposal phase: users propose down their lists until the marginal
// gain of an extra node falls to eps_stop or F_max is reached; nodes keep their best N_hat_a.
inline MatchingResult ctnsa(const CsGame& g, const MatchingOptions& opt = {}) {
    MatchingState st = detail::fresh_state(g);
    IntMat M = st.mu;
    const int K = g.users(), A = g.partners();
    for (int k = 0; k < K; ++k) {
        std::vector<double> u(A);
        for (int a = 0; a < A; ++a) u[a] = g.user_preference(k, a, M);
        st.prefs.push_back(PreferenceList::build(PreferenceList::Owner::User, k, u));
    }
    std::vector<char> stopped(K, 0);
    bool any = true;
    while (any) {
        any = false;
        for (int k = 0; k < K; ++k) {
            while (!stopped[k] && g.user_load(M, k) < g.user_quota()) {
                std::set<int> held;
                for (int a = 0; a < A; ++a)
                    if (M(k, a)) held.insert(a);
                const int a = st.prefs[k].next(held);
                if (a < 0) break;
                if (!held.empty()) {
                    IntMat T = M;
                    T(k, a) = 1;
                    const double D = std::abs(g.user_value(k, T) - g.user_value(k, M));
                    if (D <= g.add_threshold()) {
                        stopped[k] = 1;
                        detail::emit(st, opt, "cs stop " + std::to_string(k) + " " + std::to_string(a));
                        break;
                    }
                }
                ++st.proposals;
                any = true;
                detail::emit(st, opt, "cs propose " + std::to_string(k) + " " + std::to_string(a));
                const int out = detail::partner_decides(g, M, a, k, st, opt, "cs");
                if (out == k) {
                    st.prefs[k].rejected.insert(a);
                } else if (out >= 0) {
                    stopped[out] = 0;
                }
            }
        }
    }
    st.mu = M;
    detail::finish_state(g, st);
    return {M, st};
}

// Subcarrier proposal phase: each user with a cooperative set proposes to its best
// remaining subcarrier; subcarriers keep their best q_max users.
inline MatchingResult eca_proposals(const CaGame& g, const MatchingOptions& opt = {}) {
    MatchingState st = detail::fresh_state(g);
    IntMat M = st.mu;
    const int K = g.users(), N = g.partners();
    for (int k = 0; k < K; ++k) {
        std::vector<double> u(N, -std::numeric_limits<double>::infinity());
        if (g.eligible(k))
            for (int n = 0; n < N; ++n) u[n] = g.user_preference(k, n, M);
        st.prefs.push_back(PreferenceList::build(PreferenceList::Owner::User, k, u));
        if (!g.eligible(k))
            for (int n = 0; n < N; ++n) st.prefs.back().rejected.insert(n);
    }
    bool any = true;
    while (any) {
        any = false;
        for (int k = 0; k < K; ++k) {
            if (g.user_load(M, k) > 0) continue;
            const int n = st.prefs[k].next();
            if (n < 0) continue;
            ++st.proposals;
            any = true;
            detail::emit(st, opt, "ca propose " + std::to_string(k) + " " + std::to_string(n));
            const int out = detail::partner_decides(g, M, n, k, st, opt, "ca");
            if (out == k) st.prefs[k].rejected.insert(n);
        }
    }
    st.mu = M;
    detail::finish_state(g, st);
    return {M, st};
}

// Full node-association game: proposal phase followed by the swap phase.
inline MatchingResult run_cs_game(const CsGame& g, const MatchingOptions& opt = {}) {
    MatchingResult r = ctnsa(g, opt);
    if (opt.swap) r.mu = swap_matching(g, r.mu, r.state, opt);
    return r;
}

inline MatchingResult eca(const CaGame& g, const MatchingOptions& opt = {}) {
    MatchingResult r = eca_proposals(g, opt);
    if (opt.swap) r.mu = swap_matching(g, r.mu, r.state, opt);
    return r;
}

}  // namespace robnoma
