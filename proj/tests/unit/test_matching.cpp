#include <cmath>
#include <limits>
#include <regex>

#include <gtest/gtest.h>

#include <robnoma/matching.hpp>
#include <robnoma/rate.hpp>

#include "helpers.hpp"

using namespace robnoma;

namespace {

struct Instance {
    NetworkScenario sc;
    ChannelSet ch;
    ReferenceBeams ref;
    IntMat nu;
};

Instance make_instance(int F, int T_f, int N, int K, std::uint64_t seed) {
    Instance in;
    in.sc = testutil::scenario(F, T_f, N, K);
    in.ch = generate_channels(in.sc, seed);
    in.ref = reference_beams(in.sc, in.ch);
    in.nu = IntMat::Zero(K, N);
    for (int k = 0; k < K; ++k) in.nu(k, k % N) = 1;
    return in;
}

bool quotas_hold(const TwoSidedGame& g, const IntMat& M) {
    for (int k = 0; k < g.users(); ++k)
        if (M.row(k).sum() > g.user_quota() || (!g.eligible(k) && M.row(k).sum() > 0)) return false;
    for (int p = 0; p < g.partners(); ++p)
        if (M.col(p).sum() > g.partner_quota()) return false;
    return ((M.array() == 0) || (M.array() == 1)).all();
}

// Every quota-feasible matching one edit away: a flipped edge, an edge moved along a
// shared user or partner, or two users trading partners.
std::vector<IntMat> neighbourhood(const TwoSidedGame& g, const IntMat& M) {
    std::vector<IntMat> out;
    const int K = g.users(), P = g.partners();
    std::vector<std::pair<int, int>> on, off;
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < P; ++p) (M(k, p) ? on : off).emplace_back(k, p);
    auto push = [&](const IntMat& T) {
        if (quotas_hold(g, T)) out.push_back(T);
    };
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < P; ++p) {
            IntMat T = M;
            T(k, p) = 1 - T(k, p);
            push(T);
        }
    for (auto [k1, p1] : on)
        for (auto [k2, p2] : off)
            if (k1 == k2 || p1 == p2) {
                IntMat T = M;
                T(k1, p1) = 0;
                T(k2, p2) = 1;
                push(T);
            }
    for (auto [k, a] : on)
        for (auto [m, i] : on)
            if (k != m && a != i && !M(k, i) && !M(m, a)) {
                IntMat T = M;
                T(k, a) = T(m, i) = 0;
                T(k, i) = T(m, a) = 1;
                push(T);
            }
    return out;
}

void expect_local_optimum(const TwoSidedGame& g, const IntMat& M, const std::string& what) {
    const double U = g.aggregate(M);
    for (const IntMat& T : neighbourhood(g, M)) {
        const double v = g.aggregate(T);
        EXPECT_FALSE(std::isfinite(v) && v > U + 1e-9 * (1.0 + std::abs(U))) << what << " improved " << U << " -> " << v;
    }
}

AssignmentState as_assignment(const IntMat& chi, const IntMat& nu) {
    AssignmentState asg(chi.rows(), chi.cols(), nu.cols());
    asg.chi = chi;
    asg.nu = nu;
    return asg;
}

std::vector<CMat> reference_covariances(const ReferenceBeams& ref) {
    std::vector<CMat> W;
    for (auto& w : ref.w) W.push_back(outer(w));
    return W;
}

}  // namespace

TEST(CsGame, SinrMatchesSystemModelWithReferenceBeams) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Instance in = make_instance(2, 2, 2, 4, seed);
        Rng rng(seed);
        IntMat chi = IntMat::Zero(4, 4);
        for (int k = 0; k < 4; ++k)
            for (int a = 0; a < 4; ++a) chi(k, a) = rng.uniform() < 0.5;
        CsGame g(in.sc, in.ch, in.ref, in.nu);
        const auto asg = as_assignment(chi, in.nu);
        const auto W = reference_covariances(in.ref);
        for (int k = 0; k < 4; ++k) {
            const int n = k % 2;
            const double s = sinr(W, asg, in.ch, k, n, in.sc.sigma2);
            EXPECT_NEAR(g.sinr(k, n, chi), s, 1e-9 * (1 + s));
            EXPECT_NEAR(g.phi(k, chi), std::log2(1 + s), 1e-9 * (1 + s));
        }
    }
}

TEST(CaGame, RateMatchesSystemModelWithReferenceBeams) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Instance in = make_instance(2, 2, 2, 4, seed);
        Rng rng(seed + 50);
        IntMat chi = IntMat::Zero(4, 4), nu = IntMat::Zero(4, 2);
        for (int k = 0; k < 4; ++k) {
            for (int a = 0; a < 4; ++a) chi(k, a) = rng.uniform() < 0.6;
            nu(k, rng.uniform() < 0.5) = 1;
        }
        CaGame g(in.sc, in.ch, in.ref, chi);
        const auto asg = as_assignment(chi, nu);
        const auto W = reference_covariances(in.ref);
        for (int k = 0; k < 4; ++k) {
            const int n = nu(k, 0) ? 0 : 1;
            const double r = rate(W, asg, in.ch, k, n, in.sc.sigma2);
            EXPECT_NEAR(g.rate(k, n, nu), r, 1e-9 * (1 + r));
            EXPECT_NEAR(g.user_value(k, nu), r, 1e-9 * (1 + r));
        }
    }
}

TEST(CsGame, ViolationDegreeIsOneAtTwiceTheCap) {
    NetworkScenario sc = testutil::scenario(1, 2, 1, 1);
    ChannelSet ch = testutil::zero_channels(1, 1, 2, 1);
    ch.h_F_bar[0] << 1.0, 1.0;
    const double p_ref = sc.P_max / (sc.T_f * sc.N_hat_a);
    ch.h_MF_bar[0] << std::sqrt(2 * sc.eps_M / p_ref), 0.0;
    const auto ref = reference_beams(sc, ch);
    CsGame g(sc, ch, ref, IntMat::Ones(1, 1));
    const IntMat chi = IntMat::Zero(1, 2);
    EXPECT_NEAR(g.varpi(0, 0, 0, chi), 1.0, 1e-12);
    EXPECT_NEAR(g.theta_mf(0, 0, 0, chi), sc.c_MF * 2 * sc.eps_M, 1e-12);
    EXPECT_EQ(g.varpi(1, 0, 0, chi), 0.0);
    // node gain: Upsilon * |h_a|^2 p_ref / gamma minus the MUE cost
    const double gain = sc.Upsilon_CS * p_ref / sc.gamma();
    EXPECT_NEAR(g.utility_node(0, 0, chi), gain - sc.c_MF * 2 * sc.eps_M, 1e-9 * gain);
    EXPECT_NEAR(g.utility_node(1, 0, chi), gain, 1e-9 * gain);
}

TEST(CsGame, IntraNodeCostCountsOnlyStrongerCoUsers) {
    NetworkScenario sc = testutil::scenario(1, 1, 1, 2);
    ChannelSet ch = testutil::zero_channels(2, 1, 1, 1);
    ch.h_F_bar[0] << 2.0;
    ch.h_F_bar[1] << 1.0;
    const auto ref = reference_beams(sc, ch);
    CsGame g(sc, ch, ref, IntMat::Ones(2, 1));
    IntMat chi = IntMat::Ones(2, 1);
    const double p_ref = sc.P_max / (sc.T_f * sc.N_hat_a);
    // user 1 is weaker: it pays for its own beam as seen at the stronger user's channel
    EXPECT_NEAR(g.theta_f(0, 1, 0, chi), sc.c_i * 4.0 * p_ref, 1e-12);
    EXPECT_EQ(g.theta_f(0, 0, 0, chi), 0.0);
}

TEST(CaGame, ZeroRateIsUnacceptable) {
    NetworkScenario sc = testutil::scenario(1, 2, 2, 1);
    ChannelSet ch = testutil::zero_channels(1, 2, 2, 1);
    ch.h_F_bar[1] << 1.0, 0.5;
    const auto ref = reference_beams(sc, ch);
    CaGame g(sc, ch, ref, IntMat::Ones(1, 2));
    IntMat nu = IntMat::Zero(1, 2);
    EXPECT_EQ(g.utility_sub(0, 0, nu), -std::numeric_limits<double>::infinity());
    EXPECT_TRUE(std::isfinite(g.utility_sub(1, 0, nu)));
    const auto r = eca(g);
    EXPECT_EQ(r.mu(0, 0), 0);
    EXPECT_EQ(r.mu(0, 1), 1);
}

TEST(CaGame, UtilityMatchesItsDefinition) {
    Instance in = make_instance(2, 2, 2, 3, 9);
    IntMat chi = IntMat::Ones(3, 4);
    CaGame g(in.sc, in.ch, in.ref, chi);
    IntMat nu = IntMat::Zero(3, 2);
    nu(0, 0) = nu(1, 0) = 1;
    for (int k = 0; k < 2; ++k) {
        const double r = g.rate(k, 0, nu);
        EXPECT_NEAR(g.utility_sub(0, k, nu), in.sc.Upsilon_CA * (r - in.sc.R_k) / r - g.theta(0, k, nu), 1e-12);
    }
}

TEST(Matching, ConvergedMatchingsAreLocalOptimaOfExhaustiveEnumeration) {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
        for (auto [F, T_f] : {std::pair{1, 3}, std::pair{3, 1}, std::pair{1, 2}})
            for (int N : {1, 2}) {
                const int K = 2 + seed % 2;
                Instance in = make_instance(F, T_f, N, K, seed * 7 + N);
                CsGame cs(in.sc, in.ch, in.ref, in.nu);
                const auto rc = run_cs_game(cs);
                expect_local_optimum(cs, rc.mu, "cs seed " + std::to_string(seed));
                EXPECT_TRUE(find_blocking_pairs(cs, rc.mu).empty());
                CaGame ca(in.sc, in.ch, in.ref, rc.mu);
                const auto ra = eca(ca);
                expect_local_optimum(ca, ra.mu, "ca seed " + std::to_string(seed));
                EXPECT_TRUE(find_blocking_pairs(ca, ra.mu).empty());
                ++checked;
            }
    EXPECT_GE(checked, 50);
}

TEST(Matching, SwapNeverLowersTheProposalAggregate) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Instance in = make_instance(3, 2, 3, 6, seed);
        CsGame cs(in.sc, in.ch, in.ref, in.nu);
        const auto p = ctnsa(cs);
        const auto s = run_cs_game(cs);
        EXPECT_GE(cs.aggregate(s.mu), cs.aggregate(p.mu));
        CaGame ca(in.sc, in.ch, in.ref, s.mu);
        EXPECT_GE(ca.aggregate(eca(ca).mu), ca.aggregate(eca_proposals(ca).mu));
    }
}

TEST(Matching, PlantedBlockingPairIsFound) {
    Instance in = make_instance(1, 2, 2, 2, 4);
    CaGame ca(in.sc, in.ch, in.ref, IntMat::Ones(2, 2));
    const IntMat empty = IntMat::Zero(2, 2);
    EXPECT_FALSE(find_blocking_pairs(ca, empty).empty());
    const auto r = eca(ca);
    IntMat M = r.mu;
    for (int n = 0; n < 2; ++n) M(1, n) = 0;
    const auto bp = find_blocking_pairs(ca, M);
    bool found = false;
    for (auto& b : bp) found |= b.user == 1;
    EXPECT_TRUE(found);
}

TEST(Matching, QuotasHoldAfterEveryStep) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Instance in = make_instance(3, 2, 2, 6, seed);
        in.sc.F_max = 2;
        in.sc.N_hat_a = 2;
        in.sc.q_max = 2;
        int steps = 0;
        MatchingOptions opt;
        CsGame cs(in.sc, in.ch, in.ref, in.nu);
        opt.on_step = [&](const IntMat& M) {
            ++steps;
            EXPECT_TRUE(quotas_hold(cs, M));
        };
        const auto rc = run_cs_game(cs, opt);
        EXPECT_TRUE(quotas_hold(cs, rc.mu));
        CaGame ca(in.sc, in.ch, in.ref, rc.mu);
        opt.on_step = [&](const IntMat& M) {
            ++steps;
            EXPECT_TRUE(quotas_hold(ca, M));
        };
        const auto ra = eca(ca, opt);
        EXPECT_TRUE(quotas_hold(ca, ra.mu));
        EXPECT_GT(steps, 0);
    }
}

TEST(Matching, SwapStableInputIsLeftUnchanged) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Instance in = make_instance(3, 2, 3, 5, seed);
        CsGame cs(in.sc, in.ch, in.ref, in.nu);
        const auto r = run_cs_game(cs);
        MatchingState st;
        EXPECT_EQ(swap_matching(cs, r.mu, st), r.mu);
        EXPECT_EQ(st.moves, 0);
    }
}

TEST(Matching, SingleUserGetsItsBestSubcarrier) {
    Instance in = make_instance(2, 2, 4, 1, 3);
    CsGame cs(in.sc, in.ch, in.ref, in.nu);
    const auto rc = run_cs_game(cs);
    EXPECT_GE(rc.mu.sum(), 1);
    EXPECT_LE(rc.mu.sum(), in.sc.F_max);
    CaGame ca(in.sc, in.ch, in.ref, rc.mu);
    const auto ra = eca(ca);
    ASSERT_EQ(ra.mu.sum(), 1);
    int best = 0;
    for (int n = 1; n < 4; ++n)
        if (ca.rate(0, n, IntMat::Zero(1, 4)) > ca.rate(0, best, IntMat::Zero(1, 4))) best = n;
    EXPECT_EQ(ra.mu(0, best), 1);
}

TEST(Matching, HugeStopThresholdLeavesOneNodePerUser) {
    Instance in = make_instance(3, 2, 2, 4, 5);
    in.sc.eps_stop = 1e9;
    CsGame cs(in.sc, in.ch, in.ref, in.nu);
    const auto r = ctnsa(cs);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(r.mu.row(k).sum(), 1);
}

TEST(Matching, FullQuotaOnOneSubcarrierSharesIt) {
    Instance in = make_instance(2, 2, 1, 3, 6);
    in.sc.q_max = 3;
    CaGame ca(in.sc, in.ch, in.ref, IntMat::Ones(3, 4));
    MatchingOptions opt;
    opt.swap = false;
    const auto r = eca(ca, opt);
    EXPECT_EQ(r.mu.col(0).sum(), 3);
    EXPECT_EQ(r.state.proposals, 3);
}

TEST(Matching, UsersWithoutNodesStayUnmatched) {
    Instance in = make_instance(2, 2, 2, 3, 7);
    IntMat chi = IntMat::Ones(3, 4);
    chi.row(2).setZero();
    CaGame ca(in.sc, in.ch, in.ref, chi);
    const auto r = eca(ca);
    EXPECT_EQ(r.mu.row(2).sum(), 0);
    for (int k = 0; k < 2; ++k) EXPECT_EQ(r.mu.row(k).sum(), 1);
}

TEST(Matching, TraceLinesAreWellFormed) {
    Instance in = make_instance(3, 2, 3, 6, 8);
    MatchingOptions opt;
    opt.trace = true;
    CsGame cs(in.sc, in.ch, in.ref, in.nu);
    const auto rc = run_cs_game(cs, opt);
    CaGame ca(in.sc, in.ch, in.ref, rc.mu);
    const auto ra = eca(ca, opt);
    const std::regex event("^(cs|ca) (propose|accept|reject|evict|stop) \\d+ \\d+$");
    const std::regex move("^(cs|ca) move (add|remove|replace-partner|replace-both|replace-user|exchange)( \\d+)+ \\S+$");
    long proposals = 0;
    for (auto* tr : {&rc.state.trace, &ra.state.trace}) {
        ASSERT_FALSE(tr->empty());
        for (auto& line : *tr) {
            EXPECT_TRUE(std::regex_match(line, event) || std::regex_match(line, move)) << line;
            proposals += line.find(" propose ") != std::string::npos;
        }
    }
    EXPECT_EQ(proposals, rc.state.proposals + ra.state.proposals);
}

TEST(Matching, ProposalCountsRespectBounds) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const int K = 2 + seed % 7;
        Instance in = make_instance(3, 2, 1 + seed % 4, K, seed);
        const int A = in.sc.A();
        CsGame cs(in.sc, in.ch, in.ref, in.nu);
        const auto rc = run_cs_game(cs);
        long cs_bound = 0;
        for (int a = 1; a <= in.sc.F_max; ++a) cs_bound += static_cast<long>(K) * std::max(A - a, 1);
        EXPECT_LE(rc.state.proposals, cs_bound);
        CaGame ca(in.sc, in.ch, in.ref, rc.mu);
        EXPECT_LE(eca(ca).state.proposals, static_cast<long>(K) * in.sc.N * A);
    }
}
