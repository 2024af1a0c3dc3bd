#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include <robnoma/orchestrator.hpp>
#include <robnoma/verifier.hpp>

#include "helpers.hpp"

using namespace robnoma;

TEST(Alternate, SingleUserSingleNodeConvergesQuickly) {
    const NetworkScenario sc = testutil::scenario(1, 1, 1, 1);
    const ChannelSet ch = generate_channels(sc, 2);
    for (RobustMode mode : {RobustMode::Perfect, RobustMode::WorstCase, RobustMode::Bernstein}) {
        const RunResult r = alternate(sc, ch, mode);
        EXPECT_TRUE(r.feasible) << to_string(mode);
        EXPECT_TRUE(r.history.converged);
        EXPECT_LE(r.history.rounds.size(), 2u);
        EXPECT_EQ(r.asg.chi(0, 0), 1);
        EXPECT_EQ(r.asg.nu(0, 0), 1);
    }
}

TEST(Alternate, InfiniteToleranceRunsOneRound) {
    const NetworkScenario sc = testutil::scenario(3, 2, 3, 4);
    const ChannelSet ch = generate_channels(sc, 2);
    OrchestratorOptions opt;
    opt.eps_c = std::numeric_limits<double>::infinity();
    const RunResult r = alternate(sc, ch, RobustMode::Bernstein, opt);
    EXPECT_EQ(r.history.rounds.size(), 1u);
}

TEST(Alternate, BestSumRateIsNonDecreasingAndReported) {
    const NetworkScenario sc = testutil::scenario(3, 2, 4, 5);
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        OrchestratorOptions opt;
        opt.max_rounds = 6;
        opt.eps_c = 0.0;
        const RunResult r = alternate(sc, ch, RobustMode::WorstCase, opt);
        ASSERT_FALSE(r.history.rounds.empty());
        double prev = -std::numeric_limits<double>::infinity();
        for (auto& rec : r.history.rounds) {
            EXPECT_GE(rec.best_sum_rate, prev);
            EXPECT_GE(rec.best_sum_rate, rec.sum_rate);
            prev = rec.best_sum_rate;
        }
        if (r.feasible) {
            EXPECT_DOUBLE_EQ(r.sum_rate, r.history.rounds.back().best_sum_rate);
        }
        EXPECT_LE(r.history.rounds.size(), 6u);
    }
}

TEST(Alternate, OutputIsDeterministicAndAuditClean) {
    const NetworkScenario sc;
    const ChannelSet ch = generate_channels(sc, 11);
    OrchestratorOptions opt;
    opt.seed = 5;
    const RunResult a = alternate(sc, ch, RobustMode::Bernstein, opt);
    const RunResult b = alternate(sc, ch, RobustMode::Bernstein, opt);
    ASSERT_TRUE(a.feasible);
    EXPECT_EQ(a.asg, b.asg);
    EXPECT_EQ(a.sum_rate, b.sum_rate);
    EXPECT_EQ(a.history.rounds.size(), b.history.rounds.size());
    for (std::size_t i = 0; i < a.sol.W.size(); ++i) EXPECT_EQ(a.sol.W[i], b.sol.W[i]);
    EXPECT_TRUE(a.asg.quota_violations(sc).empty());
    EXPECT_TRUE(audit_solution(a.asg, a.sol, sc, ch).empty());
}

TEST(Alternate, ProposalCountsStayWithinComplexityBounds) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        NetworkScenario sc = testutil::scenario(3, 2, 3 + seed % 3, 3 + seed);
        const ChannelSet ch = generate_channels(sc, seed);
        const RunResult r = alternate(sc, ch, RobustMode::Perfect);
        const auto rep = complexity_counters(r.history, sc);
        long cs = 0;
        for (int a = 1; a <= sc.F_max; ++a) cs += static_cast<long>(sc.K) * std::max(sc.A() - a, 1);
        EXPECT_EQ(rep.cs_bound, cs);
        EXPECT_EQ(rep.ca_bound, static_cast<long>(sc.K) * sc.N * sc.F * sc.T_f);
        EXPECT_TRUE(rep.cs_within);
        EXPECT_TRUE(rep.ca_within);
        for (auto& rec : r.history.rounds) {
            EXPECT_LE(rec.cs_proposals, cs);
            EXPECT_LE(rec.ca_proposals, rep.ca_bound);
            EXPECT_GT(rec.cs_proposals, 0);
        }
    }
}

TEST(Alternate, InitialSubcarriersRespectQuota) {
    NetworkScenario sc = testutil::scenario(3, 2, 2, 6);
    const ChannelSet ch = generate_channels(sc, 3);
    const IntMat nu = initial_subcarriers(sc, ch);
    for (int k = 0; k < sc.K; ++k) EXPECT_EQ(nu.row(k).sum(), 1);
    for (int n = 0; n < sc.N; ++n) EXPECT_LE(nu.col(n).sum(), sc.q_max);
}

TEST(RoundRelaxation, IntegralSharesRoundToThemselves) {
    NetworkScenario sc = testutil::scenario(3, 2, 3, 4);
    const ChannelSet ch = generate_channels(sc, 4);
    AssignmentState want(4, 6, 3);
    for (int k = 0; k < 4; ++k) {
        want.nu(k, k % 3) = 1;
        want.chi(k, k) = want.chi(k, (k + 2) % 6) = 1;
    }
    RelaxedShares s;
    s.sub.assign(4, std::vector<double>(3, 0.0));
    s.node.assign(4, std::vector<std::vector<double>>(3, std::vector<double>(6, 0.0)));
    for (int k = 0; k < 4; ++k)
        for (int n = 0; n < 3; ++n) {
            s.sub[k][n] = want.nu(k, n);
            for (int a = 0; a < 6; ++a) s.node[k][n][a] = want.nu(k, n) * want.chi(k, a);
        }
    int repairs = -1;
    bool integral = false;
    const AssignmentState got = round_relaxation(sc, ch, s, 0.5, &repairs, &integral);
    EXPECT_EQ(got, want);
    EXPECT_EQ(repairs, 0);
    EXPECT_TRUE(integral);
}

TEST(RoundRelaxation, FractionalSharesRespectQuotas) {
    NetworkScenario sc = testutil::scenario(3, 2, 2, 6);
    sc.q_max = 2;
    sc.F_max = 2;
    sc.N_hat_a = 2;
    const ChannelSet ch = generate_channels(sc, 5);
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        RelaxedShares s;
        s.sub.assign(6, std::vector<double>(2));
        s.node.assign(6, std::vector<std::vector<double>>(2, std::vector<double>(6)));
        for (int k = 0; k < 6; ++k)
            for (int n = 0; n < 2; ++n) {
                s.sub[k][n] = rng.uniform();
                for (int a = 0; a < 6; ++a) s.node[k][n][a] = rng.uniform();
            }
        bool integral = true;
        const AssignmentState got = round_relaxation(sc, ch, s, 0.5, nullptr, &integral);
        EXPECT_TRUE(got.quota_violations(sc).empty());
        EXPECT_FALSE(integral);
        for (int k = 0; k < 6; ++k) EXPECT_EQ(got.nu.row(k).sum() > 0, got.chi.row(k).sum() > 0);
    }
}

TEST(JointSca, RoundedOutputIsFeasibleAndOftenBeatsAlternation) {
    NetworkScenario sc = testutil::scenario(3, 2, 4, 2);
    int wins = 0, runs = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        const JointResult j = joint_sca(sc, ch, RobustMode::Bernstein);
        const RunResult a = alternate(sc, ch, RobustMode::Bernstein);
        if (!j.feasible || !a.feasible) continue;
        ++runs;
        EXPECT_TRUE(j.asg.quota_violations(sc).empty());
        EXPECT_TRUE(audit_solution(j.asg, j.sol, sc, ch).empty());
        wins += j.sum_rate >= a.sum_rate * (1 - 1e-6);
    }
    EXPECT_GE(runs, 18);
    EXPECT_GE(wins, 10);
}
