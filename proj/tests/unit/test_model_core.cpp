#include <cmath>

#include <gtest/gtest.h>

#include <robnoma/assignment.hpp>
#include <robnoma/rate.hpp>

#include "helpers.hpp"

using namespace robnoma;
using testutil::zero_channels;

namespace {

// Independent recomputation with explicit loops over antennas and users.
double naive_sinr(const std::vector<CVec>& w, const AssignmentState& asg, const ChannelSet& ch, int k, int n,
                  double s2) {
    auto gain = [&](int rx, int tx) {
        cplx s = 0.0;
        for (int a = 0; a < ch.A; ++a)
            if (asg.chi(tx, a) && asg.nu(tx, n)) s += std::conj(ch.hF(rx, n)(a)) * w[tx * ch.N + n](a);
        return std::norm(s);
    };
    double ifm = 0.0;
    {
        cplx s = 0.0;
        for (int t = 0; t < ch.T_m; ++t) s += std::conj(ch.hFM(k, n)(t)) * ch.m[n](t);
        ifm = std::norm(s);
    }
    double nk = 0.0;
    for (int a = 0; a < ch.A; ++a) nk += std::norm(ch.hF(k, n)(a));
    double interf = 0.0;
    for (int i = 0; i < ch.K; ++i) {
        if (i == k || !asg.nu(i, n)) continue;
        double ni = 0.0;
        for (int a = 0; a < ch.A; ++a) ni += std::norm(ch.hF(i, n)(a));
        if (ni > nk || (ni == nk && i < k)) interf += gain(k, i);
    }
    return gain(k, k) / (ifm + interf + s2);
}

std::vector<CVec> random_w(Rng& rng, int count, int A) {
    std::vector<CVec> w;
    for (int i = 0; i < count; ++i) w.push_back(rng.complex_normal_vector(A, 0.1));
    return w;
}

AssignmentState random_assignment(Rng& rng, int K, int A, int N) {
    AssignmentState asg(K, A, N);
    for (int k = 0; k < K; ++k) {
        asg.nu(k, rng.next() % N) = 1;
        for (int a = 0; a < A; ++a) asg.chi(k, a) = rng.uniform() < 0.6;
        if (asg.chi.row(k).sum() == 0) asg.chi(k, rng.next() % A) = 1;
    }
    return asg;
}

}  // namespace

TEST(Sinr, SingleUserClosedFormGivesHundred) {
    ChannelSet ch = zero_channels(1, 1, 1, 2);
    ch.h_F_bar[0](0) = 1.0;
    ch.h_FM_bar[0](0) = 1.0;
    ch.m[0](1) = 1.0;
    AssignmentState asg(1, 1, 1);
    asg.chi(0, 0) = asg.nu(0, 0) = 1;
    std::vector<CMat> W{CMat::Constant(1, 1, 1e-2)};
    EXPECT_NEAR(sinr(W, asg, ch, 0, 0, 1e-4), 100.0, 1e-9);
    EXPECT_NEAR(rate(W, asg, ch, 0, 0, 1e-4), std::log2(101.0), 1e-12);
}

TEST(Sinr, ZeroMaskGivesZero) {
    ChannelSet ch = zero_channels(1, 1, 2, 1);
    ch.h_F_bar[0] << 1.0, 0.5;
    AssignmentState asg(1, 2, 1);
    asg.nu(0, 0) = 1;
    std::vector<CMat> W{CMat::Identity(2, 2)};
    EXPECT_EQ(sinr(W, asg, ch, 0, 0, 1e-4), 0.0);
    asg.chi(0, 0) = 1;
    asg.nu(0, 0) = 0;
    EXPECT_EQ(sinr(W, asg, ch, 0, 0, 1e-4), 0.0);
}

TEST(Sinr, RejectsBadInputs) {
    ChannelSet ch = zero_channels(1, 1, 2, 1);
    AssignmentState asg(1, 2, 1);
    std::vector<CMat> W{CMat::Identity(2, 2)};
    EXPECT_THROW(sinr(W, asg, ch, 0, 0, 0.0), ParameterError);
    std::vector<CMat> bad{CMat::Identity(3, 3)};
    EXPECT_THROW(sinr(bad, asg, ch, 0, 0, 1e-4), StructuralError);
    AssignmentState wrong(2, 2, 1);
    EXPECT_THROW(sinr(W, wrong, ch, 0, 0, 1e-4), StructuralError);
}

TEST(Sinr, TwoUserInstanceMatchesNaiveLoop) {
    NetworkScenario sc = testutil::scenario(2, 1, 1, 2);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        AssignmentState asg(2, 2, 1);
        asg.chi.setOnes();
        asg.nu.setOnes();
        Rng rng(seed + 100);
        const auto w = random_w(rng, 2, 2);
        const auto W = outer_products(w);
        for (int k = 0; k < 2; ++k)
            EXPECT_NEAR(sinr(W, asg, ch, k, 0, 1e-4), naive_sinr(w, asg, ch, k, 0, 1e-4),
                        1e-9 * (1.0 + naive_sinr(w, asg, ch, k, 0, 1e-4)));
    }
}

TEST(Rate, ArithmeticExamples) {
    EXPECT_EQ(rate_from_sinr(0.0), 0.0);
    EXPECT_DOUBLE_EQ(rate_from_sinr(1.0), 1.0);
    EXPECT_NEAR(rate_from_sinr(100.0), 6.658211482751795, 1e-12);
}

TEST(SumRate, ZeroAndSinglePair) {
    NetworkScenario sc = testutil::scenario(2, 2, 2, 3);
    const ChannelSet ch = generate_channels(sc, 5);
    Rng rng(9);
    AssignmentState asg = random_assignment(rng, 3, 4, 2);
    std::vector<CMat> Z(6, CMat::Zero(4, 4));
    EXPECT_EQ(sum_rate(Z, asg, ch, 1e-4), 0.0);
    AssignmentState one(3, 4, 2);
    one.chi(1, 2) = one.chi(1, 3) = 1;
    one.nu(1, 1) = 1;
    const auto W = outer_products(random_w(rng, 6, 4));
    EXPECT_DOUBLE_EQ(sum_rate(W, one, ch, 1e-4), rate(W, one, ch, 1, 1, 1e-4));
}

TEST(SumRate, RandomInstanceMatchesNaiveDoubleLoop) {
    NetworkScenario sc = testutil::scenario(3, 2, 3, 6);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        Rng rng(seed * 7);
        const AssignmentState asg = random_assignment(rng, 6, 6, 3);
        const auto w = random_w(rng, 18, 6);
        double naive = 0.0;
        for (int k = 0; k < 6; ++k)
            for (int n = 0; n < 3; ++n)
                if (asg.nu(k, n)) naive += std::log2(1.0 + naive_sinr(w, asg, ch, k, n, 1e-4));
        EXPECT_NEAR(sum_rate(outer_products(w), asg, ch, 1e-4), naive, 1e-9 * (1.0 + naive));
    }
}

TEST(Sinr, InvariantToMaskedEntries) {
    NetworkScenario sc = testutil::scenario(3, 2, 2, 4);
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        Rng rng(seed + 55);
        const AssignmentState asg = random_assignment(rng, 4, 6, 2);
        auto w = random_w(rng, 8, 6);
        const auto W = outer_products(w);
        for (int k = 0; k < 4; ++k)
            for (int n = 0; n < 2; ++n)
                for (int a = 0; a < 6; ++a)
                    if (!asg.rho(k, n, a)) w[k * 2 + n](a) = rng.complex_normal(5.0);
        const auto W2 = outer_products(w);
        for (int k = 0; k < 4; ++k)
            for (int n = 0; n < 2; ++n)
                EXPECT_NEAR(sinr(W, asg, ch, k, n, 1e-4), sinr(W2, asg, ch, k, n, 1e-4),
                            1e-10 * (1.0 + sinr(W, asg, ch, k, n, 1e-4)));
    }
}

TEST(Ordering, ExactlyOneOfEachPairInterferes) {
    NetworkScenario sc = testutil::scenario(2, 2, 3, 5);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        for (int n = 0; n < 3; ++n)
            for (int i = 0; i < 5; ++i) {
                EXPECT_FALSE(stronger(ch, i, i, n));
                for (int k = i + 1; k < 5; ++k) EXPECT_NE(stronger(ch, i, k, n), stronger(ch, k, i, n));
            }
    }
}

TEST(Ordering, TiesGoToLowerIndex) {
    ChannelSet ch = zero_channels(3, 1, 2, 1);
    for (int k = 0; k < 3; ++k) ch.h_F_bar[k] << 1.0, 0.0;
    EXPECT_TRUE(stronger(ch, 0, 1, 0));
    EXPECT_FALSE(stronger(ch, 1, 0, 0));
    EXPECT_TRUE(stronger(ch, 1, 2, 0));
}

TEST(Rate, MonotoneInSignalAndInterference) {
    NetworkScenario sc = testutil::scenario(2, 2, 1, 3);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ChannelSet ch = generate_channels(sc, seed);
        AssignmentState asg(3, 4, 1);
        asg.chi.setOnes();
        asg.nu.setOnes();
        Rng rng(seed);
        auto W = outer_products(random_w(rng, 3, 4));
        for (int k = 0; k < 3; ++k) {
            const double r0 = rate(W, asg, ch, k, 0, 1e-4);
            auto up = W;
            up[k] *= 1.5;
            EXPECT_GT(rate(up, asg, ch, k, 0, 1e-4), r0);
            for (int i : stronger_set(ch, asg, k, 0)) {
                auto more = W;
                more[i] *= 1.5;
                EXPECT_LE(rate(more, asg, ch, k, 0, 1e-4), r0);
            }
        }
    }
}

TEST(Assignment, QuotaViolationsAreListed) {
    NetworkScenario sc = testutil::scenario(2, 1, 2, 2);
    sc.F_max = 1;
    sc.N_hat_a = 1;
    sc.q_max = 1;
    AssignmentState asg(2, 2, 2);
    EXPECT_TRUE(asg.quota_violations(sc).empty());
    asg.chi(0, 0) = asg.chi(0, 1) = 1;
    asg.chi(1, 0) = 1;
    asg.nu(0, 0) = asg.nu(0, 1) = 1;
    asg.nu(1, 0) = 1;
    const auto v = asg.quota_violations(sc);
    EXPECT_EQ(v.size(), 4u);
    asg = AssignmentState(2, 2, 2);
    asg.chi(0, 0) = 2;
    EXPECT_EQ(asg.quota_violations(sc).size(), 3u);
}

TEST(Scenario, ValidationAndUnits) {
    NetworkScenario sc;
    EXPECT_NO_THROW(sc.validate());
    EXPECT_EQ(sc.A(), 6);
    EXPECT_NEAR(dbm_to_watt(40.0), 10.0, 1e-12);
    EXPECT_NEAR(watt_to_dbm(1e-3), 0.0, 1e-12);
    EXPECT_NEAR(sc.gamma(), std::exp2(0.3) - 1.0, 1e-15);
    sc.sigma2 = 0;
    EXPECT_THROW(sc.validate(), ParameterError);
    sc = NetworkScenario{};
    sc.F_max = 7;
    EXPECT_THROW(sc.validate(), ParameterError);
    sc = NetworkScenario{};
    sc.alpha = 1.0;
    EXPECT_THROW(sc.validate(), ParameterError);
    EXPECT_THROW(parse_mode("robust"), ParameterError);
    EXPECT_EQ(parse_mode("Bernstein"), RobustMode::Bernstein);
}
