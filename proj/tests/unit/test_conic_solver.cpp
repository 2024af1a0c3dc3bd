#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include <robnoma/conic/cones.hpp>
#include <robnoma/conic/randomization.hpp>
#include <robnoma/conic/solver.hpp>
#include <robnoma/rng.hpp>

#include "helpers.hpp"

using namespace robnoma;
using namespace robnoma::conic;
using testutil::random_hermitian;

namespace {

RVec random_real(Rng& rng, int n, double scale = 1.0) {
    RVec v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

RVec soc_project(RVec v) {
    project_soc(v.data(), static_cast<int>(v.size()));
    return v;
}

RVec psd_project_hvec(RVec v, int n) {
    project_psd_hvec(v.data(), n);
    return v;
}

}  // namespace

TEST(ConicSolver, TraceConstrainedSdpGivesLargestEigenvalue) {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + t % 4;
        CMat C = random_hermitian(rng, n);
        ConicProgram p;
        int X = p.add_hermitian("X", n);
        p.add_zero(p.trace_with(X, CMat::Identity(n, n)) + LinExpr(-1.0), "trace");
        p.add_psd_block(X, "psd");
        p.set_objective(p.trace_with(X, C), false);
        SolverSettings st;
        st.tol = 1e-8;
        auto r = solve(p, st);
        ASSERT_EQ(r.report.status, SolveStatus::Optimal);
        EXPECT_NEAR(r.report.objective, lambda_max(C), 1e-6) << "n=" << n << " iters=" << r.report.iterations;
        EXPECT_LE(r.report.primal_residual, r.report.eps_primal);
        EXPECT_LE(r.report.dual_residual, r.report.eps_dual);
    }
}

TEST(ConicSolver, SocWithFixedTailRecoversNorm) {
    ConicProgram p;
    int t = p.add_scalars("t", 1);
    std::vector<LinExpr> rows{p.scalar(t), LinExpr(3.0), LinExpr(-4.0)};
    p.add_soc(rows, "cone");
    p.set_objective(p.scalar(t));
    auto r = solve(p);
    ASSERT_EQ(r.report.status, SolveStatus::Optimal);
    EXPECT_NEAR(r.x(0), 5.0, 1e-5);
}

TEST(ConicSolver, InfeasibleProgramIsFlagged) {
    ConicProgram p;
    int v = p.add_scalars("v", 1);
    p.add_nonneg(p.scalar(v) + LinExpr(-2.0));
    p.add_nonneg(LinExpr(1.0) - p.scalar(v));
    p.set_objective(p.scalar(v));
    auto r = solve(p);
    EXPECT_EQ(r.report.status, SolveStatus::InfeasibleSuspected);
}

TEST(ConicSolver, IterationCapGivesMaxIters) {
    Rng rng(3);
    ConicProgram p;
    int X = p.add_hermitian("X", 4);
    p.add_zero(p.trace_with(X, CMat::Identity(4, 4)) + LinExpr(-1.0));
    p.add_psd_block(X);
    p.set_objective(p.trace_with(X, random_hermitian(rng, 4)), false);
    SolverSettings st;
    st.max_iters = 5;
    st.check_every = 1;
    auto r = solve(p, st);
    EXPECT_EQ(r.report.status, SolveStatus::MaxIters);
    EXPECT_EQ(r.report.iterations, 5);
}

TEST(ConicSolver, RepeatedSolvesAreBitIdentical) {
    Rng rng(4);
    ConicProgram p;
    int X = p.add_hermitian("X", 3);
    p.add_zero(p.trace_with(X, CMat::Identity(3, 3)) + LinExpr(-2.0));
    p.add_psd_block(X);
    p.set_objective(p.trace_with(X, random_hermitian(rng, 3)), false);
    auto a = solve(p), b = solve(p);
    EXPECT_EQ(a.report.iterations, b.report.iterations);
    EXPECT_EQ(a.report.objective, b.report.objective);
    EXPECT_TRUE(a.x == b.x);
}

TEST(ConicProgram, RejectsUndeclaredVariables) {
    ConicProgram p;
    p.add_scalars("v", 2);
    LinExpr e;
    e.add(5, 1.0);
    EXPECT_THROW(p.add_nonneg(e), StructuralError);
    EXPECT_THROW(p.set_objective(e), StructuralError);
    EXPECT_THROW(p.add_psd(2, {LinExpr(1.0)}), StructuralError);
    ConicProgram empty;
    EXPECT_THROW(Solver s(empty), StructuralError);
}

TEST(ConicProgram, DumpListsBlocksAndConstraints) {
    ConicProgram p;
    int t = p.add_scalars("t", 1);
    int X = p.add_hermitian("X", 2);
    p.add_nonneg(p.scalar(t) + LinExpr(-1.0), "floor");
    p.add_psd_block(X, "psd");
    p.set_objective(p.scalar(t));
    const std::string d = p.dump();
    EXPECT_EQ(d.rfind("program 5 2 minimize\n", 0), 0u);
    EXPECT_NE(d.find("block t scalar 1 0\n"), std::string::npos);
    EXPECT_NE(d.find("block X hermitian 2 1\n"), std::string::npos);
    EXPECT_NE(d.find("constraint nonneg floor 1 0\n  row -1 0:1\n"), std::string::npos);
    EXPECT_NE(d.find("constraint psd psd 4 2\n"), std::string::npos);
    EXPECT_EQ(p.structure().find(':'), std::string::npos);
}

TEST(Hvec, PreservesTraceInnerProductAndRoundTrips) {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + t % 5;
        const CMat X = random_hermitian(rng, n), Y = random_hermitian(rng, n);
        EXPECT_NEAR(hvec(X).dot(hvec(Y)), (X * Y).trace().real(), 1e-10);
        EXPECT_LE((hmat(hvec(X), n) - X).norm(), 1e-12);
    }
}

TEST(PsdProject, FixedPointAndClosedForm) {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const CVec v = rng.complex_normal_vector(4);
        const CMat P = v * v.adjoint() + 0.1 * CMat::Identity(4, 4);
        EXPECT_LE((psd_project(P) - P).norm(), 1e-12 * (1.0 + P.norm()));
    }
    CMat D = CMat::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = -1.0;
    CMat expect = CMat::Zero(2, 2);
    expect(0, 0) = 1.0;
    EXPECT_LE((psd_project(D) - expect).norm(), 1e-14);
    EXPECT_THROW(psd_project(CMat::Zero(2, 3)), StructuralError);
}

TEST(PsdProject, SatisfiesMoreauDecomposition) {
    Rng rng(10);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + t % 5;
        const CMat M = random_hermitian(rng, n);
        const CMat P = psd_project(M);
        const CMat R = M - P;
        EXPECT_GE(lambda_min(P), -1e-12);
        EXPECT_LE(lambda_max(R), 1e-12);
        EXPECT_NEAR((P * R).trace().real(), 0.0, 1e-10);
        EXPECT_NEAR(P.norm(), std::sqrt((P * P).trace().real()), 1e-10);
    }
}

TEST(ConeProjections, IdempotentAndNonexpansive) {
    Rng rng(11);
    for (int t = 0; t < 10000; ++t) {
        const int len = 1 + t % 6;
        const RVec a = random_real(rng, len), b = random_real(rng, len);
        const RVec pa = soc_project(a), pb = soc_project(b);
        EXPECT_LE((soc_project(pa) - pa).norm(), 1e-12);
        EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-12);

        const int n = 1 + t % 4;
        const RVec x = random_real(rng, n * n), y = random_real(rng, n * n);
        const RVec px = psd_project_hvec(x, n), py = psd_project_hvec(y, n);
        EXPECT_LE((psd_project_hvec(px, n) - px).norm(), 1e-10);
        EXPECT_LE((px - py).norm(), (x - y).norm() + 1e-10);
    }
}

TEST(Randomization, RankOneInputReturnsItsVector) {
    Rng rng(12);
    const CVec v = rng.complex_normal_vector(3);
    auto r = gaussian_randomization(
        outer(v), [](const CVec&) { return 1.0; }, [](const CVec& w) { return w.squaredNorm(); }, 1e9, 100, 1);
    ASSERT_TRUE(r.feasible);
    EXPECT_TRUE(r.rank_one);
    const cplx phase = r.w[0].dot(v) / std::abs(r.w[0].dot(v));
    EXPECT_LE((r.w[0] * phase - v).norm(), 1e-10 * v.norm());
}

TEST(Randomization, PowerCapIsRespected) {
    auto r = gaussian_randomization(
        CMat::Identity(2, 2), [](const CVec&) { return 1.0; }, [](const CVec& w) { return w.squaredNorm(); }, 1.0, 100, 2);
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(r.w[0].squaredNorm(), 1.0 + 1e-12);
}

TEST(Randomization, HundredTrialsReachTopDecileOfReference) {
    Rng rng(13);
    const CVec a = rng.complex_normal_vector(3), b = rng.complex_normal_vector(3);
    const CMat W = outer(a) + 0.7 * outer(b);
    const CVec h = rng.complex_normal_vector(3);
    auto obj = [&](const CVec& w) { return std::norm(h.dot(w)); };
    auto feasible = [](const CVec&) { return 1.0; };
    std::vector<double> reference;
    gaussian_randomization(
        W, feasible, [&](const CVec& w) { reference.push_back(obj(w)); return obj(w); }, 1e9, 10000, 999);
    std::sort(reference.begin(), reference.end());
    const double decile = reference[reference.size() * 9 / 10];
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto r = gaussian_randomization(W, feasible, obj, 1e9, 100, seed);
        ASSERT_TRUE(r.feasible);
        EXPECT_GE(r.objective, decile) << "seed " << seed;
    }
}

TEST(Randomization, NoFeasibleCandidateKeepsBestInfeasible) {
    auto r = gaussian_randomization(
        CMat::Identity(2, 2), [](const CVec& w) { return -1.0 - w.squaredNorm(); },
        [](const CVec& w) { return w.squaredNorm(); }, 1.0, 50, 3);
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.feasible_candidates, 0);
    EXPECT_EQ(r.w.size(), 1u);
    EXPECT_LT(r.best_margin, -1.0);
}
