#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "../errors.hpp"
#include "../linalg.hpp"
#include "../rng.hpp"

namespace robnoma::conic {

struct RandomizationResult {
    std::vector<CVec> w;
    bool feasible = false;
    bool rank_one = false;
    double objective = -std::numeric_limits<double>::infinity();
    double best_margin = -std::numeric_limits<double>::infinity();
    int feasible_candidates = 0;
};

// Principal eigenvector scaled by sqrt(lambda_max), and lambda_2 / lambda_1.
inline CVec principal_component(const CMat& W, double* ratio = nullptr) {
    const int n = static_cast<int>(W.rows());
    if (n == 0) {
        if (ratio) *ratio = 0.0;
        return CVec();
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(W));
    const RVec& lam = es.eigenvalues();
    const double l1 = lam(n - 1);
    if (ratio) *ratio = (l1 > 0 && n > 1) ? std::max(lam(n - 2), 0.0) / l1 : 0.0;
    return std::sqrt(std::max(l1, 0.0)) * es.eigenvectors().col(n - 1);
}

// Joint Gaussian randomization over several PSD blocks.
//   margin(w)    >= 0 iff the candidate is feasible (larger is better when infeasible)
//   objective(w) value to maximize among feasible candidates
//   rescale(w)   maps a candidate back into the power budget
// Blocks that are rank one within rank_tol are replaced by their principal
// component; if every block is, that candidate is returned when feasible.
inline RandomizationResult gaussian_randomization(const std::vector<CMat>& W,
                                                  const std::function<double(const std::vector<CVec>&)>& margin,
                                                  const std::function<double(const std::vector<CVec>&)>& objective,
                                                  const std::function<void(std::vector<CVec>&)>& rescale,
                                                  int trials, std::uint64_t seed, double rank_tol = 1e-3) {
    require_parameter(trials >= 0, "trials must be nonnegative");
    RandomizationResult best;
    const std::size_t B = W.size();
    std::vector<CVec> principal(B);
    std::vector<CMat> factor(B);
    std::vector<double> power(B);
    bool all_rank_one = true;
    for (std::size_t b = 0; b < B; ++b) {
        double ratio = 0.0;
        principal[b] = principal_component(W[b], &ratio);
        if (ratio > rank_tol) all_rank_one = false;
        power[b] = std::max(W[b].trace().real(), 0.0);
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(W[b]));
        factor[b] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    auto consider = [&](std::vector<CVec> cand) {
        rescale(cand);
        const double m = margin(cand);
        if (m >= 0.0) {
            ++best.feasible_candidates;
            const double o = objective(cand);
            if (!best.feasible || o > best.objective) {
                best.feasible = true;
                best.objective = o;
                best.best_margin = m;
                best.w = cand;
            }
        } else if (!best.feasible && m > best.best_margin) {
            best.best_margin = m;
            best.w = cand;
        }
    };

    consider(principal);
    if (all_rank_one && best.feasible) {
        best.rank_one = true;
        return best;
    }
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        std::vector<CVec> cand(B);
        for (std::size_t b = 0; b < B; ++b) {
            const int n = static_cast<int>(W[b].rows());
            CVec v = factor[b] * rng.complex_normal_vector(n);
            const double nv = v.squaredNorm();
            if (nv > 0) v *= std::sqrt(power[b] / nv);
            cand[b] = v;
        }
        consider(std::move(cand));
    }
    return best;
}

// Single-matrix form with a plain power cap ||w||^2 <= power_cap.
inline RandomizationResult gaussian_randomization(const CMat& W, const std::function<double(const CVec&)>& margin,
                                                  const std::function<double(const CVec&)>& objective,
                                                  double power_cap, int trials, std::uint64_t seed,
                                                  double rank_tol = 1e-3) {
    return gaussian_randomization(
        std::vector<CMat>{W}, [&](const std::vector<CVec>& w) { return margin(w[0]); },
        [&](const std::vector<CVec>& w) { return objective(w[0]); },
        [&](std::vector<CVec>& w) {
            const double p = w[0].squaredNorm();
            if (p > power_cap && p > 0) w[0] *= std::sqrt(power_cap / p);
        },
        trials, seed, rank_tol);
}

}  // namespace robnoma::conic
