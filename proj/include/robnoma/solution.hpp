#pragma once

#include <vector>

#include "linalg.hpp"

namespace robnoma {

// Per-(user, subcarrier) SDR matrices and recovered vectors, indexed k*N + n.
struct BeamformingSolution {
    int K = 0, N = 0, A = 0;
    std::vector<CMat> W;
    std::vector<CVec> w;
    std::vector<double> x, xp, y;
    std::vector<double> objective_trace;
    std::vector<double> residual_trace;
    std::vector<double> rank_gap;  // lambda_2 / lambda_1 per (k, n)
    int outer_iterations = 0;
    long solver_iterations = 0;
    bool converged = false;
    bool anomaly = false;

    BeamformingSolution() = default;
    BeamformingSolution(int K_, int N_, int A_)
        : K(K_), N(N_), A(A_),
          W(K_ * N_, CMat::Zero(A_, A_)),
          w(K_ * N_, CVec::Zero(A_)),
          x(K_ * N_, 0.0), xp(K_ * N_, 0.0), y(K_ * N_, 0.0),
          rank_gap(K_ * N_, 0.0) {}

    CMat& Wk(int k, int n) { return W[k * N + n]; }
    const CMat& Wk(int k, int n) const { return W[k * N + n]; }
    CVec& wk(int k, int n) { return w[k * N + n]; }
    const CVec& wk(int k, int n) const { return w[k * N + n]; }

    // Replace W by the outer products of the recovered vectors.
    void set_rank_one_from_w() {
        for (std::size_t i = 0; i < W.size(); ++i) W[i] = outer(w[i]);
    }
};

}  // namespace robnoma
