#pragma once

#include <algorithm>
#include <cmath>

#include "../errors.hpp"
#include "../linalg.hpp"
#include "program.hpp"

namespace robnoma::conic {

// Euclidean projection of (t, u) onto {||u|| <= t}, in place.
inline void project_soc(double* v, int len) {
    if (len <= 1) {
        v[0] = std::max(v[0], 0.0);
        return;
    }
    const double t = v[0];
    double nu = 0.0;
    for (int i = 1; i < len; ++i) nu += v[i] * v[i];
    nu = std::sqrt(nu);
    if (nu <= t) return;
    if (nu <= -t) {
        std::fill(v, v + len, 0.0);
        return;
    }
    const double a = 0.5 * (t + nu);
    v[0] = a;
    const double s = a / nu;
    for (int i = 1; i < len; ++i) v[i] *= s;
}

// Projection of hvec coordinates onto the PSD cone of order n, in place.
inline void project_psd_hvec(double* v, int n) {
    if (n == 1) {
        v[0] = std::max(v[0], 0.0);
        return;
    }
    CMat X = hmat(v, n);
    Eigen::SelfAdjointEigenSolver<CMat> es(X);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in PSD projection");
    const RVec& lam = es.eigenvalues();
    if (lam(0) >= 0.0) return;
    RVec cl = lam.cwiseMax(0.0);
    CMat P = es.eigenvectors() * cl.asDiagonal() * es.eigenvectors().adjoint();
    RVec p = hvec(P);
    std::copy(p.data(), p.data() + p.size(), v);
}

// Frobenius-nearest PSD matrix; the input is symmetrized first.
inline CMat psd_project(const CMat& M) {
    require_structure(M.rows() == M.cols(), "psd_project needs a square matrix");
    if (M.size() == 0) return M;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(M));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in psd_project");
    RVec cl = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * cl.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace robnoma::conic
