#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace robnoma {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline double ln2() { return 0.69314718055994530942; }

inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

inline CMat outer(const CVec& v) { return v * v.adjoint(); }

// Real trace of the product of two Hermitian matrices.
inline double trace_product(const CMat& a, const CMat& b) {
    return (a.cwiseProduct(b.transpose())).sum().real();
}

// Hermitian square root with eigenvalues below tol clamped to zero.
inline CMat hermitian_sqrt(const CMat& c, double tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(c));
    RVec lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = lam(i) > tol ? std::sqrt(lam(i)) : 0.0;
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

inline double lambda_max(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

inline double lambda_min(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// Restriction of a square matrix to the rows/columns listed in idx.
inline CMat restrict(const CMat& m, const std::vector<int>& idx) {
    const int s = static_cast<int>(idx.size());
    CMat r(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) r(i, j) = m(idx[i], idx[j]);
    return r;
}

inline CVec restrict(const CVec& v, const std::vector<int>& idx) {
    CVec r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) r(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return r;
}

// Inverse of restrict: embeds a block into an n x n zero matrix.
inline CMat embed(const CMat& block, const std::vector<int>& idx, int n) {
    CMat r = CMat::Zero(n, n);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) r(idx[i], idx[j]) = block(i, j);
    return r;
}

inline CVec embed(const CVec& block, const std::vector<int>& idx, int n) {
    CVec r = CVec::Zero(n);
    for (std::size_t i = 0; i < idx.size(); ++i) r(idx[i]) = block(static_cast<Eigen::Index>(i));
    return r;
}

}  // namespace robnoma
