#pragma once

#include <cmath>
#include <vector>

#include "assignment.hpp"
#include "channels.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace robnoma {

// NOMA decoding order on subcarrier n: true when user i is ordered above user k
// (larger estimated norm, lower index on ties). Only stronger users interfere.
inline bool stronger(const ChannelSet& ch, int i, int k, int n) {
    if (i == k) return false;
    const double ni = ch.hF(i, n).squaredNorm();
    const double nk = ch.hF(k, n).squaredNorm();
    if (ni != nk) return ni > nk;
    return i < k;
}

// Users on subcarrier n (per nu) that are stronger than k.
inline std::vector<int> stronger_set(const ChannelSet& ch, const AssignmentState& asg, int k, int n) {
    std::vector<int> r;
    for (int i = 0; i < asg.K(); ++i)
        if (i != k && asg.nu(i, n) && stronger(ch, i, k, n)) r.push_back(i);
    return r;
}

// W o rho for user k on subcarrier n.
inline CMat masked(const CMat& W, const AssignmentState& asg, int k, int n) {
    const int A = asg.A();
    CMat r = CMat::Zero(A, A);
    if (!asg.nu(k, n)) return r;
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b)
            if (asg.chi(k, a) && asg.chi(k, b)) r(a, b) = W(a, b);
    return r;
}

inline double quad_form(const CVec& h, const CMat& W) { return (h.adjoint() * W * h)(0, 0).real(); }

namespace detail {
inline void check_dims(const std::vector<CMat>& W, const AssignmentState& asg, const ChannelSet& ch) {
    require_structure(asg.K() == ch.K && asg.A() == ch.A && asg.N() == ch.N, "assignment/channel dimension mismatch");
    require_structure(W.size() == static_cast<std::size_t>(ch.K * ch.N), "W count mismatch");
    for (const auto& m : W) require_structure(m.rows() == ch.A && m.cols() == ch.A, "W block dimension mismatch");
}
}  // namespace detail

// SINR of user k on subcarrier n for SDR matrices W (indexed k*N + n).
inline double sinr(const std::vector<CMat>& W, const AssignmentState& asg, const ChannelSet& ch, int k, int n,
                   double sigma2) {
    detail::check_dims(W, asg, ch);
    require_parameter(sigma2 > 0, "sigma2 must be positive");
    const CVec& h = ch.hF(k, n);
    const double num = quad_form(h, masked(W[k * ch.N + n], asg, k, n));
    if (num <= 0.0) return 0.0;
    double interf = 0.0;
    for (int i : stronger_set(ch, asg, k, n)) interf += quad_form(h, masked(W[i * ch.N + n], asg, i, n));
    return num / (ch.mbs_interference(k, n) + interf + sigma2);
}

inline double rate_from_sinr(double s) { return std::log2(1.0 + s); }

inline double rate(const std::vector<CMat>& W, const AssignmentState& asg, const ChannelSet& ch, int k, int n,
                   double sigma2) {
    return rate_from_sinr(sinr(W, asg, ch, k, n, sigma2));
}

inline double sum_rate(const std::vector<CMat>& W, const AssignmentState& asg, const ChannelSet& ch, double sigma2) {
    double s = 0.0;
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n)
            if (asg.nu(k, n)) s += rate(W, asg, ch, k, n, sigma2);
    return s;
}

inline std::vector<CMat> outer_products(const std::vector<CVec>& w) {
    std::vector<CMat> W;
    W.reserve(w.size());
    for (const auto& v : w) W.push_back(outer(v));
    return W;
}

}  // namespace robnoma
