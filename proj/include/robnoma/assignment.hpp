#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "scenario.hpp"

namespace robnoma {

// Binary node association chi (K x A) and subcarrier allocation nu (K x N).
struct AssignmentState {
    Eigen::MatrixXi chi;
    Eigen::MatrixXi nu;

    AssignmentState() = default;
    AssignmentState(int K, int A, int N) : chi(Eigen::MatrixXi::Zero(K, A)), nu(Eigen::MatrixXi::Zero(K, N)) {}

    int K() const { return static_cast<int>(chi.rows()); }
    int A() const { return static_cast<int>(chi.cols()); }
    int N() const { return static_cast<int>(nu.cols()); }

    int rho(int k, int n, int a) const { return chi(k, a) * nu(k, n); }

    std::vector<int> nodes_of(int k) const {
        std::vector<int> r;
        for (int a = 0; a < A(); ++a)
            if (chi(k, a)) r.push_back(a);
        return r;
    }
    std::vector<int> users_on_node(int a) const {
        std::vector<int> r;
        for (int k = 0; k < K(); ++k)
            if (chi(k, a)) r.push_back(k);
        return r;
    }
    std::vector<int> users_on_subcarrier(int n) const {
        std::vector<int> r;
        for (int k = 0; k < K(); ++k)
            if (nu(k, n)) r.push_back(k);
        return r;
    }
    int subcarrier_of(int k) const {
        for (int n = 0; n < N(); ++n)
            if (nu(k, n)) return n;
        return -1;
    }
    // Nodes of k when k holds subcarrier n, empty otherwise.
    std::vector<int> support(int k, int n) const { return nu(k, n) ? nodes_of(k) : std::vector<int>{}; }
    bool active(int k, int n) const { return nu(k, n) && chi.row(k).sum() > 0; }

    // Human-readable list of quota violations; empty when all hold.
    std::vector<std::string> quota_violations(const NetworkScenario& sc) const {
        std::vector<std::string> out;
        if (K() != sc.K || A() != sc.A() || N() != sc.N) {
            out.push_back("dimension mismatch");
            return out;
        }
        for (int k = 0; k < K(); ++k) {
            if (chi.row(k).sum() > sc.F_max) out.push_back("node quota of user " + std::to_string(k));
            if (nu.row(k).sum() > 1) out.push_back("subcarrier count of user " + std::to_string(k));
        }
        for (int a = 0; a < A(); ++a)
            if (chi.col(a).sum() > sc.N_hat_a) out.push_back("user quota of node " + std::to_string(a));
        for (int n = 0; n < N(); ++n)
            if (nu.col(n).sum() > sc.q_max) out.push_back("user quota of subcarrier " + std::to_string(n));
        for (Eigen::Index i = 0; i < chi.size(); ++i)
            if (chi.data()[i] != 0 && chi.data()[i] != 1) out.push_back("chi is not binary");
        for (Eigen::Index i = 0; i < nu.size(); ++i)
            if (nu.data()[i] != 0 && nu.data()[i] != 1) out.push_back("nu is not binary");
        return out;
    }

    bool operator==(const AssignmentState& o) const { return chi == o.chi && nu == o.nu; }
};

}  // namespace robnoma
