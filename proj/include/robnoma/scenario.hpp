#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "errors.hpp"

namespace robnoma {

enum class RobustMode { Perfect, WorstCase, Bernstein };

inline std::string to_string(RobustMode m) {
    switch (m) {
        case RobustMode::Perfect: return "Perfect";
        case RobustMode::WorstCase: return "WorstCase";
        case RobustMode::Bernstein: return "Bernstein";
    }
    return "?";
}

inline RobustMode parse_mode(const std::string& s) {
    if (s == "Perfect" || s == "perfect") return RobustMode::Perfect;
    if (s == "WorstCase" || s == "worstcase" || s == "worst-case") return RobustMode::WorstCase;
    if (s == "Bernstein" || s == "bernstein" || s == "stochastic") return RobustMode::Bernstein;
    throw ParameterError("unknown mode: " + s);
}

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

// Static topology, quotas and physical parameters. Powers in watts.
struct NetworkScenario {
    int F = 3;          // femto base stations
    int T_f = 2;        // antennas per FBS
    int T_m = 8;        // MBS antennas
    int N = 10;         // subcarriers
    int K = 6;          // femto users
    int F_max = 3;      // max cooperating nodes per user
    int N_hat_a = 3;    // max users per antenna node
    int q_max = 3;      // max users per subcarrier
    double P_max = 10.0;
    double R_k = 0.3;
    double eps_M = 0.2;
    double sigma2 = 1e-4;
    double alpha = 0.2;
    double beta = 0.2;
    double Upsilon_CS = 100.0;
    double Upsilon_CA = 100.0;
    double c_MF = 5.0;
    double c_i = 0.2;
    double eps_stop = 0.05;
    double eps_c = 1e-3;

    // channel statistics
    double var_h_F = 1.0;
    double var_h_FM = 0.05;
    double var_h_MF = 0.05;
    double var_h_MBS = 1.0;  // MBS to MUE link, only used to point m[n]
    double var_e_F = 0.001;
    double var_e_FM = 0.001;
    double var_e_MF = 0.001;
    double zeta = 0.05;
    double kappa = 0.05;
    double eta = 0.2;
    double P_MBS = 1.0;

    std::uint64_t seed = 1;

    int A() const { return F * T_f; }
    int fbs_of(int a) const { return a / T_f; }
    double gamma() const { return std::exp2(R_k) - 1.0; }

    void validate() const {
        require_parameter(F >= 1 && T_f >= 1 && T_m >= 1 && N >= 1 && K >= 1, "counts must be positive");
        require_parameter(F_max >= 1 && F_max <= A(), "F_max must lie in [1, A]");
        require_parameter(q_max >= 1 && q_max <= K, "q_max must lie in [1, K]");
        require_parameter(N_hat_a >= 0, "N_hat_a must be nonnegative");
        require_parameter(alpha > 0 && alpha < 1 && beta > 0 && beta < 1, "alpha, beta must lie in (0,1)");
        require_parameter(P_max > 0, "P_max must be positive");
        require_parameter(eps_M > 0, "eps_M must be positive");
        require_parameter(sigma2 > 0, "sigma2 must be positive");
        require_parameter(R_k >= 0, "R_k must be nonnegative");
        require_parameter(zeta >= 0 && kappa >= 0 && eta >= 0, "radii must be nonnegative");
        require_parameter(var_h_F >= 0 && var_h_FM >= 0 && var_h_MF >= 0 && var_h_MBS >= 0,
                          "variances must be nonnegative");
        require_parameter(var_e_F >= 0 && var_e_FM >= 0 && var_e_MF >= 0, "variances must be nonnegative");
        require_parameter(P_MBS >= 0, "P_MBS must be nonnegative");
        require_parameter(eps_stop >= 0 && eps_c >= 0, "tolerances must be nonnegative");
    }
};

}  // namespace robnoma
