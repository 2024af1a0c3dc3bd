#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "scenario.hpp"

namespace robnoma {

enum class UncertaintyMode { Perfect, WorstCase, Stochastic };

// Ball radii (scalar broadcast or per-link table) and error covariances.
struct UncertaintySpec {
    UncertaintyMode mode = UncertaintyMode::Perfect;
    double zeta = 0.0;
    double kappa = 0.0;
    double eta = 0.0;
    std::vector<double> zeta_table;   // K*N, overrides zeta when non-empty
    std::vector<double> kappa_table;  // K*N
    std::vector<double> eta_table;    // N
    std::vector<CMat> C_e_F;          // K*N, A x A
    std::vector<CMat> C_e_FM;         // K*N, T_m x T_m
    std::vector<CMat> C_e_MF;         // N, A x A
    int N = 0;

    double zeta_at(int k, int n) const { return zeta_table.empty() ? zeta : zeta_table[k * N + n]; }
    double kappa_at(int k, int n) const { return kappa_table.empty() ? kappa : kappa_table[k * N + n]; }
    double eta_at(int n) const { return eta_table.empty() ? eta : eta_table[n]; }
};

struct TrueChannels {
    std::vector<CVec> h_F;
    std::vector<CVec> h_FM;
    std::vector<CVec> h_MF;
};

// Estimated channels for every link plus the uncertainty description.
// h_F is stacked with antenna a = f*T_f + t.
struct ChannelSet {
    int K = 0, N = 0, A = 0, T_m = 0;
    std::vector<CVec> h_F_bar;   // K*N, length A
    std::vector<CVec> h_FM_bar;  // K*N, length T_m
    std::vector<CVec> h_MF_bar;  // N, length A
    std::vector<CVec> m;         // N, length T_m
    UncertaintySpec uncertainty;
    std::optional<TrueChannels> truth;

    const CVec& hF(int k, int n) const { return h_F_bar[k * N + n]; }
    const CVec& hFM(int k, int n) const { return h_FM_bar[k * N + n]; }
    const CVec& hMF(int n) const { return h_MF_bar[n]; }

    // |h_FM^H m|^2 at the estimate.
    double mbs_interference(int k, int n) const { return std::norm(hFM(k, n).dot(m[n])); }

    void validate() const {
        require_structure(K >= 1 && N >= 1 && A >= 1 && T_m >= 1, "channel set dimensions must be positive");
        require_structure(h_F_bar.size() == static_cast<std::size_t>(K * N), "h_F size");
        require_structure(h_FM_bar.size() == static_cast<std::size_t>(K * N), "h_FM size");
        require_structure(h_MF_bar.size() == static_cast<std::size_t>(N), "h_MF size");
        require_structure(m.size() == static_cast<std::size_t>(N), "m size");
        for (const auto& v : h_F_bar) require_structure(v.size() == A && v.allFinite(), "h_F entry");
        for (const auto& v : h_FM_bar) require_structure(v.size() == T_m && v.allFinite(), "h_FM entry");
        for (const auto& v : h_MF_bar) require_structure(v.size() == A && v.allFinite(), "h_MF entry");
        for (const auto& v : m) require_structure(v.size() == T_m && v.allFinite(), "m entry");
    }
};

namespace detail {
enum LinkStream : std::uint64_t { kHF = 1, kHFM = 2, kHMF = 3, kHMBS = 4, kEF = 5, kEFM = 6, kEMF = 7 };
}

// Covariance square root; rejects matrices with eigenvalues below -tol.
inline CMat covariance_sqrt(const CMat& c, double tol = 1e-10) {
    require_structure(c.rows() == c.cols(), "covariance must be square");
    if (c.size() == 0) return c;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(c));
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    require_parameter(es.eigenvalues()(0) >= -tol * scale, "covariance is not positive semidefinite");
    return hermitian_sqrt(c, tol);
}

// Radii and isotropic error covariances taken from the scenario.
inline UncertaintySpec scenario_uncertainty(const NetworkScenario& sc) {
    UncertaintySpec u;
    u.mode = UncertaintyMode::Perfect;
    u.N = sc.N;
    u.zeta = sc.zeta;
    u.kappa = sc.kappa;
    u.eta = sc.eta;
    for (int i = 0; i < sc.K * sc.N; ++i) {
        u.C_e_F.push_back(sc.var_e_F * CMat::Identity(sc.A(), sc.A()));
        u.C_e_FM.push_back(sc.var_e_FM * CMat::Identity(sc.T_m, sc.T_m));
    }
    for (int n = 0; n < sc.N; ++n) u.C_e_MF.push_back(sc.var_e_MF * CMat::Identity(sc.A(), sc.A()));
    return u;
}

inline ChannelSet generate_channels(const NetworkScenario& sc, std::uint64_t seed) {
    sc.validate();
    ChannelSet ch;
    ch.K = sc.K;
    ch.N = sc.N;
    ch.A = sc.A();
    ch.T_m = sc.T_m;
    auto stream = [&](detail::LinkStream s, int i, int j) {
        return Rng(derive_seed(seed, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i),
                                      static_cast<std::uint64_t>(j)}));
    };
    for (int k = 0; k < sc.K; ++k)
        for (int n = 0; n < sc.N; ++n) {
            Rng r1 = stream(detail::kHF, k, n);
            ch.h_F_bar.push_back(r1.complex_normal_vector(ch.A, sc.var_h_F));
            Rng r2 = stream(detail::kHFM, k, n);
            ch.h_FM_bar.push_back(r2.complex_normal_vector(ch.T_m, sc.var_h_FM));
        }
    for (int n = 0; n < sc.N; ++n) {
        Rng r3 = stream(detail::kHMF, 0, n);
        ch.h_MF_bar.push_back(r3.complex_normal_vector(ch.A, sc.var_h_MF));
        Rng r4 = stream(detail::kHMBS, 0, n);
        CVec g = r4.complex_normal_vector(ch.T_m, sc.var_h_MBS);
        const double gn = g.norm();
        CVec mv = gn > 0 ? CVec(g / gn) : CVec(CVec::Unit(ch.T_m, 0));
        ch.m.push_back(std::sqrt(sc.P_MBS) * mv);
    }
    ch.uncertainty = scenario_uncertainty(sc);
    return ch;
}

enum class BallSampling { Uniform, Boundary };

// Uniform draw from the complex ball {e : ||e|| <= radius}, or from its sphere.
inline CVec sample_error_ball(int dim, double radius, Rng& rng, BallSampling how = BallSampling::Uniform) {
    require_parameter(radius >= 0, "radius must be nonnegative");
    require_structure(dim >= 1, "dimension must be positive");
    if (radius == 0.0) return CVec::Zero(dim);
    CVec g;
    double gn = 0.0;
    do {
        g = rng.complex_normal_vector(dim);
        gn = g.norm();
    } while (gn == 0.0);
    double r = radius;
    if (how == BallSampling::Uniform) r *= std::pow(rng.uniform(), 1.0 / (2.0 * dim));
    return (r / gn) * g;
}

inline CVec sample_error_ball(int dim, double radius, std::uint64_t seed, BallSampling how = BallSampling::Uniform) {
    Rng rng(seed);
    return sample_error_ball(dim, radius, rng, how);
}

// e = C^{1/2} v with v standard complex Gaussian.
inline CVec sample_error_gaussian(const CMat& c_sqrt, Rng& rng) {
    require_structure(c_sqrt.rows() == c_sqrt.cols(), "covariance root must be square");
    const int d = static_cast<int>(c_sqrt.rows());
    return c_sqrt * rng.complex_normal_vector(d);
}

inline CVec sample_error_gaussian(const CMat& c_sqrt, std::uint64_t seed) {
    require_parameter(lambda_min(c_sqrt) >= -1e-10 * std::max(1.0, c_sqrt.cwiseAbs().maxCoeff()),
                      "covariance root is not positive semidefinite");
    Rng rng(seed);
    return sample_error_gaussian(c_sqrt, rng);
}

// Plain-text dump: header line "channels K N A T_m", then one line per vector
// "<tag> <i> <j> re im re im ...".
inline void write_channels(std::ostream& os, const ChannelSet& ch) {
    os.precision(17);
    os << "channels " << ch.K << ' ' << ch.N << ' ' << ch.A << ' ' << ch.T_m << '\n';
    auto line = [&](const char* tag, int i, int j, const CVec& v) {
        os << tag << ' ' << i << ' ' << j;
        for (Eigen::Index t = 0; t < v.size(); ++t) os << ' ' << v(t).real() << ' ' << v(t).imag();
        os << '\n';
    };
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n) line("hF", k, n, ch.hF(k, n));
    for (int k = 0; k < ch.K; ++k)
        for (int n = 0; n < ch.N; ++n) line("hFM", k, n, ch.hFM(k, n));
    for (int n = 0; n < ch.N; ++n) line("hMF", 0, n, ch.hMF(n));
    for (int n = 0; n < ch.N; ++n) line("m", 0, n, ch.m[n]);
}

// Reads the estimates written by write_channels; the uncertainty description is left
// for the caller to fill.
inline ChannelSet read_channels(std::istream& is) {
    ChannelSet ch;
    std::string tag;
    is >> tag >> ch.K >> ch.N >> ch.A >> ch.T_m;
    require_structure(static_cast<bool>(is) && tag == "channels", "bad channel dump header");
    ch.h_F_bar.assign(ch.K * ch.N, CVec());
    ch.h_FM_bar.assign(ch.K * ch.N, CVec());
    ch.h_MF_bar.assign(ch.N, CVec());
    ch.m.assign(ch.N, CVec());
    std::string ln;
    std::getline(is, ln);
    while (std::getline(is, ln)) {
        if (ln.empty()) continue;
        std::istringstream ss(ln);
        int i = 0, j = 0;
        ss >> tag >> i >> j;
        std::vector<cplx> vals;
        double re, im;
        while (ss >> re >> im) vals.emplace_back(re, im);
        CVec v = Eigen::Map<CVec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
        require_structure(j >= 0 && j < ch.N, "bad subcarrier index in dump");
        if (tag == "hF") {
            require_structure(i >= 0 && i < ch.K, "bad user index in dump");
            ch.h_F_bar[i * ch.N + j] = v;
        } else if (tag == "hFM") {
            require_structure(i >= 0 && i < ch.K, "bad user index in dump");
            ch.h_FM_bar[i * ch.N + j] = v;
        } else if (tag == "hMF") {
            ch.h_MF_bar[j] = v;
        } else if (tag == "m") {
            ch.m[j] = v;
        } else {
            throw StructuralError("unknown tag in channel dump: " + tag);
        }
    }
    ch.uncertainty.N = ch.N;
    ch.validate();
    return ch;
}

}  // namespace robnoma
