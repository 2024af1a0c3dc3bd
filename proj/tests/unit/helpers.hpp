#pragma once

#include <robnoma/channels.hpp>
#include <robnoma/scenario.hpp>

namespace testutil {

using namespace robnoma;

inline NetworkScenario scenario(int F, int T_f, int N, int K) {
    NetworkScenario sc;
    sc.F = F;
    sc.T_f = T_f;
    sc.N = N;
    sc.K = K;
    sc.F_max = std::min(sc.F_max, sc.A());
    sc.q_max = std::min(sc.q_max, K);
    return sc;
}

inline ChannelSet zero_channels(int K, int N, int A, int T_m) {
    ChannelSet ch;
    ch.K = K;
    ch.N = N;
    ch.A = A;
    ch.T_m = T_m;
    ch.h_F_bar.assign(K * N, CVec::Zero(A));
    ch.h_FM_bar.assign(K * N, CVec::Zero(T_m));
    ch.h_MF_bar.assign(N, CVec::Zero(A));
    ch.m.assign(N, CVec::Zero(T_m));
    ch.uncertainty.N = N;
    return ch;
}

inline CMat random_hermitian(Rng& rng, int n) {
    CMat G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = rng.complex_normal();
    return hermitian_part(G);
}

}  // namespace testutil
