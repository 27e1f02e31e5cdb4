#pragma once

#include <random>
#include <vector>

#include "fpg/common.hpp"
#include "fpg/mdp.hpp"

namespace fpg::test {

inline Vector gaussian(Rng& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline Matrix gaussian(Rng& rng, int r, int c) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

// Single state, H = 1, rewards r[a].
inline MdpSpec bandit(const std::vector<double>& r) {
    const int A = static_cast<int>(r.size());
    return MdpSpec(1, A, 1, std::vector<double>(A, 1.0), r, Vector::Ones(1));
}

// s' = (s + a) mod S, reward r[s * A + a] at every step.
inline MdpSpec cyclic(int S, int A, int H, std::vector<double> r, Vector xi) {
    std::vector<double> p(static_cast<std::size_t>(S) * A * S, 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) p[(static_cast<std::size_t>(s) * A + a) * S + (s + a) % S] = 1.0;
    return MdpSpec(S, A, H, std::move(p), std::move(r), std::move(xi));
}

inline MdpSpec zero_reward(const MdpSpec& mdp) {
    return mdp.with_reward_scale(std::vector<double>(mdp.horizon(), 0.0));
}

}  // namespace fpg::test
