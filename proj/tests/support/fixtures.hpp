#ifndef PPOLICY_TEST_FIXTURES_HPP
#define PPOLICY_TEST_FIXTURES_HPP

#include <string>
#include <vector>

#include "ppolicy/panel.hpp"
#include "ppolicy/rng.hpp"
#include "ppolicy/synthgen.hpp"

namespace fixtures {

// Random standardized cross-section with nonnegative weights summing to one.
inline ppolicy::CrossSection random_cross_section(int n, int k, std::uint64_t seed,
                                                  ppolicy::Month month = 200001) {
    ppolicy::RandomStream rs(seed, 0xc5ULL);
    ppolicy::CrossSection cs;
    cs.month = month;
    cs.returns.resize(n);
    cs.w_bar.resize(n);
    cs.X.resize(n, k);
    double cap_sum = 0.0;
    std::vector<double> caps(n);
    for (int i = 0; i < n; ++i) {
        cs.returns[i] = 0.01 + 0.06 * rs.next_normal();
        caps[i] = std::exp(rs.next_normal());
        cap_sum += caps[i];
        cs.ids.push_back("T" + std::to_string(i));
    }
    for (int i = 0; i < n; ++i) cs.w_bar[i] = caps[i] / cap_sum;
    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd col(n);
        for (int i = 0; i < n; ++i) col[i] = rs.next_normal();
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1));
        for (int i = 0; i < n; ++i) cs.X(i, c) = (col[i] - mean) / sd;
    }
    return cs;
}

// Window of standardized cross-sections via the synthetic generator.
inline ppolicy::Panel synthetic_panel(int n, int t, int k, std::uint64_t seed,
                                      std::vector<double> loadings = {},
                                      int first_oos = -1) {
    ppolicy::synthgen::DGPConfig cfg;
    cfg.n_stocks = n;
    cfg.n_months = t;
    cfg.k = k;
    cfg.seed = seed;
    if (!loadings.empty()) cfg.signal_loadings = std::move(loadings);
    auto sp = ppolicy::synthgen::generate_panel(cfg);
    if (first_oos < 0) first_oos = t; // all in-sample by default
    return ppolicy::standardize(sp.panel, cfg.spec(), first_oos);
}

} // namespace fixtures

#endif
