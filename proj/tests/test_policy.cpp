#include <doctest.h>

#include <cmath>

#include "ppolicy/policy.hpp"
#include "ppolicy/rng.hpp"
#include "ppolicy/synthgen.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ppolicy;

namespace {

std::vector<CrossSection> random_window(int n, int t, int k, std::uint64_t seed) {
    std::vector<CrossSection> w;
    for (int i = 0; i < t; ++i)
        w.push_back(fixtures::random_cross_section(n, k, seed * 1000 + i, month_add(200001, i)));
    return w;
}

} // namespace

TEST_CASE("portfolio_return: theta = 0 gives the value-weighted market") {
    auto cs = fixtures::random_cross_section(40, 3, 7);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    CHECK(portfolio_return(cs, zero) == doctest::Approx(cs.w_bar.dot(cs.returns)).epsilon(1e-15));
}

TEST_CASE("portfolio_return: two-stock hand example") {
    CrossSection cs;
    cs.month = 200001;
    cs.returns.resize(2);
    cs.returns << 0.10, 0.00;
    cs.w_bar.resize(2);
    cs.w_bar << 0.5, 0.5;
    cs.X.resize(2, 1);
    cs.X << 1.0, -1.0;
    cs.ids = {"a", "b"};
    Eigen::VectorXd theta(1);
    theta << 1.0;
    const auto w = portfolio_weights(cs, theta);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(0.0));
    CHECK(portfolio_return(cs, theta) == doctest::Approx(0.10));
}

TEST_CASE("portfolio_return matches the elementwise loop oracle") {
    RandomStream rs(3);
    for (int trial = 0; trial < 25; ++trial) {
        auto cs = fixtures::random_cross_section(20 + 7 * trial, 1 + trial % 6, 50 + trial);
        Eigen::VectorXd theta(cs.X.cols());
        for (int k = 0; k < theta.size(); ++k) theta[k] = 3.0 * rs.next_normal();
        const double lib = portfolio_return(cs, theta);
        const double ref = oracles::portfolio_return_loop(cs.returns, cs.X, cs.w_bar, theta);
        CHECK(lib == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("objective: closed forms and the infeasibility sentinel") {
    // Constant r_p = 0: objective is 1/(1-gamma*); build a window where all
    // returns are zero so every portfolio return is zero.
    CrossSection cs = fixtures::random_cross_section(10, 1, 5);
    cs.returns.setZero();
    std::vector<CrossSection> window{cs, cs, cs};
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    for (double g : {2.0, 5.0, 9.0})
        CHECK(objective(window, theta, g) == doctest::Approx(1.0 / (1.0 - g)).epsilon(1e-14));

    // gamma* = 2 with portfolio returns (0.10, -0.10).
    CrossSection a = cs, b = cs;
    a.returns.setConstant(0.10);
    b.returns.setConstant(-0.10);
    std::vector<CrossSection> two{a, b};
    CHECK(objective(two, theta, 2.0) ==
          doctest::Approx(-0.5 * (1.0 / 1.1 + 1.0 / 0.9)).epsilon(1e-14));

    // A month at r_p = -1.05 makes the window infeasible.
    CrossSection c = cs;
    c.returns.setConstant(-1.05);
    std::vector<CrossSection> bad{a, c};
    CHECK(objective(bad, theta, 2.0) == kInfeasibleObjective);
}

TEST_CASE("gradient: unit weight factor at r_p = 0 and hand-computed two-stock case") {
    auto cs = fixtures::random_cross_section(12, 3, 19);
    cs.returns.setZero();
    cs.returns[0] = 0.05;
    cs.returns[1] = -0.05;
    // Pick theta = 0; r_p = wbar'r in general, so zero the weighted part too.
    cs.w_bar.setConstant(1.0 / 12);
    cs.returns[1] = -cs.returns[0]; // wbar'r = 0 under equal weights
    std::vector<CrossSection> window{cs};
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd g = gradient(window, zero, 7.0);
    const Eigen::VectorXd expect = cs.X.transpose() * cs.returns / cs.size();
    CHECK((g - expect).cwiseAbs().maxCoeff() < 1e-15);

    CrossSection two;
    two.month = 200001;
    two.returns.resize(2);
    two.returns << 0.10, 0.00;
    two.w_bar.resize(2);
    two.w_bar << 0.5, 0.5;
    two.X.resize(2, 1);
    two.X << 1.0, -1.0;
    two.ids = {"a", "b"};
    std::vector<CrossSection> w2{two};
    for (double gs : {2.0, 6.0}) {
        const Eigen::VectorXd gr = gradient(w2, Eigen::VectorXd::Zero(1), gs);
        CHECK(gr[0] == doctest::Approx(0.05 * std::pow(1.05, -gs)).epsilon(1e-12));
    }
}

TEST_CASE("gradient matches central finite differences at random feasible points") {
    auto window = random_window(50, 40, 4, 77);
    std::span<const CrossSection> span(window);
    RandomStream rs(5);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd theta(4);
        for (int k = 0; k < 4; ++k) theta[k] = 0.8 * rs.next_normal();
        const double gs = 2.0 + 8.0 * rs.next_double();
        if (objective(span, theta, gs) == kInfeasibleObjective) continue;
        ++checked;
        const Eigen::VectorXd g = gradient(span, theta, gs);
        const Eigen::VectorXd fd = oracles::finite_difference_gradient(
            [&](const Eigen::VectorXd& th) { return objective(span, th, gs); }, theta, 1e-5);
        CHECK((g - fd).norm() / std::max(1e-12, fd.norm()) < 1e-5);
    }
    CHECK(checked >= 40);
}

TEST_CASE("gradient at an infeasible point is an error") {
    auto window = random_window(10, 3, 1, 8);
    Eigen::VectorXd theta(1);
    theta << 1e9;
    std::span<const CrossSection> span(window);
    REQUIRE(objective(span, theta, 2.0) == kInfeasibleObjective);
    CHECK_THROWS_AS((void)gradient(span, theta, 2.0), std::runtime_error);
}

TEST_CASE("optimize_theta: no cross-sectional signal keeps theta at zero") {
    // Identical returns within each month: X'r/N = 0 because columns are
    // zero-mean, so the gradient vanishes everywhere.
    std::vector<CrossSection> window;
    RandomStream rs(40);
    for (int t = 0; t < 24; ++t) {
        auto cs = fixtures::random_cross_section(15, 2, 900 + t, month_add(200001, t));
        cs.returns.setConstant(0.01 * rs.next_normal());
        window.push_back(cs);
    }
    auto fit = optimize_theta(window, 5.0, Eigen::VectorXd::Zero(2));
    CHECK(fit.theta.norm() < 1e-6);
    CHECK(fit.grad_norm < 1e-8);
}

TEST_CASE("optimize_theta: K = 1 planted signal matches a golden-section oracle") {
    auto panel = fixtures::synthetic_panel(80, 120, 1, 4242, {0.004});
    std::span<const CrossSection> window(panel.sections);
    auto fit = optimize_theta(window, 4.0, Eigen::VectorXd::Zero(1));
    const double oracle = oracles::golden_section_max(
        [&](double v) {
            Eigen::VectorXd th(1);
            th << v;
            return objective(window, th, 4.0);
        },
        -50.0, 50.0);
    CHECK(fit.theta[0] == doctest::Approx(oracle).epsilon(1e-3));
    CHECK(std::abs(fit.theta[0]) > 0.05); // the signal is actually picked up
}

TEST_CASE("optimize_theta beats random perturbations and exceeds the start value") {
    RandomStream rs(66);
    for (int trial = 0; trial < 5; ++trial) {
        auto panel = fixtures::synthetic_panel(40, 60, 3, 777 + trial, {0.003, 0.0, -0.002});
        std::span<const CrossSection> window(panel.sections);
        const double gs = 3.0 + trial;
        auto fit = optimize_theta(window, gs, Eigen::VectorXd::Zero(3));
        const double best = objective(window, fit.theta, gs);
        CHECK(best >= objective(window, Eigen::VectorXd::Zero(3), gs));
        CHECK(fit.grad_norm < 1e-8);
        for (int p = 0; p < 100; ++p) {
            Eigen::VectorXd d(3);
            for (int k = 0; k < 3; ++k) d[k] = rs.next_normal();
            d *= 0.1 / d.norm();
            const double perturbed = objective(window, fit.theta + d, gs);
            CHECK(best >= perturbed);
        }
    }
}

TEST_CASE("optimize_theta: non-convergence error carries the best iterate") {
    auto panel = fixtures::synthetic_panel(40, 48, 2, 5150, {0.004, -0.004});
    std::span<const CrossSection> window(panel.sections);
    OptimizerOptions opts;
    opts.max_iters = 1; // cannot possibly reach the optimum
    try {
        (void)optimize_theta(window, 3.0, Eigen::VectorXd::Zero(2), opts);
        FAIL("expected OptimizeError");
    } catch (const OptimizeError& e) {
        CHECK(e.best_theta.size() == 2);
        CHECK(std::isfinite(e.grad_norm));
        CHECK(e.grad_norm > 1e-8);
        // The carried iterate is no worse than the starting point.
        CHECK(objective(window, e.best_theta, 3.0) >=
              objective(window, Eigen::VectorXd::Zero(2), 3.0));
    }
}

TEST_CASE("objective is concave along random chords") {
    auto panel = fixtures::synthetic_panel(30, 36, 2, 31);
    std::span<const CrossSection> window(panel.sections);
    RandomStream rs(13);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd t1(2), t2(2);
        for (int k = 0; k < 2; ++k) {
            t1[k] = 0.5 * rs.next_normal();
            t2[k] = 0.5 * rs.next_normal();
        }
        const double lam = rs.next_double();
        const double f1 = objective(window, t1, 5.0);
        const double f2 = objective(window, t2, 5.0);
        if (f1 == kInfeasibleObjective || f2 == kInfeasibleObjective) continue;
        const double mid = objective(window, (lam * t1 + (1 - lam) * t2).eval(), 5.0);
        CHECK(mid >= lam * f1 + (1 - lam) * f2 - 1e-12);
    }
}

TEST_CASE("self-consistency: the gamma*-optimized theta maximizes its own objective") {
    auto panel = fixtures::synthetic_panel(60, 90, 2, 88, {0.003, -0.003});
    std::span<const CrossSection> window(panel.sections);
    const std::vector<double> grid{2, 4, 7, 13, 22};
    std::vector<Eigen::VectorXd> fits;
    for (double gs : grid)
        fits.push_back(optimize_theta(window, gs, Eigen::VectorXd::Zero(2)).theta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double own = objective(window, fits[i], grid[i]);
        for (std::size_t j = 0; j < grid.size(); ++j)
            CHECK(own >= objective(window, fits[j], grid[i]) - 1e-12);
    }
}

TEST_CASE("run_protocol: updating and rolling agree in year one, schedule arithmetic holds") {
    auto sp = synthgen::generate_panel([] {
        synthgen::DGPConfig c;
        c.n_stocks = 50;
        c.n_months = 204; // 180 in-sample + 2 out-of-sample years
        c.k = 2;
        c.seed = 3;
        c.signal_loadings = {0.002, -0.002};
        return c;
    }());
    auto panel = standardize(sp.panel, sp.config.spec(), 180);

    RuleSpec upd{"u", sp.config.spec(), 4.0, Protocol::Updating, 180};
    RuleSpec rol{"r", sp.config.spec(), 4.0, Protocol::Rolling, 180};
    auto res_u = run_protocol(panel, upd);
    auto res_r = run_protocol(panel, rol);

    CHECK(res_u.thetas.size() == 2);
    CHECK(res_u.path.returns.size() == 24);
    CHECK((res_u.thetas[0].theta - res_r.thetas[0].theta).cwiseAbs().maxCoeff() < 1e-12);
    // Year 2 windows differ: updating has 192 months, rolling the last 180.
    CHECK(res_u.thetas[1].window_first == panel.sections[0].month);
    CHECK(res_r.thetas[1].window_first == panel.sections[12].month);
    CHECK(res_u.path.months.front() == month_add(panel.sections[180].month, 1));
}

TEST_CASE("run_protocol: zero tilt reproduces the value-weighted benchmark path") {
    // A panel with no cross-sectional signal anywhere: identical returns per
    // month force theta = 0 at every annual estimation.
    RawPanel raw;
    RandomStream rs(12);
    for (int t = 0; t < 36; ++t) {
        RawSection sec;
        sec.month = month_add(200001, t);
        const double r = 0.01 + 0.02 * rs.next_normal();
        for (int i = 0; i < 8; ++i) {
            PanelRow row;
            row.stock_id = "s" + std::to_string(i);
            row.next_return = r;
            row.market_cap = 50.0 + i;
            row.chars.fill(std::numeric_limits<double>::quiet_NaN());
            row.chars[static_cast<int>(Characteristic::Momentum)] = rs.next_normal();
            sec.rows.push_back(row);
        }
        raw.sections.push_back(sec);
    }
    CharacteristicSpec spec = make_spec({"M"});
    spec.strict_book_inclusion = false;
    auto panel = standardize(raw, spec, 24);
    RuleSpec rule{"bench", spec, 2.0, Protocol::Updating, 180};
    auto res = run_protocol(panel, rule);
    REQUIRE(res.path.returns.size() == 12);
    for (int i = 0; i < 12; ++i) {
        const auto& cs = panel.sections[24 + i];
        CHECK(res.path.returns[i] == doctest::Approx(cs.w_bar.dot(cs.returns)).epsilon(1e-12));
        CHECK(res.path.neg_weight_sum[i] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("translation of a raw characteristic leaves the theta path unchanged") {
    auto sp = synthgen::generate_panel([] {
        synthgen::DGPConfig c;
        c.n_stocks = 40;
        c.n_months = 48;
        c.k = 2;
        c.seed = 23;
        c.signal_loadings = {0.002, 0.001};
        return c;
    }());
    CharacteristicSpec spec = sp.config.spec();
    auto base_panel = standardize(sp.panel, spec, 36);

    RawPanel shifted = sp.panel;
    const int slot = static_cast<int>(spec.included[1]);
    for (auto& s : shifted.sections)
        for (auto& r : s.rows) r.chars[slot] += 7.5;
    auto shifted_panel = standardize(shifted, spec, 36);

    RuleSpec rule{"x", spec, 5.0, Protocol::Updating, 180};
    auto a = run_protocol(base_panel, rule);
    auto b = run_protocol(shifted_panel, rule);
    REQUIRE(a.thetas.size() == b.thetas.size());
    for (std::size_t y = 0; y < a.thetas.size(); ++y)
        CHECK((a.thetas[y].theta - b.thetas[y].theta).cwiseAbs().maxCoeff() < 1e-8);
}
