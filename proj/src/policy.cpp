#include "ppolicy/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>

namespace ppolicy {

std::string to_string(Protocol p) { return p == Protocol::Updating ? "updating" : "rolling"; }

Protocol protocol_from_string(const std::string& s) {
    if (s == "updating") return Protocol::Updating;
    if (s == "rolling") return Protocol::Rolling;
    throw std::runtime_error("unknown protocol: '" + s + "'");
}

void RuleSpec::validate() const {
    spec.validate();
    if (!(gamma_star > 1.0)) throw std::invalid_argument("gamma_star must exceed 1");
    if (window_months < 24) throw std::invalid_argument("window_months must be at least 24");
    if (id.empty()) throw std::invalid_argument("rule id must be non-empty");
    // Rule ids end up in output file names.
    for (char c : id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            throw std::invalid_argument("rule id '" + id +
                                        "' may only contain letters, digits, '_', '-', '.'");
}

double portfolio_return(const CrossSection& cs, const Eigen::VectorXd& theta) {
    if (theta.size() != cs.X.cols())
        throw std::invalid_argument("theta dimension does not match cross-section");
    const double tilt = cs.returns.dot(cs.X * theta) / cs.size();
    return cs.w_bar.dot(cs.returns) + tilt;
}

Eigen::VectorXd portfolio_weights(const CrossSection& cs, const Eigen::VectorXd& theta) {
    if (theta.size() != cs.X.cols())
        throw std::invalid_argument("theta dimension does not match cross-section");
    return cs.w_bar + cs.X * theta / cs.size();
}

CompressedPanel CompressedPanel::from(std::span<const CrossSection> sections) {
    CompressedPanel cp;
    const int T = static_cast<int>(sections.size());
    const int K = T > 0 ? static_cast<int>(sections[0].X.cols()) : 0;
    cp.m.resize(T);
    cp.Q.resize(T, K);
    for (int t = 0; t < T; ++t) {
        const auto& cs = sections[t];
        cp.m[t] = cs.w_bar.dot(cs.returns);
        cp.Q.row(t) = (cs.X.transpose() * cs.returns).transpose() / cs.size();
    }
    return cp;
}

namespace {

// Neumaier-compensated accumulator; keeps the objective's floating noise well
// below line-search decision thresholds.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

double objective_impl(const CompressedPanel& cp, int first, int last,
                      const Eigen::VectorXd& theta, double gamma_star) {
    if (!(gamma_star > 1.0)) throw std::invalid_argument("gamma_star must exceed 1");
    if (first < 0 || last > cp.m.size() || first >= last)
        throw std::invalid_argument("empty or invalid estimation window");
    const double expo = 1.0 - gamma_star;
    Accumulator acc;
    for (int t = first; t < last; ++t) {
        const double one_plus = 1.0 + cp.m[t] + cp.Q.row(t).dot(theta);
        if (!(one_plus > 0.0)) return kInfeasibleObjective;
        acc.add(std::pow(one_plus, expo) / expo);
    }
    return acc.value() / (last - first);
}

Eigen::VectorXd gradient_impl(const CompressedPanel& cp, int first, int last,
                              const Eigen::VectorXd& theta, double gamma_star) {
    const double expo = 1.0 - gamma_star;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    for (int t = first; t < last; ++t) {
        const double one_plus = 1.0 + cp.m[t] + cp.Q.row(t).dot(theta);
        if (!(one_plus > 0.0))
            throw std::runtime_error("gradient requested at an infeasible point");
        const double w = std::pow(one_plus, expo) / one_plus; // (1+r_p)^(-gamma*)
        g.noalias() += w * cp.Q.row(t).transpose();
    }
    return g / (last - first);
}

struct CoreResult {
    Eigen::VectorXd theta;
    int iterations = 0;
    double grad_norm = 0.0;
};

// L-BFGS ascent with Armijo backtracking. The objective callable returns
// kInfeasibleObjective outside the feasible region; such trial points are
// rejected by the line search, so iterates stay feasible throughout.
template <typename F, typename G>
CoreResult optimize_core(const F& f, const G& grad, const Eigen::VectorXd& init,
                         const OptimizerOptions& opts) {
    const auto K = init.size();
    Eigen::VectorXd x = init;
    double fx = f(x);
    if (fx == kInfeasibleObjective)
        throw std::invalid_argument("optimizer start point is infeasible");

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    Eigen::VectorXd g = grad(x);

    auto tol_at = [&](double val) { return opts.grad_tol * std::max(1.0, std::abs(val)); };

    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const double gnorm = g.lpNorm<Eigen::Infinity>();
        if (gnorm < tol_at(fx)) return {x, it, gnorm};

        // Two-loop recursion on the ascent direction.
        Eigen::VectorXd d = g;
        const int mem = static_cast<int>(s_hist.size());
        if (mem > 0) {
            std::vector<double> alpha(mem), rho(mem);
            for (int i = mem - 1; i >= 0; --i) {
                rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
                alpha[i] = rho[i] * s_hist[i].dot(d);
                d -= alpha[i] * y_hist[i];
            }
            const double yy = y_hist.back().squaredNorm();
            if (yy > 0.0) d *= y_hist.back().dot(s_hist.back()) / yy;
            for (int i = 0; i < mem; ++i) {
                const double beta = rho[i] * y_hist[i].dot(d);
                d += (alpha[i] - beta) * s_hist[i];
            }
        }
        double slope = g.dot(d);
        if (!(slope > 0.0)) { // not an ascent direction: drop memory, restart steepest
            s_hist.clear();
            y_hist.clear();
            d = g;
            slope = g.squaredNorm();
        }

        double step = opts.initial_step;
        bool accepted = false;
        Eigen::VectorXd x_new(K);
        double f_new = 0.0;
        for (int ls = 0; ls < 80; ++ls) {
            x_new = x + step * d;
            f_new = f(x_new);
            if (f_new != kInfeasibleObjective && f_new >= fx + opts.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }
        if (!accepted)
            throw OptimizeError("line search failed (gradient sup-norm " + std::to_string(gnorm) +
                                ")", x, gnorm);

        Eigen::VectorXd g_new = grad(x_new);
        Eigen::VectorXd s = x_new - x;
        // Stored as (s, g_old - g_new) so the curvature products s'y are
        // positive on a concave objective and the two-loop recursion yields
        // an ascent direction H*g directly.
        Eigen::VectorXd y = g - g_new;
        if (s.dot(y) > 0.0) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        x = std::move(x_new);
        fx = f_new;
        g = std::move(g_new);
    }
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    throw OptimizeError("no convergence within " + std::to_string(opts.max_iters) +
                        " iterations (gradient sup-norm " + std::to_string(gnorm) + ")",
                        x, gnorm);
}

CoreResult optimize_compressed(const CompressedPanel& cp, int first, int last, double gamma_star,
                               const Eigen::VectorXd& init, const OptimizerOptions& opts) {
    auto f = [&](const Eigen::VectorXd& th) { return objective_impl(cp, first, last, th, gamma_star); };
    auto g = [&](const Eigen::VectorXd& th) { return gradient_impl(cp, first, last, th, gamma_star); };
    return optimize_core(f, g, init, opts);
}

} // namespace

double objective(std::span<const CrossSection> window, const Eigen::VectorXd& theta,
                 double gamma_star) {
    auto cp = CompressedPanel::from(window);
    return objective_impl(cp, 0, static_cast<int>(window.size()), theta, gamma_star);
}

double objective_compressed(const CompressedPanel& cp, int first, int last,
                            const Eigen::VectorXd& theta, double gamma_star) {
    return objective_impl(cp, first, last, theta, gamma_star);
}

Eigen::VectorXd gradient(std::span<const CrossSection> window, const Eigen::VectorXd& theta,
                         double gamma_star) {
    if (window.empty()) throw std::invalid_argument("empty estimation window");
    auto cp = CompressedPanel::from(window);
    return gradient_impl(cp, 0, static_cast<int>(window.size()), theta, gamma_star);
}

PolicyTheta optimize_theta(std::span<const CrossSection> window, double gamma_star,
                           const Eigen::VectorXd& init_theta, const OptimizerOptions& opts) {
    if (window.empty()) throw std::invalid_argument("empty estimation window");
    auto cp = CompressedPanel::from(window);
    auto res = optimize_compressed(cp, 0, static_cast<int>(window.size()), gamma_star, init_theta,
                                   opts);
    PolicyTheta out;
    out.theta = std::move(res.theta);
    out.gamma_star = gamma_star;
    out.window_first = window.front().month;
    out.window_last = window.back().month;
    out.iterations = res.iterations;
    out.grad_norm = res.grad_norm;
    return out;
}

ProtocolResult run_protocol(const Panel& panel, const RuleSpec& rule,
                            const OptimizerOptions& opts) {
    rule.validate();
    const int T = panel.n_months();
    const int first = panel.first_oos_index;
    if (first < 24)
        throw std::invalid_argument("in-sample period must cover at least 24 months");
    if (T - first < 12)
        throw std::invalid_argument("panel too short: need at least one complete out-of-sample year");
    if (panel.k() != rule.spec.k())
        throw std::invalid_argument("panel columns do not match the rule's characteristic set");

    const int n_years = (T - first) / 12;
    auto cp = CompressedPanel::from(std::span<const CrossSection>(panel.sections));

    ProtocolResult out;
    out.thetas.reserve(n_years);
    out.path.returns.reserve(n_years * 12);
    out.path.neg_weight_sum.reserve(n_years * 12);
    out.path.months.reserve(n_years * 12);

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(panel.k());
    for (int y = 0; y < n_years; ++y) {
        const int fit_end = first + 12 * y;
        const int fit_begin =
            rule.protocol == Protocol::Updating ? 0 : std::max(0, fit_end - rule.window_months);

        // The previous year's theta can be infeasible once the window grows
        // or slides; shrink it toward zero (always feasible) until it is not.
        Eigen::VectorXd init = warm;
        for (int guard = 0;
             objective_impl(cp, fit_begin, fit_end, init, rule.gamma_star) ==
                 kInfeasibleObjective;
             ++guard) {
            if (guard >= 60) {
                init.setZero();
                break;
            }
            init *= 0.5;
        }

        CoreResult res;
        try {
            res = optimize_compressed(cp, fit_begin, fit_end, rule.gamma_star, init, opts);
        } catch (const OptimizeError& e) {
            throw OptimizeError("out-of-sample year " + std::to_string(y + 1) + ": " + e.what(),
                                e.best_theta, e.grad_norm);
        } catch (const std::invalid_argument& e) {
            // Even the zero portfolio is infeasible on this window: the rule
            // cannot be estimated on this (pseudo)sample.
            throw OptimizeError("out-of-sample year " + std::to_string(y + 1) + ": " + e.what(),
                                init, std::numeric_limits<double>::quiet_NaN());
        }

        PolicyTheta pt;
        pt.theta = res.theta;
        pt.gamma_star = rule.gamma_star;
        pt.protocol = rule.protocol;
        pt.window_first = panel.sections[fit_begin].month;
        pt.window_last = panel.sections[fit_end - 1].month;
        pt.iterations = res.iterations;
        pt.grad_norm = res.grad_norm;

        for (int t = fit_end; t < fit_end + 12; ++t) {
            const auto& cs = panel.sections[t];
            Eigen::VectorXd w = portfolio_weights(cs, pt.theta);
            out.path.returns.push_back(w.dot(cs.returns));
            out.path.neg_weight_sum.push_back(w.cwiseMin(0.0).sum());
            out.path.months.push_back(month_add(cs.month, 1));
        }

        warm = pt.theta;
        out.thetas.push_back(std::move(pt));
    }
    return out;
}

} // namespace ppolicy
