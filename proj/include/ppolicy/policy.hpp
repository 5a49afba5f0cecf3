#ifndef PPOLICY_POLICY_HPP
#define PPOLICY_POLICY_HPP

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppolicy/evaluate.hpp"
#include "ppolicy/panel.hpp"

namespace ppolicy {

enum class Protocol { Updating, Rolling };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct PolicyTheta {
    Eigen::VectorXd theta;
    double gamma_star = 0.0;
    Month window_first = 0;
    Month window_last = 0;
    Protocol protocol = Protocol::Updating;
    int iterations = 0;
    double grad_norm = 0.0; // sup norm at the solution
};

struct RuleSpec {
    std::string id;
    CharacteristicSpec spec;
    double gamma_star = 2.0;
    Protocol protocol = Protocol::Updating;
    int window_months = 180; // rolling window length

    void validate() const;
};

// Portfolio return of Eq-style weight rule w_i = w_bar_i + theta'x_i / N.
double portfolio_return(const CrossSection& cs, const Eigen::VectorXd& theta);
Eigen::VectorXd portfolio_weights(const CrossSection& cs, const Eigen::VectorXd& theta);

// Mean CRRA utility of the realized portfolio returns over the window. Months
// where 1 + r_p <= 0 make the CRRA loss undefined; the objective then returns
// kInfeasibleObjective (-inf, a distinguished value the optimizer treats as
// "reject this point", never NaN, so comparisons stay total).
inline constexpr double kInfeasibleObjective = -std::numeric_limits<double>::infinity();

double objective(std::span<const CrossSection> window, const Eigen::VectorXd& theta,
                 double gamma_star);

// Analytic gradient of `objective`; throws if the window is infeasible at theta.
Eigen::VectorXd gradient(std::span<const CrossSection> window, const Eigen::VectorXd& theta,
                         double gamma_star);

struct OptimizerOptions {
    double grad_tol = 1e-8; // sup-norm tolerance, relative to max(1, |objective|)
    int max_iters = 2000;
    double initial_step = 1.0;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int lbfgs_memory = 10;
};

class OptimizeError : public std::runtime_error {
public:
    OptimizeError(const std::string& what, Eigen::VectorXd best, double grad_norm)
        : std::runtime_error(what), best_theta(std::move(best)), grad_norm(grad_norm) {}
    Eigen::VectorXd best_theta;
    double grad_norm;
};

// In-sample estimation: maximizes `objective` from a feasible start by
// quasi-Newton (L-BFGS) ascent with Armijo backtracking; the line search
// rejects infeasible trial points so the iterate path never leaves the
// feasible region.
PolicyTheta optimize_theta(std::span<const CrossSection> window, double gamma_star,
                           const Eigen::VectorXd& init_theta, const OptimizerOptions& opts = {});

// Per-month sufficient statistics: the objective depends on a cross-section
// only through the value-weighted return m_t and the tilt moment
// q_t = X_t' r_t / N_t, so optimization is O(T K) per evaluation once these
// are computed.
struct CompressedPanel {
    Eigen::VectorXd m;  // T
    Eigen::MatrixXd Q;  // T x K

    static CompressedPanel from(std::span<const CrossSection> sections);
};

double objective_compressed(const CompressedPanel& cp, int first, int last,
                            const Eigen::VectorXd& theta, double gamma_star);

struct ProtocolResult {
    std::vector<PolicyTheta> thetas; // one per out-of-sample year
    PortfolioPath path;
};

// Annual re-estimation schedule: one theta per complete out-of-sample year,
// applied to the next 12 months. Updating grows the estimation window by 12
// months each year; Rolling keeps the trailing window_months. Each year warm
// starts at the previous year's theta (year 1 at zero).
ProtocolResult run_protocol(const Panel& panel, const RuleSpec& rule,
                            const OptimizerOptions& opts = {});

} // namespace ppolicy

#endif
