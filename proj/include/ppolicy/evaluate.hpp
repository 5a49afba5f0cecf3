#ifndef PPOLICY_EVALUATE_HPP
#define PPOLICY_EVALUATE_HPP

#include <map>
#include <string>
#include <vector>

#include "ppolicy/calendar.hpp"

namespace ppolicy {

// Out-of-sample monthly returns of one feasible rule on one (pseudo)sample,
// with per-month short-exposure diagnostics.
struct PortfolioPath {
    std::vector<double> returns;        // simple monthly returns
    std::vector<double> neg_weight_sum; // sum of negative weights, <= 0
    std::vector<Month> months;
};

struct MetricSummary {
    double p2_5 = 0.0;
    double mean = 0.0;
    double p97_5 = 0.0;
};

// Monthly certainty equivalent of a CRRA loss with curvature gamma, in basis
// points per month. A path containing a return <= -100% has no finite CRRA
// utility; it maps to the -100% sentinel, exactly -10000 bp.
inline constexpr double kCeSentinelBp = -10000.0;
double certainty_equivalent(const std::vector<double>& returns, double gamma);

struct RobustMoments {
    double mean = 0.0;
    double sd = 0.0;
    double median = 0.0;
    double iqr = 0.0;
    double min = 0.0;
    double s4 = 0.0; // (mean - median) / sd
    double k3 = 0.0; // tail-mean ratio less the 2.63 Gaussian benchmark
};

// Requires at least 40 observations so the 5% tails are non-empty.
RobustMoments robust_moments(const std::vector<double>& returns);

double sharpe_annualized(const std::vector<double>& returns, const std::vector<double>& rf);

// Time-series mean of the per-month negative-weight sums, in percent (<= 0).
double leverage_percent(const PortfolioPath& path);

// Empirical quantile with linear interpolation of order statistics at
// h = (n-1)p + 1 over the sorted sample.
double quantile(std::vector<double> values, double p);

// Sampling distribution of one scalar metric over bootstrap replicates.
// Failed replicates are tracked by count and never imputed.
struct SamplingDistribution {
    std::vector<double> values;
    int failed = 0;

    MetricSummary summarize() const; // requires >= 2 values
};

bool dominates(const MetricSummary& a, const MetricSummary& b);

struct RankedRule {
    std::string rule_id;
    MetricSummary ce;
};

struct Ranking {
    std::vector<RankedRule> order; // descending by p2_5, ties by rule_id
    std::string winner;
    // Rules (other than the winner) the winner does not dominate.
    std::vector<std::string> not_dominated;
};

Ranking rank_rules(const std::map<std::string, MetricSummary>& ce_by_rule);

struct DensityBin {
    double center = 0.0;
    double density = 0.0;
};

// Histogram with bins centered on integer multiples of bin_width; densities
// integrate to one.
std::vector<DensityBin> export_density(const std::vector<double>& pooled, double bin_width);

} // namespace ppolicy

#endif
