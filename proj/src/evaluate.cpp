#include "ppolicy/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ppolicy {

namespace {

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

double mean_of(const std::vector<double>& v) {
    Accumulator acc;
    for (double x : v) acc.add(x);
    return acc.value() / v.size();
}

double sample_sd(const std::vector<double>& v, double mean) {
    Accumulator acc;
    for (double x : v) acc.add((x - mean) * (x - mean));
    return std::sqrt(acc.value() / (v.size() - 1));
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const auto n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = (n - 1) * p + 1.0; // 1-indexed position
    if (h <= 1.0) return sorted.front();
    if (h >= static_cast<double>(n)) return sorted.back();
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

} // namespace

double certainty_equivalent(const std::vector<double>& returns, double gamma) {
    if (returns.empty()) throw std::invalid_argument("empty return vector");
    if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
    for (double r : returns)
        if (r <= -1.0) return kCeSentinelBp;
    // Mean of (1+r)^(1-gamma) through log1p/expm1 with the largest exponent
    // factored out, so a constant return path round-trips to the constant at
    // full precision and extreme paths cannot overflow.
    const double expo = 1.0 - gamma;
    double peak = -std::numeric_limits<double>::infinity();
    std::vector<double> u(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i) {
        u[i] = expo * std::log1p(returns[i]);
        peak = std::max(peak, u[i]);
    }
    Accumulator acc;
    for (double ui : u) acc.add(std::exp(ui - peak));
    const double log_scaled = peak + std::log(acc.value() / returns.size());
    return 1e4 * std::expm1(log_scaled / expo);
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

RobustMoments robust_moments(const std::vector<double>& returns) {
    const auto n = returns.size();
    if (n < 40) throw std::invalid_argument("robust moments need at least 40 observations");

    RobustMoments out;
    out.mean = mean_of(returns);
    out.sd = sample_sd(returns, out.mean);

    std::vector<double> sorted = returns;
    std::sort(sorted.begin(), sorted.end());
    out.min = sorted.front();
    out.median = quantile_sorted(sorted, 0.5);
    out.iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

    if (out.sd == 0.0) throw std::runtime_error("S4 undefined: zero standard deviation");
    out.s4 = (out.mean - out.median) / out.sd;

    const auto tail = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
    const auto half = n / 2; // odd middle element belongs to neither half
    auto mean_range = [&](std::size_t first, std::size_t count) {
        Accumulator acc;
        for (std::size_t i = 0; i < count; ++i) acc.add(sorted[first + i]);
        return acc.value() / count;
    };
    const double bot_tail = mean_range(0, tail);
    const double top_tail = mean_range(n - tail, tail);
    const double bot_half = mean_range(0, half);
    const double top_half = mean_range(n - half, half);
    const double denom = top_half - bot_half;
    if (denom == 0.0) throw std::runtime_error("K3 undefined: degenerate half means");
    out.k3 = (top_tail - bot_tail) / denom - 2.63;
    return out;
}

double sharpe_annualized(const std::vector<double>& returns, const std::vector<double>& rf) {
    if (returns.size() != rf.size() || returns.size() < 2)
        throw std::invalid_argument("returns and risk-free series must align (length >= 2)");
    std::vector<double> excess(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i) excess[i] = returns[i] - rf[i];
    const double m = mean_of(excess);
    const double sd = sample_sd(excess, m);
    if (sd == 0.0) throw std::runtime_error("Sharpe undefined: zero excess-return volatility");
    return m / sd * std::sqrt(12.0);
}

double leverage_percent(const PortfolioPath& path) {
    if (path.neg_weight_sum.empty()) return 0.0;
    Accumulator acc;
    for (double v : path.neg_weight_sum) acc.add(v);
    return 100.0 * acc.value() / path.neg_weight_sum.size();
}

MetricSummary SamplingDistribution::summarize() const {
    if (values.size() < 2) throw std::runtime_error("summary needs at least 2 replicates");
    MetricSummary s;
    s.mean = mean_of(values);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    s.p2_5 = quantile_sorted(sorted, 0.025);
    s.p97_5 = quantile_sorted(sorted, 0.975);
    return s;
}

bool dominates(const MetricSummary& a, const MetricSummary& b) { return a.p2_5 > b.p97_5; }

Ranking rank_rules(const std::map<std::string, MetricSummary>& ce_by_rule) {
    if (ce_by_rule.empty()) throw std::invalid_argument("no rules to rank");
    Ranking r;
    for (const auto& [id, ce] : ce_by_rule) r.order.push_back({id, ce});
    std::sort(r.order.begin(), r.order.end(), [](const RankedRule& a, const RankedRule& b) {
        if (a.ce.p2_5 != b.ce.p2_5) return a.ce.p2_5 > b.ce.p2_5;
        return a.rule_id < b.rule_id;
    });
    r.winner = r.order.front().rule_id;
    const auto& w = r.order.front().ce;
    for (const auto& rr : r.order) {
        if (rr.rule_id == r.winner) continue;
        if (!dominates(w, rr.ce)) r.not_dominated.push_back(rr.rule_id);
    }
    std::sort(r.not_dominated.begin(), r.not_dominated.end());
    return r;
}

std::vector<DensityBin> export_density(const std::vector<double>& pooled, double bin_width) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
    std::map<long long, std::size_t> counts;
    for (double x : pooled) ++counts[std::llround(x / bin_width)];
    std::vector<DensityBin> out;
    out.reserve(counts.size());
    const double denom = static_cast<double>(pooled.size()) * bin_width;
    for (const auto& [k, c] : counts)
        out.push_back({static_cast<double>(k) * bin_width, static_cast<double>(c) / denom});
    return out;
}

} // namespace ppolicy
