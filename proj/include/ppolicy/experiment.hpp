#ifndef PPOLICY_EXPERIMENT_HPP
#define PPOLICY_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppolicy/bootstrap.hpp"
#include "ppolicy/evaluate.hpp"
#include "ppolicy/factors.hpp"
#include "ppolicy/policy.hpp"

namespace ppolicy {

inline constexpr const char* kBenchmarkVW = "VW";
inline constexpr const char* kBenchmarkEW = "EW";

struct ExperimentSpec {
    std::vector<RuleSpec> rules;
    std::vector<double> gammas;
    int replicates = 100;
    std::uint64_t base_seed = 1;
    int threads = 1;
    int first_oos_index = 180;
    OptimizerOptions optimizer;
    double rf_constant = 0.0037; // monthly risk-free return when no series given
    std::map<Month, double> rf_by_month;
    std::optional<FactorPanel> factors;
    bool keep_paths = false; // retain pooled out-of-sample returns per rule

    void validate() const;
};

// Per-rule sampling distributions. Values are stored per replicate in
// replicate order, NaN marking a replicate where the rule failed (or a metric
// was undefined); distributions drop NaNs and count them as failed.
struct RuleDistributions {
    std::map<std::string, std::vector<double>> raw;
    std::vector<double> pooled_returns;
    int opt_failures = 0;

    SamplingDistribution distribution(const std::string& metric) const;
    std::vector<std::string> metric_keys() const;
};

struct ExperimentResult {
    std::vector<std::string> rule_order; // benchmarks first, then user rules
    std::map<std::string, RuleDistributions> rules;
    std::vector<int> failed_replicates; // replicates with at least one rule failure
    int replicates = 0;

    const RuleDistributions& rule(const std::string& id) const;
};

// Metric keys used in RuleDistributions::raw and the per-replicate dump.
std::string ce_metric_key(double gamma);
std::string theta_metric_key(Characteristic c);

// Bootstrap experiment: per replicate, draw one pseudosample of the filtered
// raw panel, run every rule's protocol on it, and evaluate all metrics per
// investor gamma; the value- and equal-weighted benchmarks are evaluated on
// every replicate. Deterministic for fixed (spec, base_seed) under any thread
// count.
ExperimentResult run_experiment(const RawPanel& filtered_panel, const ExperimentSpec& spec);

// Rows every rule in the experiment can use (union of the rules' requirements);
// the common resampling universe.
RawPanel restrict_to_rules(const RawPanel& panel, const std::vector<RuleSpec>& rules);

} // namespace ppolicy

#endif
