#include "ppolicy/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

namespace ppolicy {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void ExperimentSpec::validate() const {
    if (rules.empty()) throw std::invalid_argument("experiment needs at least one rule");
    if (gammas.empty()) throw std::invalid_argument("experiment needs at least one gamma");
    for (double g : gammas)
        if (!(g > 1.0)) throw std::invalid_argument("investor gamma must exceed 1");
    if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    std::set<std::string> ids;
    for (const auto& r : rules) {
        r.validate();
        if (r.id == kBenchmarkVW || r.id == kBenchmarkEW)
            throw std::invalid_argument("rule id '" + r.id + "' is reserved for the benchmark");
        if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate rule id: " + r.id);
    }
}

std::string ce_metric_key(double gamma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ce_g%g", gamma);
    return buf;
}

std::string theta_metric_key(Characteristic c) { return "theta_" + to_string(c); }

SamplingDistribution RuleDistributions::distribution(const std::string& metric) const {
    auto it = raw.find(metric);
    if (it == raw.end()) throw std::runtime_error("unknown metric: " + metric);
    SamplingDistribution d;
    d.values.reserve(it->second.size());
    for (double v : it->second) {
        if (std::isnan(v))
            ++d.failed;
        else
            d.values.push_back(v);
    }
    return d;
}

std::vector<std::string> RuleDistributions::metric_keys() const {
    std::vector<std::string> keys;
    keys.reserve(raw.size());
    for (const auto& [k, v] : raw) keys.push_back(k);
    return keys;
}

const RuleDistributions& ExperimentResult::rule(const std::string& id) const {
    auto it = rules.find(id);
    if (it == rules.end()) throw std::runtime_error("unknown rule id: " + id);
    return it->second;
}

RawPanel restrict_to_rules(const RawPanel& panel, const std::vector<RuleSpec>& rules) {
    // A row enters the common resampling universe when every rule could use
    // it: all required characteristics present, with the book-to-market value
    // waived only for financial stocks when every V-bearing rule exempts them.
    std::set<Characteristic> needed;
    bool strict_book = false;
    bool v_all_treatment = false;
    bool v_any = false;
    for (const auto& r : rules) {
        for (auto c : r.spec.included) needed.insert(c);
        strict_book = strict_book || r.spec.strict_book_inclusion;
        if (r.spec.includes(Characteristic::BookToMarket)) {
            v_any = true;
            if (r.spec.v_treatment == VTreatment::All) v_all_treatment = true;
        }
    }

    RawPanel out;
    out.sections.reserve(panel.sections.size());
    for (const auto& sec : panel.sections) {
        RawSection s;
        s.month = sec.month;
        for (const auto& r : sec.rows) {
            if (std::isnan(r.next_return)) continue;
            if (std::isnan(r.market_cap) || r.market_cap < 0.0) continue;
            const double v_raw = r.chars[static_cast<int>(Characteristic::BookToMarket)];
            if (strict_book && std::isnan(v_raw)) continue;
            bool usable = true;
            for (auto c : needed) {
                if (c == Characteristic::BookToMarket && v_any && !v_all_treatment &&
                    r.is_financial)
                    continue; // exempted financials never need a book value
                if (std::isnan(r.chars[static_cast<int>(c)])) {
                    usable = false;
                    break;
                }
            }
            if (usable) s.rows.push_back(r);
        }
        if (!s.rows.empty()) out.sections.push_back(std::move(s));
    }
    return out;
}

namespace {

struct SpecKey {
    std::vector<Characteristic> included;
    VTreatment v_treatment;
    bool operator<(const SpecKey& o) const {
        if (included != o.included) return included < o.included;
        return v_treatment < o.v_treatment;
    }
};

struct ReplicateOutput {
    // rule id -> metric -> value (NaN = metric unavailable / rule failed)
    std::map<std::string, std::map<std::string, double>> values;
    std::map<std::string, std::vector<double>> paths;
    std::set<std::string> failed_rules;
};

void evaluate_path(const PortfolioPath& path, const ExperimentSpec& spec,
                   const std::vector<double>& rf, std::map<std::string, double>& out) {
    for (double g : spec.gammas) out[ce_metric_key(g)] = certainty_equivalent(path.returns, g);
    try {
        const RobustMoments rm = robust_moments(path.returns);
        out["er_pct"] = 100.0 * rm.mean;
        out["sd_pct"] = 100.0 * rm.sd;
        out["median_pct"] = 100.0 * rm.median;
        out["iqr_pct"] = 100.0 * rm.iqr;
        out["min_pct"] = 100.0 * rm.min;
        out["s4"] = rm.s4;
        out["k3"] = rm.k3;
    } catch (const std::exception&) {
        for (const char* k : {"er_pct", "sd_pct", "median_pct", "iqr_pct", "min_pct", "s4", "k3"})
            out[k] = kNaN;
    }
    try {
        out["sharpe_ann"] = sharpe_annualized(path.returns, rf);
    } catch (const std::exception&) {
        out["sharpe_ann"] = kNaN;
    }
    out["negwts_pct"] = leverage_percent(path);
    if (spec.factors) {
        // The key set must be identical across replicates, so on failure
        // (factor panel not covering this path, rank deficiency) every factor
        // metric is present as NaN.
        out["alpha_bp"] = kNaN;
        for (int k = 0; k < kNumFactors; ++k) {
            out[std::string("beta_") + kFactorNames[k]] = kNaN;
            out[std::string("share_") + kFactorNames[k]] = kNaN;
        }
        for (const auto& [j, k] : kFactorPairs)
            out[std::string("share_cov_") + kFactorNames[j] + "_" + kFactorNames[k]] = kNaN;
        out["share_orthogonal"] = kNaN;
        try {
            const Decomposition d = decompose_path(path.returns, path.months, *spec.factors);
            out["alpha_bp"] = d.alpha_bp;
            for (int k = 0; k < kNumFactors; ++k) {
                out[std::string("beta_") + kFactorNames[k]] = d.betas[k];
                out[std::string("share_") + kFactorNames[k]] = d.own_shares[k];
            }
            for (std::size_t p = 0; p < kFactorPairs.size(); ++p) {
                const auto [j, k] = kFactorPairs[p];
                out[std::string("share_cov_") + kFactorNames[j] + "_" + kFactorNames[k]] =
                    d.cross_shares[p];
            }
            out["share_orthogonal"] = d.orthogonal_share;
        } catch (const std::exception&) {
        }
    }
}

ReplicateOutput run_replicate(const RawPanel& universe, const ExperimentSpec& spec,
                              const std::map<SpecKey, CharacteristicSpec>& distinct_specs,
                              int replicate) {
    ReplicateOutput out;
    const PseudosampleSeed seed{spec.base_seed, replicate};

    // One raw draw shared by every rule; a month is redrawn if it is
    // degenerate for any of the distinct characteristic specs.
    std::vector<CharacteristicSpec> specs;
    specs.reserve(distinct_specs.size());
    for (const auto& [key, s] : distinct_specs) specs.push_back(s);

    RawPanel resampled;
    resampled.sections.reserve(universe.sections.size());
    for (const auto& sec : universe.sections)
        resampled.sections.push_back(draw_section(sec, seed, specs));

    // Risk-free series over the out-of-sample months.
    const int T = static_cast<int>(resampled.sections.size());
    const int n_years = (T - spec.first_oos_index) / 12;
    const int n_oos = 12 * n_years;
    std::vector<double> rf(n_oos);
    std::vector<Month> oos_months(n_oos);
    for (int i = 0; i < n_oos; ++i) {
        const Month m = month_add(resampled.sections[spec.first_oos_index + i].month, 1);
        oos_months[i] = m;
        auto it = spec.rf_by_month.find(m);
        rf[i] = it != spec.rf_by_month.end() ? it->second : spec.rf_constant;
    }

    // Benchmarks from the raw resample: value weights from caps, equal weights.
    {
        PortfolioPath vw, ew;
        for (int i = 0; i < n_oos; ++i) {
            const auto& sec = resampled.sections[spec.first_oos_index + i];
            double cap = 0.0, vw_r = 0.0, ew_r = 0.0;
            for (const auto& r : sec.rows) cap += r.market_cap;
            for (const auto& r : sec.rows) {
                vw_r += r.market_cap / cap * r.next_return;
                ew_r += r.next_return;
            }
            ew_r /= static_cast<double>(sec.rows.size());
            vw.returns.push_back(vw_r);
            ew.returns.push_back(ew_r);
            vw.neg_weight_sum.push_back(0.0);
            ew.neg_weight_sum.push_back(0.0);
            vw.months.push_back(oos_months[i]);
            ew.months.push_back(oos_months[i]);
        }
        evaluate_path(vw, spec, rf, out.values[kBenchmarkVW]);
        evaluate_path(ew, spec, rf, out.values[kBenchmarkEW]);
        out.paths[kBenchmarkVW] = std::move(vw.returns);
        out.paths[kBenchmarkEW] = std::move(ew.returns);
    }

    // Standardize once per distinct spec, then run every rule.
    std::map<SpecKey, Panel> panels;
    for (const auto& [key, s] : distinct_specs)
        panels.emplace(key, standardize(resampled, s, spec.first_oos_index));

    for (const auto& rule : spec.rules) {
        const SpecKey key{rule.spec.included, rule.spec.v_treatment};
        const Panel& panel = panels.at(key);
        try {
            ProtocolResult pr = run_protocol(panel, rule, spec.optimizer);
            auto& vals = out.values[rule.id];
            evaluate_path(pr.path, spec, rf, vals);
            // Table-4 style statistic: per-characteristic mean of the annual thetas.
            Eigen::VectorXd theta_mean = Eigen::VectorXd::Zero(panel.k());
            for (const auto& pt : pr.thetas) theta_mean += pt.theta;
            theta_mean /= static_cast<double>(pr.thetas.size());
            for (int k = 0; k < panel.k(); ++k)
                vals[theta_metric_key(panel.columns[k])] = theta_mean[k];
            out.paths[rule.id] = std::move(pr.path.returns);
        } catch (const OptimizeError&) {
            out.failed_rules.insert(rule.id);
        }
    }
    return out;
}

} // namespace

ExperimentResult run_experiment(const RawPanel& filtered_panel, const ExperimentSpec& spec) {
    spec.validate();
    const RawPanel universe = restrict_to_rules(filtered_panel, spec.rules);
    const int T = static_cast<int>(universe.sections.size());
    if (spec.first_oos_index < 24 || T - spec.first_oos_index < 12)
        throw std::invalid_argument("panel too short for first_oos_index=" +
                                    std::to_string(spec.first_oos_index));

    std::map<SpecKey, CharacteristicSpec> distinct_specs;
    for (const auto& r : spec.rules)
        distinct_specs.emplace(SpecKey{r.spec.included, r.spec.v_treatment}, r.spec);

    const int B = spec.replicates;
    std::vector<ReplicateOutput> outputs(B);
    std::vector<std::exception_ptr> errors(B);
    std::atomic<int> next{0};

    auto worker = [&]() {
        while (true) {
            const int b = next.fetch_add(1);
            if (b >= B) break;
            try {
                outputs[b] = run_replicate(universe, spec, distinct_specs, b);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const int n_threads = std::min(spec.threads, B);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (int b = 0; b < B; ++b)
        if (errors[b]) std::rethrow_exception(errors[b]);

    // Deterministic merge in replicate order.
    ExperimentResult res;
    res.replicates = B;
    res.rule_order = {kBenchmarkVW, kBenchmarkEW};
    for (const auto& r : spec.rules) res.rule_order.push_back(r.id);

    // Metric key universe per rule (first successful replicate defines it).
    for (const auto& id : res.rule_order) {
        RuleDistributions rd;
        std::vector<std::string> keys;
        for (int b = 0; b < B && keys.empty(); ++b) {
            auto it = outputs[b].values.find(id);
            if (it != outputs[b].values.end())
                for (const auto& [k, v] : it->second) keys.push_back(k);
        }
        for (const auto& k : keys) rd.raw[k].assign(B, kNaN);
        for (int b = 0; b < B; ++b) {
            auto it = outputs[b].values.find(id);
            if (it == outputs[b].values.end()) continue;
            for (const auto& [k, v] : it->second) {
                auto slot = rd.raw.find(k);
                if (slot != rd.raw.end()) slot->second[b] = v;
            }
        }
        if (spec.keep_paths) {
            for (int b = 0; b < B; ++b) {
                auto it = outputs[b].paths.find(id);
                if (it != outputs[b].paths.end())
                    rd.pooled_returns.insert(rd.pooled_returns.end(), it->second.begin(),
                                             it->second.end());
            }
        }
        res.rules.emplace(id, std::move(rd));
    }
    for (int b = 0; b < B; ++b) {
        if (!outputs[b].failed_rules.empty()) {
            res.failed_replicates.push_back(b);
            for (const auto& id : outputs[b].failed_rules) ++res.rules[id].opt_failures;
        }
    }
    return res;
}

} // namespace ppolicy
