#include "ppolicy/reports.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ppolicy/csv.hpp"

namespace ppolicy {

namespace {

// All metric values in the summary tables use 6 fixed decimals; data files
// (pooled returns) use full round-trip precision.
constexpr int kDecimals = 6;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

std::string triple(const MetricSummary& s) {
    return csv::fixed(s.p2_5, kDecimals) + "," + csv::fixed(s.mean, kDecimals) + "," +
           csv::fixed(s.p97_5, kDecimals);
}

// Empty triple when a rule failed on every replicate (no values to summarize).
std::string triple_or_blank(const RuleDistributions& rd, const std::string& metric) {
    if (rd.raw.count(metric) == 0) return ",,";
    const auto d = rd.distribution(metric);
    if (d.values.size() < 2) return ",,";
    return triple(d.summarize());
}

std::string spec_label_plus(const CharacteristicSpec& s) {
    std::string out;
    for (auto c : s.included) {
        if (!out.empty()) out += "+";
        out += to_string(c);
    }
    return out;
}

const RuleSpec* find_rule(const ExperimentConfig& config, const std::string& id) {
    for (const auto& r : config.rules)
        if (r.id == id) return &r;
    return nullptr;
}

} // namespace

std::vector<std::string> write_run_outputs(const ExperimentConfig& config,
                                           const ExperimentResult& result,
                                           const std::vector<FilterLogEntry>& filter_log) {
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    std::vector<std::string> written;
    auto path_of = [&](const std::string& name) { return config.output_dir + "/" + name; };

    static const std::vector<std::pair<const char*, const char*>> kMetricColumns = {
        {"er_pct", "er"},       {"sd_pct", "sd"},  {"median_pct", "median"},
        {"iqr_pct", "iqr"},     {"min_pct", "min"}, {"s4", "s4"},
        {"k3", "k3"},           {"sharpe_ann", "sharpe"}, {"negwts_pct", "negwts"}};

    // summary.csv
    {
        auto out = open_out(path_of("summary.csv"));
        out << "rule_id,characteristics,gamma,gamma_star,protocol,window_months,replicates,"
               "failures,ce_p2_5,ce_mean,ce_p97_5";
        for (const auto& [key, name] : kMetricColumns)
            out << ',' << name << "_p2_5," << name << "_mean," << name << "_p97_5";
        out << '\n';
        for (const auto& id : result.rule_order) {
            const auto& rd = result.rule(id);
            const RuleSpec* rule = find_rule(config, id);
            for (double g : config.gammas) {
                out << id << ',' << (rule ? spec_label_plus(rule->spec) : "-") << ','
                    << csv::fixed(g, 2) << ','
                    << (rule ? csv::fixed(rule->gamma_star, 2) : std::string("")) << ','
                    << (rule ? to_string(rule->protocol) : std::string("")) << ','
                    << (rule ? std::to_string(rule->window_months) : std::string("")) << ','
                    << result.replicates << ',' << rd.opt_failures << ','
                    << triple_or_blank(rd, ce_metric_key(g));
                for (const auto& [key, name] : kMetricColumns)
                    out << ',' << triple_or_blank(rd, key);
                out << '\n';
            }
        }
        written.push_back(path_of("summary.csv"));
    }

    // ranking.csv
    {
        auto out = open_out(path_of("ranking.csv"));
        out << "gamma,rank,rule_id,ce_p2_5,ce_mean,ce_p97_5,is_winner,not_dominated_by_winner\n";
        for (double g : config.gammas) {
            std::map<std::string, MetricSummary> ce;
            for (const auto& id : result.rule_order) {
                const auto& rd = result.rule(id);
                if (rd.raw.count(ce_metric_key(g)) == 0) continue;
                const auto d = rd.distribution(ce_metric_key(g));
                if (d.values.size() >= 2) ce[id] = d.summarize();
            }
            if (ce.empty()) continue;
            const Ranking ranking = rank_rules(ce);
            int rank = 1;
            for (const auto& rr : ranking.order) {
                const bool winner = rr.rule_id == ranking.winner;
                const bool not_dom =
                    winner || std::find(ranking.not_dominated.begin(), ranking.not_dominated.end(),
                                        rr.rule_id) != ranking.not_dominated.end();
                out << csv::fixed(g, 2) << ',' << rank++ << ',' << rr.rule_id << ','
                    << triple(rr.ce) << ',' << (winner ? 1 : 0) << ',' << (not_dom ? 1 : 0)
                    << '\n';
            }
        }
        written.push_back(path_of("ranking.csv"));
    }

    // theta_summary.csv
    {
        auto out = open_out(path_of("theta_summary.csv"));
        out << "rule_id,characteristic,theta_p2_5,theta_mean,theta_p97_5\n";
        for (const auto& id : result.rule_order) {
            const RuleSpec* rule = find_rule(config, id);
            if (!rule) continue;
            const auto& rd = result.rule(id);
            for (auto c : rule->spec.included) {
                if (rd.raw.count(theta_metric_key(c)) == 0) continue;
                const auto d = rd.distribution(theta_metric_key(c));
                if (d.values.size() < 2) continue;
                out << id << ',' << to_string(c) << ',' << triple(d.summarize()) << '\n';
            }
        }
        written.push_back(path_of("theta_summary.csv"));
    }

    // factor_summary.csv
    if (config.factor_panel) {
        auto out = open_out(path_of("factor_summary.csv"));
        out << "rule_id,component,coef_p2_5,coef_mean,coef_p97_5,share_p2_5,share_mean,"
               "share_p97_5\n";
        auto emit = [&](const std::string& id, const RuleDistributions& rd,
                        const std::string& component, const std::string& coef_key,
                        const std::string& share_key) {
            const bool has_coef = !coef_key.empty() && rd.raw.count(coef_key) > 0;
            const bool has_share = rd.raw.count(share_key) > 0;
            if (!has_coef && !has_share) return;
            out << id << ',' << component << ',';
            if (has_coef && rd.distribution(coef_key).values.size() >= 2)
                out << triple(rd.distribution(coef_key).summarize());
            else
                out << ",,";
            out << ',';
            if (has_share && rd.distribution(share_key).values.size() >= 2)
                out << triple(rd.distribution(share_key).summarize());
            else
                out << ",,";
            out << '\n';
        };
        for (const auto& id : result.rule_order) {
            const auto& rd = result.rule(id);
            emit(id, rd, "alpha_bp", "alpha_bp", "");
            for (int k = 0; k < kNumFactors; ++k)
                emit(id, rd, kFactorNames[k], std::string("beta_") + kFactorNames[k],
                     std::string("share_") + kFactorNames[k]);
            for (const auto& [jf, kf] : kFactorPairs)
                emit(id, rd, std::string("cov_") + kFactorNames[jf] + "_" + kFactorNames[kf], "",
                     std::string("share_cov_") + kFactorNames[jf] + "_" + kFactorNames[kf]);
            emit(id, rd, "orthogonal", "", "share_orthogonal");
        }
        written.push_back(path_of("factor_summary.csv"));
    }

    // pooled returns + densities
    if (config.save_returns) {
        for (const auto& id : result.rule_order) {
            const auto& rd = result.rule(id);
            if (rd.pooled_returns.empty()) continue;
            {
                auto out = open_out(path_of("returns_" + id + ".csv"));
                out << "ret\n";
                char buf[40];
                for (double r : rd.pooled_returns) {
                    std::snprintf(buf, sizeof(buf), "%.17g", r);
                    out << buf << '\n';
                }
                written.push_back(path_of("returns_" + id + ".csv"));
            }
            {
                auto out = open_out(path_of("density_" + id + ".csv"));
                out << "bin_center,density\n";
                for (const auto& bin : export_density(rd.pooled_returns, config.density_bin_width))
                    out << csv::fixed(bin.center, 10) << ',' << csv::fixed(bin.density, 10) << '\n';
                written.push_back(path_of("density_" + id + ".csv"));
            }
        }
    }

    // replicates.csv
    if (config.dump_replicates) {
        auto out = open_out(path_of("replicates.csv"));
        out << "replicate,rule_id,gamma,metric,value\n";
        for (const auto& id : result.rule_order) {
            const auto& rd = result.rule(id);
            for (const auto& [metric, values] : rd.raw) {
                std::string gamma_field;
                std::string name = metric;
                for (double g : config.gammas) {
                    if (metric == ce_metric_key(g)) {
                        gamma_field = csv::fixed(g, 2);
                        name = "ce_bp";
                        break;
                    }
                }
                for (int b = 0; b < result.replicates; ++b) {
                    out << b << ',' << id << ',' << gamma_field << ',' << name << ','
                        << csv::fixed(values[b], kDecimals) << '\n';
                }
            }
        }
        written.push_back(path_of("replicates.csv"));
    }

    // filter provenance + meta
    {
        auto out = open_out(path_of("filter_log.csv"));
        out << "month,input,dropped_min_size,dropped_percentile,substituted_returns,surviving\n";
        for (const auto& e : filter_log)
            out << e.month << ',' << e.input << ',' << e.dropped_min_size << ','
                << e.dropped_percentile << ',' << e.substituted_returns << ',' << e.surviving
                << '\n';
        written.push_back(path_of("filter_log.csv"));
    }
    {
        nlohmann::json meta;
        meta["config"] = to_canonical_json(config);
        meta["replicates"] = result.replicates;
        meta["failed_replicates"] = result.failed_replicates;
        nlohmann::json failures;
        for (const auto& id : result.rule_order) failures[id] = result.rule(id).opt_failures;
        meta["optimization_failures"] = failures;
        meta["rule_order"] = result.rule_order;
        auto out = open_out(path_of("run_meta.json"));
        out << meta.dump(2) << '\n';
        written.push_back(path_of("run_meta.json"));
    }
    return written;
}

void write_theta_path_csv(const std::string& path, const std::vector<PolicyTheta>& thetas,
                          const std::vector<Characteristic>& columns) {
    auto out = open_out(path);
    out << "year,characteristic,theta\n";
    for (std::size_t y = 0; y < thetas.size(); ++y)
        for (std::size_t k = 0; k < columns.size(); ++k)
            out << (y + 1) << ',' << to_string(columns[k]) << ','
                << csv::fixed(thetas[y].theta[static_cast<int>(k)], 8) << '\n';
}

} // namespace ppolicy
