#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "ppolicy/bootstrap.hpp"
#include "ppolicy/config.hpp"
#include "ppolicy/csv.hpp"
#include "ppolicy/experiment.hpp"
#include "ppolicy/reports.hpp"
#include "ppolicy/rng.hpp"
#include "ppolicy/synthgen.hpp"

namespace fs = std::filesystem;
using namespace ppolicy;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;

    void apply(ExperimentConfig& cfg) const {
        if (seed) cfg.base_seed = *seed;
        if (threads) cfg.threads = *threads;
        if (out) cfg.output_dir = *out;
    }
};

int cmd_build(const std::string& config_path, const Overrides& ov) {
    ExperimentConfig cfg = parse_config_file(config_path);
    ov.apply(cfg);
    fs::create_directories(cfg.output_dir);
    const std::string panel_path = cfg.output_dir + "/panel.csv";

    if (cfg.panel.kind == PanelSourceKind::PrebuiltPanel) {
        // Validate, then pass the file through byte-identically.
        auto panel = read_panel_csv_file(cfg.panel.path);
        fs::copy_file(cfg.panel.path, panel_path, fs::copy_options::overwrite_existing);
        std::ofstream log(cfg.output_dir + "/build_log.csv");
        log << "month,input,dropped_min_size,dropped_percentile,substituted_returns,surviving\n";
        for (const auto& sec : panel.sections)
            log << sec.month << ',' << sec.rows.size() << ",0,0,0," << sec.rows.size() << '\n';
        std::cout << "panel: " << panel_path << " (" << panel.total_rows()
                  << " rows, passthrough)\n";
        return kExitOk;
    }

    std::vector<FilterLogEntry> log;
    RawPanel panel = load_filtered_panel(cfg, &log);
    write_panel_csv_file(panel, panel_path);
    {
        std::ofstream out(cfg.output_dir + "/build_log.csv");
        out << "month,input,dropped_min_size,dropped_percentile,substituted_returns,surviving\n";
        for (const auto& e : log)
            out << e.month << ',' << e.input << ',' << e.dropped_min_size << ','
                << e.dropped_percentile << ',' << e.substituted_returns << ',' << e.surviving
                << '\n';
    }
    nlohmann::json prov;
    prov["config"] = to_canonical_json(cfg);
    prov["panel_rows"] = panel.total_rows();
    prov["panel_months"] = panel.sections.size();
    prov["panel_checksum_fnv1a"] = csv::fnv1a_file(panel_path);
    std::ofstream(cfg.output_dir + "/build_meta.json") << prov.dump(2) << '\n';
    std::cout << "panel: " << panel_path << " (" << panel.total_rows() << " rows, "
              << panel.sections.size() << " months)\n";
    return kExitOk;
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
    ExperimentConfig cfg = parse_config_file(config_path);
    ov.apply(cfg);

    std::vector<FilterLogEntry> filter_log;
    RawPanel panel = load_filtered_panel(cfg, &filter_log);
    ExperimentSpec spec = build_experiment_spec(cfg);
    ExperimentResult result = run_experiment(panel, spec);
    auto written = write_run_outputs(cfg, result, filter_log);

    // Theta paths on the original (unresampled) panel, one file per rule.
    const RawPanel universe = restrict_to_rules(panel, spec.rules);
    for (const auto& rule : spec.rules) {
        try {
            Panel std_panel = standardize(universe, rule.spec, spec.first_oos_index);
            auto pr = run_protocol(std_panel, rule, spec.optimizer);
            const std::string path = cfg.output_dir + "/theta_path_" + rule.id + ".csv";
            write_theta_path_csv(path, pr.thetas, std_panel.columns);
            written.push_back(path);
        } catch (const std::exception& e) {
            std::cerr << "theta path for rule '" << rule.id
                      << "' skipped (original-panel optimization failed): " << e.what() << "\n";
        }
    }

    for (const auto& p : written) std::cout << "wrote " << p << '\n';
    if (!result.failed_replicates.empty()) {
        std::cerr << result.failed_replicates.size()
                  << " replicate(s) had optimization failures (see run_meta.json)\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_report(const std::string& bundle, const std::optional<double>& gamma_filter,
               const std::vector<std::string>& density_rules, double bin_width) {
    const std::string summary_path = bundle + "/summary.csv";
    auto table = csv::read_table_file(summary_path);
    const auto c_rule = table.column("rule_id");
    const auto c_gamma = table.column("gamma");
    const auto c_lo = table.column("ce_p2_5");
    const auto c_mean = table.column("ce_mean");
    const auto c_hi = table.column("ce_p97_5");

    std::map<double, std::map<std::string, MetricSummary>> by_gamma;
    for (const auto& row : table.rows) {
        const double g = csv::parse_double(row[c_gamma], summary_path);
        MetricSummary s;
        s.p2_5 = csv::parse_double(row[c_lo], summary_path);
        s.mean = csv::parse_double(row[c_mean], summary_path);
        s.p97_5 = csv::parse_double(row[c_hi], summary_path);
        by_gamma[g][row[c_rule]] = s;
    }

    for (const auto& [g, rules] : by_gamma) {
        if (gamma_filter && std::abs(g - *gamma_filter) > 1e-9) continue;
        const Ranking r = rank_rules(rules);
        std::printf("gamma %.2f ranking (by 2.5%%ile certainty equivalent, bp/month):\n", g);
        int rank = 1;
        for (const auto& rr : r.order) {
            std::printf("  %2d. %-16s p2.5 %10.3f   mean %10.3f   p97.5 %10.3f%s\n", rank++,
                        rr.rule_id.c_str(), rr.ce.p2_5, rr.ce.mean, rr.ce.p97_5,
                        rr.rule_id == r.winner ? "   <- maximally dominant" : "");
        }
        std::printf("  not dominated by the winner:");
        if (r.not_dominated.empty())
            std::printf(" (none)\n");
        else {
            for (const auto& id : r.not_dominated) std::printf(" %s", id.c_str());
            std::printf("\n");
        }
    }

    for (const auto& rule : density_rules) {
        const std::string returns_path = bundle + "/returns_" + rule + ".csv";
        if (!fs::exists(returns_path)) {
            std::cerr << "unknown rule_id or missing returns file: " << rule << "\n";
            return kExitConfig;
        }
        auto rt = csv::read_table_file(returns_path);
        const auto c_ret = rt.column("ret");
        std::vector<double> pool;
        pool.reserve(rt.rows.size());
        for (const auto& row : rt.rows) pool.push_back(csv::parse_double(row[c_ret], returns_path));
        const std::string out_path = bundle + "/density_" + rule + ".csv";
        std::ofstream out(out_path);
        out << "bin_center,density\n";
        for (const auto& bin : export_density(pool, bin_width))
            out << csv::fixed(bin.center, 10) << ',' << csv::fixed(bin.density, 10) << '\n';
        std::cout << "wrote " << out_path << '\n';
    }
    return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              const std::string& prefix, const std::optional<std::uint64_t>& seed) {
    nlohmann::json j;
    {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config: " + config_path);
        in >> j;
    }
    synthgen::DGPConfig dgp = dgp_from_json(j.contains("dgp") ? j.at("dgp") : j);
    if (seed) dgp.seed = *seed;
    auto sp = synthgen::generate_panel(dgp);
    auto manifest = synthgen::write_synthetic(sp, out_dir, prefix);
    std::cout << "wrote " << manifest << " (+history/panel/market files)\n";
    return kExitOk;
}

// Fast embedded checks of the core numerical contracts.
int cmd_selftest() {
    int failures = 0;
    auto report = [&](const char* name, bool ok) {
        std::printf("%-52s %s\n", name, ok ? "PASS" : "FAIL");
        if (!ok) ++failures;
    };

    {
        RandomStream rs(1);
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            synthgen::DGPConfig c;
            c.n_stocks = 30 + static_cast<int>(rs.next_below(40));
            c.n_months = 2;
            c.k = 1 + static_cast<int>(rs.next_below(5));
            c.seed = trial;
            auto sp = synthgen::generate_panel(c);
            auto panel = standardize(sp.panel, c.spec(), 1);
            Eigen::VectorXd theta(panel.k());
            for (int k = 0; k < panel.k(); ++k) theta[k] = 5.0 * rs.next_normal();
            ok = std::abs(portfolio_weights(panel.sections[0], theta).sum() - 1.0) < 1e-12;
        }
        report("weight-sum identity (random cross-sections)", ok);
    }
    {
        synthgen::DGPConfig c;
        c.n_stocks = 60;
        c.n_months = 36;
        c.k = 3;
        c.seed = 11;
        c.signal_loadings = {0.002, 0.0, -0.002};
        auto sp = synthgen::generate_panel(c);
        auto panel = standardize(sp.panel, c.spec(), c.n_months);
        std::span<const CrossSection> window(panel.sections);
        RandomStream rs(2);
        bool ok = true;
        for (int trial = 0; trial < 10 && ok; ++trial) {
            Eigen::VectorXd theta(3);
            for (int k = 0; k < 3; ++k) theta[k] = 0.5 * rs.next_normal();
            const double gs = 2.5 + trial;
            if (objective(window, theta, gs) == kInfeasibleObjective) continue;
            Eigen::VectorXd g = gradient(window, theta, gs);
            Eigen::VectorXd fd(3);
            for (int k = 0; k < 3; ++k) {
                Eigen::VectorXd hi = theta, lo = theta;
                hi[k] += 1e-5;
                lo[k] -= 1e-5;
                fd[k] = (objective(window, hi, gs) - objective(window, lo, gs)) / 2e-5;
            }
            ok = (g - fd).norm() / fd.norm() < 1e-5;
        }
        report("analytic gradient vs central differences", ok);
    }
    {
        std::vector<double> constant(528, 0.0123);
        bool ok = std::abs(certainty_equivalent(constant, 5.0) - 123.0) < 1e-12;
        std::vector<double> crash = constant;
        crash[3] = -1.01;
        ok = ok && certainty_equivalent(crash, 5.0) == kCeSentinelBp;
        ok = ok && std::abs(certainty_equivalent({0.10, -0.10}, 2.0) + 100.0) < 1e-6;
        report("certainty equivalent closed forms and sentinel", ok);
    }
    {
        SamplingDistribution d;
        for (int i = 1; i <= 1000; ++i) d.values.push_back(i);
        const auto s = d.summarize();
        report("quantile interpolation rule", std::abs(s.p2_5 - 25.975) < 1e-12);
    }
    {
        RandomStream rs(3);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            Eigen::VectorXd b(4);
            for (int k = 0; k < 4; ++k) b[k] = rs.next_normal();
            Eigen::MatrixXd A(4, 4);
            for (int i = 0; i < 16; ++i) A(i / 4, i % 4) = rs.next_normal();
            Eigen::MatrixXd sigma = A * A.transpose() * 1e-3;
            const double resid = std::abs(rs.next_normal()) * 1e-3;
            auto d = variance_decomposition(b, sigma, resid, b.dot(sigma * b) + resid);
            ok = std::abs(d.share_sum() - 1.0) < 1e-10;
        }
        report("variance decomposition additive identity", ok);
    }
    {
        synthgen::DGPConfig c;
        c.n_stocks = 25;
        c.n_months = 10;
        c.k = 2;
        c.seed = 4;
        auto sp = synthgen::generate_panel(c);
        auto a = draw_pseudosample_raw(sp.panel, {42, 7});
        auto b = draw_pseudosample_raw(sp.panel, {42, 7});
        bool ok = a.sections.size() == b.sections.size();
        for (std::size_t t = 0; ok && t < a.sections.size(); ++t) {
            ok = a.sections[t].rows.size() == sp.panel.sections[t].rows.size();
            for (std::size_t i = 0; ok && i < a.sections[t].rows.size(); ++i)
                ok = a.sections[t].rows[i].stock_id == b.sections[t].rows[i].stock_id &&
                     a.sections[t].rows[i].next_return == b.sections[t].rows[i].next_return;
        }
        report("bootstrap determinism and count preservation", ok);
    }
    {
        RandomStream rs(8);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            std::map<std::string, MetricSummary> rules;
            for (int i = 0; i < 5; ++i) {
                MetricSummary m;
                m.p2_5 = rs.next_normal();
                m.mean = m.p2_5 + std::abs(rs.next_normal());
                m.p97_5 = m.p2_5 + 2.0 * std::abs(rs.next_normal());
                rules["r" + std::to_string(i)] = m;
            }
            auto rk = rank_rules(rules);
            const auto& w = rules.at(rk.winner);
            for (const auto& [id, m] : rules) {
                if (id == rk.winner) continue;
                const bool in_set = std::find(rk.not_dominated.begin(), rk.not_dominated.end(),
                                              id) != rk.not_dominated.end();
                if (in_set == dominates(w, m)) ok = false;
            }
        }
        report("dominance ranking vs pairwise definition", ok);
    }
    return failures == 0 ? kExitOk : kExitPartial;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"characteristic-based portfolio policy engine"};
    app.require_subcommand(1);

    std::string config_path, bundle, out_dir = "synth_out", prefix = "synth";
    Overrides ov;
    std::optional<double> gamma_filter;
    std::vector<std::string> density_rules;
    double bin_width = 0.01;
    std::optional<std::uint64_t> synth_seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", ov.seed, "override base_seed");
        sub->add_option("--threads", ov.threads, "override worker count");
        sub->add_option("--out", ov.out, "override output directory");
    };

    auto* build = app.add_subcommand("build", "ingest, filter and write the panel CSV");
    build->add_option("--config", config_path, "experiment config (JSON)")->required();
    add_common(build);

    auto* run = app.add_subcommand("run", "bootstrap experiment: estimate, evaluate, summarize");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    add_common(run);

    auto* rep =
        app.add_subcommand("report", "rank rules and export densities from a result bundle");
    rep->add_option("--bundle", bundle, "result directory written by `run`")->required();
    rep->add_option("--gamma", gamma_filter, "only report this investor gamma");
    rep->add_option("--density", density_rules, "rule id(s) to export a return density for");
    rep->add_option("--bin-width", bin_width, "density bin width (default 0.01)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic raw panel with manifest");
    synth->add_option("--config", config_path, "DGP config (JSON)")->required();
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--prefix", prefix, "file name prefix");
    synth->add_option("--seed", synth_seed, "override DGP seed");

    app.add_subcommand("selftest", "run the embedded oracle/invariant checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("build")) return cmd_build(config_path, ov);
        if (app.got_subcommand("run")) return cmd_run(config_path, ov);
        if (app.got_subcommand("report"))
            return cmd_report(bundle, gamma_filter, density_rules, bin_width);
        if (app.got_subcommand("synth")) return cmd_synth(config_path, out_dir, prefix, synth_seed);
        if (app.got_subcommand("selftest")) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
