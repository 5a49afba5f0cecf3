#include "ppolicy/config.hpp"

#include <fstream>
#include <stdexcept>

#include "ppolicy/csv.hpp"

namespace ppolicy {

using nlohmann::json;

namespace {

std::vector<std::string> spec_names(const CharacteristicSpec& s) {
    std::vector<std::string> out;
    for (auto c : s.included) out.push_back(to_string(c));
    return out;
}

CharacteristicSpec spec_from_json(const json& j, const CharacteristicSpec& fallback) {
    CharacteristicSpec s = fallback;
    if (j.contains("characteristics"))
        s = make_spec(j.at("characteristics").get<std::vector<std::string>>(), s.v_treatment,
                      s.strict_book_inclusion);
    if (j.contains("v_treatment")) {
        const auto v = j.at("v_treatment").get<std::string>();
        if (v == "all")
            s.v_treatment = VTreatment::All;
        else if (v == "exempt_financials")
            s.v_treatment = VTreatment::ExemptFinancials;
        else
            throw std::runtime_error("unknown v_treatment: " + v);
    }
    if (j.contains("strict_book_inclusion"))
        s.strict_book_inclusion = j.at("strict_book_inclusion").get<bool>();
    s.validate();
    return s;
}

} // namespace

json dgp_to_json(const synthgen::DGPConfig& d) {
    json j;
    j["n_stocks"] = d.n_stocks;
    j["n_months"] = d.n_months;
    j["k"] = d.k;
    j["signal_loadings"] = d.signal_loadings.empty() ? std::vector<double>(d.k, 0.0)
                                                     : d.signal_loadings;
    j["noise_sd"] = d.noise_sd;
    j["market_mean"] = d.market_mean;
    j["market_sd"] = d.market_sd;
    j["char_persistence"] =
        d.char_persistence.empty() ? std::vector<double>(d.k, 0.9) : d.char_persistence;
    j["seed"] = d.seed;
    j["truncate_returns"] = d.truncate_returns;
    j["cap_log_mean"] = d.cap_log_mean;
    j["cap_log_sd"] = d.cap_log_sd;
    j["cap_persistence"] = d.cap_persistence;
    return j;
}

synthgen::DGPConfig dgp_from_json(const json& j) {
    synthgen::DGPConfig d;
    if (j.contains("weak_signal_preset") && j.at("weak_signal_preset").get<bool>())
        d = synthgen::weak_signal_config(d.seed);
    d.n_stocks = j.value("n_stocks", d.n_stocks);
    d.n_months = j.value("n_months", d.n_months);
    d.k = j.value("k", d.k);
    if (j.contains("signal_loadings"))
        d.signal_loadings = j.at("signal_loadings").get<std::vector<double>>();
    d.noise_sd = j.value("noise_sd", d.noise_sd);
    d.market_mean = j.value("market_mean", d.market_mean);
    d.market_sd = j.value("market_sd", d.market_sd);
    if (j.contains("char_persistence"))
        d.char_persistence = j.at("char_persistence").get<std::vector<double>>();
    d.seed = j.value("seed", d.seed);
    d.truncate_returns = j.value("truncate_returns", d.truncate_returns);
    d.cap_log_mean = j.value("cap_log_mean", d.cap_log_mean);
    d.cap_log_sd = j.value("cap_log_sd", d.cap_log_sd);
    d.cap_persistence = j.value("cap_persistence", d.cap_persistence);
    d.validate();
    return d;
}

void ExperimentConfig::validate() const {
    panel.spec.validate();
    if (rules.empty()) throw std::runtime_error("config needs at least one rule");
    if (gammas.empty()) throw std::runtime_error("config needs at least one gamma");
    if (panel.in_sample_months < 24)
        throw std::runtime_error("in_sample_months must be at least 24");
    for (const auto& r : rules) {
        r.validate();
        for (auto c : r.spec.included)
            if (!panel.spec.includes(c))
                throw std::runtime_error("rule '" + r.id + "' uses characteristic " +
                                         to_string(c) + " absent from the panel spec");
    }
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;

    const auto& jp = j.at("panel");
    const auto source = jp.at("source").get<std::string>();
    if (source == "synthetic")
        c.panel.kind = PanelSourceKind::Synthetic;
    else if (source == "raw-history")
        c.panel.kind = PanelSourceKind::RawHistory;
    else if (source == "prebuilt-panel")
        c.panel.kind = PanelSourceKind::PrebuiltPanel;
    else
        throw std::runtime_error("unknown panel source: " + source);

    c.panel.path = jp.value("path", std::string());
    c.panel.market_index = jp.value("market_index", std::string());
    if (jp.contains("dgp")) c.panel.dgp = dgp_from_json(jp.at("dgp"));
    c.panel.in_sample_months = jp.value("in_sample_months", 180);

    CharacteristicSpec panel_default;
    if (c.panel.kind == PanelSourceKind::Synthetic) {
        panel_default = c.panel.dgp.spec();
    } else {
        panel_default = make_spec({"M", "V", "S", "beta", "r_lag12", "r_bar", "sigma_eps"});
    }
    c.panel.spec = spec_from_json(jp, panel_default);

    if (j.contains("filters")) {
        const auto& jf = j.at("filters");
        c.filters.enabled = true;
        auto& f = c.filters.filters;
        f.min_real_size = jf.value("min_real_size", 0.0);
        c.filters.deflator_path = jf.value("deflator", std::string());
        f.deflator_base_month = jf.value("deflator_base_month", 0);
        f.small_pct_before = jf.value("small_pct_before", f.small_pct_before);
        f.small_pct_after = jf.value("small_pct_after", f.small_pct_after);
        f.breakpoint_month = jf.value("breakpoint_month", f.breakpoint_month);
        f.delist_sub_nyse_amex = jf.value("delist_sub_nyse_amex", f.delist_sub_nyse_amex);
        f.delist_sub_nasdaq = jf.value("delist_sub_nasdaq", f.delist_sub_nasdaq);
        f.history_months = jf.value("history_months", f.history_months);
        f.validate();
    }

    for (const auto& jr : j.at("rules")) {
        RuleSpec r;
        r.id = jr.at("id").get<std::string>();
        r.spec = spec_from_json(jr, c.panel.spec);
        r.gamma_star = jr.at("gamma_star").get<double>();
        r.protocol = protocol_from_string(jr.value("protocol", std::string("updating")));
        r.window_months = jr.value("window_months", 180);
        r.validate();
        c.rules.push_back(std::move(r));
    }

    if (j.contains("gammas")) c.gammas = j.at("gammas").get<std::vector<double>>();
    c.replicates = j.value("replicates", c.replicates);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("rf")) {
        c.rf.constant_bp = j.at("rf").value("constant_bp", c.rf.constant_bp);
        c.rf.path = j.at("rf").value("path", std::string());
    }
    if (j.contains("factor_panel")) {
        FactorFileConfig f;
        f.path = j.at("factor_panel").at("path").get<std::string>();
        f.percent_units = j.at("factor_panel").value("percent_units", true);
        c.factor_panel = f;
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.dump_replicates = j.value("dump_replicates", c.dump_replicates);
    c.save_returns = j.value("save_returns", c.save_returns);
    c.density_bin_width = j.value("density_bin_width", c.density_bin_width);

    c.validate();
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return parse_config(j);
}

json to_canonical_json(const ExperimentConfig& c) {
    json j;
    auto& jp = j["panel"];
    switch (c.panel.kind) {
        case PanelSourceKind::Synthetic: jp["source"] = "synthetic"; break;
        case PanelSourceKind::RawHistory: jp["source"] = "raw-history"; break;
        case PanelSourceKind::PrebuiltPanel: jp["source"] = "prebuilt-panel"; break;
    }
    jp["path"] = c.panel.path;
    jp["market_index"] = c.panel.market_index;
    jp["dgp"] = dgp_to_json(c.panel.dgp);
    jp["in_sample_months"] = c.panel.in_sample_months;
    jp["characteristics"] = spec_names(c.panel.spec);
    jp["v_treatment"] =
        c.panel.spec.v_treatment == VTreatment::All ? "all" : "exempt_financials";
    jp["strict_book_inclusion"] = c.panel.spec.strict_book_inclusion;

    if (c.filters.enabled) {
        auto& jf = j["filters"];
        jf["min_real_size"] = c.filters.filters.min_real_size;
        jf["deflator"] = c.filters.deflator_path;
        jf["deflator_base_month"] = c.filters.filters.deflator_base_month;
        jf["small_pct_before"] = c.filters.filters.small_pct_before;
        jf["small_pct_after"] = c.filters.filters.small_pct_after;
        jf["breakpoint_month"] = c.filters.filters.breakpoint_month;
        jf["delist_sub_nyse_amex"] = c.filters.filters.delist_sub_nyse_amex;
        jf["delist_sub_nasdaq"] = c.filters.filters.delist_sub_nasdaq;
        jf["history_months"] = c.filters.filters.history_months;
    }

    j["rules"] = json::array();
    for (const auto& r : c.rules) {
        json jr;
        jr["id"] = r.id;
        jr["characteristics"] = spec_names(r.spec);
        jr["v_treatment"] = r.spec.v_treatment == VTreatment::All ? "all" : "exempt_financials";
        jr["strict_book_inclusion"] = r.spec.strict_book_inclusion;
        jr["gamma_star"] = r.gamma_star;
        jr["protocol"] = to_string(r.protocol);
        jr["window_months"] = r.window_months;
        j["rules"].push_back(std::move(jr));
    }

    j["gammas"] = c.gammas;
    j["replicates"] = c.replicates;
    j["base_seed"] = c.base_seed;
    j["threads"] = c.threads;
    j["rf"] = {{"constant_bp", c.rf.constant_bp}, {"path", c.rf.path}};
    if (c.factor_panel)
        j["factor_panel"] = {{"path", c.factor_panel->path},
                             {"percent_units", c.factor_panel->percent_units}};
    j["output_dir"] = c.output_dir;
    j["dump_replicates"] = c.dump_replicates;
    j["save_returns"] = c.save_returns;
    j["density_bin_width"] = c.density_bin_width;
    return j;
}

RawPanel load_filtered_panel(const ExperimentConfig& c, std::vector<FilterLogEntry>* log) {
    RawPanel panel;
    switch (c.panel.kind) {
        case PanelSourceKind::Synthetic: {
            auto sp = synthgen::generate_panel(c.panel.dgp);
            panel = std::move(sp.panel);
            break;
        }
        case PanelSourceKind::PrebuiltPanel: {
            if (c.panel.path.empty()) throw std::runtime_error("prebuilt-panel needs a path");
            panel = read_panel_csv_file(c.panel.path);
            break;
        }
        case PanelSourceKind::RawHistory: {
            if (c.panel.path.empty()) throw std::runtime_error("raw-history needs a path");
            auto rows = load_raw_file(c.panel.path);
            std::vector<std::pair<Month, double>> market;
            if (!c.panel.market_index.empty()) {
                auto table = csv::read_table_file(c.panel.market_index);
                const auto cm = table.column("month");
                const auto cr = table.column("ret");
                for (std::size_t r = 0; r < table.rows.size(); ++r)
                    market.emplace_back(
                        static_cast<Month>(csv::parse_int(table.rows[r][cm], c.panel.market_index)),
                        csv::parse_double(table.rows[r][cr], c.panel.market_index));
            } else {
                market = value_weighted_index(rows);
            }
            const int history = c.filters.enabled ? c.filters.filters.history_months : 60;
            panel = build_characteristics(rows, market, history);
            break;
        }
    }

    if (c.filters.enabled) {
        FilterConfig f = c.filters.filters;
        if (!c.filters.deflator_path.empty())
            f.deflator = read_deflator_csv_file(c.filters.deflator_path);
        panel = apply_filters(panel, f, log);
    } else if (log) {
        for (const auto& sec : panel.sections) {
            FilterLogEntry e;
            e.month = sec.month;
            e.input = e.surviving = static_cast<int>(sec.rows.size());
            log->push_back(e);
        }
    }
    return panel;
}

ExperimentSpec build_experiment_spec(const ExperimentConfig& c) {
    ExperimentSpec spec;
    spec.rules = c.rules;
    spec.gammas = c.gammas;
    spec.replicates = c.replicates;
    spec.base_seed = c.base_seed;
    spec.threads = c.threads;
    spec.first_oos_index = c.panel.in_sample_months;
    spec.rf_constant = c.rf.constant_bp / 1e4;
    if (!c.rf.path.empty()) {
        auto table = csv::read_table_file(c.rf.path);
        const auto cm = table.column("month");
        const auto cr = table.column("rf");
        for (std::size_t r = 0; r < table.rows.size(); ++r)
            spec.rf_by_month[static_cast<Month>(csv::parse_int(table.rows[r][cm], c.rf.path))] =
                csv::parse_double(table.rows[r][cr], c.rf.path);
    }
    if (c.factor_panel)
        spec.factors = read_factor_csv_file(c.factor_panel->path, c.factor_panel->percent_units);
    spec.keep_paths = c.save_returns;
    return spec;
}

} // namespace ppolicy
