#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ppolicy/bootstrap.hpp"
#include "ppolicy/evaluate.hpp"
#include "ppolicy/experiment.hpp"
#include "ppolicy/factors.hpp"
#include "ppolicy/panel.hpp"
#include "ppolicy/policy.hpp"
#include "ppolicy/synthgen.hpp"

namespace py = pybind11;
using namespace ppolicy;

namespace {

CharacteristicSpec spec_from_names(const std::vector<std::string>& names,
                                   const std::string& v_treatment, bool strict_book) {
    VTreatment vt = VTreatment::All;
    if (v_treatment == "exempt_financials")
        vt = VTreatment::ExemptFinancials;
    else if (v_treatment != "all")
        throw std::invalid_argument("v_treatment must be 'all' or 'exempt_financials'");
    return make_spec(names, vt, strict_book);
}

RuleSpec rule_from_dict(const py::dict& d, const CharacteristicSpec& fallback) {
    RuleSpec r;
    r.id = d["id"].cast<std::string>();
    r.gamma_star = d["gamma_star"].cast<double>();
    r.spec = fallback;
    if (d.contains("characteristics"))
        r.spec = spec_from_names(d["characteristics"].cast<std::vector<std::string>>(),
                                 d.contains("v_treatment") ? d["v_treatment"].cast<std::string>()
                                                           : "all",
                                 false);
    if (d.contains("protocol")) r.protocol = protocol_from_string(d["protocol"].cast<std::string>());
    if (d.contains("window_months")) r.window_months = d["window_months"].cast<int>();
    r.validate();
    return r;
}

py::dict moments_to_dict(const RobustMoments& m) {
    py::dict d;
    d["mean"] = m.mean;
    d["sd"] = m.sd;
    d["median"] = m.median;
    d["iqr"] = m.iqr;
    d["min"] = m.min;
    d["s4"] = m.s4;
    d["k3"] = m.k3;
    return d;
}

py::dict summary_to_dict(const MetricSummary& s) {
    py::dict d;
    d["p2_5"] = s.p2_5;
    d["mean"] = s.mean;
    d["p97_5"] = s.p97_5;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "characteristic-based portfolio policies: estimation, bootstrap, evaluation";

    py::class_<RawPanel>(m, "RawPanel")
        .def_property_readonly("n_months",
                               [](const RawPanel& p) { return p.sections.size(); })
        .def_property_readonly("total_rows", &RawPanel::total_rows)
        .def("months",
             [](const RawPanel& p) {
                 std::vector<Month> out;
                 for (const auto& s : p.sections) out.push_back(s.month);
                 return out;
             })
        .def("section_size", [](const RawPanel& p, int t) {
            return p.sections.at(t).rows.size();
        });

    py::class_<CrossSection>(m, "CrossSection")
        .def_property_readonly("month", [](const CrossSection& c) { return c.month; })
        .def_property_readonly("returns", [](const CrossSection& c) { return c.returns; })
        .def_property_readonly("X", [](const CrossSection& c) { return c.X; })
        .def_property_readonly("w_bar", [](const CrossSection& c) { return c.w_bar; })
        .def_property_readonly("ids", [](const CrossSection& c) { return c.ids; });

    py::class_<Panel>(m, "Panel")
        .def_property_readonly("n_months", &Panel::n_months)
        .def_property_readonly("k", &Panel::k)
        .def_property_readonly("first_oos_index",
                               [](const Panel& p) { return p.first_oos_index; })
        .def_property_readonly("columns",
                               [](const Panel& p) {
                                   std::vector<std::string> out;
                                   for (auto c : p.columns) out.push_back(to_string(c));
                                   return out;
                               })
        .def("section", [](const Panel& p, int t) -> const CrossSection& {
            return p.sections.at(t);
        }, py::return_value_policy::reference_internal);

    py::class_<PolicyTheta>(m, "PolicyTheta")
        .def_property_readonly("theta", [](const PolicyTheta& t) { return t.theta; })
        .def_property_readonly("gamma_star", [](const PolicyTheta& t) { return t.gamma_star; })
        .def_property_readonly("window_first", [](const PolicyTheta& t) { return t.window_first; })
        .def_property_readonly("window_last", [](const PolicyTheta& t) { return t.window_last; })
        .def_property_readonly("iterations", [](const PolicyTheta& t) { return t.iterations; })
        .def_property_readonly("grad_norm", [](const PolicyTheta& t) { return t.grad_norm; });

    m.def(
        "synthetic_panel",
        [](int n_stocks, int n_months, int k, std::uint64_t seed,
           const std::vector<double>& signal_loadings, double noise_sd, double market_mean,
           double market_sd, bool truncate_returns) {
            synthgen::DGPConfig c;
            c.n_stocks = n_stocks;
            c.n_months = n_months;
            c.k = k;
            c.seed = seed;
            c.signal_loadings = signal_loadings;
            c.noise_sd = noise_sd;
            c.market_mean = market_mean;
            c.market_sd = market_sd;
            c.truncate_returns = truncate_returns;
            auto sp = synthgen::generate_panel(c);
            py::dict out;
            out["panel"] = sp.panel;
            std::vector<std::string> names;
            for (auto ch : c.planted_slots()) names.push_back(to_string(ch));
            out["characteristics"] = names;
            return out;
        },
        py::arg("n_stocks"), py::arg("n_months"), py::arg("k"), py::arg("seed") = 1,
        py::arg("signal_loadings") = std::vector<double>{}, py::arg("noise_sd") = 0.10,
        py::arg("market_mean") = 0.008, py::arg("market_sd") = 0.045,
        py::arg("truncate_returns") = true,
        "Generate a synthetic raw panel with planted characteristics.");

    m.def("weak_signal_panel", [](std::uint64_t seed) {
        auto cfg = synthgen::weak_signal_config(seed);
        auto sp = synthgen::generate_panel(cfg);
        py::dict out;
        out["panel"] = sp.panel;
        std::vector<std::string> names;
        for (auto ch : cfg.planted_slots()) names.push_back(to_string(ch));
        out["characteristics"] = names;
        return out;
    }, py::arg("seed") = 101, "The pilot-calibrated weak-signal configuration.");

    m.def("load_panel_csv", &read_panel_csv_file, py::arg("path"),
          "Load a prebuilt-panel CSV (month,stock_id,ret,mktcap_prev,is_financial,M,V,S,beta,"
          "r_lag12,r_bar,sigma_eps).");
    m.def("write_panel_csv", &write_panel_csv_file, py::arg("panel"), py::arg("path"));

    m.def(
        "standardize",
        [](const RawPanel& panel, const std::vector<std::string>& characteristics,
           int first_oos_index, const std::string& v_treatment, bool strict_book_inclusion) {
            return standardize(panel,
                               spec_from_names(characteristics, v_treatment,
                                               strict_book_inclusion),
                               first_oos_index);
        },
        py::arg("panel"), py::arg("characteristics"), py::arg("first_oos_index"),
        py::arg("v_treatment") = "all", py::arg("strict_book_inclusion") = false,
        "Cross-sectionally standardize the selected characteristics and derive value weights.");

    m.def("portfolio_return",
          [](const Panel& p, int t, const Eigen::VectorXd& theta) {
              return portfolio_return(p.sections.at(t), theta);
          },
          py::arg("panel"), py::arg("t"), py::arg("theta"));
    m.def("portfolio_weights",
          [](const Panel& p, int t, const Eigen::VectorXd& theta) {
              return portfolio_weights(p.sections.at(t), theta);
          },
          py::arg("panel"), py::arg("t"), py::arg("theta"));

    m.def(
        "objective",
        [](const Panel& p, const Eigen::VectorXd& theta, double gamma_star, int first, int last) {
            if (last < 0) last = p.n_months();
            std::span<const CrossSection> w(p.sections.data() + first, last - first);
            return objective(w, theta, gamma_star);
        },
        py::arg("panel"), py::arg("theta"), py::arg("gamma_star"), py::arg("first") = 0,
        py::arg("last") = -1,
        "Mean CRRA utility over the window; -inf when a month is infeasible.");

    m.def(
        "gradient",
        [](const Panel& p, const Eigen::VectorXd& theta, double gamma_star, int first, int last) {
            if (last < 0) last = p.n_months();
            std::span<const CrossSection> w(p.sections.data() + first, last - first);
            return gradient(w, theta, gamma_star);
        },
        py::arg("panel"), py::arg("theta"), py::arg("gamma_star"), py::arg("first") = 0,
        py::arg("last") = -1);

    m.def(
        "optimize_theta",
        [](const Panel& p, double gamma_star, py::object init, int first, int last) {
            if (last < 0) last = p.n_months();
            std::span<const CrossSection> w(p.sections.data() + first, last - first);
            Eigen::VectorXd init_theta = Eigen::VectorXd::Zero(p.k());
            if (!init.is_none()) init_theta = init.cast<Eigen::VectorXd>();
            return optimize_theta(w, gamma_star, init_theta);
        },
        py::arg("panel"), py::arg("gamma_star"), py::arg("init") = py::none(),
        py::arg("first") = 0, py::arg("last") = -1);

    m.def(
        "run_protocol",
        [](const Panel& p, double gamma_star, const std::string& protocol, int window_months,
           const std::vector<std::string>& characteristics) {
            RuleSpec rule;
            rule.id = "py";
            rule.spec.included = p.columns;
            if (!characteristics.empty())
                rule.spec = spec_from_names(characteristics, "all", false);
            rule.spec.strict_book_inclusion = false;
            rule.gamma_star = gamma_star;
            rule.protocol = protocol_from_string(protocol);
            rule.window_months = window_months;
            auto res = run_protocol(p, rule);
            py::dict out;
            out["returns"] = res.path.returns;
            out["neg_weight_sum"] = res.path.neg_weight_sum;
            out["months"] = res.path.months;
            out["thetas"] = res.thetas;
            return out;
        },
        py::arg("panel"), py::arg("gamma_star"), py::arg("protocol") = "updating",
        py::arg("window_months") = 180,
        py::arg("characteristics") = std::vector<std::string>{},
        "Annual re-estimation protocol: one theta per out-of-sample year plus the realized path.");

    m.def(
        "draw_pseudosample",
        [](const RawPanel& panel, const std::vector<std::string>& characteristics,
           std::uint64_t base_seed, int replicate, int first_oos_index) {
            return draw_pseudosample(panel, spec_from_names(characteristics, "all", false),
                                     PseudosampleSeed{base_seed, replicate}, first_oos_index);
        },
        py::arg("panel"), py::arg("characteristics"), py::arg("base_seed"), py::arg("replicate"),
        py::arg("first_oos_index"),
        "Cross-sectional bootstrap draw, re-standardized; deterministic in "
        "(base_seed, replicate, month).");

    m.def(
        "run_experiment",
        [](const RawPanel& panel, const std::vector<py::dict>& rules,
           const std::vector<double>& gammas, int replicates, std::uint64_t base_seed,
           int first_oos_index, int threads, double rf_constant_bp) {
            ExperimentSpec spec;
            CharacteristicSpec fallback;
            for (const auto& d : rules) spec.rules.push_back(rule_from_dict(d, fallback));
            spec.gammas = gammas;
            spec.replicates = replicates;
            spec.base_seed = base_seed;
            spec.first_oos_index = first_oos_index;
            spec.threads = threads;
            spec.rf_constant = rf_constant_bp / 1e4;
            auto res = run_experiment(panel, spec);
            py::dict out;
            for (const auto& id : res.rule_order) {
                py::dict rd;
                for (const auto& [metric, values] : res.rule(id).raw) rd[metric.c_str()] = values;
                rd["opt_failures"] = res.rule(id).opt_failures;
                out[id.c_str()] = rd;
            }
            py::dict top;
            top["rules"] = out;
            top["failed_replicates"] = res.failed_replicates;
            top["replicates"] = res.replicates;
            return top;
        },
        py::arg("panel"), py::arg("rules"), py::arg("gammas"), py::arg("replicates"),
        py::arg("base_seed") = 1, py::arg("first_oos_index") = 180, py::arg("threads") = 1,
        py::arg("rf_constant_bp") = 37.0,
        "Bootstrap experiment over pseudosamples; every rule must name its characteristics. "
        "Metric vectors are per replicate with NaN where a rule failed.");

    m.def("certainty_equivalent", &certainty_equivalent, py::arg("returns"), py::arg("gamma"),
          "Monthly certainty equivalent in bp; exactly -10000 when a return is <= -100%.");
    m.def("robust_moments",
          [](const std::vector<double>& r) { return moments_to_dict(robust_moments(r)); },
          py::arg("returns"));
    m.def("sharpe_annualized", &sharpe_annualized, py::arg("returns"), py::arg("rf"));
    m.def("quantile", &quantile, py::arg("values"), py::arg("p"));
    m.def(
        "summarize",
        [](const std::vector<double>& values) {
            SamplingDistribution d;
            d.values = values;
            return summary_to_dict(d.summarize());
        },
        py::arg("values"), "2.5%ile / mean / 97.5%ile of a sampling distribution.");
    m.def(
        "dominates",
        [](const py::dict& a, const py::dict& b) {
            MetricSummary ma{a["p2_5"].cast<double>(), a["mean"].cast<double>(),
                             a["p97_5"].cast<double>()};
            MetricSummary mb{b["p2_5"].cast<double>(), b["mean"].cast<double>(),
                             b["p97_5"].cast<double>()};
            return dominates(ma, mb);
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "rank_rules",
        [](const std::map<std::string, py::dict>& by_rule) {
            std::map<std::string, MetricSummary> ce;
            for (const auto& [id, d] : by_rule)
                ce[id] = MetricSummary{d["p2_5"].cast<double>(), d["mean"].cast<double>(),
                                       d["p97_5"].cast<double>()};
            const auto r = rank_rules(ce);
            py::dict out;
            std::vector<std::string> order;
            for (const auto& rr : r.order) order.push_back(rr.rule_id);
            out["order"] = order;
            out["winner"] = r.winner;
            out["not_dominated"] = r.not_dominated;
            return out;
        },
        py::arg("ce_by_rule"));
    m.def(
        "export_density",
        [](const std::vector<double>& pooled, double bin_width) {
            std::vector<std::pair<double, double>> out;
            for (const auto& b : export_density(pooled, bin_width))
                out.emplace_back(b.center, b.density);
            return out;
        },
        py::arg("pooled"), py::arg("bin_width"));

    m.def(
        "regress_ffc",
        [](const std::vector<double>& returns, const std::vector<Month>& months,
           const Eigen::MatrixXd& factors, const Eigen::VectorXd& rf) {
            FactorPanel f;
            f.months = months;
            f.factors = factors;
            f.rf = rf;
            const auto fit = regress_ffc(returns, months, f);
            py::dict out;
            out["alpha"] = fit.alpha;
            out["betas"] = fit.betas;
            out["residual_variance"] = fit.residual_variance;
            return out;
        },
        py::arg("returns"), py::arg("months"), py::arg("factors"), py::arg("rf"),
        "OLS of excess returns on MKT_RF, SMB, HML, MOM plus intercept.");
    m.def(
        "variance_decomposition",
        [](const Eigen::VectorXd& betas, const Eigen::MatrixXd& factor_cov,
           double residual_variance, double total_variance) {
            const auto d =
                variance_decomposition(betas, factor_cov, residual_variance, total_variance);
            py::dict out;
            out["own_shares"] = std::vector<double>(d.own_shares.begin(), d.own_shares.end());
            out["cross_shares"] = std::vector<double>(d.cross_shares.begin(),
                                                      d.cross_shares.end());
            out["orthogonal_share"] = d.orthogonal_share;
            out["share_sum"] = d.share_sum();
            return out;
        },
        py::arg("betas"), py::arg("factor_cov"), py::arg("residual_variance"),
        py::arg("total_variance"));

    m.attr("CE_SENTINEL_BP") = kCeSentinelBp;
    m.attr("__version__") = "0.1.0";
}
