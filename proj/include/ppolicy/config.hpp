#ifndef PPOLICY_CONFIG_HPP
#define PPOLICY_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppolicy/experiment.hpp"
#include "ppolicy/panel.hpp"
#include "ppolicy/policy.hpp"
#include "ppolicy/synthgen.hpp"

namespace ppolicy {

enum class PanelSourceKind { Synthetic, RawHistory, PrebuiltPanel };

struct PanelSourceConfig {
    PanelSourceKind kind = PanelSourceKind::Synthetic;
    std::string path;         // raw-history / prebuilt-panel
    std::string market_index; // optional external market series (raw-history)
    synthgen::DGPConfig dgp;  // synthetic
    CharacteristicSpec spec;  // panel characteristic set
    int in_sample_months = 180;
};

struct FilterFileConfig {
    bool enabled = false;
    FilterConfig filters;
    std::string deflator_path;
};

struct RfConfig {
    double constant_bp = 37.0;
    std::string path; // CSV month,rf (fractions); overrides the constant where present
};

struct FactorFileConfig {
    std::string path;
    bool percent_units = true;
};

struct ExperimentConfig {
    PanelSourceConfig panel;
    FilterFileConfig filters;
    std::vector<RuleSpec> rules;
    std::vector<double> gammas{2.0};
    int replicates = 100;
    std::uint64_t base_seed = 1;
    int threads = 1;
    RfConfig rf;
    std::optional<FactorFileConfig> factor_panel;
    std::string output_dir = "out";
    bool dump_replicates = false;
    bool save_returns = true;
    double density_bin_width = 0.01;

    void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical serialized form: alphabetically ordered keys, every field present,
// so parse -> serialize is a fixed point.
nlohmann::json to_canonical_json(const ExperimentConfig& c);

// Materializes the configured panel source into a filtered raw panel (ready
// for standardization), writing optional filter counts to `log`.
RawPanel load_filtered_panel(const ExperimentConfig& c, std::vector<FilterLogEntry>* log = nullptr);

// Experiment spec assembled from the config (loads rf/factor files).
ExperimentSpec build_experiment_spec(const ExperimentConfig& c);

nlohmann::json dgp_to_json(const synthgen::DGPConfig& d);
synthgen::DGPConfig dgp_from_json(const nlohmann::json& j);

} // namespace ppolicy

#endif
