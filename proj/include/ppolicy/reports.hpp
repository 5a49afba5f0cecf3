#ifndef PPOLICY_REPORTS_HPP
#define PPOLICY_REPORTS_HPP

#include <string>
#include <vector>

#include "ppolicy/config.hpp"
#include "ppolicy/experiment.hpp"

namespace ppolicy {

// Writes the result bundle into output_dir:
//   summary.csv        per (rule, gamma): CE and unconditional-moment summaries
//   ranking.csv        per gamma: rules ordered by 2.5%ile CE, dominance flags
//   theta_summary.csv  per (rule, characteristic): sampling summary of the
//                      year-averaged coefficients
//   factor_summary.csv per (rule, component): coefficient and variance-share
//                      summaries (only when a factor panel was configured)
//   returns_<rule>.csv pooled out-of-sample returns (when save_returns)
//   density_<rule>.csv return densities at the configured bin width
//   replicates.csv     per-replicate metric dump (when dump_replicates)
//   run_meta.json      config echo, failure counts, file inventory
// Returns the paths written.
std::vector<std::string> write_run_outputs(const ExperimentConfig& config,
                                           const ExperimentResult& result,
                                           const std::vector<FilterLogEntry>& filter_log);

// Theta path of one rule estimated on the original (unresampled) panel:
// year,characteristic,theta
void write_theta_path_csv(const std::string& path, const std::vector<PolicyTheta>& thetas,
                          const std::vector<Characteristic>& columns);

} // namespace ppolicy

#endif
