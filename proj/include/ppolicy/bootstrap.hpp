#ifndef PPOLICY_BOOTSTRAP_HPP
#define PPOLICY_BOOTSTRAP_HPP

#include <cstdint>

#include "ppolicy/panel.hpp"

namespace ppolicy {

struct PseudosampleSeed {
    std::uint64_t base_seed = 0;
    int replicate = 0;
};

// Cross-sectional bootstrap: month t of the pseudosample holds exactly N_t
// rows drawn i.i.d. with replacement from month t of the original panel.
// The draw for (base_seed, replicate, month) is a pure function of those
// three values, so replicates are reproducible under any execution order.
// Rows are drawn from the stock_id-sorted section, making the draw invariant
// to the input ordering of stocks within a month.
RawPanel draw_pseudosample_raw(const RawPanel& panel, PseudosampleSeed seed);

// Raw resample followed by re-standardization and re-derivation of the value
// weights within each resampled cross-section. A month whose resample has
// zero variance in a required characteristic is redrawn (bounded retries,
// then an error).
Panel draw_pseudosample(const RawPanel& panel, const CharacteristicSpec& spec,
                        PseudosampleSeed seed, int first_oos_index);

inline constexpr int kDegenerateRetryLimit = 100;

// One month's draw, redrawn until non-degenerate for every given spec.
RawSection draw_section(const RawSection& section, PseudosampleSeed seed,
                        const std::vector<CharacteristicSpec>& specs);

} // namespace ppolicy

#endif
