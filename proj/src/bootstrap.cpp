#include "ppolicy/bootstrap.hpp"

#include <cmath>
#include <stdexcept>

#include "ppolicy/rng.hpp"

namespace ppolicy {

namespace {

RawSection draw_once(const RawSection& sec, PseudosampleSeed seed, int attempt) {
    RandomStream rs(seed.base_seed, static_cast<std::uint64_t>(seed.replicate),
                    static_cast<std::uint64_t>(sec.month), static_cast<std::uint64_t>(attempt));
    const std::size_t n = sec.rows.size();
    RawSection out;
    out.month = sec.month;
    out.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.rows.push_back(sec.rows[rs.next_below(n)]);
    return out;
}

// A resampled month is degenerate for a spec when some required characteristic
// has no cross-sectional variation over its standardization population.
bool is_degenerate(const RawSection& sec, const CharacteristicSpec& spec) {
    const bool exempt = spec.v_treatment == VTreatment::ExemptFinancials;
    for (auto c : spec.included) {
        const int ci = static_cast<int>(c);
        const bool exempt_col = (c == Characteristic::BookToMarket) && exempt;
        double lo = 0.0, hi = 0.0;
        int m = 0;
        for (const auto& r : sec.rows) {
            if (exempt_col && r.is_financial) continue;
            const double v = r.chars[ci];
            if (m == 0) {
                lo = hi = v;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            ++m;
        }
        if (m < 2 || !(hi > lo)) return true;
    }
    return false;
}

} // namespace

RawSection draw_section(const RawSection& section, PseudosampleSeed seed,
                        const std::vector<CharacteristicSpec>& specs) {
    int attempt = 0;
    RawSection drawn = draw_once(section, seed, attempt);
    auto degenerate = [&](const RawSection& s) {
        for (const auto& spec : specs)
            if (is_degenerate(s, spec)) return true;
        return false;
    };
    while (degenerate(drawn)) {
        if (++attempt > kDegenerateRetryLimit)
            throw std::runtime_error("month " + std::to_string(section.month) +
                                     ": degenerate resample after " +
                                     std::to_string(kDegenerateRetryLimit) + " redraws");
        drawn = draw_once(section, seed, attempt);
    }
    return drawn;
}

RawPanel draw_pseudosample_raw(const RawPanel& panel, PseudosampleSeed seed) {
    RawPanel out;
    out.sections.reserve(panel.sections.size());
    for (const auto& sec : panel.sections) out.sections.push_back(draw_once(sec, seed, 0));
    return out;
}

Panel draw_pseudosample(const RawPanel& panel, const CharacteristicSpec& spec,
                        PseudosampleSeed seed, int first_oos_index) {
    spec.validate();
    const std::vector<CharacteristicSpec> specs{spec};
    RawPanel resampled;
    resampled.sections.reserve(panel.sections.size());
    for (const auto& sec : panel.sections)
        resampled.sections.push_back(draw_section(sec, seed, specs));
    return standardize(resampled, spec, first_oos_index);
}

} // namespace ppolicy
