#ifndef PPOLICY_CALENDAR_HPP
#define PPOLICY_CALENDAR_HPP

#include <stdexcept>
#include <string>

namespace ppolicy {

// Calendar months are encoded as integer YYYYMM (e.g. 197801).
using Month = int;

inline bool month_valid(Month m) {
    int mm = m % 100;
    return m > 0 && mm >= 1 && mm <= 12;
}

// Serial month index: year*12 + (month-1). Differences are calendar months.
inline int month_index(Month m) {
    if (!month_valid(m)) throw std::invalid_argument("invalid YYYYMM month: " + std::to_string(m));
    return (m / 100) * 12 + (m % 100 - 1);
}

inline Month month_from_index(int idx) {
    if (idx < 0) throw std::invalid_argument("negative month index");
    return (idx / 12) * 100 + (idx % 12 + 1);
}

inline Month month_add(Month m, int k) { return month_from_index(month_index(m) + k); }

// a - b in calendar months.
inline int month_diff(Month a, Month b) { return month_index(a) - month_index(b); }

} // namespace ppolicy

#endif
