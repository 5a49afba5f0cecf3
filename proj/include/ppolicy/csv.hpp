#ifndef PPOLICY_CSV_HPP
#define PPOLICY_CSV_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace ppolicy::csv {

// Minimal RFC-ish CSV: comma separated, no quoting (the file formats used
// here never contain commas inside fields), '.' decimal point, UTF-8,
// missing value = empty field.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by header name; throws if absent.
    std::size_t column(const std::string& name) const;
    std::optional<std::size_t> find_column(const std::string& name) const;
};

Table read_table(std::istream& in, const std::string& source_name = "<stream>");
Table read_table_file(const std::string& path);

// Empty field -> NaN. Malformed numerics throw with row/column context.
double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

// Fixed-decimal formatting used by every CSV writer so output bytes are
// reproducible across runs and platforms.
std::string fixed(double value, int decimals);

// FNV-1a over file bytes; used by manifests to pin generated files.
std::uint64_t fnv1a_file(const std::string& path);

} // namespace ppolicy::csv

#endif
