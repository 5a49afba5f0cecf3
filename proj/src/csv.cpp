#include "ppolicy/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ppolicy::csv {

std::size_t Table::column(const std::string& name) const {
    auto idx = find_column(name);
    if (!idx) throw std::runtime_error("missing CSV column: " + name);
    return *idx;
}

std::optional<std::size_t> Table::find_column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

} // namespace

Table read_table(std::istream& in, const std::string& source_name) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::runtime_error(source_name + ": empty file, header required");
    ++line_no;
    t.header = split_line(line);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_line(line);
        if (fields.size() != t.header.size())
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(t.header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return read_table(in, path);
}

double parse_double(const std::string& field, const std::string& context) {
    if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": malformed number '" + field + "'");
    }
    if (used != field.size()) throw std::runtime_error(context + ": malformed number '" + field + "'");
    return v;
}

long long parse_int(const std::string& field, const std::string& context) {
    if (field.empty()) throw std::runtime_error(context + ": empty integer field");
    std::size_t used = 0;
    long long v;
    try {
        v = std::stoll(field, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": malformed integer '" + field + "'");
    }
    if (used != field.size()) throw std::runtime_error(context + ": malformed integer '" + field + "'");
    return v;
}

std::string fixed(double value, int decimals) {
    if (std::isnan(value)) return "";
    // +0.0 normalizes a negative zero so "0.000000" is the only zero spelling.
    if (value == 0.0) value = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

} // namespace ppolicy::csv
