#include "ppolicy/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ppolicy/csv.hpp"

namespace ppolicy {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Exchange exchange_from_string(const std::string& s) {
    if (s == "NYSE") return Exchange::NYSE;
    if (s == "AMEX") return Exchange::AMEX;
    if (s == "NASDAQ") return Exchange::NASDAQ;
    if (s == "OTHER") return Exchange::OTHER;
    throw std::runtime_error("unknown exchange: '" + s + "'");
}

std::string to_string(Exchange e) {
    switch (e) {
        case Exchange::NYSE: return "NYSE";
        case Exchange::AMEX: return "AMEX";
        case Exchange::NASDAQ: return "NASDAQ";
        case Exchange::OTHER: return "OTHER";
    }
    return "OTHER";
}

std::string to_string(Characteristic c) {
    switch (c) {
        case Characteristic::Momentum: return "M";
        case Characteristic::BookToMarket: return "V";
        case Characteristic::LogSize: return "S";
        case Characteristic::Beta: return "beta";
        case Characteristic::ReturnLag12: return "r_lag12";
        case Characteristic::AvgSameMonth: return "r_bar";
        case Characteristic::ResidualVol: return "sigma_eps";
    }
    throw std::logic_error("bad characteristic");
}

Characteristic characteristic_from_string(const std::string& s) {
    for (int i = 0; i < kNumCharacteristics; ++i) {
        auto c = static_cast<Characteristic>(i);
        if (to_string(c) == s) return c;
    }
    throw std::runtime_error("unknown characteristic: '" + s + "'");
}

void CharacteristicSpec::validate() const {
    if (included.empty()) throw std::invalid_argument("characteristic set is empty");
    for (std::size_t i = 1; i < included.size(); ++i)
        if (static_cast<int>(included[i]) <= static_cast<int>(included[i - 1]))
            throw std::invalid_argument("characteristics must be unique and in canonical order");
    if (includes(Characteristic::ReturnLag12) && !includes(Characteristic::AvgSameMonth))
        throw std::invalid_argument("r_lag12 may only be used together with r_bar");
}

bool CharacteristicSpec::includes(Characteristic c) const {
    return std::find(included.begin(), included.end(), c) != included.end();
}

std::string CharacteristicSpec::label() const {
    std::string out;
    for (auto c : included) {
        if (!out.empty()) out += ",";
        out += to_string(c);
    }
    if (v_treatment == VTreatment::ExemptFinancials && includes(Characteristic::BookToMarket))
        out += " (V-f)";
    return out;
}

CharacteristicSpec make_spec(const std::vector<std::string>& names, VTreatment v, bool strict_book) {
    CharacteristicSpec spec;
    for (const auto& n : names) spec.included.push_back(characteristic_from_string(n));
    std::sort(spec.included.begin(), spec.included.end());
    spec.v_treatment = v;
    spec.strict_book_inclusion = strict_book;
    spec.validate();
    return spec;
}

std::size_t RawPanel::total_rows() const {
    std::size_t n = 0;
    for (const auto& s : sections) n += s.rows.size();
    return n;
}

void FilterConfig::validate() const {
    if (small_pct_before < 0 || small_pct_before >= 1 || small_pct_after < 0 || small_pct_after >= 1)
        throw std::invalid_argument("size-percentile fractions must lie in [0, 1)");
    if (history_months < 2) throw std::invalid_argument("history_months must be at least 2");
}

// --- load_raw ----------------------------------------------------------------

namespace {

bool parse_bool(const std::string& s, const std::string& context) {
    if (s == "1" || s == "true" || s == "TRUE") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s.empty()) return false;
    throw std::runtime_error(context + ": malformed boolean '" + s + "'");
}

} // namespace

std::vector<RawStockMonth> load_raw(std::istream& in, const RawSchemaConfig& schema,
                                    const std::string& source_name) {
    auto table = csv::read_table(in, source_name);
    const auto c_month = table.column(schema.month);
    const auto c_id = table.column(schema.stock_id);
    const auto c_ret = table.column(schema.ret);
    const auto c_cap = table.column(schema.market_cap);
    const auto c_book = table.find_column(schema.book_value);
    const auto c_fin = table.find_column(schema.is_financial);
    const auto c_exch = table.find_column(schema.exchange);
    const auto c_del = table.find_column(schema.delisted);
    const auto c_dret = table.find_column(schema.delist_ret);

    std::vector<RawStockMonth> out;
    out.reserve(table.rows.size());
    std::unordered_set<std::string> seen;
    seen.reserve(table.rows.size() * 2);

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = source_name + ":" + std::to_string(r + 2);
        RawStockMonth s;
        s.month = static_cast<Month>(csv::parse_int(row[c_month], ctx + " month"));
        if (!month_valid(s.month)) throw std::runtime_error(ctx + ": invalid month " + row[c_month]);
        s.stock_id = row[c_id];
        if (s.stock_id.empty()) throw std::runtime_error(ctx + ": empty stock_id");
        s.ret = csv::parse_double(row[c_ret], ctx + " ret");
        s.market_cap = csv::parse_double(row[c_cap], ctx + " mktcap");
        if (!(s.market_cap >= 0.0) && !std::isnan(s.market_cap))
            throw std::runtime_error(ctx + ": negative market cap");
        s.book_value = c_book ? csv::parse_double(row[*c_book], ctx + " book_value") : kNaN;
        s.is_financial = c_fin ? parse_bool(row[*c_fin], ctx + " is_financial") : false;
        s.exchange = (c_exch && !row[*c_exch].empty()) ? exchange_from_string(row[*c_exch])
                                                       : Exchange::OTHER;
        s.delisted = c_del ? parse_bool(row[*c_del], ctx + " delisted") : false;
        s.delist_return = c_dret ? csv::parse_double(row[*c_dret], ctx + " delist_ret") : kNaN;

        std::string key = s.stock_id + "#" + std::to_string(s.month);
        if (!seen.insert(std::move(key)).second)
            throw std::runtime_error(ctx + ": duplicate (stock_id=" + s.stock_id +
                                     ", month=" + std::to_string(s.month) + ")");
        out.push_back(std::move(s));
    }

    std::sort(out.begin(), out.end(), [](const RawStockMonth& a, const RawStockMonth& b) {
        if (a.stock_id != b.stock_id) return a.stock_id < b.stock_id;
        return a.month < b.month;
    });
    return out;
}

std::vector<RawStockMonth> load_raw_file(const std::string& path, const RawSchemaConfig& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return load_raw(in, schema, path);
}

// --- build_characteristics ---------------------------------------------------

std::vector<std::pair<Month, double>> value_weighted_index(const std::vector<RawStockMonth>& rows) {
    // Weighted by the previous month's caps, matching how the value-weighted
    // benchmark is formed.
    std::map<Month, std::unordered_map<std::string, double>> caps;
    std::map<Month, std::vector<const RawStockMonth*>> by_month;
    for (const auto& r : rows) {
        caps[r.month][r.stock_id] = r.market_cap;
        by_month[r.month].push_back(&r);
    }
    std::vector<std::pair<Month, double>> index;
    for (const auto& [m, list] : by_month) {
        Month prev = month_add(m, -1);
        auto it = caps.find(prev);
        if (it == caps.end()) continue;
        double num = 0.0, den = 0.0;
        for (const auto* r : list) {
            if (std::isnan(r->ret)) continue;
            auto c = it->second.find(r->stock_id);
            if (c == it->second.end() || std::isnan(c->second) || c->second <= 0.0) continue;
            num += c->second * r->ret;
            den += c->second;
        }
        if (den > 0.0) index.emplace_back(m, num / den);
    }
    return index;
}

namespace {

struct StockSeries {
    std::vector<Month> months;
    std::vector<const RawStockMonth*> rows;
    // Index of a month within the series, or -1.
    int find(Month m, const std::unordered_map<int, int>& idx) const {
        auto it = idx.find(m);
        return it == idx.end() ? -1 : it->second;
    }
};

// OLS of y on (1, x); returns {slope, residual sd with n-2 divisor}.
std::pair<double, double> market_model(const std::vector<double>& y, const std::vector<double>& x) {
    const int n = static_cast<int>(y.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) return {kNaN, kNaN};
    const double beta = sxy / sxx;
    const double alpha = my - beta * mx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = y[i] - alpha - beta * x[i];
        sse += e * e;
    }
    return {beta, std::sqrt(sse / (n - 2))};
}

} // namespace

RawPanel build_characteristics(const std::vector<RawStockMonth>& rows,
                               const std::vector<std::pair<Month, double>>& market_index,
                               int history_months) {
    if (history_months < 13)
        throw std::invalid_argument("history_months must cover the momentum window (>= 13)");

    std::unordered_map<Month, double> market;
    for (const auto& [m, v] : market_index) market.emplace(m, v);

    // Group rows per stock; months must be strictly increasing per stock
    // (guaranteed by load_raw's sort + duplicate rejection).
    std::map<std::string, StockSeries> stocks;
    for (const auto& r : rows) {
        auto& s = stocks[r.stock_id];
        if (!s.months.empty() && month_index(r.month) <= month_index(s.months.back()))
            throw std::runtime_error("months not strictly increasing for stock " + r.stock_id);
        s.months.push_back(r.month);
        s.rows.push_back(&r);
    }

    std::map<Month, RawSection> sections;

    for (auto& [id, s] : stocks) {
        std::unordered_map<int, int> pos;
        pos.reserve(s.months.size() * 2);
        for (int i = 0; i < static_cast<int>(s.months.size()); ++i) pos[s.months[i]] = i;

        for (int i = 0; i < static_cast<int>(s.months.size()); ++i) {
            const Month t = s.months[i];
            // Eligibility: history_months uninterrupted non-missing returns
            // ending at the formation month.
            bool ok = true;
            std::vector<double> hist(history_months), mkt(history_months);
            for (int k = 0; k < history_months; ++k) {
                const Month m = month_add(t, -(history_months - 1) + k);
                const int j = s.find(m, pos);
                if (j < 0 || std::isnan(s.rows[j]->ret)) {
                    ok = false;
                    break;
                }
                auto mk = market.find(m);
                if (mk == market.end()) {
                    ok = false;
                    break;
                }
                hist[k] = s.rows[j]->ret;
                mkt[k] = mk->second;
            }
            if (!ok) continue;

            const int j_prev = s.find(month_add(t, -1), pos);
            if (j_prev < 0) continue;
            const double cap_prev = s.rows[j_prev]->market_cap;
            const double cap_now = s.rows[i]->market_cap;
            if (!(cap_prev > 0.0) || std::isnan(cap_now) || cap_now < 0.0) continue;

            PanelRow row;
            row.stock_id = id;
            row.market_cap = cap_now;
            row.is_financial = s.rows[i]->is_financial;
            row.exchange = s.rows[i]->exchange;
            row.chars.fill(kNaN);

            // Momentum: compounded return over the 12 months ending at t-1.
            double gross = 1.0;
            for (int k = 0; k < 12; ++k)
                gross *= 1.0 + hist[history_months - 2 - k];
            row.chars[static_cast<int>(Characteristic::Momentum)] = gross - 1.0;

            row.chars[static_cast<int>(Characteristic::LogSize)] = std::log(cap_prev);

            const double book = s.rows[i]->book_value;
            if (!std::isnan(book) && book > 0.0)
                row.chars[static_cast<int>(Characteristic::BookToMarket)] =
                    std::log(1.0 + book / cap_prev);

            auto [beta, sig_eps] = market_model(hist, mkt);
            if (std::isnan(beta)) continue;
            row.chars[static_cast<int>(Characteristic::Beta)] = beta;
            row.chars[static_cast<int>(Characteristic::ResidualVol)] = sig_eps;

            // Same-month returns of the next calendar month, 1..5 years back.
            if (history_months >= 60) {
                double sum = 0.0;
                bool have = true;
                for (int y = 1; y <= 5; ++y) {
                    const int off = history_months - 1 - (12 * y - 1); // month t - (12y - 1)
                    if (off < 0) {
                        have = false;
                        break;
                    }
                    sum += hist[off];
                }
                if (have) {
                    row.chars[static_cast<int>(Characteristic::AvgSameMonth)] = sum / 5.0;
                    row.chars[static_cast<int>(Characteristic::ReturnLag12)] =
                        hist[history_months - 12];
                }
            }

            // Realized return over the following month, with delisting info.
            const Month t_next = month_add(t, 1);
            const int j_next = s.find(t_next, pos);
            if (j_next >= 0) {
                row.next_return = s.rows[j_next]->ret;
                row.delisted = s.rows[j_next]->delisted;
                row.delist_return = s.rows[j_next]->delist_return;
                row.exchange = s.rows[j_next]->exchange;
            } else {
                row.next_return = kNaN;
                row.delisted = true;
                row.delist_return = s.rows[i]->delist_return;
            }

            sections[t].rows.push_back(std::move(row));
        }
    }

    RawPanel panel;
    panel.sections.reserve(sections.size());
    for (auto& [m, sec] : sections) {
        sec.month = m;
        std::sort(sec.rows.begin(), sec.rows.end(),
                  [](const PanelRow& a, const PanelRow& b) { return a.stock_id < b.stock_id; });
        panel.sections.push_back(std::move(sec));
    }
    return panel;
}

// --- apply_filters -----------------------------------------------------------

RawPanel apply_filters(const RawPanel& panel, const FilterConfig& config,
                       std::vector<FilterLogEntry>* log) {
    config.validate();
    std::unordered_map<Month, double> deflator;
    for (const auto& [m, v] : config.deflator) deflator.emplace(m, v);
    double base_level = 1.0;
    if (config.min_real_size > 0.0) {
        if (config.deflator.empty())
            throw std::runtime_error("min_real_size set but deflator series is empty");
        const Month base = config.deflator_base_month > 0 ? config.deflator_base_month
                                                          : config.deflator.front().first;
        auto it = deflator.find(base);
        if (it == deflator.end())
            throw std::runtime_error("deflator missing base month " + std::to_string(base));
        base_level = it->second;
    }

    RawPanel out;
    out.sections.reserve(panel.sections.size());
    for (const auto& sec : panel.sections) {
        FilterLogEntry entry;
        entry.month = sec.month;
        entry.input = static_cast<int>(sec.rows.size());

        std::vector<PanelRow> kept;
        kept.reserve(sec.rows.size());
        if (config.min_real_size > 0.0) {
            auto it = deflator.find(sec.month);
            if (it == deflator.end())
                throw std::runtime_error("deflator gap at month " + std::to_string(sec.month));
            const double threshold = config.min_real_size * it->second / base_level;
            for (const auto& r : sec.rows)
                if (r.market_cap >= threshold) kept.push_back(r);
            entry.dropped_min_size = entry.input - static_cast<int>(kept.size());
        } else {
            kept = sec.rows;
        }

        const double pct = sec.month < config.breakpoint_month ? config.small_pct_before
                                                               : config.small_pct_after;
        const auto n_drop = static_cast<std::size_t>(std::floor(kept.size() * pct));
        if (n_drop > 0) {
            std::vector<std::size_t> order(kept.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (kept[a].market_cap != kept[b].market_cap)
                    return kept[a].market_cap < kept[b].market_cap;
                return kept[a].stock_id < kept[b].stock_id;
            });
            std::set<std::size_t> dropped(order.begin(), order.begin() + n_drop);
            std::vector<PanelRow> surv;
            surv.reserve(kept.size() - n_drop);
            for (std::size_t i = 0; i < kept.size(); ++i)
                if (!dropped.count(i)) surv.push_back(std::move(kept[i]));
            kept = std::move(surv);
            entry.dropped_percentile = static_cast<int>(n_drop);
        }

        for (auto& r : kept) {
            if (std::isnan(r.next_return)) {
                if (!std::isnan(r.delist_return)) {
                    r.next_return = r.delist_return;
                } else if (r.exchange == Exchange::NASDAQ) {
                    r.next_return = config.delist_sub_nasdaq;
                } else {
                    r.next_return = config.delist_sub_nyse_amex;
                }
                ++entry.substituted_returns;
            }
        }

        entry.surviving = static_cast<int>(kept.size());
        if (log) log->push_back(entry);
        if (!kept.empty()) {
            RawSection s;
            s.month = sec.month;
            s.rows = std::move(kept);
            out.sections.push_back(std::move(s));
        }
    }
    return out;
}

// --- standardize -------------------------------------------------------------

Panel standardize(const RawPanel& panel, const CharacteristicSpec& spec, int first_oos_index) {
    spec.validate();
    if (first_oos_index < 0 || first_oos_index > static_cast<int>(panel.sections.size()))
        throw std::invalid_argument("first_oos_index out of range");

    const int K = spec.k();
    const bool has_v = spec.includes(Characteristic::BookToMarket);
    const bool exempt = has_v && spec.v_treatment == VTreatment::ExemptFinancials;

    Panel out;
    out.columns = spec.included;
    out.first_oos_index = first_oos_index;
    out.sections.reserve(panel.sections.size());

    for (const auto& sec : panel.sections) {
        // Row selection: every included characteristic must be present, except
        // BookToMarket on financials under the exemption (their value is
        // forced to zero). strict_book_inclusion drops bookless stocks even
        // when V is not a conditioning variable.
        std::vector<const PanelRow*> rows;
        rows.reserve(sec.rows.size());
        for (const auto& r : sec.rows) {
            if (std::isnan(r.next_return)) continue;
            if (std::isnan(r.market_cap) || r.market_cap < 0.0) continue;
            const double v_raw = r.chars[static_cast<int>(Characteristic::BookToMarket)];
            if (spec.strict_book_inclusion && std::isnan(v_raw)) continue;
            bool usable = true;
            for (auto c : spec.included) {
                if (c == Characteristic::BookToMarket && exempt && r.is_financial) continue;
                if (std::isnan(r.chars[static_cast<int>(c)])) {
                    usable = false;
                    break;
                }
            }
            if (usable) rows.push_back(&r);
        }

        const int n = static_cast<int>(rows.size());
        if (n < K + 2)
            throw std::runtime_error("month " + std::to_string(sec.month) + ": only " +
                                     std::to_string(n) + " eligible stocks for K=" +
                                     std::to_string(K));

        CrossSection cs;
        cs.month = sec.month;
        cs.returns.resize(n);
        cs.w_bar.resize(n);
        cs.X.resize(n, K);
        cs.ids.reserve(n);

        double cap_sum = 0.0;
        for (int i = 0; i < n; ++i) cap_sum += rows[i]->market_cap;
        if (!(cap_sum > 0.0))
            throw std::runtime_error("month " + std::to_string(sec.month) +
                                     ": market caps sum to zero");

        for (int i = 0; i < n; ++i) {
            cs.returns[i] = rows[i]->next_return;
            cs.w_bar[i] = rows[i]->market_cap / cap_sum;
            cs.ids.push_back(rows[i]->stock_id);
        }

        for (int k = 0; k < K; ++k) {
            const auto c = spec.included[k];
            const int ci = static_cast<int>(c);
            const bool exempt_col = (c == Characteristic::BookToMarket) && exempt;

            // Moments over the standardization population (non-financials
            // only for an exempted BookToMarket column).
            double sum = 0.0;
            int m = 0;
            for (int i = 0; i < n; ++i) {
                if (exempt_col && rows[i]->is_financial) continue;
                sum += rows[i]->chars[ci];
                ++m;
            }
            if (m < 2)
                throw std::runtime_error("month " + std::to_string(sec.month) + ": fewer than 2 " +
                                         to_string(c) + " observations to standardize");
            const double mean = sum / m;
            double ss = 0.0;
            for (int i = 0; i < n; ++i) {
                if (exempt_col && rows[i]->is_financial) continue;
                const double d = rows[i]->chars[ci] - mean;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / (m - 1));
            if (!(sd > 0.0))
                throw std::runtime_error("month " + std::to_string(sec.month) +
                                         ": zero cross-sectional variance in " + to_string(c));
            for (int i = 0; i < n; ++i) {
                if (exempt_col && rows[i]->is_financial)
                    cs.X(i, k) = 0.0;
                else
                    cs.X(i, k) = (rows[i]->chars[ci] - mean) / sd;
            }
        }

        out.sections.push_back(std::move(cs));
    }
    return out;
}

// --- panel CSV ---------------------------------------------------------------

namespace {

// Data-interchange values are written with full round-trip precision so a
// panel survives a CSV round trip bit-exactly.
std::string num_exact(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_panel_csv(const RawPanel& panel, std::ostream& out) {
    out << "month,stock_id,ret,mktcap_prev,is_financial,M,V,S,beta,r_lag12,r_bar,sigma_eps\n";
    for (const auto& sec : panel.sections) {
        for (const auto& r : sec.rows) {
            out << sec.month << ',' << r.stock_id << ',' << num_exact(r.next_return) << ','
                << num_exact(r.market_cap) << ',' << (r.is_financial ? 1 : 0);
            static constexpr Characteristic order[] = {
                Characteristic::Momentum,     Characteristic::BookToMarket,
                Characteristic::LogSize,      Characteristic::Beta,
                Characteristic::ReturnLag12,  Characteristic::AvgSameMonth,
                Characteristic::ResidualVol};
            for (auto c : order) out << ',' << num_exact(r.chars[static_cast<int>(c)]);
            out << '\n';
        }
    }
}

void write_panel_csv_file(const RawPanel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    write_panel_csv(panel, out);
}

RawPanel read_panel_csv(std::istream& in, const std::string& source_name) {
    auto table = csv::read_table(in, source_name);
    const auto c_month = table.column("month");
    const auto c_id = table.column("stock_id");
    const auto c_ret = table.column("ret");
    const auto c_cap = table.column("mktcap_prev");
    const auto c_fin = table.column("is_financial");
    static constexpr std::pair<const char*, Characteristic> cols[] = {
        {"M", Characteristic::Momentum},        {"V", Characteristic::BookToMarket},
        {"S", Characteristic::LogSize},         {"beta", Characteristic::Beta},
        {"r_lag12", Characteristic::ReturnLag12}, {"r_bar", Characteristic::AvgSameMonth},
        {"sigma_eps", Characteristic::ResidualVol}};
    std::array<std::size_t, kNumCharacteristics> cidx{};
    for (const auto& [name, c] : cols) cidx[static_cast<int>(c)] = table.column(name);

    std::map<Month, RawSection> sections;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = source_name + ":" + std::to_string(r + 2);
        PanelRow p;
        const Month m = static_cast<Month>(csv::parse_int(row[c_month], ctx + " month"));
        if (!month_valid(m)) throw std::runtime_error(ctx + ": invalid month");
        p.stock_id = row[c_id];
        p.next_return = csv::parse_double(row[c_ret], ctx + " ret");
        p.market_cap = csv::parse_double(row[c_cap], ctx + " mktcap_prev");
        p.is_financial = parse_bool(row[c_fin], ctx + " is_financial");
        for (int i = 0; i < kNumCharacteristics; ++i)
            p.chars[i] = csv::parse_double(row[cidx[i]], ctx);
        if (!seen.insert(p.stock_id + "#" + std::to_string(m)).second)
            throw std::runtime_error(ctx + ": duplicate (stock_id=" + p.stock_id + ", month=" +
                                     std::to_string(m) + ")");
        sections[m].rows.push_back(std::move(p));
    }

    RawPanel panel;
    panel.sections.reserve(sections.size());
    for (auto& [m, sec] : sections) {
        sec.month = m;
        std::sort(sec.rows.begin(), sec.rows.end(),
                  [](const PanelRow& a, const PanelRow& b) { return a.stock_id < b.stock_id; });
        panel.sections.push_back(std::move(sec));
    }
    return panel;
}

RawPanel read_panel_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return read_panel_csv(in, path);
}

std::vector<std::pair<Month, double>> read_deflator_csv_file(const std::string& path) {
    auto table = csv::read_table_file(path);
    const auto c_month = table.column("month");
    const auto c_index = table.column("index");
    std::vector<std::pair<Month, double>> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string ctx = path + ":" + std::to_string(r + 2);
        const Month m = static_cast<Month>(csv::parse_int(table.rows[r][c_month], ctx));
        const double v = csv::parse_double(table.rows[r][c_index], ctx);
        if (std::isnan(v) || v <= 0.0) throw std::runtime_error(ctx + ": invalid deflator level");
        out.emplace_back(m, v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace ppolicy
