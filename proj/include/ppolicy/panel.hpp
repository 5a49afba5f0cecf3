#ifndef PPOLICY_PANEL_HPP
#define PPOLICY_PANEL_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppolicy/calendar.hpp"

namespace ppolicy {

enum class Exchange { NYSE, AMEX, NASDAQ, OTHER };

Exchange exchange_from_string(const std::string& s);
std::string to_string(Exchange e);

// Stock-level conditioning variables. The enumeration order is the canonical
// column order everywhere (CSV columns, X matrices, theta indices), so that
// coefficient indices are stable across runs and characteristic subsets.
enum class Characteristic : int {
    Momentum = 0,     // compounded return, months t-12..t-1 relative to formation month t
    BookToMarket = 1, // ln(1 + book value / market cap)
    LogSize = 2,      // ln(market cap), lagged one month before formation
    Beta = 3,         // market-model slope, trailing 60 months
    ReturnLag12 = 4,  // same-month return one year earlier
    AvgSameMonth = 5, // mean same-month return, preceding five years
    ResidualVol = 6,  // market-model residual standard deviation
};
inline constexpr int kNumCharacteristics = 7;

std::string to_string(Characteristic c);
Characteristic characteristic_from_string(const std::string& s);

enum class VTreatment { All, ExemptFinancials };

struct CharacteristicSpec {
    std::vector<Characteristic> included; // canonical order, no duplicates
    VTreatment v_treatment = VTreatment::All;
    // When true, stocks without a positive book value are dropped from the
    // sample regardless of whether BookToMarket is a conditioning variable.
    bool strict_book_inclusion = true;

    // Throws on duplicates or if ReturnLag12 is included without AvgSameMonth.
    void validate() const;
    bool includes(Characteristic c) const;
    int k() const { return static_cast<int>(included.size()); }
    std::string label() const; // e.g. "M,S,beta"
};

CharacteristicSpec make_spec(const std::vector<std::string>& names,
                             VTreatment v = VTreatment::All,
                             bool strict_book = true);

// One raw input observation (one stock, one calendar month).
struct RawStockMonth {
    std::string stock_id;
    Month month = 0;
    double ret = 0.0;    // simple monthly return; NaN = missing
    double market_cap = 0.0;
    double book_value = 0.0; // NaN = absent
    bool is_financial = false;
    Exchange exchange = Exchange::OTHER;
    bool delisted = false;
    double delist_return = 0.0; // NaN = absent
};

// One row of the (filtered) raw panel: a stock eligible at a formation month,
// carrying its raw characteristic values, the market cap used for value
// weights, and the realized return over the following month.
struct PanelRow {
    std::string stock_id;
    double next_return = 0.0; // NaN until delisting substitution fills gaps
    double market_cap = 0.0;
    bool is_financial = false;
    std::array<double, kNumCharacteristics> chars{}; // NaN = unavailable
    // Carried through from ingestion for the delisting-substitution rule;
    // meaningless (defaulted) when the panel was loaded from a prebuilt file.
    Exchange exchange = Exchange::OTHER;
    bool delisted = false;
    double delist_return = 0.0;
};

struct RawSection {
    Month month = 0;            // formation month
    std::vector<PanelRow> rows; // sorted by stock_id (canonical order)
};

struct RawPanel {
    std::vector<RawSection> sections; // months strictly increasing
    std::size_t total_rows() const;
};

struct FilterConfig {
    double min_real_size = 0.0; // in deflator-base-month currency units; 0 disables
    std::vector<std::pair<Month, double>> deflator; // (month, index level)
    Month deflator_base_month = 0;                  // 0 -> first deflator month
    double small_pct_before = 0.10;
    double small_pct_after = 0.20;
    Month breakpoint_month = 197801;
    double delist_sub_nyse_amex = -0.30;
    double delist_sub_nasdaq = -0.50;
    int history_months = 60;

    void validate() const;
};

// A standardized monthly cross-section: X columns have zero mean and unit
// sample standard deviation, w_bar are nonnegative value weights summing to 1,
// and returns are the realized next-month returns.
struct CrossSection {
    Month month = 0;
    Eigen::VectorXd returns;
    Eigen::MatrixXd X; // N x K
    Eigen::VectorXd w_bar;
    std::vector<std::string> ids;

    int size() const { return static_cast<int>(returns.size()); }
};

struct Panel {
    std::vector<CrossSection> sections; // months strictly increasing
    int first_oos_index = 0;            // sections[0..first_oos_index) are in-sample
    std::vector<Characteristic> columns;

    int n_months() const { return static_cast<int>(sections.size()); }
    int k() const { return static_cast<int>(columns.size()); }
    int n_oos_months() const { return n_months() - first_oos_index; }
};

struct RawSchemaConfig {
    // Column names in the raw-history CSV; defaults match the documented schema.
    std::string month = "month";
    std::string stock_id = "stock_id";
    std::string ret = "ret";
    std::string market_cap = "mktcap";
    std::string book_value = "book_value";
    std::string is_financial = "is_financial";
    std::string exchange = "exchange";
    std::string delisted = "delisted";
    std::string delist_ret = "delist_ret";
};

// --- operations -------------------------------------------------------------

// Loads a raw-history CSV. Rejects duplicate (stock_id, month) pairs and
// malformed rows with line context. Rows are returned sorted by (id, month).
std::vector<RawStockMonth> load_raw(std::istream& in, const RawSchemaConfig& schema,
                                    const std::string& source_name = "<stream>");
std::vector<RawStockMonth> load_raw_file(const std::string& path,
                                         const RawSchemaConfig& schema = {});

// Builds per-stock-month raw characteristic vectors from return histories.
// market_index supplies the market return series for the market-model
// regression; history_months months of uninterrupted returns are required.
// Stocks without a positive book value get NaN in the BookToMarket slot.
RawPanel build_characteristics(const std::vector<RawStockMonth>& rows,
                               const std::vector<std::pair<Month, double>>& market_index,
                               int history_months = 60);

// Cap-weighted mean return per month of the sample stocks; usable as a
// market index when no external series is supplied.
std::vector<std::pair<Month, double>> value_weighted_index(const std::vector<RawStockMonth>& rows);

struct FilterLogEntry {
    Month month = 0;
    int input = 0;
    int dropped_min_size = 0;
    int dropped_percentile = 0;
    int substituted_returns = 0;
    int surviving = 0;
};

// Size filters and delisting substitution, applied month by month:
// 1) drop stocks below the inflation-adjusted minimum size,
// 2) drop the smallest small_pct fraction of survivors (ties by stock_id),
// 3) replace missing next-month returns by the delisting return if present,
//    otherwise by the exchange-specific substitute.
RawPanel apply_filters(const RawPanel& panel, const FilterConfig& config,
                       std::vector<FilterLogEntry>* log = nullptr);

// Cross-sectional standardization of the selected characteristics plus value
// weights. Stocks with a missing required characteristic are dropped; under
// ExemptFinancials the BookToMarket moments exclude financials and financial
// rows are exactly zero. Throws if a month has fewer than K+2 stocks or a
// characteristic has zero cross-sectional variance.
Panel standardize(const RawPanel& panel, const CharacteristicSpec& spec,
                  int first_oos_index);

// Prebuilt-panel CSV: month,stock_id,ret,mktcap_prev,is_financial,
// M,V,S,beta,r_lag12,r_bar,sigma_eps   (missing = empty field)
void write_panel_csv(const RawPanel& panel, std::ostream& out);
void write_panel_csv_file(const RawPanel& panel, const std::string& path);
RawPanel read_panel_csv(std::istream& in, const std::string& source_name = "<stream>");
RawPanel read_panel_csv_file(const std::string& path);

// Deflator CSV: month,index
std::vector<std::pair<Month, double>> read_deflator_csv_file(const std::string& path);

} // namespace ppolicy

#endif
