#ifndef PPOLICY_FACTORS_HPP
#define PPOLICY_FACTORS_HPP

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "ppolicy/calendar.hpp"
#include "ppolicy/evaluate.hpp"

namespace ppolicy {

inline constexpr int kNumFactors = 4; // MKT, SMB, HML, MOM
extern const std::array<const char*, kNumFactors> kFactorNames;

struct FactorPanel {
    std::vector<Month> months;
    Eigen::MatrixXd factors; // T x 4: mkt_rf, smb, hml, mom (fractions/month)
    Eigen::VectorXd rf;      // T

    int n_months() const { return static_cast<int>(months.size()); }
    // Rows for the given months, in order; throws on a missing month.
    FactorPanel aligned_to(const std::vector<Month>& wanted) const;
};

// CSV `month,mkt_rf,smb,hml,mom,rf`. When percent_units is true values are
// divided by 100 at load (the layout of publicly distributed factor files).
FactorPanel read_factor_csv_file(const std::string& path, bool percent_units);

struct FfcRegression {
    double alpha = 0.0;              // intercept, fraction/month
    Eigen::VectorXd betas;           // 4
    double residual_variance = 0.0;  // (n-5) divisor
    Eigen::VectorXd residuals;
};

// OLS of r_p - rf on the four factors plus intercept.
FfcRegression regress_ffc(const std::vector<double>& path_returns,
                          const std::vector<Month>& path_months, const FactorPanel& factors);

struct Decomposition {
    double alpha_bp = 0.0;
    Eigen::VectorXd betas;                  // 4
    std::array<double, kNumFactors> own_shares{};
    // Upper-triangle pair order: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
    std::array<double, 6> cross_shares{};
    double orthogonal_share = 0.0;

    double share_sum() const;
};

extern const std::array<std::pair<int, int>, 6> kFactorPairs;

// Shares of total portfolio variance: beta_k^2 Var(f_k), the six
// 2 beta_j beta_k Cov(f_j, f_k) cross terms, and the residual share. With
// total_variance = beta' Sigma beta + residual_variance the eleven shares
// sum to one exactly.
Decomposition variance_decomposition(const Eigen::VectorXd& betas,
                                     const Eigen::MatrixXd& factor_cov,
                                     double residual_variance, double total_variance);

// Full pipeline for one path: regression, then decomposition with sample
// (n-1) moments throughout so the additive identity holds exactly.
Decomposition decompose_path(const std::vector<double>& path_returns,
                             const std::vector<Month>& path_months, const FactorPanel& factors);

struct ComponentReport {
    struct Entry {
        std::string component; // "MKT", "Cov(MKT,SMB)", "orthogonal", ...
        double share = 0.0;
    };
    std::vector<Entry> entries;
    bool partial_sum = false; // true when any cross term was suppressed
};

// Own shares and the orthogonal share always; cross terms only when their
// absolute share exceeds the threshold.
ComponentReport report_components(const Decomposition& d, double threshold = 0.05);

struct FactorSummary {
    Eigen::MatrixXd vol_corr;  // diagonal: sd in percent/month; off-diagonal: correlations
    Eigen::VectorXd mean_bp;   // basis points/month
};

FactorSummary factor_summary(const FactorPanel& factors);

} // namespace ppolicy

#endif
