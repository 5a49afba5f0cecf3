#include "ppolicy/factors.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "ppolicy/csv.hpp"

namespace ppolicy {

const std::array<const char*, kNumFactors> kFactorNames = {"MKT", "SMB", "HML", "MOM"};
const std::array<std::pair<int, int>, 6> kFactorPairs = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

FactorPanel FactorPanel::aligned_to(const std::vector<Month>& wanted) const {
    std::unordered_map<Month, int> pos;
    for (int i = 0; i < n_months(); ++i) pos.emplace(months[i], i);
    FactorPanel out;
    out.months = wanted;
    out.factors.resize(static_cast<int>(wanted.size()), kNumFactors);
    out.rf.resize(static_cast<int>(wanted.size()));
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        auto it = pos.find(wanted[i]);
        if (it == pos.end())
            throw std::runtime_error("factor panel missing month " + std::to_string(wanted[i]));
        out.factors.row(static_cast<int>(i)) = factors.row(it->second);
        out.rf[static_cast<int>(i)] = rf[it->second];
    }
    return out;
}

FactorPanel read_factor_csv_file(const std::string& path, bool percent_units) {
    auto table = csv::read_table_file(path);
    const std::array<std::size_t, 6> cols = {table.column("month"),  table.column("mkt_rf"),
                                             table.column("smb"),    table.column("hml"),
                                             table.column("mom"),    table.column("rf")};
    FactorPanel out;
    const int n = static_cast<int>(table.rows.size());
    out.factors.resize(n, kNumFactors);
    out.rf.resize(n);
    const double scale = percent_units ? 0.01 : 1.0;
    for (int r = 0; r < n; ++r) {
        const std::string ctx = path + ":" + std::to_string(r + 2);
        out.months.push_back(static_cast<Month>(csv::parse_int(table.rows[r][cols[0]], ctx)));
        for (int k = 0; k < kNumFactors; ++k)
            out.factors(r, k) = scale * csv::parse_double(table.rows[r][cols[1 + k]], ctx);
        out.rf[r] = scale * csv::parse_double(table.rows[r][cols[5]], ctx);
    }
    return out;
}

FfcRegression regress_ffc(const std::vector<double>& path_returns,
                          const std::vector<Month>& path_months, const FactorPanel& factors) {
    const int n = static_cast<int>(path_returns.size());
    if (n < 10) throw std::invalid_argument("FFC regression needs at least 10 observations");
    if (path_months.size() != path_returns.size())
        throw std::invalid_argument("return/month vectors must align");
    const FactorPanel f = factors.aligned_to(path_months);

    Eigen::MatrixXd X(n, kNumFactors + 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X.row(i).tail(kNumFactors) = f.factors.row(i);
        y[i] = path_returns[i] - f.rf[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < kNumFactors + 1) throw std::runtime_error("factor matrix is rank deficient");
    Eigen::VectorXd coef = qr.solve(y);

    FfcRegression out;
    out.alpha = coef[0];
    out.betas = coef.tail(kNumFactors);
    out.residuals = y - X * coef;
    out.residual_variance = out.residuals.squaredNorm() / (n - (kNumFactors + 1));
    return out;
}

double Decomposition::share_sum() const {
    double s = orthogonal_share;
    for (double v : own_shares) s += v;
    for (double v : cross_shares) s += v;
    return s;
}

Decomposition variance_decomposition(const Eigen::VectorXd& betas,
                                     const Eigen::MatrixXd& factor_cov,
                                     double residual_variance, double total_variance) {
    if (betas.size() != kNumFactors || factor_cov.rows() != kNumFactors ||
        factor_cov.cols() != kNumFactors)
        throw std::invalid_argument("expected 4 betas and a 4x4 factor covariance");
    if (!(total_variance > 0.0)) throw std::invalid_argument("total variance must be positive");
    if (!factor_cov.isApprox(factor_cov.transpose(), 1e-12))
        throw std::invalid_argument("factor covariance must be symmetric");

    Decomposition d;
    d.betas = betas;
    for (int k = 0; k < kNumFactors; ++k)
        d.own_shares[k] = betas[k] * betas[k] * factor_cov(k, k) / total_variance;
    for (std::size_t p = 0; p < kFactorPairs.size(); ++p) {
        const auto [j, k] = kFactorPairs[p];
        d.cross_shares[p] = 2.0 * betas[j] * betas[k] * factor_cov(j, k) / total_variance;
    }
    d.orthogonal_share = residual_variance / total_variance;
    return d;
}

Decomposition decompose_path(const std::vector<double>& path_returns,
                             const std::vector<Month>& path_months, const FactorPanel& factors) {
    const FfcRegression reg = regress_ffc(path_returns, path_months, factors);
    const FactorPanel f = factors.aligned_to(path_months);
    const int n = static_cast<int>(path_returns.size());

    Eigen::MatrixXd centered = f.factors.rowwise() - f.factors.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);

    // Sample (n-1) residual variance keeps the additive identity exact:
    // Var(y) = beta' Sigma beta + Var(e) because residuals are orthogonal to
    // the factors and sum to zero.
    const double resid_var =
        (reg.residuals.array() - reg.residuals.mean()).square().sum() / (n - 1);
    const double total = reg.betas.dot(cov * reg.betas) + resid_var;

    Decomposition d = variance_decomposition(reg.betas, cov, resid_var, total);
    d.alpha_bp = 1e4 * reg.alpha;
    return d;
}

ComponentReport report_components(const Decomposition& d, double threshold) {
    ComponentReport rep;
    for (int k = 0; k < kNumFactors; ++k)
        rep.entries.push_back({kFactorNames[k], d.own_shares[k]});
    for (std::size_t p = 0; p < kFactorPairs.size(); ++p) {
        const auto [j, k] = kFactorPairs[p];
        if (std::abs(d.cross_shares[p]) > threshold)
            rep.entries.push_back({std::string("Cov(") + kFactorNames[j] + "," + kFactorNames[k] +
                                       ")",
                                   d.cross_shares[p]});
        else
            rep.partial_sum = true;
    }
    rep.entries.push_back({"orthogonal", d.orthogonal_share});
    return rep;
}

FactorSummary factor_summary(const FactorPanel& factors) {
    const int n = factors.n_months();
    if (n < 2) throw std::invalid_argument("factor summary needs at least 2 months");
    FactorSummary s;
    Eigen::MatrixXd centered = factors.factors.rowwise() - factors.factors.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    s.vol_corr.resize(kNumFactors, kNumFactors);
    for (int i = 0; i < kNumFactors; ++i)
        for (int j = 0; j < kNumFactors; ++j)
            s.vol_corr(i, j) = i == j ? 100.0 * std::sqrt(cov(i, i))
                                      : cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
    s.mean_bp = 1e4 * factors.factors.colwise().mean();
    return s;
}

} // namespace ppolicy
