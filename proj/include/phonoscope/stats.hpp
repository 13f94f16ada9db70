#pragma once

// Statistical kernel. Inputs use NaN for missing values; every statistic deletes
// missing entries (pairwise for paired inputs) and reports the retained count in n.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phonoscope::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::map<std::string, double> extras;

    double extra(const std::string& key) const { return extras.at(key); }
};

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::size_t n_resamples = 0;
    std::uint64_t seed = 0;
    std::size_t redraws = 0;  // resamples on which the statistic was undefined

    bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

// --- descriptive ------------------------------------------------------------

bool is_missing(double x) noexcept;
std::vector<double> present(std::span<const double> x);
double mean(std::span<const double> x);
// Sample (n-1) variance.
double variance(std::span<const double> x);
double stddev(std::span<const double> x);
// Linear-interpolation quantile (R type 7) of unsorted data.
double quantile(std::span<const double> x, double q);
double pearson(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based), ties share the mean rank.
std::vector<double> rank_average(std::span<const double> x);

// --- distributions ----------------------------------------------------------

double chi_squared_sf(double x, double df);
double normal_sf(double z);
double student_t_two_sided_p(double t, double df);

// --- tests and effect sizes -------------------------------------------------

// rho, p (t approximation); extras: "approximate" = 1 when n < 10.
TestResult spearman(std::span<const double> x, std::span<const double> y);

// H, p; extras: "epsilon_squared" (clamped at 0), "epsilon_squared_raw", "k", "df".
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// (H - k + 1) / (N - k), unclamped.
double epsilon_squared(double h, std::size_t k, std::size_t n);

double cohens_d(std::span<const double> a, std::span<const double> b);

// U for group a, two-sided p; extras: "rank_biserial", "exact" (1/0), "z" (normal branch).
TestResult mann_whitney(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kMannWhitneyExactLimit = 12;

// Exact two-sided permutation p of U conditional on the observed tie pattern.
double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b);

std::vector<double> holm_adjust(std::span<const double> p_values);

double cosine(std::span<const double> u, std::span<const double> v);

// OLS residuals of y on x; y - mean(y) when x is constant.
std::vector<double> residualize(std::span<const double> y, std::span<const double> x);

// --- resampling -------------------------------------------------------------

// Statistic evaluated on a resample given as row indices into the caller's data.
// Returning nullopt marks the resample as undefined; it is redrawn (max 10 times).
using ResampleStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

struct BootstrapOptions {
    std::size_t n_resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    // Optional stratum label per row; resampling then preserves stratum sizes.
    std::span<const int> strata;
};

ConfidenceInterval bootstrap_ci(std::size_t n_rows, const ResampleStatistic& statistic,
                                const BootstrapOptions& options);

// Convenience: percentile CI for a statistic of a plain sample.
ConfidenceInterval bootstrap_ci(std::span<const double> values,
                                const std::function<double(std::span<const double>)>& statistic,
                                const BootstrapOptions& options);

// --- regression -------------------------------------------------------------

struct RidgeResult {
    double rmse = 0.0;
    double spearman_rho = 0.0;
    std::vector<double> predictions;  // out-of-fold, aligned with y
    std::vector<int> fold_of;         // fold assignment per row
};

// rows x cols design matrix in row-major order.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// k-fold ridge regression with per-fold standardization and unpenalized intercept.
RidgeResult ridge_cv(const Matrix& x, std::span<const double> y, int k_folds, double lambda,
                     std::uint64_t seed);

} // namespace phonoscope::stats
