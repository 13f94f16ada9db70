#include "phonoscope/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "phonoscope/error.hpp"
#include "phonoscope/parallel.hpp"
#include "phonoscope/rng.hpp"

namespace phonoscope::stats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        fail(ErrorKind::InvalidArgument, std::string(what) + ": inputs differ in length (" +
                                             std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// Pairs with both values present.
void paired_present(std::span<const double> x, std::span<const double> y, std::vector<double>& xo,
                    std::vector<double>& yo) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!is_missing(x[i]) && !is_missing(y[i])) {
            xo.push_back(x[i]);
            yo.push_back(y[i]);
        }
}

bool is_constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Sum over tie groups of (t^3 - t).
double tie_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size();) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        const double t = static_cast<double>(j - i);
        sum += t * t * t - t;
        i = j;
    }
    return sum;
}

} // namespace

// --- descriptive ------------------------------------------------------------

bool is_missing(double x) noexcept { return std::isnan(x); }

std::vector<double> present(std::span<const double> x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (double v : x)
        if (!is_missing(v)) out.push_back(v);
    return out;
}

double mean(std::span<const double> x) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : x)
        if (!is_missing(v)) {
            sum += v;
            ++n;
        }
    return n ? sum / static_cast<double>(n) : kNaN;
}

double variance(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    std::size_t n = 0;
    for (double v : x)
        if (!is_missing(v)) {
            ss += (v - m) * (v - m);
            ++n;
        }
    return n < 2 ? kNaN : ss / static_cast<double>(n - 1);
}

double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

double quantile(std::span<const double> x, double q) {
    if (x.empty()) return kNaN;
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require_same_size(x.size(), y.size(), "pearson");
    if (x.size() < 2) return kNaN;
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> rank_average(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

// --- distributions ----------------------------------------------------------

double chi_squared_sf(double x, double df) {
    if (!(df > 0)) fail(ErrorKind::InvalidArgument, "chi-squared df must be positive");
    if (std::isnan(x)) return kNaN;
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double normal_sf(double z) {
    if (std::isnan(z)) return kNaN;
    return 0.5 * boost::math::erfc(z / std::sqrt(2.0));
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0)) fail(ErrorKind::InvalidArgument, "t df must be positive");
    if (std::isnan(t)) return kNaN;
    if (std::isinf(t)) return 0.0;
    return std::min(1.0, boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t)));
}

// --- tests ------------------------------------------------------------------

TestResult spearman(std::span<const double> x, std::span<const double> y) {
    require_same_size(x.size(), y.size(), "spearman");
    std::vector<double> xs, ys;
    paired_present(x, y, xs, ys);
    const std::size_t n = xs.size();
    if (n < 3) fail(ErrorKind::TooFewPairs, "spearman needs >= 3 complete pairs, got " + std::to_string(n));
    if (is_constant(xs) || is_constant(ys)) fail(ErrorKind::ConstantInput, "spearman input is constant");
    const auto rx = rank_average(xs);
    const auto ry = rank_average(ys);
    const double rho = pearson(rx, ry);
    TestResult r;
    r.statistic = rho;
    r.n = n;
    const double df = static_cast<double>(n) - 2.0;
    if (std::abs(rho) >= 1.0) {
        r.p_value = 0.0;
    } else {
        const double t = rho * std::sqrt(df / (1.0 - rho * rho));
        r.p_value = student_t_two_sided_p(t, df);
    }
    r.extras["approximate"] = n < 10 ? 1.0 : 0.0;
    return r;
}

double epsilon_squared(double h, std::size_t k, std::size_t n) {
    if (n <= k) fail(ErrorKind::TooFewObservations, "epsilon-squared needs N > k");
    return (h - static_cast<double>(k) + 1.0) / static_cast<double>(n - k);
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) fail(ErrorKind::TooFewGroups, "Kruskal-Wallis needs >= 2 groups");
    std::vector<std::vector<double>> clean;
    std::vector<double> pooled;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        clean.push_back(present(groups[g]));
        if (clean.back().empty())
            fail(ErrorKind::EmptyGroup, "Kruskal-Wallis group " + std::to_string(g) + " is empty");
        pooled.insert(pooled.end(), clean.back().begin(), clean.back().end());
    }
    const std::size_t k = clean.size();
    const std::size_t n = pooled.size();
    if (n < k + 1)
        fail(ErrorKind::TooFewObservations, "Kruskal-Wallis needs N >= k+1");

    const auto ranks = rank_average(pooled);
    const double nd = static_cast<double>(n);
    double sum = 0.0;
    std::size_t offset = 0;
    for (const auto& g : clean) {
        double rsum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rsum += ranks[offset + i];
        offset += g.size();
        sum += rsum * rsum / static_cast<double>(g.size());
    }
    const double correction = 1.0 - tie_sum(pooled) / (nd * nd * nd - nd);

    TestResult r;
    r.n = n;
    if (correction <= 0.0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
    } else {
        const double h = (12.0 / (nd * (nd + 1.0)) * sum - 3.0 * (nd + 1.0)) / correction;
        r.statistic = std::max(0.0, h);
        r.p_value = chi_squared_sf(r.statistic, static_cast<double>(k - 1));
    }
    const double eps = epsilon_squared(r.statistic, k, n);
    r.extras["epsilon_squared_raw"] = eps;
    r.extras["epsilon_squared"] = std::max(0.0, eps);
    r.extras["k"] = static_cast<double>(k);
    r.extras["df"] = static_cast<double>(k - 1);
    return r;
}

double cohens_d(std::span<const double> a_in, std::span<const double> b_in) {
    const auto a = present(a_in);
    const auto b = present(b_in);
    if (a.size() < 2 || b.size() < 2)
        fail(ErrorKind::TooFewObservations, "Cohen's d needs >= 2 values per group");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sp = std::sqrt(((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0));
    if (!(sp >= 1e-12)) fail(ErrorKind::DegeneratePooledSD, "pooled sd is zero");
    return (mean(a) - mean(b)) / sp;
}

double mann_whitney_exact_p(std::span<const double> a_in, std::span<const double> b_in) {
    const auto a = present(a_in);
    const auto b = present(b_in);
    if (a.empty() || b.empty()) fail(ErrorKind::EmptyGroup, "Mann-Whitney group is empty");
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = rank_average(pooled);
    const std::size_t n = pooled.size(), na = a.size();

    // Doubled midranks are integers; count subsets of size na by doubled rank sum.
    std::vector<long long> r2(n);
    for (std::size_t i = 0; i < n; ++i) r2[i] = std::llround(2.0 * ranks[i]);
    const long long max_sum = std::accumulate(r2.begin(), r2.end(), 0LL);
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = std::min(i + 1, na); j >= 1; --j)
            for (long long s = max_sum; s >= r2[i]; --s)
                ways[j][static_cast<std::size_t>(s)] += ways[j - 1][static_cast<std::size_t>(s - r2[i])];

    long long observed = 0;
    for (std::size_t i = 0; i < na; ++i) observed += r2[i];
    // E[doubled sum] = na (n + 1).
    const long long centre = static_cast<long long>(na) * static_cast<long long>(n + 1);
    const long long dev_obs = std::llabs(observed - centre);
    double extreme = 0.0, total = 0.0;
    for (long long s = 0; s <= max_sum; ++s) {
        const double w = ways[na][static_cast<std::size_t>(s)];
        total += w;
        if (std::llabs(s - centre) >= dev_obs) extreme += w;
    }
    return std::min(1.0, extreme / total);
}

TestResult mann_whitney(std::span<const double> a_in, std::span<const double> b_in) {
    const auto a = present(a_in);
    const auto b = present(b_in);
    if (a.empty() || b.empty()) fail(ErrorKind::EmptyGroup, "Mann-Whitney group is empty");
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = rank_average(pooled);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double ra = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ra += ranks[i];
    const double u = ra - na * (na + 1.0) / 2.0;

    TestResult r;
    r.statistic = u;
    r.n = pooled.size();
    r.extras["rank_biserial"] = 1.0 - 2.0 * u / (na * nb);
    if (pooled.size() <= kMannWhitneyExactLimit) {
        r.p_value = mann_whitney_exact_p(a, b);
        r.extras["exact"] = 1.0;
        return r;
    }
    const double n = na + nb;
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_sum(pooled) / (n * (n - 1.0)));
    r.extras["exact"] = 0.0;
    if (var <= 0.0) {
        r.p_value = 1.0;
        r.extras["z"] = 0.0;
        return r;
    }
    const double sd = std::sqrt(var);
    const double z = std::max(0.0, std::abs(u - mu) - 0.5) / sd;
    r.extras["z"] = (u >= mu ? z : -z);
    r.p_value = std::min(1.0, 2.0 * normal_sf(z));
    return r;
}

std::vector<double> holm_adjust(std::span<const double> p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::InvalidArgument, "p-values must lie in [0,1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> out(m);
    double running = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double adj = std::min(1.0, static_cast<double>(m - j) * p[order[j]]);
        running = std::max(running, adj);
        out[order[j]] = running;
    }
    return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        fail(ErrorKind::DimMismatch, "cosine of vectors with different lengths");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (!(uu > 0.0) || !(vv > 0.0)) fail(ErrorKind::ZeroVector, "cosine of a zero vector");
    return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

std::vector<double> residualize(std::span<const double> y, std::span<const double> x) {
    require_same_size(y.size(), x.size(), "residualize");
    std::vector<double> xs, ys;
    paired_present(x, y, xs, ys);
    if (xs.size() < 3) fail(ErrorKind::TooFewObservations, "residualize needs >= 3 complete pairs");
    const double mx = mean(xs), my = mean(ys);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    std::vector<double> out(y.size(), kNaN);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!is_missing(x[i]) && !is_missing(y[i])) out[i] = (y[i] - my) - slope * (x[i] - mx);
    return out;
}

// --- resampling -------------------------------------------------------------

namespace {

constexpr std::size_t kMaxRedraws = 10;

void draw_resample(std::size_t n_rows, const std::vector<std::vector<std::size_t>>& strata_rows,
                   Rng& rng, std::vector<std::size_t>& out) {
    out.clear();
    if (strata_rows.empty()) {
        for (std::size_t i = 0; i < n_rows; ++i) out.push_back(uniform_index(rng, n_rows));
        return;
    }
    for (const auto& rows : strata_rows)
        for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(rows[uniform_index(rng, rows.size())]);
}

} // namespace

ConfidenceInterval bootstrap_ci(std::size_t n_rows, const ResampleStatistic& statistic,
                                const BootstrapOptions& options) {
    if (options.n_resamples < 100) fail(ErrorKind::InvalidArgument, "bootstrap needs >= 100 resamples");
    if (!(options.level > 0.0 && options.level < 1.0))
        fail(ErrorKind::InvalidArgument, "confidence level must lie in (0,1)");
    if (n_rows == 0) fail(ErrorKind::InsufficientData, "bootstrap of an empty sample");

    std::vector<std::vector<std::size_t>> strata_rows;
    if (!options.strata.empty()) {
        require_same_size(options.strata.size(), n_rows, "bootstrap strata");
        std::map<int, std::vector<std::size_t>> by_label;
        for (std::size_t i = 0; i < n_rows; ++i) by_label[options.strata[i]].push_back(i);
        for (auto& [_, rows] : by_label) strata_rows.push_back(std::move(rows));
    }

    std::vector<double> values(options.n_resamples);
    std::vector<std::size_t> redraws(options.n_resamples, 0);
    parallel_for(options.n_resamples, [&](std::size_t b) {
        std::vector<std::size_t> idx;
        for (std::size_t attempt = 0;; ++attempt) {
            Rng rng = make_rng(options.seed, {b, attempt});
            draw_resample(n_rows, strata_rows, rng, idx);
            const auto v = statistic(idx);
            if (v && !std::isnan(*v)) {
                values[b] = *v;
                redraws[b] = attempt;
                return;
            }
            if (attempt == kMaxRedraws)
                fail(ErrorKind::StatisticUndefinedOnResample,
                     "statistic undefined on resample " + std::to_string(b) + " after " +
                         std::to_string(kMaxRedraws) + " redraws");
        }
    });

    ConfidenceInterval ci;
    const double alpha = 1.0 - options.level;
    ci.lower = quantile(values, alpha / 2.0);
    ci.upper = quantile(values, 1.0 - alpha / 2.0);
    ci.level = options.level;
    ci.n_resamples = options.n_resamples;
    ci.seed = options.seed;
    ci.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
    return ci;
}

ConfidenceInterval bootstrap_ci(std::span<const double> values,
                                const std::function<double(std::span<const double>)>& statistic,
                                const BootstrapOptions& options) {
    return bootstrap_ci(
        values.size(),
        [&](std::span<const std::size_t> idx) -> std::optional<double> {
            std::vector<double> sample;
            sample.reserve(idx.size());
            for (std::size_t i : idx) sample.push_back(values[i]);
            return statistic(sample);
        },
        options);
}

// --- regression -------------------------------------------------------------

RidgeResult ridge_cv(const Matrix& x, std::span<const double> y, int k_folds, double lambda,
                     std::uint64_t seed) {
    const std::size_t n = x.rows, p = x.cols;
    require_same_size(n, y.size(), "ridge_cv");
    if (x.values.size() != n * p) fail(ErrorKind::InvalidArgument, "design matrix size mismatch");
    if (k_folds < 2) fail(ErrorKind::InvalidArgument, "ridge_cv needs k_folds >= 2");
    if (n < static_cast<std::size_t>(k_folds))
        fail(ErrorKind::InsufficientData, "ridge_cv needs at least k_folds rows");
    if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "ridge lambda must be >= 0");
    for (double v : x.values)
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "ridge_cv needs complete rows");
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "ridge_cv needs complete rows");

    RidgeResult result;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(seed, {0x72696467ULL});
    shuffle(std::span<std::size_t>(perm), rng);
    result.fold_of.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) result.fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
    result.predictions.assign(n, 0.0);

    for (int fold = 0; fold < k_folds; ++fold) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (result.fold_of[i] == fold ? test : train).push_back(i);
        const auto nt = static_cast<Eigen::Index>(train.size());
        Eigen::MatrixXd z(nt, static_cast<Eigen::Index>(p));
        Eigen::VectorXd yt(nt);
        for (Eigen::Index r = 0; r < nt; ++r) {
            for (std::size_t c = 0; c < p; ++c) z(r, static_cast<Eigen::Index>(c)) = x.at(train[r], c);
            yt(r) = y[train[r]];
        }
        const Eigen::RowVectorXd mu = z.colwise().mean();
        z.rowwise() -= mu;
        Eigen::RowVectorXd sd(static_cast<Eigen::Index>(p));
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const double s = nt > 1 ? std::sqrt(z.col(c).squaredNorm() / static_cast<double>(nt - 1)) : 0.0;
            sd(c) = s > 0.0 ? s : 1.0;
        }
        z.array().rowwise() /= sd.array();
        const double intercept = yt.mean();

        Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        if (p > 0) {
            Eigen::MatrixXd gram = z.transpose() * z;
            if (lambda == 0.0) {
                Eigen::FullPivLU<Eigen::MatrixXd> lu(z);
                if (lu.rank() < static_cast<Eigen::Index>(p))
                    fail(ErrorKind::SingularSystem,
                         "design matrix is rank deficient in fold " + std::to_string(fold) +
                             " and lambda = 0");
            }
            gram.diagonal().array() += lambda;
            const Eigen::VectorXd rhs = z.transpose() * (yt.array() - intercept).matrix();
            beta = gram.ldlt().solve(rhs);
        }
        for (std::size_t i : test) {
            double pred = intercept;
            for (std::size_t c = 0; c < p; ++c)
                pred += (x.at(i, c) - mu(static_cast<Eigen::Index>(c))) / sd(static_cast<Eigen::Index>(c)) *
                        beta(static_cast<Eigen::Index>(c));
            result.predictions[i] = pred;
        }
    }

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (result.predictions[i] - y[i]) * (result.predictions[i] - y[i]);
    result.rmse = std::sqrt(ss / static_cast<double>(n));
    try {
        result.spearman_rho = spearman(result.predictions, y).statistic;
    } catch (const Error&) {
        result.spearman_rho = kNaN;
    }
    return result;
}

} // namespace phonoscope::stats
