#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curbsight/errors.hpp"

namespace curbsight {

// ---------------------------------------------------------------------------
// Special functions (series / continued-fraction forms, double precision).
// ---------------------------------------------------------------------------
namespace detail {

inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

/// Upper regularized incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw InvalidInput("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

inline double beta_contfrac(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_contfrac(a, b, x) / a;
    return 1.0 - front * beta_contfrac(b, a, 1.0 - x) / b;
}

/// Chi-square upper tail P(X >= x) with k degrees of freedom.
inline double chi2_sf(double x, double k) { return gamma_q(k / 2.0, x / 2.0); }

/// Two-sided p-value for Student's t with nu degrees of freedom.
inline double t_two_sided_p(double t, double nu) {
    const double x = nu / (nu + t * t);
    return beta_inc(nu / 2.0, 0.5, x);
}

/// Standard normal two-sided tail 2*P(Z >= |z|).
inline double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

/// Average ranks (1-based) with ties shared.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

struct SummaryRow {
    std::size_t n = 0;
    double mean = 0.0;
    double mae = 0.0;  // mean of absolute values
    double median = 0.0;
    double std_dev = 0.0;  // sample, n-1 denominator
    double min = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double max = 0.0;
    double iqr = 0.0;
};

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) throw InvalidInput("quantile: empty input");
    if (n == 1) return sorted[0];
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline SummaryRow summarize(const std::vector<double>& values) {
    if (values.empty()) throw InvalidInput("summarize: empty input");
    SummaryRow row;
    row.n = values.size();
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0, abs_sum = 0.0;
    for (double v : values) {
        sum += v;
        abs_sum += std::abs(v);
    }
    const double n = static_cast<double>(values.size());
    row.mean = sum / n;
    row.mae = abs_sum / n;
    row.median = quantile(sorted, 0.5);
    row.q25 = quantile(sorted, 0.25);
    row.q75 = quantile(sorted, 0.75);
    row.iqr = row.q75 - row.q25;
    row.min = sorted.front();
    row.max = sorted.back();
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean) * (v - row.mean);
        row.std_dev = std::sqrt(ss / (n - 1.0));
    }
    return row;
}

struct RegressionMetrics {
    double mse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    bool r2_defined = true;  // false when actuals have zero variance
};

inline RegressionMetrics regression_metrics(const std::vector<double>& actual,
                                            const std::vector<double>& predicted) {
    if (actual.empty() || actual.size() != predicted.size())
        throw InvalidInput("regression_metrics: length mismatch or empty");
    RegressionMetrics m;
    const double n = static_cast<double>(actual.size());
    double mean_a = 0.0;
    for (double a : actual) mean_a += a;
    mean_a /= n;
    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        ss_res += e * e;
        abs_sum += std::abs(e);
        ss_tot += (actual[i] - mean_a) * (actual[i] - mean_a);
    }
    m.mse = ss_res / n;
    m.mae = abs_sum / n;
    if (ss_tot == 0.0) {
        m.r2_defined = false;
        m.r2 = 0.0;
    } else {
        m.r2 = 1.0 - ss_res / ss_tot;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Nonparametric tests
// ---------------------------------------------------------------------------

enum class TestMethod { wilcoxon, friedman, spearman };

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::wilcoxon;
    std::size_t n = 0;
    bool defined = true;  // false for degenerate inputs (zero variance etc.)
};

/// Paired Wilcoxon signed-rank test. Zero differences dropped; |differences|
/// ranked with average ranks; W = min(W+, W-). Exact two-sided p by a
/// rank-sum distribution (all 2^n sign patterns) for effective n <=
/// exact_threshold, else normal approximation with tie and continuity
/// correction.
inline TestResult wilcoxon_signed_rank(const std::vector<double>& a,
                                       const std::vector<double>& b,
                                       std::size_t exact_threshold = 25) {
    if (a.size() != b.size() || a.empty())
        throw InvalidInput("wilcoxon_signed_rank: length mismatch or empty");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    TestResult res;
    res.method = TestMethod::wilcoxon;
    res.n = diffs.size();
    if (diffs.empty()) {
        res.statistic = 0.0;
        res.p_value = 1.0;
        res.defined = false;
        return res;
    }
    std::vector<double> abs_d(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[i] = std::abs(diffs[i]);
    const std::vector<double> ranks = detail::average_ranks(abs_d);
    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (diffs[i] > 0.0)
            w_plus += ranks[i];
        else
            w_minus += ranks[i];
    }
    const double w = std::min(w_plus, w_minus);
    res.statistic = w;
    const std::size_t n = diffs.size();

    if (n <= exact_threshold) {
        // Average ranks are half-integers; double them so the rank-sum
        // distribution lives on integers.
        std::vector<std::int64_t> r2(n);
        std::int64_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = static_cast<std::int64_t>(std::llround(ranks[i] * 2.0));
            total += r2[i];
        }
        // counts[s] = number of sign patterns with doubled W+ = s
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        std::int64_t reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += r2[i];
            for (std::int64_t s = reach; s >= r2[i]; --s)
                counts[static_cast<std::size_t>(s)] +=
                    counts[static_cast<std::size_t>(s - r2[i])];
        }
        const std::int64_t w2 = static_cast<std::int64_t>(std::llround(w * 2.0));
        double favorable = 0.0, all = 0.0;
        for (std::int64_t s = 0; s <= total; ++s) {
            all += counts[static_cast<std::size_t>(s)];
            if (std::min(s, total - s) <= w2)
                favorable += counts[static_cast<std::size_t>(s)];
        }
        res.p_value = std::min(1.0, favorable / all);
    } else {
        const double nn = static_cast<double>(n);
        double tie_term = 0.0;
        {
            std::map<double, double> tie_counts;
            for (double r : abs_d) tie_counts[r] += 1.0;
            for (const auto& [val, t] : tie_counts) tie_term += t * t * t - t;
        }
        const double mean = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double z = (w - mean + 0.5) / std::sqrt(var);  // continuity toward mean
        res.p_value = std::min(1.0, detail::normal_two_sided_p(z));
    }
    return res;
}

/// Friedman test over an n-subjects x k-conditions complete matrix.
inline TestResult friedman(const std::vector<std::vector<double>>& matrix) {
    const std::size_t n = matrix.size();
    if (n < 2) throw InvalidInput("friedman: need at least 2 subjects");
    const std::size_t k = matrix[0].size();
    if (k < 2) throw InvalidInput("friedman: need at least 2 conditions");
    for (const auto& row : matrix)
        if (row.size() != k) throw InvalidInput("friedman: incomplete row");

    std::vector<double> rank_sums(k, 0.0);
    double tie_correction_num = 0.0;
    for (const auto& row : matrix) {
        const std::vector<double> ranks = detail::average_ranks(row);
        for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
        std::map<double, double> tie_counts;
        for (double v : row) tie_counts[v] += 1.0;
        for (const auto& [val, t] : tie_counts) tie_correction_num += t * t * t - t;
    }
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    double sum_sq = 0.0;
    for (double r : rank_sums) sum_sq += r * r;
    double chi2 = 12.0 / (nn * kk * (kk + 1.0)) * sum_sq - 3.0 * nn * (kk + 1.0);
    const double correction = 1.0 - tie_correction_num / (nn * kk * (kk * kk - 1.0));
    TestResult res;
    res.method = TestMethod::friedman;
    res.n = n;
    if (correction <= 0.0) {  // all rows fully tied
        res.statistic = 0.0;
        res.p_value = 1.0;
        res.defined = false;
        return res;
    }
    chi2 /= correction;
    res.statistic = chi2;
    res.p_value = detail::chi2_sf(std::max(0.0, chi2), kk - 1.0);
    return res;
}

/// Spearman rank correlation with t-approximation p-value.
inline TestResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3)
        throw InvalidInput("spearman: need equal lengths >= 3");
    const std::vector<double> rx = detail::average_ranks(x);
    const std::vector<double> ry = detail::average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    TestResult res;
    res.method = TestMethod::spearman;
    res.n = x.size();
    if (sxx == 0.0 || syy == 0.0) {
        res.defined = false;
        res.p_value = 1.0;
        return res;
    }
    const double rho = sxy / std::sqrt(sxx * syy);
    res.statistic = rho;
    if (std::abs(rho) >= 1.0) {
        res.p_value = 0.0;
    } else {
        const double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
        res.p_value = detail::t_two_sided_p(t, n - 2.0);
    }
    return res;
}

/// Bonferroni adjustment: p_adj = min(1, m*p).
inline std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t m) {
    if (m < p_values.size())
        throw InvalidInput("bonferroni: m must be >= number of p-values");
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) out.push_back(std::min(1.0, static_cast<double>(m) * p));
    return out;
}

/// One half-open distance bin [lo, hi) and its error summary; the final bin
/// is an unbounded overflow. Empty bins carry no summary.
struct DistanceBin {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool overflow = false;
    std::optional<SummaryRow> summary;
    std::vector<double> values;
};

inline std::vector<DistanceBin> bin_by_distance(const std::vector<double>& errors,
                                                const std::vector<double>& distances,
                                                const std::vector<double>& edges = {0.0, 10.0,
                                                                                    20.0,
                                                                                    30.0}) {
    if (errors.size() != distances.size())
        throw InvalidInput("bin_by_distance: length mismatch");
    if (edges.size() < 2) throw InvalidInput("bin_by_distance: need >= 2 edges");
    std::vector<DistanceBin> bins;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        bins.push_back({edges[i], edges[i + 1], false, std::nullopt, {}});
    bins.push_back({edges.back(), std::numeric_limits<double>::infinity(), true,
                    std::nullopt, {}});
    for (std::size_t i = 0; i < errors.size(); ++i) {
        for (auto& b : bins) {
            if (distances[i] >= b.lo && distances[i] < b.hi) {
                b.values.push_back(errors[i]);
                break;
            }
        }
    }
    for (auto& b : bins)
        if (!b.values.empty()) b.summary = summarize(b.values);
    return bins;
}

// ---------------------------------------------------------------------------
// Reference constants from the original field study (display only; never
// used as pass/fail thresholds).
// ---------------------------------------------------------------------------

struct ReferenceScenarioRow {
    const char* label;
    int n;
    double mean, median, std_dev, min, q25, q75, max, iqr;
};

inline constexpr ReferenceScenarioRow kReferenceGeolocationRows[] = {
    {"In_Slow", 63, 2.83, 1.92, 2.71, 0.31, 1.06, 3.70, 16.19, 2.64},
    {"In_Speed", 62, 5.01, 3.60, 4.26, 0.15, 1.68, 7.94, 16.57, 6.25},
    {"Out_Slow", 63, 3.04, 2.24, 2.53, 0.48, 1.43, 3.82, 10.93, 2.39},
    {"Out_Speed", 62, 4.13, 3.44, 3.14, 0.47, 1.86, 5.50, 16.12, 3.63},
};

struct ReferenceTestRow {
    const char* test;
    const char* comparison;
    double statistic;
    double p_value;
};

inline constexpr ReferenceTestRow kReferenceTestRows[] = {
    {"wilcoxon", "camera position (inside vs outside)", 919.0, 0.6869},
    {"wilcoxon", "speed effect (slow vs fast)", 353.0, 0.0001},
    {"friedman", "overall (all 4 conditions)", 19.29, 0.0002},
    {"wilcoxon", "In_Slow vs In_Speed", 375.0, 0.0000},
    {"wilcoxon", "Out_Slow vs Out_Speed", 488.0, 0.0006},
    {"wilcoxon", "In_Slow vs Out_Slow", 739.0, 0.0959},
    {"wilcoxon", "In_Speed vs Out_Speed", 778.0, 0.1640},
};

struct ReferenceDepthModelMetrics {
    double cv_mae_transformed = 0.3965;
    double mse_transformed = 0.1797;
    double mae_transformed = 0.3118;
    double r2_transformed = 0.9200;
    double mse_original = 36.5503;
    double mae_original = 4.1590;
    double r2_original = 0.9051;
};

inline constexpr ReferenceDepthModelMetrics kReferenceDepthModelMetrics{};

}  // namespace curbsight
