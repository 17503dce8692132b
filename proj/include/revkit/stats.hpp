#pragma once

// Statistics used by the evaluation: relative differences, Mann-Whitney U,
// OLS interrupted time series, Spearman rank correlation and t intervals.

#include <array>
#include <string>
#include <vector>

namespace revkit::stats {

/// 100 * (treatment - control) / control. Throws Error(undefined_statistic)
/// for control == 0.
double relative_difference(double treatment, double control);

/// Round half away from zero to `digits` decimals.
double round_to(double value, int digits);

/// 1-based ranks, ties receive the average of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& values);

struct MannWhitney {
    /// Pairs (a_i, b_j) with a_i > b_j, ties counting one half.
    double u_a = 0.0;
    double u_b = 0.0;
    double p_value = 1.0;
    bool exact = false;
    /// Normal-approximation z score (0 for the exact path).
    double z = 0.0;
};

/// Two-sided test. With |a| + |b| <= exact_limit the null distribution of
/// U is counted exactly over all rank assignments (ties keep their average
/// ranks); above it the normal approximation with tie-corrected variance
/// and continuity correction is used. All values identical gives p = 1.
MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b, int exact_limit = 20);

struct OlsFit {
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> t_values;
    std::vector<double> p_values;
    std::vector<double> residuals;
    double sigma2 = 0.0;
    int dof = 0;
};

/// Least squares through Householder QR. `x` is row-major, one row per
/// observation. Throws Error(rank_deficient) or Error(degenerate_input).
OlsFit ols(const std::vector<std::vector<double>>& x, const std::vector<double>& y);

struct Its {
    /// intercept, time, intervention
    OlsFit fit;
    double intercept() const { return fit.coefficients[0]; }
    double time() const { return fit.coefficients[1]; }
    double intervention() const { return fit.coefficients[2]; }
    std::vector<std::vector<double>> design;
};

/// value_t = b0 + b1 * (t - intervention_index) + b2 * [t >= intervention_index].
/// Needs at least three observations on each side.
Its interrupted_time_series(const std::vector<double>& values, std::size_t intervention_index);

/// Pearson correlation of the average ranks. Throws
/// Error(undefined_statistic) when either side has zero variance.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct Interval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool operator==(const Interval&) const = default;
};

/// Student-t interval over the sample with n - 1 degrees of freedom. A
/// single value gives a zero-width interval.
Interval mean_ci(const std::vector<double>& values, double level = 0.95);

double student_t_quantile(double p, double dof);
double student_t_two_sided_p(double t, double dof);
double normal_sf(double z);

}  // namespace revkit::stats
