#include "revkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "revkit/error.hpp"

namespace revkit::stats {

double relative_difference(double treatment, double control)
{
    if (control == 0.0)
        throw Error(ErrorCode::undefined_statistic, "relative difference against a zero control");
    return 100.0 * (treatment - control) / control;
}

double round_to(double value, int digits)
{
    const double scale = std::pow(10.0, digits);
    // Nudge by a few ulps so that 12.85 stored as 12.8499999... still rounds up.
    const double scaled = value * scale;
    const double nudged = scaled + std::copysign(std::abs(scaled) * 4 * std::numeric_limits<double>::epsilon(), scaled);
    return std::round(nudged) / scale;
}

std::vector<double> average_ranks(const std::vector<double>& values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double student_t_quantile(double p, double dof)
{
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

double student_t_two_sided_p(double t, double dof)
{
    boost::math::students_t dist(dof);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b, int exact_limit)
{
    if (a.empty() || b.empty())
        throw Error(ErrorCode::degenerate_input, "Mann-Whitney U needs two non-empty samples");
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t n = na + nb;

    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);
    const double ra = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(na), 0.0);

    MannWhitney out;
    out.u_a = ra - static_cast<double>(na * (na + 1)) / 2.0;
    out.u_b = static_cast<double>(na * nb) - out.u_a;

    if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); })) {
        out.p_value = 1.0;
        out.exact = static_cast<int>(n) <= exact_limit;
        return out;
    }

    if (static_cast<int>(n) <= exact_limit) {
        // Doubled ranks are integers even with ties.
        std::vector<long> r2(n);
        for (std::size_t i = 0; i < n; ++i)
            r2[i] = std::lround(2.0 * ranks[i]);
        const long total = std::accumulate(r2.begin(), r2.end(), 0L);
        // dp[k][s]: number of k-subsets whose doubled rank sum is s.
        std::vector<std::vector<double>> dp(na + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
        dp[0][0] = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = std::min(i + 1, na); k >= 1; --k)
                for (long s = total; s >= r2[i]; --s)
                    dp[k][static_cast<std::size_t>(s)] += dp[k - 1][static_cast<std::size_t>(s - r2[i])];
        const long expected2 = static_cast<long>(na * (n + 1));  // 2 * E[R_a]
        const long observed = std::labs(std::lround(2.0 * ra) - expected2);
        double hits = 0.0;
        double all = 0.0;
        for (long s = 0; s <= total; ++s) {
            const double c = dp[na][static_cast<std::size_t>(s)];
            if (c == 0.0)
                continue;
            all += c;
            if (std::labs(s - expected2) >= observed)
                hits += c;
        }
        out.p_value = std::min(1.0, hits / all);
        out.exact = true;
        return out;
    }

    double tie_term = 0.0;
    {
        auto sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j < n && sorted[j] == sorted[i])
                ++j;
            const double t = static_cast<double>(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
    }
    const double dn = static_cast<double>(n);
    const double mean = static_cast<double>(na * nb) / 2.0;
    const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        out.p_value = 1.0;
        return out;
    }
    const double u = std::max(out.u_a, out.u_b);
    out.z = (u - mean - 0.5) / std::sqrt(var);
    out.p_value = std::min(1.0, 2.0 * normal_sf(out.z));
    return out;
}

OlsFit ols(const std::vector<std::vector<double>>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n)
        throw Error(ErrorCode::degenerate_input, "design and response sizes differ or are empty");
    const std::size_t p = x.front().size();
    for (const auto& row : x)
        if (row.size() != p)
            throw Error(ErrorCode::degenerate_input, "ragged design matrix");
    if (n <= p)
        throw Error(ErrorCode::degenerate_input, "need more observations than regressors");

    // Column-major copy, reduced in place to R; qty becomes Q^T y.
    std::vector<std::vector<double>> a(p, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            a[j][i] = x[i][j];
    std::vector<double> qty = y;

    double scale = 0.0;
    for (const auto& col : a) {
        double norm = 0.0;
        for (double v : col)
            norm += v * v;
        scale = std::max(scale, std::sqrt(norm));
    }
    if (scale == 0.0)
        throw Error(ErrorCode::rank_deficient, "design matrix is zero");

    for (std::size_t k = 0; k < p; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i)
            norm += a[k][i] * a[k][i];
        norm = std::sqrt(norm);
        if (norm <= 1e-10 * scale)
            throw Error(ErrorCode::rank_deficient, "design column " + std::to_string(k) + " is linearly dependent");
        const double alpha = a[k][k] > 0 ? -norm : norm;
        std::vector<double> v(n, 0.0);
        for (std::size_t i = k; i < n; ++i)
            v[i] = a[k][i];
        v[k] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < n; ++i)
            vnorm2 += v[i] * v[i];
        auto reflect = [&](std::vector<double>& col) {
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i)
                dot += v[i] * col[i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i)
                col[i] -= f * v[i];
        };
        for (std::size_t j = k; j < p; ++j)
            reflect(a[j]);
        reflect(qty);
        if (std::abs(a[k][k]) <= 1e-10 * scale)
            throw Error(ErrorCode::rank_deficient, "design column " + std::to_string(k) + " is linearly dependent");
    }

    // R[i][j] = a[j][i] for i <= j.
    std::vector<double> beta(p, 0.0);
    for (std::size_t ii = p; ii-- > 0;) {
        double s = qty[ii];
        for (std::size_t j = ii + 1; j < p; ++j)
            s -= a[j][ii] * beta[j];
        beta[ii] = s / a[ii][ii];
    }

    OlsFit fit;
    fit.coefficients = beta;
    fit.residuals.resize(n);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < p; ++j)
            pred += x[i][j] * beta[j];
        fit.residuals[i] = y[i] - pred;
        rss += fit.residuals[i] * fit.residuals[i];
    }
    fit.dof = static_cast<int>(n - p);
    fit.sigma2 = rss / fit.dof;

    // (X^T X)^{-1} = R^{-1} R^{-T}; only the diagonal is needed.
    std::vector<std::vector<double>> rinv(p, std::vector<double>(p, 0.0));
    for (std::size_t j = 0; j < p; ++j) {
        rinv[j][j] = 1.0 / a[j][j];
        for (std::size_t ii = j; ii-- > 0;) {
            double s = 0.0;
            for (std::size_t k = ii + 1; k <= j; ++k)
                s += a[k][ii] * rinv[k][j];
            rinv[ii][j] = -s / a[ii][ii];
        }
    }
    for (std::size_t ii = 0; ii < p; ++ii) {
        double d = 0.0;
        for (std::size_t j = ii; j < p; ++j)
            d += rinv[ii][j] * rinv[ii][j];
        const double se = std::sqrt(fit.sigma2 * d);
        fit.std_errors.push_back(se);
        if (se == 0.0) {
            const double t = beta[ii] == 0.0 ? 0.0 : std::copysign(HUGE_VAL, beta[ii]);
            fit.t_values.push_back(t);
            fit.p_values.push_back(beta[ii] == 0.0 ? 1.0 : 0.0);
        } else {
            const double t = beta[ii] / se;
            fit.t_values.push_back(t);
            fit.p_values.push_back(student_t_two_sided_p(t, fit.dof));
        }
    }
    return fit;
}

Its interrupted_time_series(const std::vector<double>& values, std::size_t intervention_index)
{
    if (intervention_index < 3 || values.size() < intervention_index + 3)
        throw Error(ErrorCode::degenerate_input, "need at least three observations on each side of the intervention");
    Its its;
    for (std::size_t t = 0; t < values.size(); ++t)
        its.design.push_back({1.0, static_cast<double>(t) - static_cast<double>(intervention_index),
                              t >= intervention_index ? 1.0 : 0.0});
    its.fit = ols(its.design, values);
    return its;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size() || xs.size() < 2)
        throw Error(ErrorCode::degenerate_input, "spearman needs two equal-length samples of size >= 2");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(ErrorCode::undefined_statistic, "spearman correlation of a constant sample");
    return sxy / std::sqrt(sxx * syy);
}

Interval mean_ci(const std::vector<double>& values, double level)
{
    if (values.empty())
        throw Error(ErrorCode::degenerate_input, "confidence interval of an empty sample");
    if (!(level > 0.0 && level < 1.0))
        throw Error(ErrorCode::invalid_argument, "confidence level must lie in (0,1)");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1)
        return {mean, mean, mean};
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const double half = student_t_quantile(1.0 - (1.0 - level) / 2.0, n - 1.0) * sd / std::sqrt(n);
    return {mean, mean - half, mean + half};
}

}  // namespace revkit::stats
