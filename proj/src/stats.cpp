#include "tabml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tabml::stats {

namespace {

double poly(const double* c, int n, double x) {
    // c[0] + c[1] x + ... + c[n-1] x^{n-1}
    double v = 0.0;
    for (int i = n - 1; i >= 0; --i) v = v * x + c[i];
    return v;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const double ma = mean_of(a), mb = mean_of(b);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw Error(ErrorKind::degenerate, "correlation undefined for a constant vector");
    return sab / std::sqrt(saa * sbb);
}

} // namespace

RankVector average_ranks(const std::vector<double>& x) {
    for (double v : x)
        if (!std::isfinite(v))
            throw Error(ErrorKind::contract, "average_ranks requires finite values");
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    RankVector out;
    out.ranks.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        // Positions i+1 .. j+1 (1-based) share the same value.
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = rank;
        out.tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return out;
}

CorrelationResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw Error(ErrorKind::contract, "spearman requires equal-length vectors");
    if (x.size() < 3)
        throw Error(ErrorKind::data, "spearman requires n >= 3");
    const auto rx = average_ranks(x).ranks;
    const auto ry = average_ranks(y).ranks;
    const double rho = pearson(rx, ry);
    const std::size_t n = x.size();

    CorrelationResult res;
    res.rho = rho;
    res.n = n;
    if (std::fabs(rho) >= 1.0) {
        res.t_statistic = std::numeric_limits<double>::infinity();
        res.p_value = 0.0;
        return res;
    }
    const double df = static_cast<double>(n - 2);
    res.t_statistic = rho * std::sqrt(df / (1.0 - rho * rho));
    res.p_value = 2.0 * t_sf(std::fabs(res.t_statistic), df);
    return res;
}

double spearman_exact_p(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3 || x.size() > 10)
        throw Error(ErrorKind::contract, "exact Spearman p supports 3 <= n <= 10");
    const auto rx = average_ranks(x).ranks;
    auto ry = average_ranks(y).ranks;
    const double observed = std::fabs(pearson(rx, ry));

    std::sort(ry.begin(), ry.end());
    std::size_t total = 0, at_least = 0;
    do {
        ++total;
        if (std::fabs(pearson(rx, ry)) >= observed - 1e-12) ++at_least;
    } while (std::next_permutation(ry.begin(), ry.end()));
    return static_cast<double>(at_least) / static_cast<double>(total);
}

HypothesisResult kruskal_wallis(const std::vector<std::vector<double>>& groups,
                                bool tie_correction, double alpha) {
    if (groups.size() < 2)
        throw Error(ErrorKind::data, "kruskal_wallis requires at least two groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw Error(ErrorKind::data, "kruskal_wallis groups must be non-empty");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const std::size_t big_n = pooled.size();
    if (big_n < 3) throw Error(ErrorKind::data, "kruskal_wallis requires total N >= 3");

    const RankVector rv = average_ranks(pooled);
    const double n_d = static_cast<double>(big_n);

    double h = 0.0;
    std::size_t offset = 0;
    const double grand_mean_rank = (n_d + 1.0) / 2.0;
    for (const auto& g : groups) {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rank_sum += rv.ranks[offset + i];
        const double mean_rank = rank_sum / static_cast<double>(g.size());
        const double dev = mean_rank - grand_mean_rank;
        h += static_cast<double>(g.size()) * dev * dev;
        offset += g.size();
    }
    h *= 12.0 / (n_d * (n_d + 1.0));

    if (tie_correction) {
        double tie_sum = 0.0;
        for (std::size_t t : rv.tie_sizes) {
            const double td = static_cast<double>(t);
            tie_sum += td * td * td - td;
        }
        const double correction = 1.0 - tie_sum / (n_d * n_d * n_d - n_d);
        if (correction <= 0.0)
            throw Error(ErrorKind::degenerate,
                        "kruskal_wallis degenerate: all pooled values identical");
        h /= correction;
    }

    HypothesisResult res;
    res.test = "kruskal_wallis";
    res.statistic = h;
    res.df = static_cast<double>(groups.size() - 1);
    res.p_value = chi2_sf(h, res.df);
    res.alpha = alpha;
    res.reject = res.p_value < alpha;
    return res;
}

// Royston's AS R94 approximation (1995): Blom scores, the two corrected end
// coefficients, and the log-normal transformation of 1 - W for the p-value.
HypothesisResult shapiro_wilk(const std::vector<double>& x, double alpha) {
    static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static const double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static const double c6[3] = {-0.4803, -0.082676, 0.0030302};
    static const double g[2] = {-2.273, 0.459};

    const std::size_t n = x.size();
    if (n < 3 || n > 5000)
        throw Error(ErrorKind::data, "shapiro_wilk supports 3 <= n <= 5000");

    std::vector<double> xs(x);
    std::sort(xs.begin(), xs.end());
    const double xbar = mean_of(xs);
    double ssq = 0.0;
    for (double v : xs) ssq += (v - xbar) * (v - xbar);
    if (ssq <= 0.0)
        throw Error(ErrorKind::degenerate, "shapiro_wilk degenerate: zero sample variance");

    const double nd = static_cast<double>(n);
    std::vector<double> m(n);
    double ssq_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = normal_ppf((static_cast<double>(i + 1) - 0.375) / (nd + 0.25));
        ssq_m += m[i] * m[i];
    }

    std::vector<double> a(n);
    if (n == 3) {
        a[0] = -std::sqrt(0.5);
        a[1] = 0.0;
        a[2] = std::sqrt(0.5);
    } else {
        const double rsn = 1.0 / std::sqrt(nd);
        const double norm_m = std::sqrt(ssq_m);
        const double a_last = poly(c1, 6, rsn) + m[n - 1] / norm_m;
        std::size_t inner_lo = 1, inner_hi = n - 2;
        double phi;
        if (n > 5) {
            const double a_last1 = poly(c2, 6, rsn) + m[n - 2] / norm_m;
            phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
                  (1.0 - 2.0 * a_last * a_last - 2.0 * a_last1 * a_last1);
            a[n - 2] = a_last1;
            a[1] = -a_last1;
            inner_lo = 2;
            inner_hi = n - 3;
        } else {
            phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_last * a_last);
        }
        a[n - 1] = a_last;
        a[0] = -a_last;
        const double sqrt_phi = std::sqrt(phi);
        for (std::size_t i = inner_lo; i <= inner_hi; ++i) a[i] = m[i] / sqrt_phi;
    }

    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) num += a[i] * xs[i];
    double w = num * num / ssq;
    if (w > 1.0) w = 1.0;

    double p;
    if (n == 3) {
        const double pi6 = 6.0 / M_PI;
        const double stqr = std::asin(std::sqrt(0.75));
        p = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    } else if (n <= 11) {
        const double y = std::log1p(-w);
        const double gamma = poly(g, 2, nd);
        if (y >= gamma) {
            p = 1e-99; // W at the approximation's support edge
        } else {
            const double z = -std::log(gamma - y);
            const double mu = poly(c3, 4, nd);
            const double sigma = std::exp(poly(c4, 4, nd));
            p = normal_sf((z - mu) / sigma);
        }
    } else {
        const double y = std::log1p(-w);
        const double ln_n = std::log(nd);
        const double mu = poly(c5, 4, ln_n);
        const double sigma = std::exp(poly(c6, 3, ln_n));
        p = normal_sf((y - mu) / sigma);
    }

    HypothesisResult res;
    res.test = "shapiro_wilk";
    res.statistic = w;
    res.p_value = p;
    res.alpha = alpha;
    res.reject = p < alpha;
    return res;
}

HolmAdjustment holm_correct(const std::vector<double>& p_values) {
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0))
            throw Error(ErrorKind::contract, "holm_correct requires p values in [0, 1]");

    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    HolmAdjustment adj;
    adj.raw = p_values;
    adj.adjusted.resize(m);
    adj.m = m;
    double running_max = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double scaled = static_cast<double>(m - i) * p_values[order[i]];
        running_max = std::max(running_max, scaled);
        adj.adjusted[order[i]] = std::min(1.0, running_max);
    }
    return adj;
}

} // namespace tabml::stats
