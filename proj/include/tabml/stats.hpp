#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tabml/common.hpp"

namespace tabml::stats {

// ---------------------------------------------------------------------------
// Distribution backends
// ---------------------------------------------------------------------------

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta function I_x(a, b).
double beta_inc(double a, double b, double x);

// Chi-square survival function at df degrees of freedom.
double chi2_sf(double x, double df);

// Student-t survival function (upper tail) at df degrees of freedom.
double t_sf(double x, double df);

double normal_cdf(double x);
double normal_sf(double x);

// Inverse standard-normal CDF (Wichura AS 241, double precision).
double normal_ppf(double p);

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

struct RankVector {
    std::vector<double> ranks;          // 1-based, ties get the mean of spanned positions
    std::vector<std::size_t> tie_sizes; // size of every tie group (size >= 2 groups included;
                                        // singletons recorded as 1)
};

RankVector average_ranks(const std::vector<double>& x);

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

struct CorrelationResult {
    double rho;       // Spearman rho in [-1, 1]
    std::size_t n;
    double t_statistic;
    double p_value;   // two-tailed
};

// Spearman rank correlation with the t-approximation p-value.
CorrelationResult spearman(const std::vector<double>& x, const std::vector<double>& y);

// Exact two-tailed permutation p-value for Spearman rho; n must be <= 10.
double spearman_exact_p(const std::vector<double>& x, const std::vector<double>& y);

struct HypothesisResult {
    std::string test;
    std::string variables;
    double statistic = 0.0;
    double df = 0.0;             // degrees of freedom, 0 when not applicable
    double p_value = 1.0;
    double adjusted_p = -1.0;    // Holm-adjusted p, < 0 when the test is not in a family
    bool two_tailed = true;
    double alpha = 0.05;
    bool reject = false;         // against adjusted_p when present, else p_value
};

// Kruskal-Wallis one-way ANOVA on ranks; tie correction on by default.
HypothesisResult kruskal_wallis(const std::vector<std::vector<double>>& groups,
                                bool tie_correction = true, double alpha = 0.05);

// Shapiro-Wilk W test, Royston's AS R94 approximation; 3 <= n <= 5000.
HypothesisResult shapiro_wilk(const std::vector<double>& x, double alpha = 0.05);

struct HolmAdjustment {
    std::vector<double> raw;
    std::vector<double> adjusted; // same order as raw
    std::size_t m;
};

// Holm step-down adjustment; output restored to input order.
HolmAdjustment holm_correct(const std::vector<double>& p_values);

} // namespace tabml::stats
