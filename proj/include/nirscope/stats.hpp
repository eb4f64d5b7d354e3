#pragma once

#include "nirscope/series.hpp"

#include <span>
#include <vector>

namespace nirscope::stats {

struct GroupSummary {
    double n = 0.0;
    double mean = 0.0;
    double sd = 0.0; // n - 1 denominator

    void validate() const; // n >= 2, sd >= 0
};

struct TestResult {
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0; // F tests only
    double p_two_sided = 1.0;
    double mean_difference = 0.0; // t tests only
};

GroupSummary summarize(std::span<const double> x);

TestResult t_test_from_summary(const GroupSummary& a, const GroupSummary& b, bool equal_variance);
TestResult t_test(std::span<const double> a, std::span<const double> b, bool equal_variance);

TestResult one_way_anova(const std::vector<std::vector<double>>& groups);
TestResult one_way_anova_from_summary(std::span<const GroupSummary> groups);

enum class LeveneCenter { mean, median };
TestResult levene(const std::vector<std::vector<double>>& groups, LeveneCenter center = LeveneCenter::mean);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

double t_cdf(double t, double df);
double t_two_sided_p(double t, double df);
double f_cdf(double f, double d1, double d2);
double f_sf(double f, double d1, double d2);

} // namespace nirscope::stats
