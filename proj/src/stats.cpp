#include "nirscope/stats.hpp"

#include "nirscope/error.hpp"

#include <cmath>
#include <limits>

namespace nirscope::stats {

void GroupSummary::validate() const
{
    if (!(n >= 2.0)) throw DataError("group summary: n must be >= 2");
    if (!(sd >= 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) throw DataError("group summary: invalid mean or sd");
}

GroupSummary summarize(std::span<const double> x)
{
    if (x.size() < 2) throw DataError("statistics: each group needs at least two observations");
    return {static_cast<double>(x.size()), nirscope::mean(x), stddev(x, true)};
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x)
{
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
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
        if (std::abs(delta - 1.0) < eps) return h;
    }
    throw NumericalError("incomplete beta: continued fraction did not converge");
}

void check_df(double df)
{
    if (!(df > 0.0) || !std::isfinite(df)) throw ConfigError("degrees of freedom must be positive and finite");
}

} // namespace

double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("incomplete beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, double df)
{
    check_df(df);
    if (std::isnan(t)) throw NumericalError("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double t_cdf(double t, double df)
{
    const double tail = t_two_sided_p(t, df) / 2.0;
    return t > 0.0 ? 1.0 - tail : tail;
}

double f_cdf(double f, double d1, double d2)
{
    check_df(d1);
    check_df(d2);
    if (std::isnan(f)) throw NumericalError("F statistic is NaN");
    if (f <= 0.0) return 0.0;
    if (std::isinf(f)) return 1.0;
    return incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2));
}

double f_sf(double f, double d1, double d2)
{
    check_df(d1);
    check_df(d2);
    if (std::isnan(f)) throw NumericalError("F statistic is NaN");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

TestResult t_test_from_summary(const GroupSummary& a, const GroupSummary& b, bool equal_variance)
{
    a.validate();
    b.validate();
    TestResult r;
    r.mean_difference = a.mean - b.mean;
    const double va = a.sd * a.sd;
    const double vb = b.sd * b.sd;
    double se = 0.0;
    if (equal_variance) {
        r.df1 = a.n + b.n - 2.0;
        const double sp2 = ((a.n - 1.0) * va + (b.n - 1.0) * vb) / r.df1;
        se = std::sqrt(sp2 * (1.0 / a.n + 1.0 / b.n));
    } else {
        const double qa = va / a.n;
        const double qb = vb / b.n;
        se = std::sqrt(qa + qb);
        r.df1 = qa + qb > 0.0 ? (qa + qb) * (qa + qb) / (qa * qa / (a.n - 1.0) + qb * qb / (b.n - 1.0)) : a.n + b.n - 2.0;
    }
    if (se == 0.0) {
        if (r.mean_difference == 0.0) return r;
        r.statistic = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
        r.p_two_sided = 0.0;
        return r;
    }
    r.statistic = r.mean_difference / se;
    r.p_two_sided = t_two_sided_p(r.statistic, r.df1);
    return r;
}

TestResult t_test(std::span<const double> a, std::span<const double> b, bool equal_variance)
{
    return t_test_from_summary(summarize(a), summarize(b), equal_variance);
}

TestResult one_way_anova_from_summary(std::span<const GroupSummary> groups)
{
    if (groups.size() < 2) throw DataError("ANOVA needs at least two groups");
    double total = 0.0;
    double weighted = 0.0;
    for (const GroupSummary& g : groups) {
        g.validate();
        total += g.n;
        weighted += g.n * g.mean;
    }
    const double grand = weighted / total;
    double between = 0.0;
    double within = 0.0;
    for (const GroupSummary& g : groups) {
        between += g.n * (g.mean - grand) * (g.mean - grand);
        within += (g.n - 1.0) * g.sd * g.sd;
    }
    TestResult r;
    r.df1 = static_cast<double>(groups.size()) - 1.0;
    r.df2 = total - static_cast<double>(groups.size());
    if (within == 0.0) {
        if (between == 0.0) return r;
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_two_sided = 0.0;
        return r;
    }
    r.statistic = (between / r.df1) / (within / r.df2);
    r.p_two_sided = f_sf(r.statistic, r.df1, r.df2);
    return r;
}

TestResult one_way_anova(const std::vector<std::vector<double>>& groups)
{
    std::vector<GroupSummary> s;
    for (const auto& g : groups) s.push_back(summarize(g));
    return one_way_anova_from_summary(s);
}

TestResult levene(const std::vector<std::vector<double>>& groups, LeveneCenter center)
{
    std::vector<std::vector<double>> dev;
    for (const auto& g : groups) {
        if (g.size() < 2) throw DataError("Levene: each group needs at least two observations");
        const double c = center == LeveneCenter::mean ? nirscope::mean(g) : median(g);
        std::vector<double> d;
        for (double v : g) d.push_back(std::abs(v - c));
        dev.push_back(std::move(d));
    }
    return one_way_anova(dev);
}

} // namespace nirscope::stats
