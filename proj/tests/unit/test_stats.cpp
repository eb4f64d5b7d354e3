#include "helpers.hpp"
#include "published_summaries.hpp"

#include "nirscope/error.hpp"
#include "nirscope/stats.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace nirscope;
using namespace nirscope::stats;

TEST_CASE("pooled t reproduces the published channel t values within 0.05")
{
    for (const auto& row : published::t_rows) {
        CAPTURE(row.label);
        const TestResult r = t_test_from_summary(row.control, row.patient, true);
        CHECK(std::abs(r.statistic - row.t) <= 0.05);
        CHECK(r.df1 == published::kControlTrials + published::kPatientTrials - 2);
        CHECK(r.mean_difference == doctest::Approx(row.control.mean - row.patient.mean));
    }
    const auto& s76 = published::t_rows[0];
    CHECK(t_test_from_summary(s76.control, s76.patient, true).p_two_sided < 0.001);
    // Welch lands further from the reported value.
    const double welch = t_test_from_summary(s76.control, s76.patient, false).statistic;
    const double pooled = t_test_from_summary(s76.control, s76.patient, true).statistic;
    CHECK(std::abs(welch - s76.t) > std::abs(pooled - s76.t));
}

TEST_CASE("summary ANOVA reproduces the demographic F values")
{
    for (const auto& row : published::f_rows) {
        CAPTURE(row.label);
        const std::vector<GroupSummary> g{row.patients, row.controls};
        const TestResult r = one_way_anova_from_summary(g);
        CHECK(std::abs(r.statistic - row.f) <= row.tolerance);
        CHECK(std::abs(r.p_two_sided - row.p) <= 0.01);
        CHECK(r.df1 == 1.0);
        CHECK(r.df2 == 22.0);
    }
}

TEST_CASE("identical summaries give t = 0, p = 1; degenerate zero-spread case too")
{
    const GroupSummary g{10, 3.0, 2.0};
    const auto r = t_test_from_summary(g, g, true);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_two_sided == 1.0);
    const GroupSummary flat{5, 1.0, 0.0};
    for (bool eq : {true, false}) {
        const auto d = t_test_from_summary(flat, flat, eq);
        CHECK(d.statistic == 0.0);
        CHECK(d.p_two_sided == 1.0);
    }
    CHECK_THROWS(t_test_from_summary({1, 0.0, 1.0}, g, true));
    CHECK_THROWS(t_test_from_summary({5, 0.0, -1.0}, g, true));
}

TEST_CASE("Welch statistic and df from the textbook formulas")
{
    const GroupSummary a{12, 4.0, 1.5}, b{20, 3.1, 3.0};
    const double va = 1.5 * 1.5 / 12, vb = 9.0 / 20;
    const double df = (va + vb) * (va + vb) / (va * va / 11 + vb * vb / 19);
    const auto r = t_test_from_summary(a, b, false);
    CHECK(r.statistic == doctest::Approx(0.9 / std::sqrt(va + vb)).epsilon(1e-12));
    CHECK(r.df1 == doctest::Approx(df).epsilon(1e-12));
    const boost::math::students_t dist(df);
    CHECK(r.p_two_sided == doctest::Approx(2 * boost::math::cdf(boost::math::complement(dist, r.statistic))).epsilon(1e-9));
}

TEST_CASE("raw t test delegates to the summary form")
{
    const Series a = testutil::gaussian(30, 1), b = testutil::gaussian(25, 2, 2.0);
    for (bool eq : {true, false}) {
        const auto raw = t_test(a, b, eq);
        const auto sum = t_test_from_summary(summarize(a), summarize(b), eq);
        CHECK(raw.statistic == sum.statistic);
        CHECK(raw.p_two_sided == sum.p_two_sided);
    }
    CHECK(t_test(a, a, true).statistic == 0.0);
    CHECK_THROWS(t_test(Series{1.0}, b, true));
}

TEST_CASE("shifting group b by c shifts the mean difference by -c")
{
    const Series a = testutil::gaussian(20, 3), b = testutil::gaussian(20, 4);
    Series shifted = b;
    for (auto& v : shifted) v += 0.75;
    const auto r0 = t_test(a, b, true), r1 = t_test(a, shifted, true);
    CHECK(r1.mean_difference == doctest::Approx(r0.mean_difference - 0.75).epsilon(1e-12));
    CHECK(summarize(shifted).sd == doctest::Approx(summarize(b).sd).epsilon(1e-12));
}

TEST_CASE("swapping groups flips the sign of t and keeps p")
{
    const Series a = testutil::gaussian(15, 5), b = testutil::gaussian(22, 6, 1.3);
    for (bool eq : {true, false}) {
        const auto ab = t_test(a, b, eq), ba = t_test(b, a, eq);
        CHECK(ab.statistic == doctest::Approx(-ba.statistic).epsilon(1e-14));
        CHECK(ab.p_two_sided == doctest::Approx(ba.p_two_sided).epsilon(1e-14));
    }
}

TEST_CASE("two-group ANOVA F equals the pooled t squared")
{
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const Series a = testutil::gaussian(18, seed), b = testutil::gaussian(27, seed + 100, 1.7);
        Series b2 = b;
        for (auto& v : b2) v += 0.4;
        const auto t = t_test(a, b2, true);
        const auto f = one_way_anova({a, b2});
        CHECK(f.statistic == doctest::Approx(t.statistic * t.statistic).epsilon(1e-10));
        CHECK(std::abs(f.p_two_sided - t.p_two_sided) < 1e-9);
    }
}

TEST_CASE("raw and summary ANOVA agree; equal means give F = 0")
{
    const std::vector<Series> g{testutil::gaussian(10, 1), testutil::gaussian(14, 2), testutil::gaussian(9, 3)};
    std::vector<GroupSummary> s;
    for (const auto& x : g) s.push_back(summarize(x));
    const auto raw = one_way_anova(g), sum = one_way_anova_from_summary(s);
    CHECK(raw.statistic == doctest::Approx(sum.statistic).epsilon(1e-10));
    CHECK(raw.df1 == 2.0);
    CHECK(raw.df2 == 30.0);
    const std::vector<GroupSummary> same{{5, 1.0, 1.0}, {8, 1.0, 2.0}};
    CHECK(one_way_anova_from_summary(same).statistic == 0.0);
    CHECK(one_way_anova({Series(4, 2.0), Series(5, 2.0)}).statistic == 0.0);
    CHECK_THROWS(one_way_anova({testutil::gaussian(5, 1)}));
}

TEST_CASE("ANOVA p-value matches the F distribution oracle")
{
    const std::vector<Series> g{testutil::gaussian(12, 21), testutil::gaussian(12, 22, 1.0), testutil::gaussian(12, 23, 1.5)};
    const auto r = one_way_anova(g);
    const boost::math::fisher_f dist(2.0, 33.0);
    CHECK(r.p_two_sided == doctest::Approx(boost::math::cdf(boost::math::complement(dist, r.statistic))).epsilon(1e-10));
}

TEST_CASE("Levene: constant groups, tenfold spread, median center on symmetric data")
{
    CHECK(levene({Series(6, 1.0), Series(6, 1.0)}).statistic == 0.0);

    const Series a = testutil::gaussian(50, 31);
    Series b = a;
    for (auto& v : b) v *= 10.0;
    CHECK(levene({a, b}).p_two_sided < 0.05);

    // Symmetric groups: median equals mean, so both centers coincide.
    Series s1 = testutil::gaussian(20, 41), s2 = testutil::gaussian(20, 42, 2.0);
    for (auto* s : {&s1, &s2}) {
        const double m = mean(*s);
        const std::size_t n = s->size();
        for (std::size_t i = 0; i < n; ++i) s->push_back(2 * m - (*s)[i]);
    }
    const auto mc = levene({s1, s2}, LeveneCenter::mean), md = levene({s1, s2}, LeveneCenter::median);
    CHECK(md.statistic == doctest::Approx(mc.statistic).epsilon(1e-10));
}

TEST_CASE("Levene with the median center is ANOVA on absolute median deviations")
{
    const std::vector<Series> g{testutil::gaussian(11, 51), testutil::gaussian(8, 52, 3.0)};
    std::vector<Series> dev;
    for (const auto& x : g) {
        const double m = median(x);
        Series d;
        for (double v : x) d.push_back(std::abs(v - m));
        dev.push_back(d);
    }
    CHECK(levene(g, LeveneCenter::median).statistic == doctest::Approx(one_way_anova(dev).statistic).epsilon(1e-12));
}

TEST_CASE("incomplete beta matches the Boost oracle")
{
    for (double a : {0.5, 1.0, 2.5, 11.0, 4000.0})
        for (double b : {0.5, 3.0, 20.0, 4000.0})
            for (double x : {0.0, 1e-6, 0.1, 0.5, 0.77, 0.999, 1.0}) {
                CAPTURE(a);
                CAPTURE(b);
                CAPTURE(x);
                const double want = boost::math::ibeta(a, b, x);
                CHECK(std::abs(incomplete_beta(a, b, x) - want) <= 1e-10 * std::max(want, 1e-300) + 1e-300);
            }
}

TEST_CASE("t and F distribution identities")
{
    for (double df : {1.0, 3.0, 30.0, 9469.0}) CHECK(t_cdf(0.0, df) == 0.5);
    const double cauchy = 1.0 - 2.0 / std::numbers::pi * std::atan(1.0);
    CHECK(t_two_sided_p(1.0, 1.0) == doctest::Approx(cauchy).epsilon(1e-12));
    CHECK(t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    for (double d : {1.0, 4.0, 50.0}) CHECK(f_cdf(1.0, d, d) == doctest::Approx(0.5).epsilon(1e-12));
    for (double t : {-3.0, -0.4, 0.9, 2.5}) {
        const boost::math::students_t dist(7.0);
        CHECK(t_cdf(t, 7.0) == doctest::Approx(boost::math::cdf(dist, t)).epsilon(1e-10));
    }
    CHECK_THROWS(t_cdf(1.0, 0.0));
    CHECK_THROWS(f_cdf(1.0, -1.0, 3.0));
}

TEST_CASE("p-values decrease monotonically in |statistic|")
{
    double prev_t = 1.1, prev_f = 1.1;
    for (double s = 0.0; s < 8.0; s += 0.25) {
        const double pt = t_two_sided_p(s, 12.0), pf = f_sf(s * s, 1.0, 12.0);
        CHECK(pt <= prev_t);
        CHECK(pf <= prev_f);
        CHECK(pt >= 0.0);
        prev_t = pt;
        prev_f = pf;
    }
    CHECK(t_two_sided_p(-2.0, 12.0) == t_two_sided_p(2.0, 12.0));
}
