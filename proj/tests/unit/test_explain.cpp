#include "helpers.hpp"

#include "nirscope/error.hpp"
#include "nirscope/explain.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace nirscope;

namespace {

FeatureGroups singletons(std::size_t n)
{
    FeatureGroups g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = {i};
    return g;
}

Matrix random_matrix(int rows, int cols, std::uint64_t seed)
{
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const Series s = testutil::gaussian(static_cast<std::size_t>(cols), seed * 1000 + r);
        for (int c = 0; c < cols; ++c) m(r, c) = s[c];
    }
    return m;
}

// A non-additive game with interactions between neighbouring features.
double interacting(std::span<const double> x)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::sin(x[i] * (1.0 + 0.1 * i));
    for (std::size_t i = 0; i + 1 < x.size(); ++i) s += 0.5 * x[i] * x[i + 1];
    return s;
}

// Every coalition size matters here, unlike the pairwise game.
double high_order(std::span<const double> x)
{
    double lin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lin += x[i] * (1.0 - 0.15 * static_cast<double>(i));
    return std::tanh(lin) * (1.0 + x[0] * x[1] * x[2]);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double mean_score(const ScoreFunction& f, const Matrix& bg)
{
    double s = 0.0;
    for (int r = 0; r < bg.rows(); ++r) {
        const Series row(bg.row(r).begin(), bg.row(r).end());
        s += f(row);
    }
    return s / static_cast<double>(bg.rows());
}

} // namespace

TEST_CASE("additive score: exact Shapley equals w_i (x_i - mean background x_i)")
{
    const std::vector<double> w{0.5, -2.0, 1.25, 3.0, 0.0};
    const ScoreFunction f = [&](std::span<const double> x) {
        double s = 0.7;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
        return s;
    };
    const Matrix bg = random_matrix(9, 5, 1);
    const Series inst = testutil::gaussian(5, 2);
    const Attribution a = exact_shapley(f, bg, inst, singletons(5));
    for (std::size_t i = 0; i < 5; ++i) CHECK(a.phi[i] == doctest::Approx(w[i] * (inst[i] - bg.col(i).mean())).epsilon(1e-12));
    CHECK(a.phi[4] == 0.0);

    const Attribution k = kernel_shap(f, bg, inst, singletons(5), 300, 3);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(k.phi[i] - a.phi[i]) < 1e-6);
}

TEST_CASE("efficiency, symmetry, and null player on a random interacting game")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix bg = random_matrix(6, 7, seed);
        const Series inst = testutil::gaussian(7, seed + 50);
        const ScoreFunction f = [](std::span<const double> x) { return interacting(x.first(6)); }; // ignores column 6
        const Attribution a = exact_shapley(f, bg, inst, singletons(7));
        CHECK(sum(a.phi) == doctest::Approx(f(inst) - mean_score(f, bg)).epsilon(1e-9));
        CHECK(a.base_value == doctest::Approx(mean_score(f, bg)).epsilon(1e-12));
        CHECK(a.instance_score == doctest::Approx(f(inst)));
        CHECK(std::abs(a.phi[6]) < 1e-9);
    }

    Matrix bg = random_matrix(5, 3, 9);
    bg.col(1) = bg.col(0);
    Series inst{0.8, 0.8, -1.0};
    const ScoreFunction sym = [](std::span<const double> x) { return x[0] * x[1] + std::exp(x[0] + x[1]) + x[2]; };
    const Attribution s = exact_shapley(sym, bg, inst, singletons(3));
    CHECK(s.phi[0] == doctest::Approx(s.phi[1]).epsilon(1e-12));
}

TEST_CASE("grouped players: a group behaves as one feature")
{
    const Matrix bg = random_matrix(4, 6, 11);
    const Series inst = testutil::gaussian(6, 12);
    const FeatureGroups groups{{0, 3}, {1, 2}, {4, 5}};
    const ScoreFunction f = interacting;
    const Attribution a = exact_shapley(f, bg, inst, groups);
    REQUIRE(a.phi.size() == 3);
    CHECK(sum(a.phi) == doctest::Approx(f(inst) - mean_score(f, bg)).epsilon(1e-9));
    CHECK_THROWS_AS(exact_shapley(f, bg, inst, FeatureGroups{{0, 1}, {1, 2, 3, 4, 5}}), ConfigError);
    CHECK_THROWS_AS(exact_shapley(f, bg, inst, FeatureGroups{{0, 1, 2}, {3, 4}}), ConfigError);
}

TEST_CASE("kernel SHAP with every coalition equals exact Shapley")
{
    for (std::size_t n : {3u, 5u, 8u, 10u}) {
        CAPTURE(n);
        const Matrix bg = random_matrix(5, static_cast<int>(n), 20 + n);
        const Series inst = testutil::gaussian(n, 40 + n);
        const Attribution e = exact_shapley(interacting, bg, inst, singletons(n));
        const Attribution k = kernel_shap(interacting, bg, inst, singletons(n), std::size_t{1} << n, 7);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(k.phi[i] - e.phi[i]) < 1e-6);
    }
}

TEST_CASE("kernel SHAP error shrinks as the sample budget grows")
{
    const std::size_t n = 12;
    double err[3] = {0, 0, 0};
    const std::size_t budgets[3] = {64, 256, 1024};
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Matrix bg = random_matrix(4, n, 60 + seed);
        const Series inst = testutil::gaussian(n, 70 + seed, 1.5);
        const Attribution e = exact_shapley(high_order, bg, inst, singletons(n));
        for (int b = 0; b < 3; ++b) {
            const Attribution k = kernel_shap(high_order, bg, inst, singletons(n), budgets[b], seed);
            CHECK(sum(k.phi) == doctest::Approx(sum(e.phi)).epsilon(1e-9));
            for (std::size_t i = 0; i < n; ++i) err[b] += std::abs(k.phi[i] - e.phi[i]);
        }
    }
    MESSAGE("mean abs error " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
}

TEST_CASE("Shapley argument errors")
{
    const Matrix bg = random_matrix(3, 4, 1);
    const Series inst = testutil::gaussian(4, 2);
    CHECK_THROWS_AS(kernel_shap(interacting, bg, inst, singletons(4), 9, 1), ConfigError);
    CHECK_NOTHROW(kernel_shap(interacting, bg, inst, singletons(4), 10, 1));
    CHECK_THROWS_AS(exact_shapley(interacting, Matrix(0, 4), inst, singletons(4)), ConfigError);
    CHECK_THROWS_AS(exact_shapley(interacting, bg, Series(3, 0.0), singletons(3)), ConfigError);
    CHECK_THROWS_AS(exact_shapley(interacting, random_matrix(2, 21, 3), testutil::gaussian(21, 4), singletons(21)), ConfigError);
    const ScoreFunction bad = [](std::span<const double>) { return std::nan(""); };
    CHECK_THROWS_AS(exact_shapley(bad, bg, inst, singletons(4)), NumericalError);
}

TEST_CASE("Shapley kernel weights")
{
    CHECK(shapley_kernel_weight(4, 1) == doctest::Approx(3.0 / (4.0 * 1.0 * 3.0)));
    CHECK(shapley_kernel_weight(6, 2) == doctest::Approx(5.0 / (15.0 * 2.0 * 4.0)));
    CHECK(shapley_kernel_weight(6, 2) == doctest::Approx(shapley_kernel_weight(6, 4)));
}

TEST_CASE("background: mean row first, then norm-strided training rows")
{
    const Matrix train = random_matrix(40, 3, 5);
    const Matrix bg = make_background(train, 15);
    CHECK(bg.rows() == 16);
    CHECK(testutil::max_abs_diff(Series(bg.row(0).begin(), bg.row(0).end()),
              Series{train.col(0).mean(), train.col(1).mean(), train.col(2).mean()}) < 1e-15);
    for (int i = 2; i < bg.rows(); ++i) CHECK(bg.row(i).norm() >= bg.row(i - 1).norm());
    CHECK(make_background(train.topRows(5), 15).rows() == 6);
    CHECK_THROWS_AS(make_background(Matrix(0, 3)), DataError);
}

TEST_CASE("channel importance: one attribution gives |phi|; ties keep label order")
{
    const std::vector<std::string> channels{"S1-D1", "S2-D1"};
    const std::vector<GroupLabel> labels{{"S2-D1", Chromophore::hbr}, {"S1-D1", Chromophore::hbo}};
    Attribution a;
    a.phi = {-0.3, 0.1};
    const auto imp = channel_importance(std::span<const Attribution>(&a, 1), labels, channels);
    REQUIRE(imp.size() == 4);
    CHECK(imp[0].channel == "S2-D1");
    CHECK(imp[0].chromophore == Chromophore::hbr);
    CHECK(imp[0].mean_abs_shap == doctest::Approx(0.3));
    CHECK(imp[1].mean_abs_shap == doctest::Approx(0.1));
    // Unselected pairs are reported with zero, in label order.
    CHECK(imp[2].channel == "S1-D1");
    CHECK(imp[2].chromophore == Chromophore::hbr);
    CHECK(imp[3].channel == "S2-D1");
    CHECK(imp[3].chromophore == Chromophore::hbo);

    Attribution z;
    z.phi = {0.0, 0.0};
    const auto zero = channel_importance(std::span<const Attribution>(&z, 1), labels, channels);
    CHECK(zero[0].channel == "S1-D1");
    CHECK(zero[0].chromophore == Chromophore::hbo);
    CHECK(zero[1].chromophore == Chromophore::hbr);
    for (const auto& e : zero) CHECK(e.mean_abs_shap == 0.0);

    const std::vector<GroupLabel> unknown{{"S9-D9", Chromophore::hbo}, {"S1-D1", Chromophore::hbo}};
    CHECK_THROWS_AS(channel_importance(std::span<const Attribution>(&a, 1), unknown, channels), DataError);
}

TEST_CASE("scaling the model score keeps the importance ranking")
{
    const std::vector<std::string> channels{"S1-D1", "S2-D1", "S3-D2"};
    std::vector<GroupLabel> labels;
    for (const auto& c : channels)
        for (Chromophore k : {Chromophore::hbo, Chromophore::hbr}) labels.push_back({c, k});
    const Matrix bg = random_matrix(5, 6, 81);
    std::vector<Attribution> base, scaled;
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Series inst = testutil::gaussian(6, 90 + s);
        base.push_back(exact_shapley(interacting, bg, inst, singletons(6)));
        scaled.push_back(exact_shapley([](std::span<const double> x) { return 4.5 * interacting(x); }, bg, inst, singletons(6)));
    }
    const auto a = channel_importance(base, labels, channels), b = channel_importance(scaled, labels, channels);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].channel == b[i].channel);
        CHECK(a[i].chromophore == b[i].chromophore);
        CHECK(b[i].mean_abs_shap == doctest::Approx(4.5 * a[i].mean_abs_shap));
    }
}

TEST_CASE("serial and OpenMP exact Shapley agree")
{
    const Matrix bg = random_matrix(8, 10, 3);
    const Series inst = testutil::gaussian(10, 4);
    const auto a = exact_shapley(interacting, bg, inst, singletons(10));
    const auto b = reference::exact_shapley(interacting, bg, inst, singletons(10));
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.phi[i] == doctest::Approx(b.phi[i]).epsilon(1e-12));
}
