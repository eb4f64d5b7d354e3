#include "helpers.hpp"

#include "nirscope/error.hpp"
#include "nirscope/motion.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace nirscope;

namespace {

constexpr double kFs = 3.9;

// Direct evaluation of the detection rule: amplitude outlier, or moving std
// above both std_sigma x its median and std_floor x the series std.
bool any_flagged(const Series& x, const MotionParams& p)
{
    const double sd = stddev(x);
    const double med = median(x);
    const auto w = static_cast<std::size_t>(std::lround(p.std_window_s * kFs));
    Series moving;
    for (std::size_t i = 0; i + w <= x.size(); ++i)
        moving.push_back(stddev(std::span<const double>(x).subspan(i, w)));
    const double limit = std::max(p.std_sigma * median(moving), p.std_floor * sd);
    for (double v : x)
        if (std::abs(v - med) > p.amp_sigma * sd) return true;
    for (double m : moving)
        if (m > limit) return true;
    return false;
}

} // namespace

TEST_CASE("clean 0.1 Hz sinusoid has no artifacts")
{
    const Series x = testutil::sine(600, kFs, 0.1);
    REQUIRE_FALSE(any_flagged(x, {}));
    CHECK(detect_artifacts(x, kFs).empty());
}

TEST_CASE("a single 10 sd spike gives exactly one segment around it")
{
    Series x = testutil::sine(600, kFs, 0.1);
    const double sd = stddev(x);
    x[300] += 10.0 * sd;
    const auto segs = detect_artifacts(x, kFs, {}, "S1-D1");
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start_sample <= 300);
    CHECK(segs[0].end_sample > 300);
    CHECK(segs[0].channel == "S1-D1");
    // 0.5 s padding on each side of the flagged run.
    CHECK(300 - segs[0].start_sample >= 2);
    CHECK(segs[0].end_sample - 301 >= 2);
}

TEST_CASE("constant series has no artifacts")
{
    CHECK(detect_artifacts(Series(100, 4.0), kFs).empty());
}

TEST_CASE("spline_correct: no segments is the identity")
{
    const Series x = testutil::gaussian(200, 3);
    CHECK(spline_correct(x, {}, kFs) == x);
}

TEST_CASE("spline_correct removes a +10 step inside a flagged segment")
{
    Series x(400, 0.0);
    for (std::size_t i = 180; i < 240; ++i) x[i] = 10.0;
    const std::vector<ArtifactSegment> segs{{170, 250, "c", ArtifactTrigger::amplitude}};
    const Series y = spline_correct(x, segs, kFs);
    double worst = 0.0;
    for (double v : y) worst = std::max(worst, std::abs(v));
    CHECK(worst < 0.5);
    for (std::size_t i = 0; i < 400; ++i)
        if (i < 170 || i >= 250) CHECK(y[i] == x[i]);
}

TEST_CASE("spline_correct leaves samples outside segments untouched")
{
    const Series x = testutil::gaussian(500, 8);
    const std::vector<ArtifactSegment> segs{{40, 90, "c", ArtifactTrigger::moving_std}, {300, 330, "c", ArtifactTrigger::amplitude}};
    const Series y = spline_correct(x, segs, kFs);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!((i >= 40 && i < 90) || (i >= 300 && i < 330))) CHECK(y[i] == x[i]);
}

TEST_CASE("spline_correct copes with a segment covering everything and one at the start")
{
    Series x = testutil::sine(200, kFs, 0.2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.01 * static_cast<double>(i);
    const Series all = spline_correct(x, std::vector<ArtifactSegment>{{0, 200, "c", ArtifactTrigger::amplitude}}, kFs);
    CHECK(all.size() == 200);
    CHECK(std::abs(mean(all)) < 1e-9);

    Series step(200, 1.0);
    for (std::size_t i = 0; i < 20; ++i) step[i] = 6.0;
    const Series head = spline_correct(step, std::vector<ArtifactSegment>{{0, 25, "c", ArtifactTrigger::amplitude}}, kFs);
    for (std::size_t i = 0; i < 25; ++i) CHECK(std::abs(head[i] - 1.0) < 0.5);
}

TEST_CASE("db4 filter is orthonormal and the DWT reconstructs perfectly")
{
    const auto h = wavelet::db4();
    REQUIRE(h.size() == 8);
    double sum = 0, sq = 0;
    for (double v : h) {
        sum += v;
        sq += v * v;
    }
    CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-12));

    const Series x = testutil::gaussian(256, 12);
    const auto d = wavelet::decompose(x, wavelet::max_level(256));
    CHECK(testutil::max_abs_diff(wavelet::reconstruct(d), x) < 1e-10);
}

TEST_CASE("wavelet_correct with an infinite threshold is the identity")
{
    const Series x = testutil::gaussian(300, 13);
    CHECK(testutil::max_abs_diff(wavelet_correct(x, std::numeric_limits<double>::infinity()), x) < 1e-10);
}

TEST_CASE("wavelet_correct: zeros stay zero")
{
    for (double v : wavelet_correct(Series(64, 0.0))) CHECK(v == 0.0);
}

TEST_CASE("wavelet_correct keeps a smooth 0.05 Hz sinusoid")
{
    const Series x = testutil::sine(780, kFs, 0.05);
    const Series y = wavelet_correct(x);
    Series diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = y[i] - x[i];
    CHECK(rms(diff) < 0.05 * rms(x));
}

TEST_CASE("wavelet_correct suppresses a one-sample spike")
{
    Series x = testutil::sine(780, kFs, 0.05);
    const double spike = 20.0 * stddev(x);
    x[400] += spike;
    const Series y = wavelet_correct(x);
    const double clean = std::sin(2.0 * std::numbers::pi * 0.05 * 400.0 / kFs);
    CHECK(std::abs(y[400] - clean) <= 0.2 * spike);
}

TEST_CASE("wavelet_correct needs 16 samples and motion params are validated")
{
    CHECK_THROWS_AS(wavelet_correct(Series(15, 1.0)), DataError);
    MotionParams p;
    p.iqr_multiplier = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
