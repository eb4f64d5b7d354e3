#include "helpers.hpp"

#include "nirscope/epochs.hpp"
#include "nirscope/error.hpp"
#include "nirscope/pipeline.hpp"
#include "nirscope/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nirscope;

namespace {

SynthConfig small(std::uint64_t seed = 3)
{
    SynthConfig c;
    c.n_patients = 2;
    c.n_controls = 2;
    c.seed = seed;
    return c;
}

EffectSpec half_hbr(double delay = 0.0)
{
    EffectSpec e;
    e.target_channels = {"S7-D6", "S5-D6"};
    e.amplitude_ratio = 0.5;
    e.peak_delay_s = delay;
    return e;
}

std::size_t channel_index(const SynthConfig& c, const std::string& label)
{
    const auto labels = c.montage.long_channel_labels();
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
}

} // namespace

TEST_CASE("canonical HRF: zero at onset, peak at 6 s, back near baseline by 30 s")
{
    CHECK(canonical_hrf(0.0) == 0.0);
    CHECK(canonical_hrf(-2.0) == 0.0);
    double best_t = 0.0, best = -1.0;
    for (double t = 0.0; t <= 30.0; t += 0.001)
        if (const double v = canonical_hrf(t); v > best) {
            best = v;
            best_t = t;
        }
    CHECK(std::abs(best_t - 6.0) <= 0.01);
    CHECK(best == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(canonical_hrf(30.0)) < 0.02);
    CHECK(canonical_hrf(10.0, {7.5, 16.0, 1.0 / 6.0}) > canonical_hrf(10.0));
}

TEST_CASE("same seed gives bit-identical datasets; different seeds differ")
{
    const auto a = generate_dataset(small()), b = generate_dataset(small()), c = generate_dataset(small(4));
    REQUIRE(a.dataset.recordings.size() == 4);
    for (std::size_t p = 0; p < 4; ++p) {
        CHECK(a.dataset.recordings[p].intensity == b.dataset.recordings[p].intensity);
        CHECK(a.dataset.recordings[p].participant_id == b.dataset.recordings[p].participant_id);
    }
    CHECK(a.dataset.recordings[0].intensity != c.dataset.recordings[0].intensity);
}

TEST_CASE("recordings: groups, annotations, positive intensities")
{
    const auto r = generate_dataset(small());
    int patients = 0;
    for (const auto& rec : r.dataset.recordings) {
        patients += rec.group == Group::patient;
        int rests = 0;
        for (const auto& a : rec.annotations) rests += a.label == "rest";
        CHECK(rec.annotations.size() == 20);
        CHECK(rests == 10);
        CHECK(rec.sample_rate_hz == 3.9);
        for (const auto& per_wl : rec.intensity)
            for (const auto& ch : per_wl)
                for (double v : ch) CHECK_MESSAGE(v > 0.0, rec.participant_id);
    }
    CHECK(patients == 2);
}

TEST_CASE("ground truth: null effect lists nothing, targets are listed exactly, JSON round trip")
{
    const auto null = generate_dataset(small());
    CHECK(null.truth.discriminative_channels.empty());
    CHECK(null.truth.effect.is_null());

    SynthConfig c = small();
    c.effect = half_hbr(1.5);
    const auto eff = generate_dataset(c);
    CHECK(eff.truth.discriminative_channels == c.effect.target_channels);

    const GroundTruth back = parse_ground_truth(ground_truth_report(eff.truth));
    CHECK(back.discriminative_channels == eff.truth.discriminative_channels);
    CHECK(back.participants == eff.truth.participants);
    CHECK(back.effect.amplitude_ratio == 0.5);
    CHECK_THROWS(parse_ground_truth("{not json"));
}

TEST_CASE("patient true time to peak exceeds control by exactly the delay")
{
    SynthConfig c = small();
    c.effect = half_hbr(1.5);
    const auto r = generate_dataset(c);
    for (const auto& p : r.truth.participants) {
        CAPTURE(p.participant_id);
        if (p.group == Group::patient) {
            CHECK(p.hbr_peak_s == 7.5);
            CHECK(p.hbr_amplitude_factor == 0.5);
            CHECK(p.hbo_peak_s == 6.0);
        } else {
            CHECK(p.hbr_peak_s == 6.0);
            CHECK(p.hbr_amplitude_factor == 1.0);
        }
    }
}

TEST_CASE("injected responses: effect only in target channels of patients")
{
    SynthConfig c = small();
    c.noise = NoiseSpec::none();
    c.effect = half_hbr();
    SynthConfig base = c;
    base.effect = {};
    const auto r = generate_dataset(c);
    const std::size_t target = channel_index(c, "S7-D6"), other = channel_index(c, "S1-D1");
    for (std::size_t p = 0; p < r.dataset.recordings.size(); ++p) {
        const bool patient = r.dataset.recordings[p].group == Group::patient;
        const InjectedHemo with = injected_hemodynamics(c, p), without = injected_hemodynamics(base, p);
        CHECK(testutil::max_abs_diff(with.hbo[target], without.hbo[target]) == 0.0);
        CHECK(testutil::max_abs_diff(with.hbr[other], without.hbr[other]) == 0.0);
        for (std::size_t i = 0; i < with.hbr[target].size(); i += 13)
            CHECK(with.hbr[target][i] == doctest::Approx((patient ? 0.5 : 1.0) * without.hbr[target][i]).epsilon(1e-12));
        // HbR is the negative third of HbO.
        for (std::size_t i = 0; i < with.hbo[other].size(); i += 97)
            CHECK(with.hbr[other][i] == doctest::Approx(-with.hbo[other][i] / 3.0));
    }
}

TEST_CASE("invalid configurations are refused")
{
    SynthConfig c = small();
    c.effect = half_hbr();
    c.effect.amplitude_ratio = 0.0;
    CHECK_THROWS_AS(generate_dataset(c), ConfigError);
    c.effect = half_hbr(25.0);
    CHECK_THROWS_AS(generate_dataset(c), ConfigError);
    c = small();
    c.effect.target_channels = {"S9-D9"};
    c.effect.amplitude_ratio = 0.5;
    CHECK_THROWS_AS(generate_dataset(c), ConfigError);
    c = small();
    c.n_patients = 0;
    CHECK_THROWS_AS(generate_dataset(c), ConfigError);
    c = small();
    c.noise.white_od = -1.0;
    CHECK_THROWS_AS(generate_dataset(c), ConfigError);
}

TEST_CASE("halved HbR survives full preprocessing at 0.5x within 10%")
{
    SynthConfig c;
    c.effect = half_hbr();
    const auto r = generate_dataset(c);
    const EpochSet e = segment_all(preprocess_dataset(r.dataset, {}));
    const std::vector<std::string> roi = c.effect.target_channels;
    for (const char* task : {"single", "dual"}) {
        CAPTURE(task);
        const Series ctl = roi_average(block_average(e, {task, Group::control, {}}).hbr_mean, e.channels, roi);
        const Series pat = roi_average(block_average(e, {task, Group::patient, {}}).hbr_mean, e.channels, roi);
        // Least-squares amplitude of the patient curve on the control curve.
        double dot = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < ctl.size(); ++i) {
            dot += ctl[i] * pat[i];
            norm += ctl[i] * ctl[i];
        }
        MESSAGE(std::string(task) << " amplitude ratio " << dot / norm);
        CHECK(std::abs(dot / norm - 0.5) <= 0.05);
    }
}
