#include "helpers.hpp"

#include "nirscope/error.hpp"
#include "nirscope/pipeline.hpp"
#include "nirscope/synth.hpp"

#include <doctest.h>

using namespace nirscope;

namespace {

SynthConfig noise_free(int patients, int controls)
{
    SynthConfig c;
    c.n_patients = patients;
    c.n_controls = controls;
    c.noise = NoiseSpec::none();
    return c;
}

// Worst per-channel RMS error relative to the band-passed injected signal.
double worst_relative_error(const SynthConfig& c, const PreprocessConfig& pc, Chromophore chrom)
{
    const auto r = generate_dataset(c);
    const ButterworthBandpass filter(pc.filter, c.sample_rate_hz);
    double worst = 0.0;
    for (std::size_t p = 0; p < r.dataset.recordings.size(); ++p) {
        const HemoSeries h = preprocess_recording(r.dataset.recordings[p], r.dataset.montage, pc);
        const InjectedHemo truth = injected_hemodynamics(c, p);
        const auto& got = h.of(chrom);
        const auto& want = chrom == Chromophore::hbo ? truth.hbo : truth.hbr;
        for (std::size_t ch = 0; ch < got.size(); ++ch) {
            const Series ref = filter.apply(want[ch]);
            Series err(ref.size());
            for (std::size_t i = 0; i < ref.size(); ++i) err[i] = got[ch][i] - ref[i];
            worst = std::max(worst, rms(err) / rms(ref));
        }
    }
    return worst;
}

// The wavelet IQR rule has no noise floor to judge against on noise-free
// data and removes response onsets, so these runs skip motion correction.
PreprocessConfig without_motion()
{
    PreprocessConfig pc;
    pc.motion_correction = false;
    return pc;
}

} // namespace

TEST_CASE("noise-free null-effect data: preprocessing recovers the injected dHbO within 5% RMS")
{
    const double err = worst_relative_error(noise_free(1, 1), without_motion(), Chromophore::hbo);
    MESSAGE("worst channel RMS error " << err);
    CHECK(err < 0.05);
}

TEST_CASE("noise-free recovery holds for dHbR and for both groups")
{
    SynthConfig c = noise_free(2, 2);
    CHECK(worst_relative_error(c, without_motion(), Chromophore::hbr) < 0.05);
    CHECK(worst_relative_error(c, without_motion(), Chromophore::hbo) < 0.05);
}

TEST_CASE("provenance records every step in pipeline order")
{
    const auto r = generate_dataset(noise_free(1, 1));
    const HemoSeries h = preprocess_recording(r.dataset.recordings[0], r.dataset.montage, {});
    std::vector<std::string> steps;
    for (const auto& s : h.provenance.steps()) steps.push_back(s.step);
    CHECK(steps == std::vector<std::string>{"intensity_to_od", "short_channel_regression", "mbll", "motion_spline",
                       "motion_wavelet", "bandpass"});
    CHECK(h.channels.size() == 20);

    PreprocessConfig bare;
    bare.short_channel = false;
    bare.motion_correction = false;
    bare.band_pass = false;
    const HemoSeries b = preprocess_recording(r.dataset.recordings[0], r.dataset.montage, bare);
    CHECK(b.provenance.steps().size() == 2);
}

TEST_CASE("short-channel regression removes superficial noise shared with the short channel")
{
    SynthConfig c = noise_free(1, 1);
    c.noise.mayer_molar = 1.0e-6; // superficial, shared by long and short channels
    PreprocessConfig with = without_motion(), without = without_motion();
    without.short_channel = false;
    const double e_with = worst_relative_error(c, with, Chromophore::hbo);
    const double e_without = worst_relative_error(c, without, Chromophore::hbo);
    MESSAGE("with " << e_with << " without " << e_without);
    CHECK(e_with < e_without);
}

TEST_CASE("preprocess_dataset refuses hemo input")
{
    Dataset d;
    d.kind = DatasetKind::hemo;
    CHECK_THROWS_AS(preprocess_dataset(d, {}), DataError);
}
