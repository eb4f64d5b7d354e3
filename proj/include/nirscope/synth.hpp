#pragma once

#include "nirscope/model.hpp"
#include "nirscope/optics.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nirscope {

struct HrfShape {
    double peak_s = 6.0;
    double undershoot_s = 16.0;
    double undershoot_ratio = 1.0 / 6.0;
};

// Double-gamma response, zero for t <= 0, global maximum exactly 1 at peak_s.
double canonical_hrf(double t, const HrfShape& shape = {});

struct EffectSpec {
    std::vector<std::string> target_channels;
    // Fraction of the effect applied per chromophore: amplitude factor
    // 1 - w (1 - ratio), latency shift w * peak_delay_s.
    double hbo_weight = 0.0;
    double hbr_weight = 1.0;
    double amplitude_ratio = 1.0; // (0, 1], patient group
    double peak_delay_s = 0.0;

    bool is_null() const;
    void validate(double task_window_s) const;
};

struct NoiseSpec {
    double cardiac_hz = 1.1;
    double cardiac_molar = 1.0e-6;
    double respiration_hz = 0.3;
    double respiration_molar = 0.8e-6;
    double mayer_hz = 0.1;
    double mayer_molar = 0.6e-6;
    double white_od = 0.0005;       // measurement noise sd, optical density
    double drift_od_per_s = 2e-5;   // max |linear drift|
    double spike_rate_per_min = 0.5;
    double spike_od = 0.05;
    double cerebral_molar = 0.05e-6; // spontaneous low-frequency fluctuation sd
    double between_subject_sd = 0.15; // log-normal amplitude jitter

    static NoiseSpec none();
    // Every amplitude, rate and the drift multiplied by k (frequencies kept).
    NoiseSpec scaled(double k) const;
    void validate() const;
};

struct SynthConfig {
    int n_patients = 12;
    int n_controls = 12;
    int trials_per_task = 5;
    std::vector<std::string> tasks{"single", "dual"};
    double task_s = 20.0;
    double rest_s = 20.0;
    double lead_in_s = 20.0;
    double sample_rate_hz = 3.9;
    std::array<double, 2> wavelengths_nm{760.0, 850.0};
    double activation_molar = 2.0e-6; // HbO peak amplitude of one trial
    // Neural drive during a task: 1 at onset, relaxing to sustained_fraction
    // with time constant adaptation_s. 1 gives a plain boxcar.
    double sustained_fraction = 0.0;
    double adaptation_s = 4.0;
    double hbr_ratio = 1.0 / 3.0;     // |HbR| / HbO
    HrfShape hrf;
    EffectSpec effect;
    NoiseSpec noise;
    std::uint64_t seed = 1;
    Montage montage = Montage::default_montage();

    void validate() const;
};

struct ParticipantTruth {
    std::string participant_id;
    Group group = Group::control;
    double hbo_peak_s = 6.0; // HRF peak latency in the target channels
    double hbr_peak_s = 6.0;
    double hbo_amplitude_factor = 1.0;
    double hbr_amplitude_factor = 1.0;

    bool operator==(const ParticipantTruth&) const = default;
};

struct GroundTruth {
    std::vector<std::string> discriminative_channels; // empty for a null effect
    EffectSpec effect;
    std::vector<ParticipantTruth> participants;
};

struct SynthResult {
    Dataset dataset;
    GroundTruth truth;
};

SynthResult generate_dataset(const SynthConfig& config, const ExtinctionTable& table = ExtinctionTable::defaults());

// Noise-free neural dHbO / dHbR for one recording, per long channel, as the
// generator injected it (used for fidelity checks).
struct InjectedHemo {
    std::vector<Series> hbo;
    std::vector<Series> hbr;
};
InjectedHemo injected_hemodynamics(const SynthConfig& config, std::size_t participant_index);

// JSON text; parse_ground_truth inverts it.
std::string ground_truth_report(const GroundTruth& truth);
GroundTruth parse_ground_truth(const std::string& text);

} // namespace nirscope
