#include "nirscope/synth.hpp"

#include "nirscope/error.hpp"
#include "nirscope/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <cstdio>
#include <set>

namespace nirscope {

namespace {

double gamma_density(double t, double shape)
{
    return std::exp((shape - 1.0) * std::log(t) - t - std::lgamma(shape));
}

// Unscaled double gamma with modes near the requested peak and undershoot.
double raw_hrf(double t, const HrfShape& s)
{
    if (t <= 0.0) return 0.0;
    return gamma_density(t, s.peak_s + 1.0) - s.undershoot_ratio * gamma_density(t, s.undershoot_s + 1.0);
}

// Time stretch and gain that put the raw curve's maximum at peak_s with value 1.
struct HrfScale {
    double stretch = 1.0;
    double gain = 1.0;
};

HrfScale hrf_scale(const HrfShape& s)
{
    if (!(s.peak_s > 0.0) || !(s.undershoot_s > s.peak_s) || !(s.undershoot_ratio >= 0.0))
        throw ConfigError("HRF: need 0 < peak < undershoot and a non-negative undershoot ratio");
    double lo = 1e-6;
    double hi = s.undershoot_s;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double a = hi - phi * (hi - lo);
        const double b = lo + phi * (hi - lo);
        if (raw_hrf(a, s) < raw_hrf(b, s))
            lo = a;
        else
            hi = b;
    }
    const double t_max = (lo + hi) / 2.0;
    return {t_max / s.peak_s, 1.0 / raw_hrf(t_max, s)};
}

// Response to one trial: the HRF convolved with a neural drive that starts
// at 1 and relaxes to `sustained` with time constant tau over the task
// duration. Tabulated on a fine grid and scaled to a maximum of 1.
class BlockResponse {
public:
    BlockResponse(const HrfShape& shape, double duration, double sustained, double tau)
    {
        const HrfScale scale = hrf_scale(shape);
        const auto n = static_cast<std::size_t>((duration + kTail) / kStep) + 2;
        const auto drive_n = static_cast<std::size_t>(std::lround(duration / kStep));
        std::vector<double> h(n);
        for (std::size_t i = 0; i < n; ++i) h[i] = scale.gain * raw_hrf(static_cast<double>(i) * kStep * scale.stretch, shape);
        std::vector<double> drive(drive_n);
        for (std::size_t j = 0; j < drive_n; ++j)
            drive[j] = sustained + (1.0 - sustained) * std::exp(-static_cast<double>(j) * kStep / tau);
        table_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < drive_n && j <= i; ++j) acc += drive[j] * h[i - j];
            table_[i] = acc;
        }
        const double peak = *std::max_element(table_.begin(), table_.end());
        if (!(peak > 0.0)) throw ConfigError("HRF: undershoot cancels the response; reduce the undershoot ratio");
        for (double& v : table_) v /= peak;
    }

    // Response at t seconds after onset.
    double operator()(double t) const
    {
        if (t <= 0.0) return 0.0;
        const double pos = t / kStep;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= table_.size()) return table_.back();
        const double frac = pos - static_cast<double>(i);
        return table_[i] + frac * (table_[i + 1] - table_[i]);
    }

private:
    static constexpr double kStep = 0.01;
    static constexpr double kTail = 60.0;

    std::vector<double> table_;
};

struct Trial {
    std::size_t task = 0;
    double onset_s = 0.0;
    double amplitude = 1.0;
};

// Everything about one participant's neural response; drawn from its own
// stream so noise settings never change the injected signal.
struct ParticipantPlan {
    std::string id;
    Group group = Group::control;
    std::vector<Trial> trials;
    std::vector<double> hbo_gain; // per long channel, mol/L
    std::vector<double> hbr_gain;
    std::vector<double> hbo_delay;
    std::vector<double> hbr_delay;
};

std::size_t sample_count(const SynthConfig& c)
{
    const double total = c.lead_in_s + static_cast<double>(c.trials_per_task * c.tasks.size()) * (c.task_s + c.rest_s);
    return static_cast<std::size_t>(std::floor(total * c.sample_rate_hz + 1e-9));
}

std::string participant_id(const SynthConfig& c, std::size_t index)
{
    const bool patient = index < static_cast<std::size_t>(c.n_patients);
    const std::size_t k = patient ? index + 1 : index + 1 - static_cast<std::size_t>(c.n_patients);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%02zu", patient ? 'P' : 'C', k);
    return buf;
}

// Fixed per-channel activation strength shared by everyone.
std::vector<double> channel_strength(const SynthConfig& c, std::size_t long_count)
{
    Rng rng = Rng::stream(c.seed, 0xC4A11E1ULL);
    std::vector<double> s(long_count);
    for (double& v : s) v = rng.uniform(0.6, 1.0);
    return s;
}

ParticipantPlan make_plan(const SynthConfig& c, std::size_t index)
{
    ParticipantPlan p;
    p.id = participant_id(c, index);
    p.group = index < static_cast<std::size_t>(c.n_patients) ? Group::patient : Group::control;
    Rng rng = Rng::stream(c.seed, 2 * index);

    std::vector<std::size_t> order;
    for (std::size_t t = 0; t < c.tasks.size(); ++t)
        for (int k = 0; k < c.trials_per_task; ++k) order.push_back(t);
    rng.shuffle(order);
    double onset = c.lead_in_s;
    for (std::size_t t : order) {
        p.trials.push_back({t, onset, std::exp(rng.normal(0.0, 0.1))});
        onset += c.task_s + c.rest_s;
    }

    const auto longs = c.montage.long_channels();
    const auto strength = channel_strength(c, longs.size());
    const std::set<std::string> targets(c.effect.target_channels.begin(), c.effect.target_channels.end());
    const double sd = c.noise.between_subject_sd;
    for (std::size_t i = 0; i < longs.size(); ++i) {
        const double jo = std::exp(rng.normal(0.0, sd));
        const double jr = std::exp(rng.normal(0.0, sd));
        const bool affected = p.group == Group::patient && targets.count(c.montage.channels[longs[i]].label());
        const auto& e = c.effect;
        const double fo = affected ? 1.0 - e.hbo_weight * (1.0 - e.amplitude_ratio) : 1.0;
        const double fr = affected ? 1.0 - e.hbr_weight * (1.0 - e.amplitude_ratio) : 1.0;
        p.hbo_gain.push_back(c.activation_molar * strength[i] * jo * fo);
        p.hbr_gain.push_back(-c.hbr_ratio * c.activation_molar * strength[i] * jr * fr);
        p.hbo_delay.push_back(affected ? e.hbo_weight * e.peak_delay_s : 0.0);
        p.hbr_delay.push_back(affected ? e.hbr_weight * e.peak_delay_s : 0.0);
    }
    return p;
}

// Task i is scaled by 1 + 0.25 i so tasks differ in load.
double task_gain(std::size_t task) { return 1.0 + 0.25 * static_cast<double>(task); }

InjectedHemo neural_response(const SynthConfig& c, const ParticipantPlan& p, const BlockResponse& block)
{
    const std::size_t n = sample_count(c);
    InjectedHemo out;
    for (std::size_t ch = 0; ch < p.hbo_gain.size(); ++ch) {
        Series hbo(n, 0.0);
        Series hbr(n, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double time = static_cast<double>(t) / c.sample_rate_hz;
            for (const Trial& tr : p.trials) {
                const double a = tr.amplitude * task_gain(tr.task);
                hbo[t] += a * block(time - tr.onset_s - p.hbo_delay[ch]);
                hbr[t] += a * block(time - tr.onset_s - p.hbr_delay[ch]);
            }
            hbo[t] *= p.hbo_gain[ch];
            hbr[t] *= p.hbr_gain[ch];
        }
        out.hbo.push_back(std::move(hbo));
        out.hbr.push_back(std::move(hbr));
    }
    return out;
}

// Sum of random-phase sinusoids spread over [lo, hi] Hz with unit sd.
Series band_noise(Rng& rng, std::size_t n, double fs, double lo, double hi)
{
    constexpr int kComponents = 24;
    Series s(n, 0.0);
    for (int k = 0; k < kComponents; ++k) {
        const double f = rng.uniform(lo, hi);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t t = 0; t < n; ++t)
            s[t] += std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / fs + phase);
    }
    const double scale = std::sqrt(2.0 / kComponents);
    for (double& v : s) v *= scale;
    return s;
}

Recording make_recording(const SynthConfig& c, std::size_t index, const ParticipantPlan& p, const BlockResponse& block,
    const ExtinctionTable& table)
{
    const Montage& m = c.montage;
    const std::size_t n = sample_count(c);
    const double fs = c.sample_rate_hz;
    const NoiseSpec& noise = c.noise;
    const WavelengthPair wl{c.wavelengths_nm[0], c.wavelengths_nm[1]};
    const InjectedHemo neural = neural_response(c, p, block);
    Rng rng = Rng::stream(c.seed, 2 * index + 1);

    Recording rec;
    rec.participant_id = p.id;
    rec.group = p.group;
    rec.sample_rate_hz = fs;
    rec.wavelengths_nm = c.wavelengths_nm;
    for (const Trial& tr : p.trials) {
        rec.annotations.push_back({tr.onset_s, c.task_s, c.tasks[tr.task]});
        rec.annotations.push_back({tr.onset_s + c.task_s, c.rest_s, "rest"});
    }

    // Superficial physiology per source, as optical density at 3 cm; the
    // same values are added to every channel of that source.
    const double two_pi = 2.0 * std::numbers::pi;
    const double f_card = noise.cardiac_hz + rng.uniform(-0.1, 0.1);
    const double f_resp = noise.respiration_hz + rng.uniform(-0.03, 0.03);
    const double f_mayer = noise.mayer_hz + rng.uniform(-0.01, 0.01);
    const MbllSystem reference(table, wl, 0.03);
    std::map<std::string, std::array<Series, 2>> superficial;
    for (const std::string& src : m.sources) {
        const double pc = rng.uniform(0.0, two_pi);
        const double pr = rng.uniform(0.0, two_pi);
        const double pm = rng.uniform(0.0, two_pi);
        const double gain = rng.uniform(0.8, 1.2);
        std::array<Series, 2> od{Series(n), Series(n)};
        for (std::size_t t = 0; t < n; ++t) {
            const double time = static_cast<double>(t) / fs;
            const double hbo = gain * (noise.cardiac_molar * std::sin(two_pi * f_card * time + pc) +
                                          noise.respiration_molar * std::sin(two_pi * f_resp * time + pr) +
                                          noise.mayer_molar * std::sin(two_pi * f_mayer * time + pm));
            const auto v = reference.forward(hbo, -0.3 * hbo);
            od[0][t] = v[0];
            od[1][t] = v[1];
        }
        superficial[src] = std::move(od);
    }

    // Motion spikes hit every optode at once with channel-specific coupling.
    struct Spike {
        double time_s;
        double sign;
    };
    std::vector<Spike> spikes;
    const double duration_s = static_cast<double>(n) / fs;
    const int spike_count = noise.spike_od > 0.0 ? rng.poisson(noise.spike_rate_per_min * duration_s / 60.0) : 0;
    for (int k = 0; k < spike_count; ++k) spikes.push_back({rng.uniform(0.0, duration_s), rng.uniform() < 0.5 ? -1.0 : 1.0});
    constexpr double kSpikeWidth = 0.5;

    const auto longs = m.long_channels();
    for (std::size_t w = 0; w < 2; ++w) rec.intensity[w].resize(m.channels.size());
    for (std::size_t ch = 0; ch < m.channels.size(); ++ch) {
        const Channel& channel = m.channels[ch];
        const MbllSystem system(table, wl, channel.distance_m);
        std::array<Series, 2> od{Series(n, 0.0), Series(n, 0.0)};

        const auto li = std::find(longs.begin(), longs.end(), ch);
        if (li != longs.end()) {
            const auto k = static_cast<std::size_t>(li - longs.begin());
            const Series cerebral_o = band_noise(rng, n, fs, 0.01, 0.2);
            const Series cerebral_r = band_noise(rng, n, fs, 0.01, 0.2);
            for (std::size_t t = 0; t < n; ++t) {
                const double hbo = neural.hbo[k][t] + noise.cerebral_molar * cerebral_o[t];
                const double hbr = neural.hbr[k][t] + noise.cerebral_molar * c.hbr_ratio * cerebral_r[t];
                const auto v = system.forward(hbo, hbr);
                od[0][t] = v[0];
                od[1][t] = v[1];
            }
        }
        if (const auto it = superficial.find(channel.source); it != superficial.end())
            for (std::size_t w = 0; w < 2; ++w)
                for (std::size_t t = 0; t < n; ++t) od[w][t] += it->second[w][t];

        for (std::size_t w = 0; w < 2; ++w) {
            const double slope = rng.uniform(-noise.drift_od_per_s, noise.drift_od_per_s);
            for (std::size_t t = 0; t < n; ++t)
                od[w][t] += slope * static_cast<double>(t) / fs + rng.normal(0.0, noise.white_od);
        }
        for (const Spike& s : spikes) {
            const double amp = s.sign * noise.spike_od * rng.uniform(0.5, 1.5);
            const auto centre = static_cast<long>(std::lround(s.time_s * fs));
            const long half = static_cast<long>(std::ceil(4.0 * kSpikeWidth * fs));
            for (long t = std::max(0L, centre - half); t <= std::min(static_cast<long>(n) - 1, centre + half); ++t) {
                const double dt = (static_cast<double>(t) / fs - s.time_s) / kSpikeWidth;
                const double bump = amp * std::exp(-0.5 * dt * dt);
                od[0][static_cast<std::size_t>(t)] += bump;
                od[1][static_cast<std::size_t>(t)] += bump;
            }
        }
        for (std::size_t w = 0; w < 2; ++w) {
            Series intensity(n);
            for (std::size_t t = 0; t < n; ++t) intensity[t] = std::exp(-od[w][t]);
            rec.intensity[w][ch] = std::move(intensity);
        }
    }
    return rec;
}

} // namespace

double canonical_hrf(double t, const HrfShape& shape)
{
    if (t <= 0.0) return 0.0;
    const HrfScale s = hrf_scale(shape);
    return s.gain * raw_hrf(t * s.stretch, shape);
}

bool EffectSpec::is_null() const
{
    return target_channels.empty() || (hbo_weight == 0.0 && hbr_weight == 0.0) ||
           (amplitude_ratio == 1.0 && peak_delay_s == 0.0);
}

void EffectSpec::validate(double task_window_s) const
{
    if (!(amplitude_ratio > 0.0 && amplitude_ratio <= 1.0)) throw ConfigError("effect: amplitude ratio must be in (0, 1]");
    if (!(peak_delay_s >= 0.0 && peak_delay_s < task_window_s))
        throw ConfigError("effect: peak delay must be in [0, task window)");
    if (!(hbo_weight >= 0.0 && hbo_weight <= 1.0) || !(hbr_weight >= 0.0 && hbr_weight <= 1.0))
        throw ConfigError("effect: chromophore weights must be in [0, 1]");
}

NoiseSpec NoiseSpec::scaled(double k) const
{
    if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("noise scale must be finite and >= 0");
    NoiseSpec n = *this;
    for (double* v : {&n.cardiac_molar, &n.respiration_molar, &n.mayer_molar, &n.white_od, &n.drift_od_per_s,
             &n.spike_rate_per_min, &n.spike_od, &n.cerebral_molar, &n.between_subject_sd})
        *v *= k;
    return n;
}

NoiseSpec NoiseSpec::none()
{
    NoiseSpec n;
    n.cardiac_molar = n.respiration_molar = n.mayer_molar = 0.0;
    n.white_od = n.drift_od_per_s = 0.0;
    n.spike_rate_per_min = n.spike_od = 0.0;
    n.cerebral_molar = 0.0;
    n.between_subject_sd = 0.0;
    return n;
}

void NoiseSpec::validate() const
{
    for (double v : {cardiac_molar, respiration_molar, mayer_molar, white_od, drift_od_per_s, spike_rate_per_min, spike_od,
             cerebral_molar, between_subject_sd})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("noise: amplitudes and rates must be finite and >= 0");
    for (double f : {cardiac_hz, respiration_hz, mayer_hz})
        if (!(f > 0.0)) throw ConfigError("noise: frequencies must be positive");
}

void SynthConfig::validate() const
{
    if (n_patients < 1 || n_controls < 1) throw ConfigError("synth: need at least one patient and one control");
    if (n_patients > 99 || n_controls > 99) throw ConfigError("synth: at most 99 participants per group");
    if (trials_per_task < 1) throw ConfigError("synth: trials per task must be >= 1");
    if (tasks.empty()) throw ConfigError("synth: no tasks");
    const std::set<std::string> unique(tasks.begin(), tasks.end());
    if (unique.size() != tasks.size() || unique.count("rest") || unique.count(""))
        throw ConfigError("synth: task labels must be unique, nonempty and not 'rest'");
    if (!(task_s > 0.0) || !(rest_s >= 0.0) || !(lead_in_s >= 0.0)) throw ConfigError("synth: invalid block durations");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("synth: sample rate must be positive");
    if (!(activation_molar >= 0.0) || !(hbr_ratio >= 0.0)) throw ConfigError("synth: activation must be >= 0");
    if (!(sustained_fraction >= 0.0 && sustained_fraction <= 1.0) || !(adaptation_s > 0.0))
        throw ConfigError("synth: sustained fraction must be in [0, 1] and the adaptation time positive");
    noise.validate();
    for (double f : {noise.cardiac_hz, noise.respiration_hz, noise.mayer_hz})
        if (!(f < sample_rate_hz / 2.0)) throw ConfigError("synth: physiological frequency above Nyquist");
    effect.validate(task_s);
    montage.validate();
    for (const auto& label : effect.target_channels) {
        const auto idx = montage.find(label);
        if (!idx) throw ConfigError("synth: effect channel " + label + " is not in the montage");
        if (montage.channels[*idx].kind != ChannelKind::long_range)
            throw ConfigError("synth: effect channel " + label + " is a short channel");
    }
}

SynthResult generate_dataset(const SynthConfig& config, const ExtinctionTable& table)
{
    config.validate();
    MbllSystem(table, {config.wavelengths_nm[0], config.wavelengths_nm[1]}, 0.03);
    const BlockResponse block(config.hrf, config.task_s, config.sustained_fraction, config.adaptation_s);
    const auto total = static_cast<std::size_t>(config.n_patients + config.n_controls);

    SynthResult out;
    Dataset& d = out.dataset;
    d.manifest.seed = config.seed;
    d.kind = DatasetKind::raw;
    d.sample_rate_hz = config.sample_rate_hz;
    d.wavelengths_nm = config.wavelengths_nm;
    d.montage = config.montage;
    d.recordings.resize(total);

    std::vector<ParticipantPlan> plans(total);
    std::vector<std::exception_ptr> errors(total);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            plans[k] = make_plan(config, k);
            d.recordings[k] = make_recording(config, k, plans[k], block, table);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    d.validate();

    GroundTruth& gt = out.truth;
    gt.effect = config.effect;
    if (!config.effect.is_null()) gt.discriminative_channels = config.effect.target_channels;
    const auto& e = config.effect;
    for (const ParticipantPlan& p : plans) {
        const bool patient = p.group == Group::patient && !e.target_channels.empty();
        ParticipantTruth t;
        t.participant_id = p.id;
        t.group = p.group;
        t.hbo_peak_s = config.hrf.peak_s + (patient ? e.hbo_weight * e.peak_delay_s : 0.0);
        t.hbr_peak_s = config.hrf.peak_s + (patient ? e.hbr_weight * e.peak_delay_s : 0.0);
        t.hbo_amplitude_factor = patient ? 1.0 - e.hbo_weight * (1.0 - e.amplitude_ratio) : 1.0;
        t.hbr_amplitude_factor = patient ? 1.0 - e.hbr_weight * (1.0 - e.amplitude_ratio) : 1.0;
        gt.participants.push_back(t);
    }
    return out;
}

InjectedHemo injected_hemodynamics(const SynthConfig& config, std::size_t participant_index)
{
    config.validate();
    if (participant_index >= static_cast<std::size_t>(config.n_patients + config.n_controls))
        throw ConfigError("injected_hemodynamics: participant index out of range");
    const BlockResponse block(config.hrf, config.task_s, config.sustained_fraction, config.adaptation_s);
    return neural_response(config, make_plan(config, participant_index), block);
}

std::string ground_truth_report(const GroundTruth& truth)
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["discriminative_channels"] = truth.discriminative_channels;
    const auto& e = truth.effect;
    j["effect"] = {{"target_channels", e.target_channels}, {"hbo_weight", e.hbo_weight}, {"hbr_weight", e.hbr_weight},
        {"amplitude_ratio", e.amplitude_ratio}, {"peak_delay_s", e.peak_delay_s}};
    ordered_json parts = ordered_json::array();
    for (const auto& p : truth.participants)
        parts.push_back({{"participant_id", p.participant_id}, {"group", std::string(to_string(p.group))},
            {"hbo_peak_s", p.hbo_peak_s}, {"hbr_peak_s", p.hbr_peak_s},
            {"hbo_amplitude_factor", p.hbo_amplitude_factor}, {"hbr_amplitude_factor", p.hbr_amplitude_factor}});
    j["participants"] = std::move(parts);
    return j.dump(2) + "\n";
}

GroundTruth parse_ground_truth(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        GroundTruth gt;
        gt.discriminative_channels = j.at("discriminative_channels").get<std::vector<std::string>>();
        const auto& e = j.at("effect");
        gt.effect.target_channels = e.at("target_channels").get<std::vector<std::string>>();
        gt.effect.hbo_weight = e.at("hbo_weight").get<double>();
        gt.effect.hbr_weight = e.at("hbr_weight").get<double>();
        gt.effect.amplitude_ratio = e.at("amplitude_ratio").get<double>();
        gt.effect.peak_delay_s = e.at("peak_delay_s").get<double>();
        for (const auto& p : j.at("participants")) {
            ParticipantTruth t;
            t.participant_id = p.at("participant_id").get<std::string>();
            t.group = parse_group(p.at("group").get<std::string>());
            t.hbo_peak_s = p.at("hbo_peak_s").get<double>();
            t.hbr_peak_s = p.at("hbr_peak_s").get<double>();
            t.hbo_amplitude_factor = p.at("hbo_amplitude_factor").get<double>();
            t.hbr_amplitude_factor = p.at("hbr_amplitude_factor").get<double>();
            gt.participants.push_back(t);
        }
        return gt;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("ground truth: ") + ex.what());
    }
}

} // namespace nirscope
