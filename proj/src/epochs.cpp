#include "nirscope/epochs.hpp"

#include "nirscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

namespace nirscope {

std::size_t window_samples_for(double window_s, double fs)
{
    if (!(window_s > 0.0) || !(fs > 0.0)) throw ConfigError("epoch window and sample rate must be positive");
    // floor with a tolerance so 20 s at 3.9 Hz gives 78 despite rounding in the product
    return static_cast<std::size_t>(std::floor(window_s * fs + 1e-9));
}

EpochSet segment(const HemoSeries& hemo, const SegmentOptions& options)
{
    const double fs = hemo.sample_rate_hz;
    const std::size_t window = window_samples_for(options.window_s, fs);
    const auto baseline = static_cast<std::size_t>(std::lround(options.baseline_s * fs));
    const std::size_t n = hemo.samples();

    EpochSet out;
    out.channels = hemo.channels;
    out.sample_rate_hz = fs;
    out.window_samples = window;

    std::map<std::string, int> trials;
    for (const Annotation& a : hemo.annotations) {
        if (!is_task_label(a.label)) continue;
        if (options.window_s > a.duration_s + 1e-9)
            throw DataError("segment: window of " + std::to_string(options.window_s) + " s exceeds the " + a.label +
                            " annotation at " + std::to_string(a.onset_s) + " s");
        const auto onset = static_cast<std::size_t>(std::lround(a.onset_s * fs));
        if (a.onset_s < 0.0 || onset + window > n || (a.onset_s + a.duration_s) * fs > static_cast<double>(n) + 1e-6)
            throw DataError("segment: annotation " + a.label + " at " + std::to_string(a.onset_s) +
                            " s extends past the recording end");

        Epoch e;
        e.participant_id = hemo.participant_id;
        e.group = hemo.group;
        e.task = a.label;
        e.trial = trials[a.label]++;
        const std::size_t b0 = onset >= baseline ? onset - baseline : 0;
        for (int chrom = 0; chrom < 2; ++chrom) {
            const auto& src = chrom == 0 ? hemo.hbo : hemo.hbr;
            auto& dst = chrom == 0 ? e.hbo : e.hbr;
            for (const Series& s : src) {
                const double base =
                    b0 < onset ? mean(std::span<const double>(s.data() + b0, onset - b0)) : s[onset];
                Series w(window);
                for (std::size_t i = 0; i < window; ++i) w[i] = s[onset + i] - base;
                dst.push_back(std::move(w));
            }
        }
        out.epochs.push_back(std::move(e));
    }
    if (out.epochs.empty()) throw DataError("segment: " + hemo.participant_id + " has no task annotations");
    return out;
}

EpochSet segment_all(std::span<const HemoSeries> hemo, const SegmentOptions& options)
{
    if (hemo.empty()) throw DataError("segment: no participants");
    EpochSet out;
    for (const HemoSeries& h : hemo) {
        EpochSet part = segment(h, options);
        if (out.epochs.empty()) {
            out.channels = part.channels;
            out.sample_rate_hz = part.sample_rate_hz;
            out.window_samples = part.window_samples;
        } else if (part.channels != out.channels || part.window_samples != out.window_samples) {
            throw DataError("segment: participant " + h.participant_id + " has a different channel layout");
        }
        for (Epoch& e : part.epochs) out.epochs.push_back(std::move(e));
    }
    return out;
}

BlockAverage block_average(const EpochSet& epochs, const EpochFilter& filter)
{
    std::vector<const Epoch*> match;
    for (const Epoch& e : epochs.epochs) {
        if (e.task != filter.task) continue;
        if (filter.group && e.group != *filter.group) continue;
        if (filter.participant_id && e.participant_id != *filter.participant_id) continue;
        match.push_back(&e);
    }
    if (match.empty()) throw DataError("block_average: no epochs match task '" + filter.task + "'");

    BlockAverage out;
    out.task = filter.task;
    out.n_trials = match.size();
    const std::size_t channels = epochs.channels.size();
    const std::size_t w = epochs.window_samples;
    const double count = static_cast<double>(match.size());
    for (int chrom = 0; chrom < 2; ++chrom) {
        auto& mean_out = chrom == 0 ? out.hbo_mean : out.hbr_mean;
        auto& std_out = chrom == 0 ? out.hbo_std : out.hbr_std;
        mean_out.assign(channels, Series(w, 0.0));
        std_out.assign(channels, Series(w, 0.0));
        for (std::size_t c = 0; c < channels; ++c) {
            for (const Epoch* e : match) {
                const Series& s = (chrom == 0 ? e->hbo : e->hbr)[c];
                for (std::size_t i = 0; i < w; ++i) mean_out[c][i] += s[i];
            }
            for (double& v : mean_out[c]) v /= count;
            for (const Epoch* e : match) {
                const Series& s = (chrom == 0 ? e->hbo : e->hbr)[c];
                for (std::size_t i = 0; i < w; ++i) {
                    const double d = s[i] - mean_out[c][i];
                    std_out[c][i] += d * d;
                }
            }
            for (double& v : std_out[c]) v = std::sqrt(v / count);
        }
    }
    return out;
}

std::size_t peak_index(std::span<const double> curve, Chromophore chromophore)
{
    if (curve.empty()) throw DataError("time_to_peak: empty curve");
    std::size_t best = 0;
    if (chromophore == Chromophore::hbo) {
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (curve[i] > curve[best]) best = i;
    } else {
        double best_dev = 0.0;
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double dev = std::abs(curve[i] - curve[0]);
            if (dev > best_dev) {
                best_dev = dev;
                best = i;
            }
        }
    }
    return best;
}

double time_to_peak(std::span<const double> curve, double fs, Chromophore chromophore)
{
    return static_cast<double>(peak_index(curve, chromophore)) / fs;
}

Series roi_average(std::span<const Series> series, std::span<const std::string> channels,
    std::span<const std::string> roi)
{
    if (roi.empty()) throw DataError("roi_average: empty ROI");
    if (series.size() != channels.size()) throw DataError("roi_average: series and channel lists differ in length");
    Series out;
    for (const std::string& label : roi) {
        const auto it = std::find(channels.begin(), channels.end(), label);
        if (it == channels.end()) throw DataError("roi_average: unknown channel " + label);
        const Series& s = series[static_cast<std::size_t>(it - channels.begin())];
        if (out.empty()) out.assign(s.size(), 0.0);
        if (s.size() != out.size()) throw DataError("roi_average: series lengths differ");
        for (std::size_t i = 0; i < s.size(); ++i) out[i] += s[i];
    }
    for (double& v : out) v /= static_cast<double>(roi.size());
    return out;
}

std::vector<PeakTiming> participant_peak_timing(const EpochSet& epochs, const std::string& task,
    const std::string& roi_name, std::span<const std::string> roi, Chromophore chromophore)
{
    std::vector<std::string> order;
    std::map<std::string, Group> groups;
    for (const Epoch& e : epochs.epochs) {
        if (e.task != task) continue;
        if (groups.emplace(e.participant_id, e.group).second) order.push_back(e.participant_id);
    }
    if (order.empty()) throw DataError("time-to-peak: no epochs for task '" + task + "'");
    for (const std::string& label : roi)
        if (std::find(epochs.channels.begin(), epochs.channels.end(), label) == epochs.channels.end())
            throw DataError("time-to-peak: unknown ROI channel " + label);

    std::vector<PeakTiming> out(order.size());
    std::vector<std::exception_ptr> errors(order.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(order.size()); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            const auto& id = order[k];
            const BlockAverage avg = block_average(epochs, {task, std::nullopt, id});
            const Series curve = roi_average(avg.mean_of(chromophore), epochs.channels, roi);
            out[k] = {id, groups.at(id), roi_name, chromophore, time_to_peak(curve, epochs.sample_rate_hz, chromophore)};
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace nirscope
