#pragma once

#include "nirscope/model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nirscope {

struct SegmentOptions {
    double window_s = 20.0;
    double baseline_s = 2.0;
};

std::size_t window_samples_for(double window_s, double fs);

// One epoch per task annotation ("rest" excluded), baseline-corrected by the
// mean of the pre-onset baseline window.
EpochSet segment(const HemoSeries& hemo, const SegmentOptions& options = {});

// Segments every participant and concatenates; channels must agree.
EpochSet segment_all(std::span<const HemoSeries> hemo, const SegmentOptions& options = {});

struct BlockAverage {
    std::string task;
    std::vector<Series> hbo_mean, hbo_std;
    std::vector<Series> hbr_mean, hbr_std;
    std::size_t n_trials = 0;

    const std::vector<Series>& mean_of(Chromophore c) const { return c == Chromophore::hbo ? hbo_mean : hbr_mean; }
    const std::vector<Series>& std_of(Chromophore c) const { return c == Chromophore::hbo ? hbo_std : hbr_std; }
};

struct EpochFilter {
    std::string task;
    std::optional<Group> group;
    std::optional<std::string> participant_id;
};

// Pointwise mean and population std over matching trials.
BlockAverage block_average(const EpochSet& epochs, const EpochFilter& filter);

// Index of the maximum (hbo) or of the largest |x - x[0]| (hbr), earliest on
// ties, divided by fs.
double time_to_peak(std::span<const double> curve, double fs, Chromophore chromophore);
std::size_t peak_index(std::span<const double> curve, Chromophore chromophore);

// Pointwise mean of the listed channels; throws DataError for unknown labels.
Series roi_average(std::span<const Series> series, std::span<const std::string> channels,
    std::span<const std::string> roi);

struct PeakTiming {
    std::string participant_id;
    Group group = Group::control;
    std::string roi;
    Chromophore chromophore = Chromophore::hbo;
    double time_to_peak_s = 0.0;
};

// Per participant: block average over that participant's trials of `task`,
// ROI average, time to peak.
std::vector<PeakTiming> participant_peak_timing(const EpochSet& epochs, const std::string& task,
    const std::string& roi_name, std::span<const std::string> roi, Chromophore chromophore);

} // namespace nirscope
