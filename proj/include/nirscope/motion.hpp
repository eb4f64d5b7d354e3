#pragma once

#include "nirscope/series.hpp"

#include <span>
#include <string>
#include <vector>

namespace nirscope {

enum class ArtifactTrigger { amplitude, moving_std };

struct ArtifactSegment {
    std::size_t start_sample = 0; // inclusive
    std::size_t end_sample = 0;   // exclusive
    std::string channel;
    ArtifactTrigger trigger = ArtifactTrigger::amplitude;

    bool operator==(const ArtifactSegment&) const = default;
};

struct MotionParams {
    double amp_sigma = 5.0;      // |x - median| threshold in series std
    double std_window_s = 1.0;   // moving-std window
    double std_sigma = 3.0;      // moving std threshold in multiples of its median
    double std_floor = 0.5;      // ... and never below this fraction of the series std
    double pad_s = 0.5;          // padding added on each side of a flagged run
    double baseline_s = 2.0;     // re-anchoring window
    double spline_p = 0.999;     // smoothing parameter, csaps convention on a unit grid
    double iqr_multiplier = 1.5; // wavelet outlier rule

    void validate() const;
};

std::vector<ArtifactSegment> detect_artifacts(std::span<const double> x, double fs,
    const MotionParams& params = {}, const std::string& channel = {});

// Cubic smoothing spline on a unit-spaced grid minimising
// sum (y - f)^2 + lambda * integral f''^2.
Series smoothing_spline(std::span<const double> y, double lambda);

Series spline_correct(std::span<const double> x, std::span<const ArtifactSegment> segments,
    double fs, const MotionParams& params = {});

// db4 periodized DWT outlier removal on the reflection-padded series. Per
// level, only coefficients whose support stays inside the original samples
// enter the quartiles and can be zeroed (levels with fewer than four such
// coefficients are left alone). Throws DataError for fewer than 16 samples.
Series wavelet_correct(std::span<const double> x, double iqr_multiplier = 1.5);

namespace wavelet {

// Orthonormal db4 scaling (low-pass reconstruction) filter, 8 taps.
std::span<const double> db4();

struct Decomposition {
    std::vector<Series> details; // details[0] is the finest level
    Series approximation;
};

// Periodized decomposition of a power-of-two length signal.
Decomposition decompose(std::span<const double> x, int levels);
Series reconstruct(const Decomposition& d);

int max_level(std::size_t n);

} // namespace wavelet

} // namespace nirscope
