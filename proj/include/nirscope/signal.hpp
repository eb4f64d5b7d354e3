#pragma once

#include "nirscope/model.hpp"
#include "nirscope/series.hpp"

#include <complex>
#include <span>
#include <vector>

namespace nirscope {

struct BandpassSpec {
    double low_cut_hz = 0.05;
    double high_cut_hz = 0.7;
    int order = 4; // total band-pass order, even
    bool zero_phase = true;

    // 0 < low < high < fs/2, order even and positive; throws ConfigError.
    void validate(double fs) const;
};

// One second-order section, a0 normalised to 1.
struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Digital Butterworth band-pass designed through the bilinear transform
// with pre-warped edges.
class ButterworthBandpass {
public:
    ButterworthBandpass(const BandpassSpec& spec, double fs);

    const std::vector<Biquad>& sections() const { return sections_; }

    // Single-pass complex response at f_hz.
    std::complex<double> response(double f_hz) const;

    // Samples until the slowest pole has decayed to 1e-3.
    std::size_t settling_samples() const { return settling_; }

    // Filters with reflection padding; forward-backward when zero_phase.
    Series apply(std::span<const double> x) const;

private:
    BandpassSpec spec_;
    double fs_;
    std::vector<Biquad> sections_;
    std::size_t settling_ = 0;
};

// Throws ConfigError for bad specs, DataError when the series is shorter
// than three times the filter order.
Series bandpass(std::span<const double> x, const BandpassSpec& spec, double fs);

// long - beta * (short - mean(short)), beta the least-squares coefficient on
// the demeaned series. Throws DataError("uninformative short channel") for a
// zero-variance short series.
Series short_channel_regress(std::span<const double> long_series, std::span<const double> short_series);

// Regression coefficient used above (0 when the short series is constant).
double short_channel_beta(std::span<const double> long_series, std::span<const double> short_series);

// Short channel sharing the long channel's source (smallest detector id on
// ties), else the first short channel in montage order. Returns a montage
// channel index; throws DataError when the montage has no short channels.
std::size_t match_short_channel(const Montage& montage, std::size_t long_channel);

} // namespace nirscope
