#pragma once

#include "nirscope/model.hpp"
#include "nirscope/motion.hpp"
#include "nirscope/optics.hpp"
#include "nirscope/signal.hpp"

#include <vector>

namespace nirscope {

struct PreprocessConfig {
    BandpassSpec filter;
    MotionParams motion;
    bool short_channel = true;
    bool motion_correction = true;
    bool band_pass = true;
    ExtinctionTable table = ExtinctionTable::defaults();
};

// Raw intensities to dHbO/dHbR for every long channel:
// OD (reference = series mean) -> short-channel regression per wavelength ->
// MBLL -> spline then wavelet motion correction -> band-pass.
// Channels are processed in parallel; the result does not depend on the
// thread count.
HemoSeries preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessConfig& cfg);

std::vector<HemoSeries> preprocess_dataset(const Dataset& raw, const PreprocessConfig& cfg);

namespace reference {

// Serial channel loop; kept as the equivalence baseline for the OpenMP path.
HemoSeries preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessConfig& cfg);

} // namespace reference

} // namespace nirscope
