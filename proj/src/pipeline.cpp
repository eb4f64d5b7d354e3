#include "nirscope/pipeline.hpp"

#include "nirscope/dataset_io.hpp"
#include "nirscope/error.hpp"

#include <algorithm>
#include <exception>
#include <optional>
#include <array>
#include <map>

namespace nirscope {

namespace {

bool is_constant(const Series& s)
{
    return std::all_of(s.begin(), s.end(), [&](double v) { return v == s.front(); });
}

struct ChannelOutput {
    Series hbo;
    Series hbr;
    std::size_t segments = 0;
};

class ChannelProcessor {
public:
    ChannelProcessor(const Recording& rec, const Montage& montage, const PreprocessConfig& cfg)
        : rec_(rec), montage_(montage), cfg_(cfg),
          filter_(cfg.band_pass ? std::optional<ButterworthBandpass>(std::in_place, cfg.filter, rec.sample_rate_hz)
                                : std::nullopt)
    {
        rec.validate(montage);
        cfg.motion.validate();
        if (cfg.short_channel) {
            for (std::size_t s : montage.short_channels())
                short_od_[s] = {intensity_to_od(rec.intensity[0][s]), intensity_to_od(rec.intensity[1][s])};
            if (short_od_.empty()) throw DataError("short-channel regression requested but the montage has no short channels");
        }
    }

    ChannelOutput operator()(std::size_t channel) const
    {
        const Channel& ch = montage_.channels[channel];
        Series od1 = intensity_to_od(rec_.intensity[0][channel]);
        Series od2 = intensity_to_od(rec_.intensity[1][channel]);
        if (cfg_.short_channel) {
            const auto& shorts = short_od_.at(match_short_channel(montage_, channel));
            // A flat short channel carries no superficial signal to remove.
            if (!is_constant(shorts[0])) od1 = short_channel_regress(od1, shorts[0]);
            if (!is_constant(shorts[1])) od2 = short_channel_regress(od2, shorts[1]);
        }
        Concentrations c = mbll_invert(od1, od2, {rec_.wavelengths_nm[0], rec_.wavelengths_nm[1]}, ch.distance_m, cfg_.table);

        ChannelOutput out;
        for (Series* s : {&c.hbo, &c.hbr}) {
            if (cfg_.motion_correction) {
                const auto segments = detect_artifacts(*s, rec_.sample_rate_hz, cfg_.motion, ch.label());
                out.segments += segments.size();
                *s = spline_correct(*s, segments, rec_.sample_rate_hz, cfg_.motion);
                *s = wavelet_correct(*s, cfg_.motion.iqr_multiplier);
            }
            if (filter_) *s = filter_->apply(*s);
        }
        out.hbo = std::move(c.hbo);
        out.hbr = std::move(c.hbr);
        return out;
    }

    HemoSeries assemble(const std::vector<std::size_t>& longs, std::vector<ChannelOutput>& outputs) const
    {
        HemoSeries h;
        h.participant_id = rec_.participant_id;
        h.group = rec_.group;
        h.sample_rate_hz = rec_.sample_rate_hz;
        h.annotations = rec_.annotations;
        std::size_t segments = 0;
        for (std::size_t i = 0; i < longs.size(); ++i) {
            h.channels.push_back(montage_.channels[longs[i]].label());
            h.hbo.push_back(std::move(outputs[i].hbo));
            h.hbr.push_back(std::move(outputs[i].hbr));
            segments += outputs[i].segments;
        }

        const auto& e1 = cfg_.table.at(rec_.wavelengths_nm[0]);
        const auto& e2 = cfg_.table.at(rec_.wavelengths_nm[1]);
        h.provenance.append("intensity_to_od", "reference=series_mean");
        if (cfg_.short_channel) h.provenance.append("short_channel_regression", "domain=od per_wavelength=1 pairing=shared_source");
        h.provenance.append("mbll", "wavelengths_nm=" + format_double(rec_.wavelengths_nm[0]) + "," +
                                        format_double(rec_.wavelengths_nm[1]) + " dpf=" + format_double(e1.dpf) + "," +
                                        format_double(e2.dpf) + " units=mol/L");
        if (cfg_.motion_correction) {
            const auto& m = cfg_.motion;
            h.provenance.append("motion_spline", "amp_sigma=" + format_double(m.amp_sigma) + " std_window_s=" +
                                                    format_double(m.std_window_s) + " std_sigma=" + format_double(m.std_sigma) +
                                                    " std_floor=" + format_double(m.std_floor) +
                                                    " pad_s=" + format_double(m.pad_s) + " spline_p=" + format_double(m.spline_p) +
                                                    " segments=" + std::to_string(segments));
            h.provenance.append("motion_wavelet", "family=db4 iqr_multiplier=" + format_double(m.iqr_multiplier));
        }
        if (cfg_.band_pass) {
            const auto& f = cfg_.filter;
            h.provenance.append("bandpass", "butterworth low_hz=" + format_double(f.low_cut_hz) + " high_hz=" +
                                                format_double(f.high_cut_hz) + " order=" + std::to_string(f.order) +
                                                " zero_phase=" + (f.zero_phase ? "1" : "0"));
        }
        h.validate();
        return h;
    }

private:
    const Recording& rec_;
    const Montage& montage_;
    const PreprocessConfig& cfg_;
    std::optional<ButterworthBandpass> filter_;
    std::map<std::size_t, std::array<Series, 2>> short_od_;
};

} // namespace

HemoSeries preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessConfig& cfg)
{
    const ChannelProcessor process(rec, montage, cfg);
    const auto longs = montage.long_channels();
    std::vector<ChannelOutput> outputs(longs.size());
    std::vector<std::exception_ptr> errors(longs.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(longs.size()); ++i) {
        try {
            outputs[i] = process(longs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return process.assemble(longs, outputs);
}

std::vector<HemoSeries> preprocess_dataset(const Dataset& raw, const PreprocessConfig& cfg)
{
    if (raw.kind != DatasetKind::raw) throw DataError("preprocess: dataset already holds hemoglobin series");
    std::vector<HemoSeries> out;
    out.reserve(raw.recordings.size());
    for (const auto& r : raw.recordings) out.push_back(preprocess_recording(r, raw.montage, cfg));
    return out;
}

namespace reference {

HemoSeries preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessConfig& cfg)
{
    const ChannelProcessor process(rec, montage, cfg);
    const auto longs = montage.long_channels();
    std::vector<ChannelOutput> outputs;
    for (std::size_t c : longs) outputs.push_back(process(c));
    return process.assemble(longs, outputs);
}

} // namespace reference

} // namespace nirscope
