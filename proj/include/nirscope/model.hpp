#pragma once

#include "nirscope/series.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nirscope {

enum class Group { patient, control };
enum class ChannelKind { long_range, short_range };
enum class Hemisphere { left, right };
enum class Chromophore { hbo, hbr };

std::string_view to_string(Group g);
std::string_view to_string(ChannelKind k);
std::string_view to_string(Hemisphere h);
std::string_view to_string(Chromophore c);

// Strict parsers; anything outside the fixed vocabulary throws DataError.
Group parse_group(std::string_view s);
ChannelKind parse_channel_kind(std::string_view s);
Hemisphere parse_hemisphere(std::string_view s);
Chromophore parse_chromophore(std::string_view s);

// Class label used by the classifiers.
inline int label_of(Group g) { return g == Group::patient ? 1 : 0; }

struct Channel {
    std::string source;
    std::string detector;
    double distance_m = 0.03;
    ChannelKind kind = ChannelKind::long_range;
    Hemisphere hemisphere = Hemisphere::left;

    std::string label() const { return source + "-" + detector; }

    bool operator==(const Channel&) const = default;
};

struct Montage {
    std::vector<std::string> sources;
    std::vector<std::string> detectors;
    std::vector<Channel> channels;
    std::map<std::string, std::vector<std::string>> roi_map;

    // Throws DataError naming the violated invariant.
    void validate() const;

    std::optional<std::size_t> find(std::string_view label) const;
    std::size_t index_of(std::string_view label) const; // throws DataError
    std::vector<std::size_t> long_channels() const;
    std::vector<std::size_t> short_channels() const;
    std::vector<std::string> long_channel_labels() const;

    // Sixteen-optode motor montage: S1-S8, D1-D8, 20 long channels at 3 cm
    // (10 per hemisphere), one 8 mm short channel per source (S<k>-SD<k>).
    // ROIs: "left" (S1-S4), "right" (S5-S8), "supramarginal" (S7-D6, S7-D7).
    static Montage default_montage();

    bool operator==(const Montage&) const = default;
};

struct Annotation {
    double onset_s = 0.0;
    double duration_s = 0.0;
    std::string label;

    bool operator==(const Annotation&) const = default;
};

inline bool is_task_label(std::string_view label) { return label != "rest"; }

struct Recording {
    std::string participant_id;
    Group group = Group::control;
    double sample_rate_hz = 3.9;
    std::array<double, 2> wavelengths_nm{760.0, 850.0};
    // intensity[w][c]: wavelength w, channel c in montage order.
    std::array<std::vector<Series>, 2> intensity;
    std::vector<Annotation> annotations;

    std::size_t samples() const;
    double duration_s() const { return static_cast<double>(samples()) / sample_rate_hz; }

    void validate(const Montage& montage) const;

    bool operator==(const Recording&) const = default;
};

struct ProvenanceStep {
    std::string step;
    std::string parameters;

    bool operator==(const ProvenanceStep&) const = default;
};

// Ordered log of applied processing steps. Append-only.
class Provenance {
public:
    void append(std::string step, std::string parameters)
    {
        steps_.push_back({std::move(step), std::move(parameters)});
    }
    const std::vector<ProvenanceStep>& steps() const { return steps_; }

    bool operator==(const Provenance&) const = default;

private:
    std::vector<ProvenanceStep> steps_;
};

struct HemoSeries {
    std::string participant_id;
    Group group = Group::control;
    double sample_rate_hz = 3.9;
    std::vector<std::string> channels; // long channel labels
    std::vector<Series> hbo;            // mol/L change
    std::vector<Series> hbr;
    std::vector<Annotation> annotations;
    Provenance provenance;

    std::size_t samples() const { return hbo.empty() ? 0 : hbo.front().size(); }
    const std::vector<Series>& of(Chromophore c) const { return c == Chromophore::hbo ? hbo : hbr; }

    void validate() const;

    bool operator==(const HemoSeries&) const = default;
};

struct Epoch {
    std::string participant_id;
    Group group = Group::control;
    std::string task;
    int trial = 0;
    std::vector<Series> hbo; // per channel, window_samples each
    std::vector<Series> hbr;

    const std::vector<Series>& of(Chromophore c) const { return c == Chromophore::hbo ? hbo : hbr; }
};

struct EpochSet {
    std::vector<std::string> channels;
    double sample_rate_hz = 3.9;
    std::size_t window_samples = 0;
    std::vector<Epoch> epochs;

    void validate() const;
};

enum class DatasetKind { raw, hemo };

struct Manifest {
    int schema_version = 1;
    std::string creator = "nirscope";
    std::uint64_t seed = 0;

    bool operator==(const Manifest&) const = default;
};

struct Dataset {
    Manifest manifest;
    DatasetKind kind = DatasetKind::raw;
    double sample_rate_hz = 3.9;
    std::array<double, 2> wavelengths_nm{760.0, 850.0};
    Montage montage;
    std::vector<Recording> recordings; // kind == raw
    std::vector<HemoSeries> hemo;      // kind == hemo

    std::size_t participant_count() const
    {
        return kind == DatasetKind::raw ? recordings.size() : hemo.size();
    }

    void validate() const;

    bool operator==(const Dataset&) const = default;
};

inline constexpr int kSchemaVersion = 1;

} // namespace nirscope
