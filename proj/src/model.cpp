#include "nirscope/model.hpp"

#include "nirscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

namespace nirscope {

namespace {

constexpr double kTimeTolerance = 1e-9;

void require(bool ok, const std::string& message)
{
    if (!ok) throw DataError(message);
}

} // namespace

std::string_view to_string(Group g) { return g == Group::patient ? "patient" : "control"; }
std::string_view to_string(ChannelKind k) { return k == ChannelKind::long_range ? "long" : "short"; }
std::string_view to_string(Hemisphere h) { return h == Hemisphere::left ? "left" : "right"; }
std::string_view to_string(Chromophore c) { return c == Chromophore::hbo ? "hbo" : "hbr"; }

Group parse_group(std::string_view s)
{
    if (s == "patient") return Group::patient;
    if (s == "control") return Group::control;
    throw DataError("unknown group '" + std::string(s) + "' (expected patient or control)");
}

ChannelKind parse_channel_kind(std::string_view s)
{
    if (s == "long") return ChannelKind::long_range;
    if (s == "short") return ChannelKind::short_range;
    throw DataError("unknown channel kind '" + std::string(s) + "'");
}

Hemisphere parse_hemisphere(std::string_view s)
{
    if (s == "left") return Hemisphere::left;
    if (s == "right") return Hemisphere::right;
    throw DataError("unknown hemisphere '" + std::string(s) + "'");
}

Chromophore parse_chromophore(std::string_view s)
{
    if (s == "hbo") return Chromophore::hbo;
    if (s == "hbr") return Chromophore::hbr;
    throw DataError("unknown chromophore '" + std::string(s) + "'");
}

void Montage::validate() const
{
    const std::set<std::string> src(sources.begin(), sources.end());
    const std::set<std::string> det(detectors.begin(), detectors.end());
    require(src.size() == sources.size(), "montage: duplicate source id");
    require(det.size() == detectors.size(), "montage: duplicate detector id");

    std::set<std::string> labels;
    double min_long = std::numeric_limits<double>::infinity();
    double max_short = 0.0;
    for (const auto& ch : channels) {
        require(src.count(ch.source) == 1, "montage: channel " + ch.label() + " references undeclared source");
        require(det.count(ch.detector) == 1, "montage: channel " + ch.label() + " references undeclared detector");
        require(labels.insert(ch.label()).second, "montage: duplicate channel " + ch.label());
        require(std::isfinite(ch.distance_m) && ch.distance_m > 0.0,
            "montage: channel " + ch.label() + " has non-positive distance");
        if (ch.kind == ChannelKind::long_range)
            min_long = std::min(min_long, ch.distance_m);
        else
            max_short = std::max(max_short, ch.distance_m);
    }
    require(min_long > max_short, "montage: long-channel distance must exceed every short-channel distance");

    for (const auto& [name, members] : roi_map) {
        std::set<std::string> seen;
        for (const auto& m : members) {
            require(labels.count(m) == 1, "montage: ROI '" + name + "' references unknown channel " + m);
            require(seen.insert(m).second, "montage: channel " + m + " listed twice in ROI '" + name + "'");
        }
    }
}

std::optional<std::size_t> Montage::find(std::string_view label) const
{
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].label() == label) return i;
    return std::nullopt;
}

std::size_t Montage::index_of(std::string_view label) const
{
    if (auto i = find(label)) return *i;
    throw DataError("unknown channel " + std::string(label));
}

std::vector<std::size_t> Montage::long_channels() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].kind == ChannelKind::long_range) out.push_back(i);
    return out;
}

std::vector<std::size_t> Montage::short_channels() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].kind == ChannelKind::short_range) out.push_back(i);
    return out;
}

std::vector<std::string> Montage::long_channel_labels() const
{
    std::vector<std::string> out;
    for (std::size_t i : long_channels()) out.push_back(channels[i].label());
    return out;
}

Montage Montage::default_montage()
{
    Montage m;
    for (int i = 1; i <= 8; ++i) m.sources.push_back("S" + std::to_string(i));
    for (int i = 1; i <= 8; ++i) m.detectors.push_back("D" + std::to_string(i));
    for (int i = 1; i <= 8; ++i) m.detectors.push_back("SD" + std::to_string(i));

    // Mirror-symmetric 10-channel patch per hemisphere; the right one is the
    // left one with every optode index shifted by four.
    static constexpr int kPatch[10][2] = {
        {1, 1}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}, {4, 4}, {2, 2}, {3, 3}};
    for (int side = 0; side < 2; ++side) {
        const int shift = side * 4;
        const Hemisphere h = side == 0 ? Hemisphere::left : Hemisphere::right;
        std::vector<std::string> roi;
        for (const auto& pd : kPatch) {
            Channel ch{"S" + std::to_string(pd[0] + shift), "D" + std::to_string(pd[1] + shift), 0.03,
                ChannelKind::long_range, h};
            roi.push_back(ch.label());
            m.channels.push_back(std::move(ch));
        }
        m.roi_map[side == 0 ? "left" : "right"] = std::move(roi);
    }
    for (int i = 1; i <= 8; ++i) {
        m.channels.push_back({"S" + std::to_string(i), "SD" + std::to_string(i), 0.008, ChannelKind::short_range,
            i <= 4 ? Hemisphere::left : Hemisphere::right});
    }
    m.roi_map["supramarginal"] = {"S7-D6", "S7-D7"};
    return m;
}

namespace {

void validate_annotations(const std::vector<Annotation>& annotations, double duration_s, const std::string& who)
{
    std::vector<Annotation> sorted = annotations;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& a = sorted[i];
        require(std::isfinite(a.onset_s) && a.onset_s >= 0.0, who + ": annotation with negative onset");
        require(std::isfinite(a.duration_s) && a.duration_s > 0.0, who + ": annotation with non-positive duration");
        require(!a.label.empty(), who + ": annotation without label");
        require(a.onset_s + a.duration_s <= duration_s + kTimeTolerance,
            who + ": annotation at " + std::to_string(a.onset_s) + " s extends past the recording end");
        if (i + 1 < sorted.size())
            require(a.onset_s + a.duration_s <= sorted[i + 1].onset_s + kTimeTolerance,
                who + ": overlapping annotations at " + std::to_string(a.onset_s) + " s");
    }
}

} // namespace

std::size_t Recording::samples() const
{
    return intensity[0].empty() ? 0 : intensity[0].front().size();
}

void Recording::validate(const Montage& montage) const
{
    const std::string who = "participant " + participant_id;
    require(!participant_id.empty(), "recording without participant id");
    require(std::isfinite(sample_rate_hz) && sample_rate_hz > 0.0, who + ": sample rate must be positive");
    require(wavelengths_nm[0] > 0.0 && wavelengths_nm[1] > 0.0 && wavelengths_nm[0] != wavelengths_nm[1],
        who + ": wavelengths must be two distinct positive values");
    const std::size_t n = samples();
    for (int w = 0; w < 2; ++w) {
        require(intensity[w].size() == montage.channels.size(), who + ": channel count does not match the montage");
        for (std::size_t c = 0; c < intensity[w].size(); ++c) {
            const auto& s = intensity[w][c];
            require(s.size() == n, who + ": channel " + montage.channels[c].label() + " length mismatch");
            for (double v : s)
                require(std::isfinite(v) && v > 0.0,
                    who + ": non-positive intensity in channel " + montage.channels[c].label());
        }
    }
    validate_annotations(annotations, duration_s(), who);
}

void HemoSeries::validate() const
{
    const std::string who = "participant " + participant_id;
    require(!participant_id.empty(), "hemo series without participant id");
    require(std::isfinite(sample_rate_hz) && sample_rate_hz > 0.0, who + ": sample rate must be positive");
    require(hbo.size() == channels.size() && hbr.size() == channels.size(),
        who + ": hbo/hbr must cover the channel list");
    const std::size_t n = samples();
    for (std::size_t c = 0; c < channels.size(); ++c) {
        require(hbo[c].size() == n && hbr[c].size() == n, who + ": channel " + channels[c] + " length mismatch");
        for (std::size_t t = 0; t < n; ++t)
            require(std::isfinite(hbo[c][t]) && std::isfinite(hbr[c][t]),
                who + ": non-finite concentration in channel " + channels[c]);
    }
    validate_annotations(annotations, static_cast<double>(n) / sample_rate_hz, who);
}

void EpochSet::validate() const
{
    std::set<std::tuple<std::string, std::string, int>> trials;
    for (const auto& e : epochs) {
        require(e.hbo.size() == channels.size() && e.hbr.size() == channels.size(),
            "epoch set: channel count mismatch for " + e.participant_id);
        for (std::size_t c = 0; c < channels.size(); ++c)
            require(e.hbo[c].size() == window_samples && e.hbr[c].size() == window_samples,
                "epoch set: window length mismatch for " + e.participant_id);
        require(trials.insert({e.participant_id, e.task, e.trial}).second,
            "epoch set: duplicate trial index for " + e.participant_id + "/" + e.task);
    }
}

void Dataset::validate() const
{
    require(manifest.schema_version == kSchemaVersion, "dataset: unsupported schema version");
    require(std::isfinite(sample_rate_hz) && sample_rate_hz > 0.0, "dataset: sample rate must be positive");
    montage.validate();
    std::set<std::string> ids;
    if (kind == DatasetKind::raw) {
        require(hemo.empty(), "dataset: raw dataset carries hemo series");
        for (const auto& r : recordings) {
            require(ids.insert(r.participant_id).second, "dataset: duplicate participant id " + r.participant_id);
            require(r.sample_rate_hz == sample_rate_hz, "dataset: sample rate of " + r.participant_id + " differs");
            require(r.wavelengths_nm == wavelengths_nm, "dataset: wavelengths of " + r.participant_id + " differ");
            r.validate(montage);
        }
    } else {
        require(recordings.empty(), "dataset: hemo dataset carries raw recordings");
        const auto labels = montage.long_channel_labels();
        for (const auto& h : hemo) {
            require(ids.insert(h.participant_id).second, "dataset: duplicate participant id " + h.participant_id);
            require(h.sample_rate_hz == sample_rate_hz, "dataset: sample rate of " + h.participant_id + " differs");
            require(h.channels == labels, "dataset: channels of " + h.participant_id + " differ from the montage");
            h.validate();
        }
    }
}

} // namespace nirscope
