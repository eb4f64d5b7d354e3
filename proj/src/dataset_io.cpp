#include "nirscope/dataset_io.hpp"

#include "nirscope/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nirscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v)
{
    char buf[40];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw DataError("cannot format number");
    return std::string(buf, ptr);
}

double parse_double(std::string_view field)
{
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || begin == end)
        throw DataError("invalid number '" + std::string(field) + "'");
    return v;
}

namespace {

std::string wavelength_tag(double nm)
{
    if (nm == std::floor(nm) && nm < 1e9) return std::to_string(static_cast<long long>(nm)) + "nm";
    return format_double(nm) + "nm";
}

std::vector<std::string> participant_files(const std::string& id, DatasetKind kind, const std::array<double, 2>& wl)
{
    if (kind == DatasetKind::raw) return {id + "_" + wavelength_tag(wl[0]) + ".csv", id + "_" + wavelength_tag(wl[1]) + ".csv"};
    return {id + "_hbo.csv", id + "_hbr.csv"};
}

void write_csv(const fs::path& path, const std::vector<std::string>& labels, const std::vector<Series>& columns,
    double fs_hz)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << "t_s";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    std::string line;
    for (std::size_t t = 0; t < n; ++t) {
        line = format_double(static_cast<double>(t) / fs_hz);
        for (const auto& col : columns) {
            line += ',';
            line += format_double(col[t]);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw DataError("I/O failure writing " + path.string());
}

enum class CellRule { positive, finite };

std::vector<Series> read_csv(const fs::path& path, const std::vector<std::string>& labels, CellRule rule)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing participant file " + path.string());
    const std::string where = path.filename().string();

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError(where + ":1: missing header");
    ++line_no;
    std::string expected = "t_s";
    for (const auto& l : labels) expected += "," + l;
    if (line != expected) throw DataError(where + ":1: header does not match the montage (expected '" + expected + "')");

    std::vector<Series> columns(labels.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string ctx = where + ":" + std::to_string(line_no) + ": ";
        std::size_t field = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view cell(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
            if (field > labels.size())
                throw DataError(ctx + "channel-length mismatch: more than " + std::to_string(labels.size() + 1) + " fields");
            double v = 0.0;
            try {
                v = parse_double(cell);
            } catch (const DataError& e) {
                throw DataError(ctx + e.what());
            }
            if (field > 0) {
                if (rule == CellRule::positive && !(v > 0.0 && std::isfinite(v)))
                    throw DataError(ctx + "non-positive intensity in channel " + labels[field - 1]);
                if (rule == CellRule::finite && !std::isfinite(v))
                    throw DataError(ctx + "non-finite value in channel " + labels[field - 1]);
                columns[field - 1].push_back(v);
            }
            ++field;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (field != labels.size() + 1)
            throw DataError(ctx + "channel-length mismatch: expected " + std::to_string(labels.size() + 1) +
                            " fields, got " + std::to_string(field));
    }
    return columns;
}

json annotations_json(const std::vector<Annotation>& annotations)
{
    json rows = json::array();
    for (const auto& a : annotations) rows.push_back(json::array({a.onset_s, a.duration_s, a.label}));
    return rows;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& ctx)
{
    if (!j.contains(key)) throw DataError(ctx + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(ctx + ": bad '" + key + "': " + e.what());
    }
}

} // namespace

void save_dataset(const Dataset& d, const fs::path& dir)
{
    d.validate();

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    json m;
    m["schema_version"] = d.manifest.schema_version;
    m["creator"] = d.manifest.creator;
    m["seed"] = d.manifest.seed;
    m["kind"] = d.kind == DatasetKind::raw ? "raw" : "hemo";
    m["sample_rate_hz"] = d.sample_rate_hz;
    m["wavelengths_nm"] = d.wavelengths_nm;

    json montage;
    montage["sources"] = d.montage.sources;
    montage["detectors"] = d.montage.detectors;
    json channels = json::array();
    for (const auto& c : d.montage.channels)
        channels.push_back(json::array({c.source, c.detector, c.distance_m, to_string(c.kind), to_string(c.hemisphere)}));
    montage["channels"] = channels;
    montage["roi_map"] = d.montage.roi_map;
    m["montage"] = montage;

    json participants = json::array();
    std::vector<std::string> all_labels;
    for (const auto& c : d.montage.channels) all_labels.push_back(c.label());
    const auto long_labels = d.montage.long_channel_labels();

    auto add_participant = [&](const std::string& id, Group g, const std::vector<Annotation>& ann, const Provenance* prov) {
        json p;
        p["id"] = id;
        p["group"] = to_string(g);
        p["files"] = participant_files(id, d.kind, d.wavelengths_nm);
        p["annotations"] = annotations_json(ann);
        if (prov) {
            json steps = json::array();
            for (const auto& s : prov->steps()) steps.push_back(json::array({s.step, s.parameters}));
            p["provenance"] = steps;
        }
        participants.push_back(p);
    };

    if (d.kind == DatasetKind::raw) {
        for (const auto& r : d.recordings) {
            add_participant(r.participant_id, r.group, r.annotations, nullptr);
            const auto files = participant_files(r.participant_id, d.kind, d.wavelengths_nm);
            for (int w = 0; w < 2; ++w) write_csv(dir / files[w], all_labels, r.intensity[w], d.sample_rate_hz);
        }
    } else {
        for (const auto& h : d.hemo) {
            add_participant(h.participant_id, h.group, h.annotations, &h.provenance);
            const auto files = participant_files(h.participant_id, d.kind, d.wavelengths_nm);
            write_csv(dir / files[0], long_labels, h.hbo, d.sample_rate_hz);
            write_csv(dir / files[1], long_labels, h.hbr, d.sample_rate_hz);
        }
    }
    m["participants"] = participants;

    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / kManifestName).string());
    out << m.dump(2) << '\n';
    if (!out) throw DataError("I/O failure writing manifest");
}

Dataset load_dataset(const fs::path& dir)
{
    const fs::path manifest_path = dir / kManifestName;
    const std::string mctx(kManifestName);
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("missing manifest: " + manifest_path.string());

    json m;
    try {
        m = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(mctx + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }

    Dataset d;
    const int version = get_field<int>(m, "schema_version", mctx);
    if (version != kSchemaVersion)
        throw DataError(mctx + ": schema_version " + std::to_string(version) + " not supported (expected " +
                        std::to_string(kSchemaVersion) + ")");
    d.manifest.schema_version = version;
    d.manifest.creator = get_field<std::string>(m, "creator", mctx);
    d.manifest.seed = get_field<std::uint64_t>(m, "seed", mctx);
    const auto kind = get_field<std::string>(m, "kind", mctx);
    if (kind == "raw")
        d.kind = DatasetKind::raw;
    else if (kind == "hemo")
        d.kind = DatasetKind::hemo;
    else
        throw DataError(mctx + ": unknown kind '" + kind + "'");
    d.sample_rate_hz = get_field<double>(m, "sample_rate_hz", mctx);
    d.wavelengths_nm = get_field<std::array<double, 2>>(m, "wavelengths_nm", mctx);

    const json montage = get_field<json>(m, "montage", mctx);
    d.montage.sources = get_field<std::vector<std::string>>(montage, "sources", mctx + ": montage");
    d.montage.detectors = get_field<std::vector<std::string>>(montage, "detectors", mctx + ": montage");
    const json channels = get_field<json>(montage, "channels", mctx + ": montage");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto& row = channels[i];
        const std::string ctx = mctx + ": montage channel row " + std::to_string(i);
        if (!row.is_array() || row.size() != 5) throw DataError(ctx + ": expected [source, detector, distance_m, kind, hemisphere]");
        try {
            d.montage.channels.push_back({row[0].get<std::string>(), row[1].get<std::string>(), row[2].get<double>(),
                parse_channel_kind(row[3].get<std::string>()), parse_hemisphere(row[4].get<std::string>())});
        } catch (const json::exception& e) {
            throw DataError(ctx + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(ctx + ": " + e.what());
        }
    }
    if (montage.contains("roi_map"))
        d.montage.roi_map = get_field<std::map<std::string, std::vector<std::string>>>(montage, "roi_map", mctx + ": montage");

    std::vector<std::string> all_labels;
    for (const auto& c : d.montage.channels) all_labels.push_back(c.label());
    const auto long_labels = d.montage.long_channel_labels();

    const json participants = get_field<json>(m, "participants", mctx);
    for (std::size_t i = 0; i < participants.size(); ++i) {
        const auto& p = participants[i];
        const std::string ctx = mctx + ": participants[" + std::to_string(i) + "]";
        const auto id = get_field<std::string>(p, "id", ctx);
        Group group;
        try {
            group = parse_group(get_field<std::string>(p, "group", ctx));
        } catch (const DataError& e) {
            throw DataError(ctx + ": " + e.what());
        }
        const auto files = get_field<std::vector<std::string>>(p, "files", ctx);
        if (files.size() != 2) throw DataError(ctx + ": expected two file references");
        std::vector<Annotation> annotations;
        for (const auto& row : get_field<json>(p, "annotations", ctx)) {
            if (!row.is_array() || row.size() != 3) throw DataError(ctx + ": annotation rows are [onset_s, duration_s, label]");
            try {
                annotations.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<std::string>()});
            } catch (const json::exception& e) {
                throw DataError(ctx + ": " + e.what());
            }
        }
        for (const auto& f : files)
            if (!fs::exists(dir / f)) throw DataError(ctx + ": missing participant file " + (dir / f).string());

        if (d.kind == DatasetKind::raw) {
            Recording r;
            r.participant_id = id;
            r.group = group;
            r.sample_rate_hz = d.sample_rate_hz;
            r.wavelengths_nm = d.wavelengths_nm;
            r.annotations = std::move(annotations);
            for (int w = 0; w < 2; ++w) r.intensity[w] = read_csv(dir / files[w], all_labels, CellRule::positive);
            if (!all_labels.empty() && r.intensity[0].front().size() != r.intensity[1].front().size())
                throw DataError(ctx + ": channel-length mismatch between " + files[0] + " (" +
                                std::to_string(r.intensity[0].front().size()) + " rows) and " + files[1] + " (" +
                                std::to_string(r.intensity[1].front().size()) + " rows)");
            d.recordings.push_back(std::move(r));
        } else {
            HemoSeries h;
            h.participant_id = id;
            h.group = group;
            h.sample_rate_hz = d.sample_rate_hz;
            h.channels = long_labels;
            h.annotations = std::move(annotations);
            h.hbo = read_csv(dir / files[0], long_labels, CellRule::finite);
            h.hbr = read_csv(dir / files[1], long_labels, CellRule::finite);
            if (!long_labels.empty() && h.hbo.front().size() != h.hbr.front().size())
                throw DataError(ctx + ": channel-length mismatch between " + files[0] + " and " + files[1]);
            if (p.contains("provenance"))
                for (const auto& s : p.at("provenance")) h.provenance.append(s.at(0).get<std::string>(), s.at(1).get<std::string>());
            d.hemo.push_back(std::move(h));
        }
    }

    d.validate();
    return d;
}

} // namespace nirscope
