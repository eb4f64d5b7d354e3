#include "helpers.hpp"

#include "nirscope/dataset_io.hpp"
#include "nirscope/error.hpp"
#include "nirscope/model.hpp"
#include "nirscope/synth.hpp"

#include <doctest.h>

#include <limits>

using namespace nirscope;
using testutil::TempDir;

namespace {

Dataset small_dataset(int patients = 2, int controls = 2, std::uint64_t seed = 3)
{
    SynthConfig c;
    c.n_patients = patients;
    c.n_controls = controls;
    c.seed = seed;
    return generate_dataset(c).dataset;
}

Dataset tiny_hemo()
{
    Dataset d;
    d.kind = DatasetKind::hemo;
    d.montage = Montage::default_montage();
    HemoSeries h;
    h.participant_id = "C01";
    h.channels = d.montage.long_channel_labels();
    for (std::size_t c = 0; c < h.channels.size(); ++c) {
        h.hbo.push_back(testutil::gaussian(40, c, 1e-6));
        h.hbr.push_back(testutil::gaussian(40, 100 + c, 1e-7));
    }
    h.annotations = {{1.0, 3.0, "single"}};
    h.provenance.append("mbll", "units=mol/L");
    h.provenance.append("bandpass", "low_hz=0.05");
    d.hemo.push_back(h);
    return d;
}

} // namespace

TEST_CASE("default montage: sixteen optodes, twenty long channels, ROIs")
{
    const Montage m = Montage::default_montage();
    CHECK_NOTHROW(m.validate());
    CHECK(m.sources.size() == 8);
    CHECK(m.detectors.size() >= 8);
    CHECK(m.long_channels().size() == 20);
    CHECK(m.short_channels().size() == 8);
    for (std::size_t c : m.long_channels()) CHECK(m.channels[c].distance_m == doctest::Approx(0.03));
    CHECK(m.find("S7-D6").has_value());
    CHECK(m.roi_map.at("supramarginal") == std::vector<std::string>{"S7-D6", "S7-D7"});
    CHECK_THROWS_AS(m.index_of("S9-D9"), DataError);
}

TEST_CASE("montage validation rejects each invariant violation")
{
    SUBCASE("undeclared source")
    {
        Montage m = Montage::default_montage();
        m.channels[0].source = "S99";
        CHECK_THROWS_AS(m.validate(), DataError);
    }
    SUBCASE("undeclared detector")
    {
        Montage m = Montage::default_montage();
        m.channels[0].detector = "D99";
        CHECK_THROWS_AS(m.validate(), DataError);
    }
    SUBCASE("short channel longer than a long channel")
    {
        Montage m = Montage::default_montage();
        m.channels[m.short_channels()[0]].distance_m = 0.05;
        CHECK_THROWS_AS(m.validate(), DataError);
    }
    SUBCASE("channel listed twice in one ROI")
    {
        Montage m = Montage::default_montage();
        m.roi_map["dup"] = {"S7-D6", "S7-D6"};
        CHECK_THROWS_AS(m.validate(), DataError);
    }
    SUBCASE("ROI names an unknown channel")
    {
        Montage m = Montage::default_montage();
        m.roi_map["bad"] = {"S1-D8"};
        CHECK_THROWS_AS(m.validate(), DataError);
    }
}

TEST_CASE("recording validation rejects each invariant violation")
{
    const Dataset d = small_dataset(1, 1);
    const Recording& good = d.recordings[0];
    CHECK_NOTHROW(good.validate(d.montage));

    SUBCASE("length mismatch")
    {
        Recording r = good;
        r.intensity[1][3].pop_back();
        CHECK_THROWS_AS(r.validate(d.montage), DataError);
    }
    SUBCASE("non-positive intensity")
    {
        Recording r = good;
        r.intensity[0][2][10] = 0.0;
        CHECK_THROWS_AS(r.validate(d.montage), DataError);
    }
    SUBCASE("annotation past the end")
    {
        Recording r = good;
        r.annotations.push_back({r.duration_s() - 1.0, 5.0, "single"});
        CHECK_THROWS_AS(r.validate(d.montage), DataError);
    }
    SUBCASE("overlapping annotations")
    {
        Recording r = good;
        r.annotations.push_back({r.annotations[0].onset_s + 1.0, 2.0, "dual"});
        CHECK_THROWS_AS(r.validate(d.montage), DataError);
    }
}

TEST_CASE("hemo series and epoch set invariants")
{
    Dataset d = tiny_hemo();
    CHECK_NOTHROW(d.hemo[0].validate());
    HemoSeries h = d.hemo[0];
    h.hbr.pop_back();
    CHECK_THROWS_AS(h.validate(), DataError);

    EpochSet e;
    e.channels = {"S1-D1"};
    e.window_samples = 3;
    e.epochs.push_back({"P", Group::patient, "single", 0, {{1, 2, 3}}, {{1, 2, 3}}});
    CHECK_NOTHROW(e.validate());
    e.epochs.push_back({"P", Group::patient, "single", 0, {{1, 2, 3}}, {{1, 2, 3}}});
    CHECK_THROWS_AS(e.validate(), DataError);
    e.epochs.back().trial = 1;
    e.epochs.back().hbo[0].pop_back();
    CHECK_THROWS_AS(e.validate(), DataError);
}

TEST_CASE("dataset: participant ids unique, groups from the fixed vocabulary")
{
    Dataset d = small_dataset();
    d.recordings[1].participant_id = d.recordings[0].participant_id;
    CHECK_THROWS_AS(d.validate(), DataError);
    CHECK_THROWS_AS(parse_group("ms"), DataError);
    CHECK(parse_group("patient") == Group::patient);
}

TEST_CASE("save then load is lossless for raw datasets")
{
    TempDir dir("model_raw");
    const Dataset d = small_dataset();
    save_dataset(d, dir.path());
    const Dataset back = load_dataset(dir.path());
    CHECK(back == d);
}

TEST_CASE("save then load is lossless for hemo datasets, provenance included")
{
    TempDir dir("model_hemo");
    const Dataset d = tiny_hemo();
    save_dataset(d, dir.path());
    const Dataset back = load_dataset(dir.path());
    CHECK(back == d);
    CHECK(back.hemo[0].provenance.steps().size() == 2);
}

TEST_CASE("save/load/save is byte-identical")
{
    TempDir a("model_a"), b("model_b");
    save_dataset(small_dataset(), a.path());
    save_dataset(load_dataset(a.path()), b.path());
    for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
        const auto name = entry.path().filename();
        CHECK_MESSAGE(testutil::slurp(entry.path()) == testutil::slurp(b.path() / name), name.string());
    }
}

TEST_CASE("empty dataset writes an empty participant list")
{
    TempDir dir("model_empty");
    Dataset d;
    d.montage = Montage::default_montage();
    save_dataset(d, dir.path());
    const std::string manifest = testutil::slurp(dir / "manifest.json");
    CHECK(manifest.find("\"participants\": []") != std::string::npos);
    CHECK(load_dataset(dir.path()).participant_count() == 0);
}

TEST_CASE("synthetic 24-participant dataset loads as 24 recordings of 20 long channels")
{
    TempDir dir("model_24");
    SynthConfig c;
    const auto r = generate_dataset(c);
    save_dataset(r.dataset, dir.path());
    const Dataset d = load_dataset(dir.path());
    CHECK(d.recordings.size() == static_cast<std::size_t>(c.n_patients + c.n_controls));
    CHECK(d.montage.long_channels().size() == 20);
}

TEST_CASE("load errors carry file context")
{
    TempDir dir("model_err");
    save_dataset(small_dataset(1, 1), dir.path());

    SUBCASE("missing manifest")
    {
        std::filesystem::remove(dir / "manifest.json");
        CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("missing manifest"), DataError);
    }
    SUBCASE("missing participant file")
    {
        std::filesystem::remove(dir / "C01_760nm.csv");
        CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("missing participant file"), DataError);
    }
    SUBCASE("schema version mismatch")
    {
        std::string m = testutil::slurp(dir / "manifest.json");
        const auto at = m.find("\"schema_version\": 1");
        REQUIRE(at != std::string::npos);
        m.replace(at, 19, "\"schema_version\": 7");
        std::ofstream(dir / "manifest.json", std::ios::binary) << m;
        CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("schema_version"), DataError);
    }
    SUBCASE("non-positive intensity names file and line")
    {
        std::string csv = testutil::slurp(dir / "P01_850nm.csv");
        const auto line3 = csv.find('\n', csv.find('\n') + 1) + 1;
        const auto comma = csv.find(',', line3);
        const auto next = csv.find(',', comma + 1);
        csv.replace(comma + 1, next - comma - 1, "-1");
        std::ofstream(dir / "P01_850nm.csv", std::ios::binary) << csv;
        CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("P01_850nm.csv:3"), DataError);
    }
    SUBCASE("channel-length mismatch")
    {
        std::string csv = testutil::slurp(dir / "C01_760nm.csv");
        csv.erase(csv.rfind(','));
        csv += "\n";
        std::ofstream(dir / "C01_760nm.csv", std::ios::binary) << csv;
        CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("channel-length mismatch"), DataError);
    }
}

TEST_CASE("save refuses an annotation overlapping the recording end")
{
    TempDir dir("model_refuse");
    Dataset d = small_dataset(1, 1);
    d.recordings[0].annotations.push_back({d.recordings[0].duration_s() - 0.5, 20.0, "single"});
    CHECK_THROWS_AS(save_dataset(d, dir / "out"), DataError);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("numbers round-trip through 17 significant digits")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min(), 0.0})
        CHECK(parse_double(format_double(v)) == v);
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double(""), DataError);
}
