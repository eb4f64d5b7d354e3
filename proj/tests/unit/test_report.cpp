#include "helpers.hpp"

#include "nirscope/error.hpp"
#include "nirscope/report.hpp"

#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

using namespace nirscope;

namespace {

// Minimal XML well-formedness: one root, every tag closed in order.
bool well_formed_svg(const std::string& s)
{
    std::vector<std::string> stack;
    bool saw_root = false;
    for (std::size_t i = s.find('<'); i != std::string::npos; i = s.find('<', i + 1)) {
        const std::size_t end = s.find('>', i);
        if (end == std::string::npos) return false;
        const std::string tag = s.substr(i + 1, end - i - 1);
        if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        const std::string name = tag.substr(0, tag.find_first_of(" \n/"));
        if (stack.empty()) {
            if (saw_root || name != "svg") return false;
            saw_root = true;
        }
        if (tag.back() != '/') stack.push_back(name);
    }
    return saw_root && stack.empty();
}

std::size_t count(const std::string& s, const std::string& needle)
{
    std::size_t n = 0;
    for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

std::vector<std::string> points_of(const std::string& svg, const std::string& element)
{
    const std::regex re("<" + element + "[^>]* points=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, re));
    std::istringstream in(m[1].str());
    std::vector<std::string> pts;
    for (std::string p; in >> p;) pts.push_back(p);
    return pts;
}

} // namespace

TEST_CASE("a single bar gives a well-formed SVG with one rect")
{
    const std::vector<double> v{1.0};
    const std::vector<std::string> l{"S7-D6 hbr"};
    const std::string svg = svg_bar_chart(v, l);
    CHECK(well_formed_svg(svg));
    CHECK(svg.find("version=\"1.1\"") != std::string::npos);
    CHECK(svg.find("xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
    CHECK(count(svg, "<rect") == 1);
    CHECK(count(svg_bar_chart(std::vector<double>{1.0, 2.0}, std::vector<std::string>{"a", "b"}), "<rect") == 2);
    CHECK(svg.find("S7-D6 hbr") != std::string::npos);
}

TEST_CASE("bar chart output is deterministic and matches the committed golden file")
{
    const std::vector<double> v{0.42, 0.17, 0.05};
    const std::vector<std::string> l{"S7-D6 hbr", "S5-D6 hbr", "S1-D1 hbo"};
    SvgBarOptions o;
    o.title = "channel importance <test> & co";
    const std::string svg = svg_bar_chart(v, l, o);
    CHECK(svg == svg_bar_chart(v, l, o));
    CHECK(well_formed_svg(svg));
    CHECK(svg.find("&lt;test&gt; &amp; co") != std::string::npos);

    const std::filesystem::path golden = std::filesystem::path(NIRSCOPE_GOLDEN_DIR) / "bar_small.svg";
    REQUIRE_MESSAGE(std::filesystem::exists(golden), "missing " << golden);
    CHECK(svg == testutil::slurp(golden));
}

TEST_CASE("curves with zero std: the band collapses onto the mean line")
{
    const Series mean = testutil::sine(40, 3.9, 0.1, 0.7);
    const std::vector<CurveSeries> curves{{"control", mean, Series(40, 0.0), "", false}};
    const std::string svg = svg_curves(curves, 3.9);
    CHECK(well_formed_svg(svg));
    CHECK(svg.find("µmol/L") != std::string::npos);
    const auto band = points_of(svg, "polygon"), line = points_of(svg, "polyline");
    REQUIRE(band.size() == 2 * line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        CHECK(band[i] == line[i]);
        CHECK(band[2 * line.size() - 1 - i] == line[i]);
    }
}

TEST_CASE("two groups give two bands, two lines, one dashed")
{
    const Series m = testutil::sine(30, 3.9, 0.2);
    const std::vector<CurveSeries> c{{"control", m, Series(30, 0.1), "", false}, {"patient", m, Series(30, 0.2), "", true}};
    const std::string svg = svg_curves(c, 3.9);
    CHECK(count(svg, "<polygon") == 2);
    CHECK(count(svg, "<polyline") == 2);
    CHECK(count(svg, "stroke-dasharray") == 1);
}

TEST_CASE("empty input and unwritable paths are refused")
{
    testutil::TempDir dir("report");
    const std::vector<double> none;
    const std::vector<std::string> no_labels;
    CHECK_THROWS_AS(emit_svg_bar(none, no_labels, dir.path() / "a.svg"), ConfigError);
    CHECK_THROWS_AS(emit_svg_curves(none, none, 3.9, dir.path() / "b.svg"), ConfigError);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "a.svg"));
    const std::vector<double> one{1.0};
    const std::vector<std::string> lab{"x"};
    CHECK_THROWS_AS(emit_svg_bar(one, lab, dir.path() / "no_such_dir" / "c.svg"), DataError);
    emit_svg_bar(one, lab, dir.path() / "ok.svg");
    CHECK(testutil::slurp(dir.path() / "ok.svg") == svg_bar_chart(one, lab));
}
