#pragma once

#include "nirscope/series.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace nirscope {

struct SvgBarOptions {
    std::string title;
    std::string y_label = "mean |SHAP|";
    std::vector<std::string> colors; // per bar; empty = default
};

// Standalone SVG 1.1 bar chart.
std::string svg_bar_chart(std::span<const double> values, std::span<const std::string> labels,
    const SvgBarOptions& options = {});

struct CurveSeries {
    std::string name;
    Series mean; // plotted in the units given (callers convert to umol/L)
    Series std;
    std::string color;
    bool dashed = false;
};

struct SvgCurveOptions {
    std::string title;
    std::string y_label = "concentration change (µmol/L)";
};

// Mean lines with +-std bands over time (s).
std::string svg_curves(std::span<const CurveSeries> curves, double fs, const SvgCurveOptions& options = {});

// Throws ConfigError on empty input, DataError on an unwritable path.
void emit_svg_bar(std::span<const double> values, std::span<const std::string> labels,
    const std::filesystem::path& path, const SvgBarOptions& options = {});
void emit_svg_curves(std::span<const double> mean, std::span<const double> std, double fs,
    const std::filesystem::path& path, const SvgCurveOptions& options = {});
void emit_svg_curves(std::span<const CurveSeries> curves, double fs, const std::filesystem::path& path,
    const SvgCurveOptions& options = {});

void write_text_file(const std::filesystem::path& path, const std::string& content);

} // namespace nirscope
