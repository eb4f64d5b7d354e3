#include "nirscope/report.hpp"

#include "nirscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nirscope {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

// Round step (1, 2 or 5 x 10^k) giving about five intervals.
double nice_step(double span)
{
    if (!(span > 0.0)) return 1.0;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

struct Frame {
    double width = 720;
    double height = 400;
    double left = 80;
    double right = 20;
    double top = 40;
    double bottom = 90;

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

std::string header(const Frame& f, const std::string& title)
{
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(f.width) << "\" height=\""
      << num(f.height) << "\" viewBox=\"0 0 " << num(f.width) << " " << num(f.height) << "\">\n"
      << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    if (!title.empty())
        s << "<text x=\"" << num(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
          << "</text>\n";
    return s.str();
}

// Horizontal grid ticks and the y axis label.
void y_axis(std::ostringstream& s, const Frame& f, double lo, double hi, const std::string& label)
{
    const double step = nice_step(hi - lo);
    auto y_of = [&](double v) { return f.top + f.plot_h() * (hi - v) / (hi - lo); };
    for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step) {
        const double y = y_of(v);
        s << "<line x1=\"" << num(f.left - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(f.left) << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(v)
          << "</text>\n";
    }
    s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.left) << "\" y2=\""
      << num(f.top + f.plot_h()) << "\" stroke=\"black\"/>\n";
    const double cy = f.top + f.plot_h() / 2;
    s << "<text x=\"18\" y=\"" << num(cy) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << num(cy) << ")\">"
      << escape(label) << "</text>\n";
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

} // namespace

std::string svg_bar_chart(std::span<const double> values, std::span<const std::string> labels, const SvgBarOptions& options)
{
    if (values.empty()) throw ConfigError("bar chart: no values");
    if (labels.size() != values.size()) throw ConfigError("bar chart: label count differs from value count");
    for (double v : values)
        if (!std::isfinite(v)) throw DataError("bar chart: non-finite value");

    Frame f;
    f.width = std::max(320.0, f.left + f.right + 28.0 * static_cast<double>(values.size()));
    double lo = std::min(0.0, *std::min_element(values.begin(), values.end()));
    double hi = std::max(0.0, *std::max_element(values.begin(), values.end()));
    if (hi == lo) hi = lo + 1.0;
    const double step = nice_step(hi - lo);
    hi = std::ceil(hi / step - 1e-9) * step;
    lo = std::floor(lo / step + 1e-9) * step;

    std::ostringstream s;
    s << header(f, options.title);
    y_axis(s, f, lo, hi, options.y_label);
    auto y_of = [&](double v) { return f.top + f.plot_h() * (hi - v) / (hi - lo); };
    const double slot = f.plot_w() / static_cast<double>(values.size());
    const double zero = y_of(0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = f.left + slot * static_cast<double>(i) + slot * 0.15;
        const double y = y_of(values[i]);
        const std::string color = i < options.colors.size() && !options.colors[i].empty() ? options.colors[i] : kPalette[0];
        s << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y, zero)) << "\" width=\"" << num(slot * 0.7)
          << "\" height=\"" << num(std::abs(zero - y)) << "\" fill=\"" << escape(color) << "\"/>\n";
        const double lx = x + slot * 0.35;
        const double ly = f.top + f.plot_h() + 10;
        s << "<text x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" text-anchor=\"end\" transform=\"rotate(-60 " << num(lx)
          << " " << num(ly) << ")\">" << escape(labels[i]) << "</text>\n";
    }
    s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(zero) << "\" x2=\"" << num(f.left + f.plot_w()) << "\" y2=\""
      << num(zero) << "\" stroke=\"black\"/>\n";
    s << "</g>\n</svg>\n";
    return s.str();
}

std::string svg_curves(std::span<const CurveSeries> curves, double fs, const SvgCurveOptions& options)
{
    if (curves.empty()) throw ConfigError("curve chart: no curves");
    if (!(fs > 0.0)) throw ConfigError("curve chart: sample rate must be positive");
    const std::size_t n = curves.front().mean.size();
    if (n == 0) throw ConfigError("curve chart: empty curve");
    double lo = 0.0;
    double hi = 0.0;
    for (const CurveSeries& c : curves) {
        if (c.mean.size() != n || (!c.std.empty() && c.std.size() != n))
            throw ConfigError("curve chart: curves differ in length");
        for (std::size_t i = 0; i < n; ++i) {
            const double sd = c.std.empty() ? 0.0 : c.std[i];
            if (!std::isfinite(c.mean[i]) || !std::isfinite(sd) || sd < 0.0) throw DataError("curve chart: invalid value");
            lo = std::min(lo, c.mean[i] - sd);
            hi = std::max(hi, c.mean[i] + sd);
        }
    }
    if (hi == lo) hi = lo + 1.0;
    const double step = nice_step(hi - lo);
    hi = std::ceil(hi / step - 1e-9) * step;
    lo = std::floor(lo / step + 1e-9) * step;

    Frame f;
    f.bottom = 60;
    const double duration = n > 1 ? static_cast<double>(n - 1) / fs : 1.0;
    auto x_of = [&](std::size_t i) { return f.left + f.plot_w() * (static_cast<double>(i) / fs) / duration; };
    auto y_of = [&](double v) { return f.top + f.plot_h() * (hi - v) / (hi - lo); };

    std::ostringstream s;
    s << header(f, options.title);
    y_axis(s, f, lo, hi, options.y_label);
    const double base = f.top + f.plot_h();
    s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(base) << "\" x2=\"" << num(f.left + f.plot_w()) << "\" y2=\""
      << num(base) << "\" stroke=\"black\"/>\n";
    const double xstep = nice_step(duration);
    for (double t = 0.0; t <= duration + 1e-9; t += xstep) {
        const double x = f.left + f.plot_w() * t / duration;
        s << "<line x1=\"" << num(x) << "\" y1=\"" << num(base) << "\" x2=\"" << num(x) << "\" y2=\"" << num(base + 4)
          << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << num(x) << "\" y=\"" << num(base + 18) << "\" text-anchor=\"middle\">" << tick_label(t)
          << "</text>\n";
    }
    s << "<text x=\"" << num(f.left + f.plot_w() / 2) << "\" y=\"" << num(base + 40)
      << "\" text-anchor=\"middle\">time from onset (s)</text>\n";

    for (std::size_t k = 0; k < curves.size(); ++k) {
        const CurveSeries& c = curves[k];
        const std::string color = c.color.empty() ? kPalette[k % std::size(kPalette)] : c.color;
        s << "<polygon fill=\"" << escape(color) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < n; ++i)
            s << (i ? " " : "") << num(x_of(i)) << "," << num(y_of(c.mean[i] + (c.std.empty() ? 0.0 : c.std[i])));
        for (std::size_t i = n; i-- > 0;)
            s << " " << num(x_of(i)) << "," << num(y_of(c.mean[i] - (c.std.empty() ? 0.0 : c.std[i])));
        s << "\"/>\n";
        s << "<polyline fill=\"none\" stroke=\"" << escape(color) << "\" stroke-width=\"1.5\""
          << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < n; ++i) s << (i ? " " : "") << num(x_of(i)) << "," << num(y_of(c.mean[i]));
        s << "\"/>\n";
        const double ly = f.top + 14.0 * static_cast<double>(k + 1);
        s << "<text x=\"" << num(f.left + f.plot_w() - 4) << "\" y=\"" << num(ly) << "\" text-anchor=\"end\" fill=\""
          << escape(color) << "\">" << escape(c.name) << "</text>\n";
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("write failed for " + path.string());
}

void emit_svg_bar(std::span<const double> values, std::span<const std::string> labels, const std::filesystem::path& path,
    const SvgBarOptions& options)
{
    write_text_file(path, svg_bar_chart(values, labels, options));
}

void emit_svg_curves(std::span<const double> mean, std::span<const double> std, double fs,
    const std::filesystem::path& path, const SvgCurveOptions& options)
{
    const CurveSeries c{"mean", Series(mean.begin(), mean.end()), Series(std.begin(), std.end()), "", false};
    write_text_file(path, svg_curves(std::span<const CurveSeries>(&c, 1), fs, options));
}

void emit_svg_curves(std::span<const CurveSeries> curves, double fs, const std::filesystem::path& path,
    const SvgCurveOptions& options)
{
    write_text_file(path, svg_curves(curves, fs, options));
}

} // namespace nirscope
