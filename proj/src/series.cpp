#include "nirscope/series.hpp"

#include "nirscope/error.hpp"

#include <algorithm>
#include <cmath>

namespace nirscope {

double mean(std::span<const double> x)
{
    if (x.empty()) return 0.0;
    // shifted by the first value so a constant series returns it exactly
    const double shift = x.front();
    double s = 0.0;
    for (double v : x) s += v - shift;
    return shift + s / static_cast<double>(x.size());
}

double stddev(std::span<const double> x, bool sample)
{
    const std::size_t n = x.size();
    if (n < (sample ? 2u : 1u)) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(sample ? n - 1 : n));
}

double quantile(std::span<const double> x, double q)
{
    if (x.empty()) throw DataError("quantile of an empty series");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double rms(std::span<const double> x)
{
    if (x.empty()) return 0.0;
    return std::sqrt(dot(x, x) / static_cast<double>(x.size()));
}

} // namespace nirscope
