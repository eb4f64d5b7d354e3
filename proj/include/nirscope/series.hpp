#pragma once

#include <span>
#include <vector>

namespace nirscope {

using Series = std::vector<double>;

double mean(std::span<const double> x);

// Population (n) or sample (n - 1) standard deviation.
double stddev(std::span<const double> x, bool sample = true);

// Linear-interpolation quantile (the "type 7" definition), q in [0, 1].
double quantile(std::span<const double> x, double q);

double median(std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

double rms(std::span<const double> x);

} // namespace nirscope
