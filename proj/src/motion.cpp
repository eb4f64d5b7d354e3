#include "nirscope/motion.hpp"

#include "nirscope/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>

namespace nirscope {

void MotionParams::validate() const
{
    if (!(amp_sigma > 0.0) || !(std_sigma > 0.0) || !(std_floor >= 0.0)) throw ConfigError("motion: thresholds must be positive");
    if (!(std_window_s > 0.0) || !(pad_s >= 0.0) || !(baseline_s > 0.0))
        throw ConfigError("motion: window, padding and baseline durations must be positive");
    if (!(spline_p > 0.0 && spline_p <= 1.0)) throw ConfigError("motion: spline smoothing parameter must be in (0, 1]");
    if (!(iqr_multiplier > 0.0)) throw ConfigError("motion: IQR multiplier must be positive");
}

std::vector<ArtifactSegment> detect_artifacts(std::span<const double> x, double fs, const MotionParams& params,
    const std::string& channel)
{
    params.validate();
    const std::size_t n = x.size();
    const auto window = static_cast<std::size_t>(std::max(2L, std::lround(params.std_window_s * fs)));
    if (n <= window) throw DataError("detect_artifacts: series shorter than the moving-std window");

    const double sd = stddev(x);
    if (sd == 0.0) return {};
    const double med = median(x);

    std::vector<double> moving(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= window / 2 ? i - window / 2 : 0;
        const std::size_t hi = std::min(n, lo + window);
        moving[i] = stddev(x.subspan(lo, hi - lo), false);
    }
    const double std_threshold = std::max(params.std_sigma * median(moving), params.std_floor * sd);

    std::vector<char> amp(n, 0);
    std::vector<char> flagged(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        amp[i] = std::abs(x[i] - med) > params.amp_sigma * sd;
        flagged[i] = amp[i] || moving[i] > std_threshold;
    }

    const auto pad = static_cast<std::size_t>(std::lround(params.pad_s * fs));
    std::vector<ArtifactSegment> segments;
    std::size_t i = 0;
    while (i < n) {
        if (!flagged[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool by_amplitude = false;
        while (j < n && flagged[j]) by_amplitude |= amp[j++] != 0;
        const std::size_t start = i >= pad ? i - pad : 0;
        const std::size_t end = std::min(n, j + pad);
        const auto trigger = by_amplitude ? ArtifactTrigger::amplitude : ArtifactTrigger::moving_std;
        if (!segments.empty() && start <= segments.back().end_sample) {
            segments.back().end_sample = end;
            if (by_amplitude) segments.back().trigger = ArtifactTrigger::amplitude;
        } else {
            segments.push_back({start, end, channel, trigger});
        }
        i = j;
    }
    return segments;
}

Series smoothing_spline(std::span<const double> y, double lambda)
{
    const std::size_t n = y.size();
    if (n < 3 || lambda == 0.0) return Series(y.begin(), y.end());
    const auto m = static_cast<Eigen::Index>(n - 2);

    using Sparse = Eigen::SparseMatrix<double>;
    Sparse q(static_cast<Eigen::Index>(n), m);
    Sparse r(m, m);
    std::vector<Eigen::Triplet<double>> tq;
    std::vector<Eigen::Triplet<double>> tr;
    for (Eigen::Index j = 0; j < m; ++j) {
        tq.emplace_back(j, j, 1.0);
        tq.emplace_back(j + 1, j, -2.0);
        tq.emplace_back(j + 2, j, 1.0);
        tr.emplace_back(j, j, 2.0 / 3.0);
        if (j + 1 < m) {
            tr.emplace_back(j, j + 1, 1.0 / 6.0);
            tr.emplace_back(j + 1, j, 1.0 / 6.0);
        }
    }
    q.setFromTriplets(tq.begin(), tq.end());
    r.setFromTriplets(tr.begin(), tr.end());

    const Sparse system = r + lambda * Sparse(q.transpose() * q);
    Eigen::SimplicialLDLT<Sparse> solver(system);
    if (solver.info() != Eigen::Success) throw NumericalError("smoothing spline: factorisation failed");
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd gamma = solver.solve(q.transpose() * yv);
    const Eigen::VectorXd f = yv - lambda * (q * gamma);
    return Series(f.data(), f.data() + n);
}

Series spline_correct(std::span<const double> x, std::span<const ArtifactSegment> segments, double fs,
    const MotionParams& params)
{
    params.validate();
    const std::size_t n = x.size();
    std::vector<ArtifactSegment> sorted(segments.begin(), segments.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start_sample < b.start_sample; });

    const double lambda = (1.0 - params.spline_p) / params.spline_p;
    const auto baseline = static_cast<std::size_t>(std::max(1L, std::lround(params.baseline_s * fs)));

    Series out(x.begin(), x.end());
    for (const auto& seg : sorted) {
        if (seg.start_sample >= seg.end_sample || seg.end_sample > n)
            throw DataError("spline_correct: segment outside the series");
        const std::span<const double> values(out.data() + seg.start_sample, seg.end_sample - seg.start_sample);
        const Series trend = smoothing_spline(values, lambda);
        Series residual(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) residual[i] = values[i] - trend[i];
        const double residual_mean = mean(residual);

        double anchor = 0.0;
        if (seg.start_sample > 0) {
            const std::size_t lo = seg.start_sample >= baseline ? seg.start_sample - baseline : 0;
            anchor = mean(std::span<const double>(out.data() + lo, seg.start_sample - lo));
        } else if (seg.end_sample < n) {
            const std::size_t hi = std::min(n, seg.end_sample + baseline);
            anchor = mean(std::span<const double>(out.data() + seg.end_sample, hi - seg.end_sample));
        }
        for (std::size_t i = 0; i < residual.size(); ++i) out[seg.start_sample + i] = residual[i] - residual_mean + anchor;
    }
    return out;
}

namespace wavelet {

namespace {

constexpr std::array<double, 8> kDb4{
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
};

double highpass(std::size_t m) { return (m % 2 == 0 ? 1.0 : -1.0) * kDb4[kDb4.size() - 1 - m]; }

} // namespace

std::span<const double> db4() { return kDb4; }

int max_level(std::size_t n)
{
    const std::size_t taps = kDb4.size();
    if (n < taps - 1) return 0;
    return static_cast<int>(std::floor(std::log2(static_cast<double>(n) / static_cast<double>(taps - 1))));
}

Decomposition decompose(std::span<const double> x, int levels)
{
    Decomposition d;
    Series approx(x.begin(), x.end());
    for (int level = 0; level < levels; ++level) {
        const std::size_t len = approx.size();
        if (len < 2 || len % 2 != 0) throw DataError("wavelet: length must stay even at every level");
        Series a(len / 2, 0.0);
        Series det(len / 2, 0.0);
        for (std::size_t k = 0; k < len / 2; ++k) {
            for (std::size_t m = 0; m < kDb4.size(); ++m) {
                const double v = approx[(2 * k + m) % len];
                a[k] += kDb4[m] * v;
                det[k] += highpass(m) * v;
            }
        }
        d.details.push_back(std::move(det));
        approx = std::move(a);
    }
    d.approximation = std::move(approx);
    return d;
}

Series reconstruct(const Decomposition& d)
{
    Series approx = d.approximation;
    for (auto it = d.details.rbegin(); it != d.details.rend(); ++it) {
        const Series& det = *it;
        const std::size_t len = 2 * approx.size();
        Series x(len, 0.0);
        for (std::size_t k = 0; k < approx.size(); ++k) {
            for (std::size_t m = 0; m < kDb4.size(); ++m) x[(2 * k + m) % len] += kDb4[m] * approx[k] + highpass(m) * det[k];
        }
        approx = std::move(x);
    }
    return approx;
}

} // namespace wavelet

namespace {
constexpr std::size_t kMinJudgedCoefficients = 4;
} // namespace

Series wavelet_correct(std::span<const double> x, double iqr_multiplier)
{
    const std::size_t n = x.size();
    if (n < 16) throw DataError("wavelet_correct: series shorter than 16 samples");
    if (!(iqr_multiplier > 0.0)) throw ConfigError("wavelet_correct: IQR multiplier must be positive");

    std::size_t padded = 1;
    while (padded < n) padded <<= 1;
    const std::size_t left = (padded - n) / 2;
    const auto period = static_cast<long long>(2 * (n - 1));
    Series ext(padded);
    for (std::size_t i = 0; i < padded; ++i) {
        long long k = (static_cast<long long>(i) - static_cast<long long>(left)) % period;
        if (k < 0) k += period;
        if (k >= static_cast<long long>(n)) k = period - k;
        ext[i] = x[static_cast<std::size_t>(k)];
    }

    auto d = wavelet::decompose(ext, wavelet::max_level(padded));
    if (std::isfinite(iqr_multiplier)) {
        const std::size_t taps = wavelet::db4().size();
        for (std::size_t level = 0; level < d.details.size(); ++level) {
            Series& coeffs = d.details[level];
            // Only coefficients whose support lies inside the original samples
            // are judged; the others see the reflection kinks and the wrap.
            const std::size_t stride = std::size_t{2} << level;
            const std::size_t support = (taps - 1) * (stride - 1) + 1;
            std::vector<std::size_t> interior;
            for (std::size_t k = 0; k < coeffs.size(); ++k)
                if (stride * k >= left && stride * k + support <= left + n) interior.push_back(k);
            if (interior.size() < kMinJudgedCoefficients) continue;
            Series values;
            for (std::size_t k : interior) values.push_back(coeffs[k]);
            const double q1 = quantile(values, 0.25);
            const double q3 = quantile(values, 0.75);
            const double iqr = q3 - q1;
            const double lo = q1 - iqr_multiplier * iqr;
            const double hi = q3 + iqr_multiplier * iqr;
            for (std::size_t k : interior)
                if (coeffs[k] < lo || coeffs[k] > hi) coeffs[k] = 0.0;
        }
    }
    const Series rec = wavelet::reconstruct(d);
    return Series(rec.begin() + static_cast<std::ptrdiff_t>(left), rec.begin() + static_cast<std::ptrdiff_t>(left + n));
}

} // namespace nirscope
