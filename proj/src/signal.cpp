#include "nirscope/signal.hpp"

#include "nirscope/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace nirscope {

using cplx = std::complex<double>;

void BandpassSpec::validate(double fs) const
{
    if (!(fs > 0.0)) throw ConfigError("band-pass: sample rate must be positive");
    if (order <= 0 || order % 2 != 0) throw ConfigError("band-pass: order must be a positive even integer");
    if (!(low_cut_hz > 0.0) || !(low_cut_hz < high_cut_hz))
        throw ConfigError("band-pass: need 0 < low cut < high cut");
    if (!(high_cut_hz < fs / 2.0)) throw ConfigError("band-pass: high cut must be below Nyquist");
}

ButterworthBandpass::ButterworthBandpass(const BandpassSpec& spec, double fs) : spec_(spec), fs_(fs)
{
    spec.validate(fs);
    const int n = spec.order / 2;
    const double fs2 = 2.0 * fs;
    const double w_low = fs2 * std::tan(std::numbers::pi * spec.low_cut_hz / fs);
    const double w_high = fs2 * std::tan(std::numbers::pi * spec.high_cut_hz / fs);
    const double bw = w_high - w_low;
    const double w0_sq = w_low * w_high;

    std::vector<cplx> poles;
    for (int k = 0; k < n; ++k) {
        const cplx proto = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n));
        const cplx half = proto * bw / 2.0;
        const cplx root = std::sqrt(half * half - w0_sq);
        for (const cplx s : {half + root, half - root}) poles.push_back((fs2 + s) / (fs2 - s));
    }

    // Digital gain: analog gain bw^n, n zeros at s = 0 mapped to z = 1 and
    // n zeros at infinity mapped to z = -1.
    cplx gain = std::pow(bw * fs2, n);
    for (const cplx& p : poles) {
        const cplx s = fs2 * (p - 1.0) / (p + 1.0);
        gain /= (fs2 - s);
    }

    std::vector<cplx> upper;
    std::vector<double> real;
    for (const cplx& p : poles) {
        if (std::abs(p.imag()) <= 1e-12 * std::abs(p))
            real.push_back(p.real());
        else if (p.imag() > 0.0)
            upper.push_back(p);
    }
    std::sort(upper.begin(), upper.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    std::sort(real.begin(), real.end());

    double max_radius = 0.0;
    for (const cplx& p : upper) {
        sections_.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
        max_radius = std::max(max_radius, std::abs(p));
    }
    for (std::size_t i = 0; i + 1 < real.size(); i += 2) {
        sections_.push_back({1.0, 0.0, -1.0, -(real[i] + real[i + 1]), real[i] * real[i + 1]});
        max_radius = std::max({max_radius, std::abs(real[i]), std::abs(real[i + 1])});
    }
    const double g = gain.real();
    sections_.front().b0 *= g;
    sections_.front().b1 *= g;
    sections_.front().b2 *= g;

    settling_ = static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(max_radius)));
}

std::complex<double> ButterworthBandpass::response(double f_hz) const
{
    const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_);
    cplx h = 1.0;
    for (const Biquad& s : sections_)
        h *= (s.b0 + zinv * (s.b1 + zinv * s.b2)) / (1.0 + zinv * (s.a1 + zinv * s.a2));
    return h;
}

namespace {

// Direct form II transposed cascade; state starts at the unit-step steady
// state scaled by x[0] so a constant input produces no transient.
void cascade_filter(std::vector<double>& x, const std::vector<Biquad>& sections)
{
    if (x.empty()) return;
    double input_level = x.front();
    for (const Biquad& s : sections) {
        const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double y_ss = dc * input_level;
        double z1 = s.b2 * input_level - s.a2 * y_ss;
        double z0 = s.b1 * input_level - s.a1 * y_ss + z1;
        for (double& v : x) {
            const double in = v;
            const double y = s.b0 * in + z0;
            z0 = s.b1 * in - s.a1 * y + z1;
            z1 = s.b2 * in - s.a2 * y;
            v = y;
        }
        input_level = y_ss;
    }
}

} // namespace

Series ButterworthBandpass::apply(std::span<const double> x) const
{
    const std::size_t n = x.size();
    if (n < 3 * static_cast<std::size_t>(spec_.order))
        throw DataError("band-pass: series too short (" + std::to_string(n) + " samples, need at least " +
                        std::to_string(3 * spec_.order) + ")");
    const std::size_t pad = std::min(settling_, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    cascade_filter(ext, sections_);
    if (spec_.zero_phase) {
        std::reverse(ext.begin(), ext.end());
        cascade_filter(ext, sections_);
        std::reverse(ext.begin(), ext.end());
    }
    return Series(ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

Series bandpass(std::span<const double> x, const BandpassSpec& spec, double fs)
{
    return ButterworthBandpass(spec, fs).apply(x);
}

double short_channel_beta(std::span<const double> long_series, std::span<const double> short_series)
{
    if (long_series.size() != short_series.size()) throw DataError("short-channel regression: lengths differ");
    const double ml = mean(long_series);
    const double ms = mean(short_series);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < short_series.size(); ++i) {
        const double s = short_series[i] - ms;
        num += (long_series[i] - ml) * s;
        den += s * s;
    }
    return den > 0.0 ? num / den : 0.0;
}

Series short_channel_regress(std::span<const double> long_series, std::span<const double> short_series)
{
    if (long_series.size() != short_series.size()) throw DataError("short-channel regression: lengths differ");
    if (short_series.empty() || stddev(short_series, false) == 0.0) throw DataError("uninformative short channel");
    const double beta = short_channel_beta(long_series, short_series);
    const double ms = mean(short_series);
    Series out(long_series.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = long_series[i] - beta * (short_series[i] - ms);
    return out;
}

namespace {

// "SD2" < "SD10": compare alphabetic prefix, then the trailing number.
bool natural_less(const std::string& a, const std::string& b)
{
    auto split = [](const std::string& s) {
        std::size_t i = s.size();
        while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
        const long long num = i < s.size() ? std::stoll(s.substr(i)) : -1;
        return std::make_pair(s.substr(0, i), num);
    };
    return split(a) < split(b);
}

} // namespace

std::size_t match_short_channel(const Montage& montage, std::size_t long_channel)
{
    const auto shorts = montage.short_channels();
    if (shorts.empty()) throw DataError("montage has no short channels");
    const Channel& target = montage.channels.at(long_channel);
    std::optional<std::size_t> best;
    for (std::size_t idx : shorts) {
        const Channel& c = montage.channels[idx];
        if (c.source != target.source) continue;
        if (!best || natural_less(c.detector, montage.channels[*best].detector)) best = idx;
    }
    return best ? *best : shorts.front();
}

} // namespace nirscope
