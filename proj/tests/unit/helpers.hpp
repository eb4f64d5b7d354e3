#pragma once

#include "nirscope/rng.hpp"
#include "nirscope/series.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("nirscope_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

inline nirscope::Series sine(std::size_t n, double fs, double f_hz, double amplitude = 1.0, double phase = 0.0)
{
    nirscope::Series s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = amplitude * std::sin(2.0 * std::numbers::pi * f_hz * static_cast<double>(i) / fs + phase);
    return s;
}

inline nirscope::Series gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0)
{
    nirscope::Rng rng = nirscope::Rng::stream(seed, 0);
    nirscope::Series s(n);
    for (auto& v : s) v = rng.normal(0.0, sd);
    return s;
}

inline double max_abs_diff(const nirscope::Series& a, const nirscope::Series& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace testutil
