#pragma once

#include "nirscope/series.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>

namespace nirscope {

struct ExtinctionEntry {
    double eps_hbo = 0.0; // L mol^-1 cm^-1, natural-log units
    double eps_hbr = 0.0;
    double dpf = 6.0;
};

class ExtinctionTable {
public:
    ExtinctionTable() = default;
    explicit ExtinctionTable(std::map<double, ExtinctionEntry> entries);

    // Commonly used literature values (Prahl's compilation of molar
    // extinction coefficients, converted from base-10 to natural-log
    // units by a factor ln 10). DPF 6.0 at every wavelength.
    static ExtinctionTable defaults();

    // CSV with header `wavelength_nm,eps_hbo,eps_hbr,dpf`.
    static ExtinctionTable from_csv(const std::filesystem::path& path);

    // Throws ConfigError for a wavelength not in the table (1e-6 nm match).
    const ExtinctionEntry& at(double wavelength_nm) const;

    const std::map<double, ExtinctionEntry>& entries() const { return entries_; }

private:
    std::map<double, ExtinctionEntry> entries_;
};

// od[t] = -ln(intensity[t] / reference); reference defaults to the series mean.
Series intensity_to_od(std::span<const double> intensity, std::optional<double> reference = {});

struct WavelengthPair {
    double first_nm = 760.0;
    double second_nm = 850.0;
};

// 2x2 system mapping (dHbO, dHbR) in mol/L to optical densities at the two
// wavelengths for one source-detector distance.
class MbllSystem {
public:
    // Throws ConfigError (missing wavelength, distance <= 0) or
    // NumericalError (singular extinction matrix).
    MbllSystem(const ExtinctionTable& table, WavelengthPair wavelengths, double distance_m);

    std::array<double, 2> forward(double d_hbo, double d_hbr) const;
    std::array<double, 2> invert(double od_first, double od_second) const;

private:
    double m_[2][2];
    double inv_[2][2];
};

struct Concentrations {
    Series hbo;
    Series hbr;
};

Concentrations mbll_invert(std::span<const double> od_first, std::span<const double> od_second,
    WavelengthPair wavelengths, double distance_m, const ExtinctionTable& table);

} // namespace nirscope
