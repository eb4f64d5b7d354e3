#include "nirscope/optics.hpp"

#include "nirscope/dataset_io.hpp"
#include "nirscope/error.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace nirscope {

ExtinctionTable::ExtinctionTable(std::map<double, ExtinctionEntry> entries) : entries_(std::move(entries))
{
    for (const auto& [wl, e] : entries_) {
        if (!(wl > 0.0) || !(e.eps_hbo > 0.0) || !(e.eps_hbr > 0.0) || !(e.dpf > 0.0))
            throw ConfigError("extinction table: wavelength, coefficients and DPF must be positive (at " +
                              format_double(wl) + " nm)");
    }
}

ExtinctionTable ExtinctionTable::defaults()
{
    // nm, HbO2, Hb in cm^-1 / (mol/L), base 10.
    static constexpr double kPrahl[][3] = {
        {690.0, 276.0, 2051.96},
        {700.0, 290.0, 1794.28},
        {730.0, 390.0, 1102.2},
        {750.0, 518.0, 1405.24},
        {760.0, 586.0, 1548.52},
        {780.0, 710.0, 1075.44},
        {800.0, 816.0, 761.72},
        {830.0, 974.0, 693.04},
        {850.0, 1058.0, 691.32},
    };
    std::map<double, ExtinctionEntry> entries;
    for (const auto& row : kPrahl) entries[row[0]] = {row[1] * std::numbers::ln10, row[2] * std::numbers::ln10, 6.0};
    return ExtinctionTable(std::move(entries));
}

ExtinctionTable ExtinctionTable::from_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open extinction table " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "wavelength_nm,eps_hbo,eps_hbr,dpf")
        throw ConfigError(path.filename().string() + ":1: expected header wavelength_nm,eps_hbo,eps_hbr,dpf");
    std::map<double, ExtinctionEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        try {
            while (std::getline(ss, cell, ',')) v.push_back(parse_double(cell));
        } catch (const DataError& e) {
            throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (v.size() != 4) throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) + ": expected 4 fields");
        entries[v[0]] = {v[1], v[2], v[3]};
    }
    return ExtinctionTable(std::move(entries));
}

const ExtinctionEntry& ExtinctionTable::at(double wavelength_nm) const
{
    for (const auto& [wl, e] : entries_)
        if (std::abs(wl - wavelength_nm) <= 1e-6) return e;
    throw ConfigError("wavelength " + format_double(wavelength_nm) + " nm missing from the extinction table");
}

Series intensity_to_od(std::span<const double> intensity, std::optional<double> reference)
{
    for (double v : intensity)
        if (!(v > 0.0) || !std::isfinite(v)) throw DataError("intensity_to_od: non-positive intensity sample");
    const double ref = reference ? *reference : mean(intensity);
    if (!(ref > 0.0) || !std::isfinite(ref)) throw DataError("intensity_to_od: reference intensity must be positive");
    Series od(intensity.size());
    for (std::size_t i = 0; i < intensity.size(); ++i) od[i] = -std::log(intensity[i] / ref);
    return od;
}

MbllSystem::MbllSystem(const ExtinctionTable& table, WavelengthPair wavelengths, double distance_m)
{
    if (!(distance_m > 0.0)) throw ConfigError("MBLL: source-detector distance must be positive");
    const double distance_cm = distance_m * 100.0;
    const ExtinctionEntry& e1 = table.at(wavelengths.first_nm);
    const ExtinctionEntry& e2 = table.at(wavelengths.second_nm);
    m_[0][0] = e1.eps_hbo * distance_cm * e1.dpf;
    m_[0][1] = e1.eps_hbr * distance_cm * e1.dpf;
    m_[1][0] = e2.eps_hbo * distance_cm * e2.dpf;
    m_[1][1] = e2.eps_hbr * distance_cm * e2.dpf;
    const double det = m_[0][0] * m_[1][1] - m_[0][1] * m_[1][0];
    const double scale = std::abs(m_[0][0] * m_[1][1]) + std::abs(m_[0][1] * m_[1][0]);
    if (!(std::abs(det) > 1e-12 * scale))
        throw NumericalError("MBLL: singular extinction matrix for " + format_double(wavelengths.first_nm) + "/" +
                             format_double(wavelengths.second_nm) + " nm");
    inv_[0][0] = m_[1][1] / det;
    inv_[0][1] = -m_[0][1] / det;
    inv_[1][0] = -m_[1][0] / det;
    inv_[1][1] = m_[0][0] / det;
}

std::array<double, 2> MbllSystem::forward(double d_hbo, double d_hbr) const
{
    return {m_[0][0] * d_hbo + m_[0][1] * d_hbr, m_[1][0] * d_hbo + m_[1][1] * d_hbr};
}

std::array<double, 2> MbllSystem::invert(double od_first, double od_second) const
{
    return {inv_[0][0] * od_first + inv_[0][1] * od_second, inv_[1][0] * od_first + inv_[1][1] * od_second};
}

Concentrations mbll_invert(std::span<const double> od_first, std::span<const double> od_second,
    WavelengthPair wavelengths, double distance_m, const ExtinctionTable& table)
{
    if (od_first.size() != od_second.size()) throw DataError("mbll_invert: series lengths differ");
    const MbllSystem system(table, wavelengths, distance_m);
    Concentrations out;
    out.hbo.resize(od_first.size());
    out.hbr.resize(od_first.size());
    for (std::size_t t = 0; t < od_first.size(); ++t) {
        const auto c = system.invert(od_first[t], od_second[t]);
        out.hbo[t] = c[0];
        out.hbr[t] = c[1];
    }
    return out;
}

} // namespace nirscope
