#pragma once

#include "nirscope/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace nirscope {

// On-disk container: <dir>/manifest.json plus one CSV per participant per
// wavelength (raw) or per chromophore (hemo). CSV header `t_s,<ch1>,...`,
// LF line endings, numbers with 17 significant digits.
Dataset load_dataset(const std::filesystem::path& dir);

// Validates first; an invalid dataset is refused before anything is written.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

inline constexpr std::string_view kManifestName = "manifest.json";

// Shortest-form-independent decimal with 17 significant digits.
std::string format_double(double v);

// Whole-field parse; throws DataError on garbage.
double parse_double(std::string_view field);

} // namespace nirscope
