#pragma once

#include "nirscope/linalg.hpp"
#include "nirscope/model.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace nirscope {

enum class FeatureMode { raw, summary };

std::string_view to_string(FeatureMode m);
FeatureMode parse_feature_mode(std::string_view s);

// Default SelectKBest k per mode.
std::size_t default_select_k(FeatureMode m);

struct FeatureSlot {
    std::string channel;
    Chromophore chromophore = Chromophore::hbo;
    std::string slot; // "t000".. in raw mode, statistic name in summary mode

    bool operator==(const FeatureSlot&) const = default;
};

inline constexpr std::array<std::string_view, 4> kSummaryStatistics{"mean", "peak", "time_to_peak", "slope"};

struct FeatureMatrix {
    Matrix x;
    std::vector<int> y; // 1 = patient, 0 = control
    std::vector<std::string> participant_ids;
    std::vector<FeatureSlot> feature_index;

    void validate() const;
};

// Rows are the epochs of `task` in EpochSet order; columns channel-major,
// hbo before hbr, slots in order.
FeatureMatrix build_features(const EpochSet& epochs, const std::string& task, FeatureMode mode);

// Two-class one-way ANOVA F per column. Perfectly separating columns (zero
// within-group, nonzero between-group variance) score +infinity; constant
// columns score 0. Throws DataError unless both classes have >= 2 rows.
std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y);

// Indices of the k largest scores, descending, ties by smaller index.
std::vector<std::size_t> select_k_best(std::span<const double> scores, std::size_t k);

struct Standardizer {
    Vector mean;
    Vector scale; // population std; 0 for constant columns

    static Standardizer fit(const Matrix& train);
    // Constant training columns map to 0.
    Matrix apply(const Matrix& x) const;
};

Matrix select_columns(const Matrix& x, std::span<const std::size_t> columns);

namespace reference {
std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y);
} // namespace reference

} // namespace nirscope
