#pragma once

#include "nirscope/learn.hpp"
#include "nirscope/linalg.hpp"
#include "nirscope/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nirscope {

using ScoreFunction = std::function<double(std::span<const double>)>;

// A partition of the columns into players.
using FeatureGroups = std::vector<std::vector<std::size_t>>;

struct Attribution {
    std::vector<double> phi; // one per group, in score units
    double base_value = 0.0; // mean background score
    double instance_score = 0.0;
    std::size_t instance = 0;
};

inline constexpr std::size_t kMaxExactGroups = 20;

// v(S) = mean over background rows b of score(instance on S, b elsewhere);
// phi by full subset enumeration. Throws ConfigError for more than 20
// groups, an empty background or groups that do not partition the columns.
Attribution exact_shapley(const ScoreFunction& score, const Matrix& background,
    std::span<const double> instance, const FeatureGroups& groups);

// Shapley-kernel weighted least squares with the efficiency constraint
// enforced exactly. n_samples counts all coalitions including the empty and
// full ones and must be >= 2 * groups + 2. Throws NumericalError
// ("insufficient coalition diversity") when the regression is singular.
Attribution kernel_shap(const ScoreFunction& score, const Matrix& background,
    std::span<const double> instance, const FeatureGroups& groups, std::size_t n_samples, std::uint64_t seed);

// Shapley kernel weight (n - 1) / (C(n, s) s (n - s)) for 0 < s < n.
double shapley_kernel_weight(std::size_t n, std::size_t s);

// Training mean row plus up to `extra` rows taken at even strides from the
// training rows sorted by Euclidean norm.
Matrix make_background(const Matrix& train, std::size_t extra = 15);

struct ChannelImportanceEntry {
    std::string channel;
    Chromophore chromophore = Chromophore::hbo;
    double mean_abs_shap = 0.0;
};

using ChannelImportance = std::vector<ChannelImportanceEntry>;

// Player descriptor: which (channel, chromophore) a group belongs to.
struct GroupLabel {
    std::string channel;
    Chromophore chromophore = Chromophore::hbo;
};

// Mean over attributions of the summed |phi| of each (channel, chromophore);
// every pair in `all_channels` x {hbo, hbr} is listed (0 when never a
// player). Sorted descending, ties by channel label then hbo before hbr.
ChannelImportance channel_importance(std::span<const Attribution> attributions,
    std::span<const GroupLabel> group_labels, std::span<const std::string> all_channels);

struct ExplainConfig {
    std::size_t samples = 1024;       // kernel SHAP coalitions
    std::size_t exact_max_groups = 12; // exact enumeration up to this many players
    std::size_t background_extra = 15;
    std::uint64_t seed = 0;
};

struct ExplainResult {
    std::vector<Attribution> attributions; // one per test trial, fold order
    ChannelImportance importance;
    bool exact = true; // every fold used exact enumeration
    std::size_t max_groups = 0;
};

// Attributes every test trial of every fold against that fold's model, with
// features grouped per (channel, chromophore) among the selected columns.
ExplainResult explain_cross_validation(const CvResult& cv, std::span<const std::string> all_channels,
    const ExplainConfig& config);

namespace reference {
// Serial coalition loop.
Attribution exact_shapley(const ScoreFunction& score, const Matrix& background,
    std::span<const double> instance, const FeatureGroups& groups);
} // namespace reference

} // namespace nirscope
