#include "nirscope/features.hpp"

#include "nirscope/epochs.hpp"
#include "nirscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace nirscope {

std::string_view to_string(FeatureMode m) { return m == FeatureMode::raw ? "raw" : "summary"; }

FeatureMode parse_feature_mode(std::string_view s)
{
    if (s == "raw") return FeatureMode::raw;
    if (s == "summary") return FeatureMode::summary;
    throw ConfigError("unknown feature mode '" + std::string(s) + "' (expected raw or summary)");
}

std::size_t default_select_k(FeatureMode m) { return m == FeatureMode::raw ? 40 : 20; }

void FeatureMatrix::validate() const
{
    const auto rows = static_cast<std::size_t>(x.rows());
    if (y.size() != rows || participant_ids.size() != rows)
        throw DataError("feature matrix: row counts of x, y and participant ids differ");
    if (feature_index.size() != static_cast<std::size_t>(x.cols()))
        throw DataError("feature matrix: feature index does not match the column count");
    if (!x.allFinite()) throw DataError("feature matrix: non-finite entry");
}

namespace {

void summary_statistics(std::span<const double> w, double fs, Chromophore chrom, double* out)
{
    const std::size_t peak = peak_index(w, chrom);
    out[0] = mean(w);
    out[1] = w[peak];
    out[2] = static_cast<double>(peak) / fs;
    out[3] = w.size() > 1 ? (w.back() - w.front()) * fs / static_cast<double>(w.size() - 1) : 0.0;
}

} // namespace

FeatureMatrix build_features(const EpochSet& epochs, const std::string& task, FeatureMode mode)
{
    if (task.empty()) throw DataError("build_features: empty task filter");
    epochs.validate();
    std::vector<const Epoch*> rows;
    for (const Epoch& e : epochs.epochs)
        if (e.task == task) rows.push_back(&e);
    if (rows.empty()) throw DataError("build_features: no epochs for task '" + task + "'");

    const std::size_t w = epochs.window_samples;
    const std::size_t slots = mode == FeatureMode::raw ? w : kSummaryStatistics.size();
    const std::size_t channels = epochs.channels.size();

    FeatureMatrix fm;
    for (const std::string& ch : epochs.channels) {
        for (Chromophore chrom : {Chromophore::hbo, Chromophore::hbr}) {
            for (std::size_t s = 0; s < slots; ++s) {
                std::string slot;
                if (mode == FeatureMode::raw) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "t%03zu", s);
                    slot = buf;
                } else {
                    slot = std::string(kSummaryStatistics[s]);
                }
                fm.feature_index.push_back({ch, chrom, std::move(slot)});
            }
        }
    }

    fm.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(channels * 2 * slots));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Epoch& e = *rows[r];
        double* out = fm.x.data() + r * fm.x.cols();
        for (std::size_t c = 0; c < channels; ++c) {
            for (Chromophore chrom : {Chromophore::hbo, Chromophore::hbr}) {
                const Series& s = e.of(chrom)[c];
                if (mode == FeatureMode::raw)
                    std::copy(s.begin(), s.end(), out);
                else
                    summary_statistics(s, epochs.sample_rate_hz, chrom, out);
                out += slots;
            }
        }
        fm.y.push_back(label_of(e.group));
        fm.participant_ids.push_back(e.participant_id);
    }
    fm.validate();
    return fm;
}

namespace {

void check_labels(const Matrix& x, std::span<const int> y)
{
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("anova: label count differs from rows");
    const auto ones = std::count(y.begin(), y.end(), 1);
    const auto zeros = std::count(y.begin(), y.end(), 0);
    if (ones + zeros != static_cast<std::ptrdiff_t>(y.size())) throw DataError("anova: labels must be 0 or 1");
    if (ones < 2 || zeros < 2) throw DataError("anova: each class needs at least two rows");
}

// Values are shifted by the first entry so a constant column is exactly zero.
double column_f(const Matrix& x, std::span<const int> y, Eigen::Index col)
{
    const double shift = x(0, col);
    double sum[2] = {0.0, 0.0};
    double count[2] = {0.0, 0.0};
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int g = y[static_cast<std::size_t>(r)];
        sum[g] += x(r, col) - shift;
        count[g] += 1.0;
    }
    const double m[2] = {sum[0] / count[0], sum[1] / count[1]};
    const double grand = (sum[0] + sum[1]) / (count[0] + count[1]);
    double within = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int g = y[static_cast<std::size_t>(r)];
        const double d = x(r, col) - shift - m[g];
        within += d * d;
    }
    const double between = count[0] * (m[0] - grand) * (m[0] - grand) + count[1] * (m[1] - grand) * (m[1] - grand);
    if (within == 0.0) return between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    const double df_within = count[0] + count[1] - 2.0;
    return between / (within / df_within);
}

} // namespace

std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y)
{
    check_labels(x, y);
    std::vector<double> f(static_cast<std::size_t>(x.cols()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < x.cols(); ++c) f[static_cast<std::size_t>(c)] = column_f(x, y, c);
    return f;
}

namespace reference {

std::vector<double> anova_f_scores(const Matrix& x, std::span<const int> y)
{
    check_labels(x, y);
    std::vector<double> f(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) f[static_cast<std::size_t>(c)] = column_f(x, y, c);
    return f;
}

} // namespace reference

std::vector<std::size_t> select_k_best(std::span<const double> scores, std::size_t k)
{
    if (k < 1 || k > scores.size())
        throw ConfigError("select_k_best: k = " + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        const double sa = std::isnan(scores[a]) ? -std::numeric_limits<double>::infinity() : scores[a];
        const double sb = std::isnan(scores[b]) ? -std::numeric_limits<double>::infinity() : scores[b];
        return sa != sb ? sa > sb : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

Standardizer Standardizer::fit(const Matrix& train)
{
    if (train.rows() == 0) throw DataError("standardize: empty training set");
    Standardizer s;
    s.mean = train.colwise().mean().transpose();
    s.scale.resize(train.cols());
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double var = (train.col(c).array() - s.mean(c)).square().mean();
        double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::abs(s.mean(c))) sd = 0.0;
        s.scale(c) = sd;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const
{
    if (x.cols() != mean.size()) throw DataError("standardize: column count differs from the fitted scaler");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (scale(c) == 0.0)
            out.col(c).setZero();
        else
            out.col(c) = (x.col(c).array() - mean(c)) / scale(c);
    }
    return out;
}

Matrix select_columns(const Matrix& x, std::span<const std::size_t> columns)
{
    Matrix out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] >= static_cast<std::size_t>(x.cols())) throw DataError("select_columns: column out of range");
        out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(columns[j]));
    }
    return out;
}

} // namespace nirscope
