#include "nirscope/explain.hpp"

#include "nirscope/error.hpp"
#include "nirscope/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>

namespace nirscope {

namespace {

void check_inputs(const Matrix& background, std::span<const double> instance, const FeatureGroups& groups)
{
    if (background.rows() == 0) throw ConfigError("shapley: empty background");
    if (groups.empty()) throw ConfigError("shapley: no feature groups");
    if (static_cast<std::size_t>(background.cols()) != instance.size())
        throw ConfigError("shapley: background and instance differ in column count");
    std::vector<int> seen(instance.size(), 0);
    for (const auto& g : groups) {
        if (g.empty()) throw ConfigError("shapley: empty feature group");
        for (std::size_t c : g) {
            if (c >= instance.size()) throw ConfigError("shapley: group column out of range");
            ++seen[c];
        }
    }
    for (int s : seen)
        if (s != 1) throw ConfigError("shapley: groups must partition the columns");
}

// Mean background score with the groups in `mask` taken from the instance.
class CoalitionValue {
public:
    CoalitionValue(const ScoreFunction& score, const Matrix& background, std::span<const double> instance,
        const FeatureGroups& groups)
        : score_(score), background_(background), instance_(instance), groups_(groups)
    {
    }

    double operator()(std::uint64_t mask, std::vector<double>& row) const
    {
        double total = 0.0;
        for (Eigen::Index b = 0; b < background_.rows(); ++b) {
            const auto bg = row_span(background_, b);
            row.assign(bg.begin(), bg.end());
            for (std::size_t g = 0; g < groups_.size(); ++g)
                if (mask >> g & 1U)
                    for (std::size_t c : groups_[g]) row[c] = instance_[c];
            const double s = score_(row);
            if (!std::isfinite(s)) throw NumericalError("shapley: model score is not finite");
            total += s;
        }
        return total / static_cast<double>(background_.rows());
    }

private:
    const ScoreFunction& score_;
    const Matrix& background_;
    std::span<const double> instance_;
    const FeatureGroups& groups_;
};

std::vector<double> evaluate_masks(const CoalitionValue& value, const std::vector<std::uint64_t>& masks, bool parallel)
{
    std::vector<double> v(masks.size());
    if (!parallel) {
        std::vector<double> row;
        for (std::size_t i = 0; i < masks.size(); ++i) v[i] = value(masks[i], row);
        return v;
    }
    std::exception_ptr error;
#pragma omp parallel
    {
        std::vector<double> row;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(masks.size()); ++i) {
            try {
                v[static_cast<std::size_t>(i)] = value(masks[static_cast<std::size_t>(i)], row);
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
    }
    if (error) std::rethrow_exception(error);
    return v;
}

Attribution exact_impl(const ScoreFunction& score, const Matrix& background, std::span<const double> instance,
    const FeatureGroups& groups, bool parallel)
{
    check_inputs(background, instance, groups);
    const std::size_t n = groups.size();
    if (n > kMaxExactGroups)
        throw ConfigError("exact_shapley: " + std::to_string(n) + " groups exceed the limit of " + std::to_string(kMaxExactGroups));

    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    std::vector<std::uint64_t> masks(full + 1);
    std::iota(masks.begin(), masks.end(), std::uint64_t{0});
    const std::vector<double> v = evaluate_masks(CoalitionValue(score, background, instance, groups), masks, parallel);

    // weight(s) = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
    std::vector<double> weight(n);
    double binom = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
        weight[s] = 1.0 / (static_cast<double>(n) * binom);
        binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
    }

    Attribution a;
    a.phi.assign(n, 0.0);
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t g = 0; g < n; ++g) {
            if (mask >> g & 1U) continue;
            a.phi[g] += weight[size] * (v[mask | (std::uint64_t{1} << g)] - v[mask]);
        }
    }
    a.base_value = v[0];
    a.instance_score = v[full];
    return a;
}

double binomial(std::size_t n, std::size_t k)
{
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

// All k-subsets of n bits in lexicographic order of their indices.
void enumerate_size(std::size_t n, std::size_t k, std::vector<std::uint64_t>& out)
{
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        std::uint64_t mask = 0;
        for (std::size_t i : idx) mask |= std::uint64_t{1} << i;
        out.push_back(mask);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

} // namespace

Attribution exact_shapley(const ScoreFunction& score, const Matrix& background, std::span<const double> instance,
    const FeatureGroups& groups)
{
    return exact_impl(score, background, instance, groups, true);
}

namespace reference {

Attribution exact_shapley(const ScoreFunction& score, const Matrix& background, std::span<const double> instance,
    const FeatureGroups& groups)
{
    return exact_impl(score, background, instance, groups, false);
}

} // namespace reference

double shapley_kernel_weight(std::size_t n, std::size_t s)
{
    if (s == 0 || s >= n) return std::numeric_limits<double>::infinity();
    return static_cast<double>(n - 1) / (binomial(n, s) * static_cast<double>(s) * static_cast<double>(n - s));
}

Attribution kernel_shap(const ScoreFunction& score, const Matrix& background, std::span<const double> instance,
    const FeatureGroups& groups, std::size_t n_samples, std::uint64_t seed)
{
    check_inputs(background, instance, groups);
    const std::size_t n = groups.size();
    if (n > 62) throw ConfigError("kernel_shap: at most 62 groups");
    if (n_samples < 2 * n + 2)
        throw ConfigError("kernel_shap: n_samples = " + std::to_string(n_samples) + " below the minimum " + std::to_string(2 * n + 2));
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    const CoalitionValue value(score, background, instance, groups);
    std::vector<double> row;
    const double v_empty = value(0, row);
    const double v_full = value(full, row);

    Attribution a;
    a.base_value = v_empty;
    a.instance_score = v_full;
    if (n == 1) {
        a.phi = {v_full - v_empty};
        return a;
    }

    // Coalition plan: complete size pairs (s, n - s) while they fit, then
    // paired sampling over the remaining sizes in proportion to kernel mass.
    std::map<std::uint64_t, double> weights;
    std::size_t budget = n_samples - 2;
    std::size_t s = 1;
    for (; s <= n / 2; ++s) {
        const std::size_t pair = s == n - s ? 1 : 2;
        const double count = binomial(n, s) * static_cast<double>(pair);
        if (count > static_cast<double>(budget)) break;
        std::vector<std::uint64_t> masks;
        enumerate_size(n, s, masks);
        if (pair == 2)
            for (std::size_t i = 0, m = masks.size(); i < m; ++i) masks.push_back(full & ~masks[i]);
        for (std::uint64_t mask : masks) weights[mask] += shapley_kernel_weight(n, s);
        budget -= masks.size();
    }
    if (s <= n / 2 && budget > 0) {
        std::vector<std::size_t> sizes;
        std::vector<double> mass;
        double total = 0.0;
        for (std::size_t k = s; k <= n / 2; ++k) {
            const double m = shapley_kernel_weight(n, k) * binomial(n, k) * (k == n - k ? 1.0 : 2.0);
            sizes.push_back(k);
            mass.push_back(m);
            total += m;
        }
        Rng rng(seed);
        std::vector<std::uint64_t> drawn;
        std::vector<std::size_t> order(n);
        while (drawn.size() < budget) {
            double u = rng.uniform() * total;
            std::size_t pick = 0;
            while (pick + 1 < sizes.size() && u >= mass[pick]) u -= mass[pick++];
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(order);
            std::uint64_t mask = 0;
            for (std::size_t i = 0; i < sizes[pick]; ++i) mask |= std::uint64_t{1} << order[i];
            drawn.push_back(mask);
            if (drawn.size() < budget) drawn.push_back(full & ~mask);
        }
        const double each = total / static_cast<double>(drawn.size());
        for (std::uint64_t mask : drawn) weights[mask] += each;
    }

    std::vector<std::uint64_t> masks;
    std::vector<double> w;
    for (const auto& [mask, weight] : weights) {
        masks.push_back(mask);
        w.push_back(weight);
    }
    const std::vector<double> v = evaluate_masks(value, masks, true);

    // Eliminate the last player through the efficiency constraint.
    const double delta = v_full - v_empty;
    const auto m = static_cast<Eigen::Index>(masks.size());
    const auto p = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd x(m, p);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::uint64_t mask = masks[static_cast<std::size_t>(i)];
        const double last = static_cast<double>(mask >> (n - 1) & 1U);
        const double sw = std::sqrt(w[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = sw * (static_cast<double>(mask >> j & 1U) - last);
        y(i) = sw * (v[static_cast<std::size_t>(i)] - v_empty - last * delta);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw NumericalError("kernel_shap: insufficient coalition diversity");
    const Eigen::VectorXd sol = qr.solve(y);

    a.phi.assign(n, 0.0);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        a.phi[static_cast<std::size_t>(j)] = sol(j);
        sum += sol(j);
    }
    a.phi[n - 1] = delta - sum;
    return a;
}

Matrix make_background(const Matrix& train, std::size_t extra)
{
    if (train.rows() == 0) throw DataError("background: empty training set");
    const auto rows = static_cast<std::size_t>(train.rows());
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norm(rows);
    for (std::size_t r = 0; r < rows; ++r) norm[r] = train.row(static_cast<Eigen::Index>(r)).norm();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm[a] < norm[b]; });

    std::vector<std::size_t> pick;
    if (rows <= extra) {
        pick = order;
    } else {
        for (std::size_t i = 0; i < extra; ++i) pick.push_back(order[(2 * i + 1) * rows / (2 * extra)]);
    }
    Matrix bg(static_cast<Eigen::Index>(pick.size() + 1), train.cols());
    bg.row(0) = train.colwise().mean();
    for (std::size_t i = 0; i < pick.size(); ++i) bg.row(static_cast<Eigen::Index>(i + 1)) = train.row(static_cast<Eigen::Index>(pick[i]));
    return bg;
}

ChannelImportance channel_importance(std::span<const Attribution> attributions, std::span<const GroupLabel> group_labels,
    std::span<const std::string> all_channels)
{
    if (attributions.empty()) throw DataError("channel importance: no attributions");
    std::map<std::pair<std::string, int>, double> sums;
    for (const std::string& ch : all_channels)
        for (int c = 0; c < 2; ++c) sums[{ch, c}] = 0.0;
    for (const GroupLabel& g : group_labels)
        if (!sums.count({g.channel, static_cast<int>(g.chromophore)}))
            throw DataError("channel importance: group channel " + g.channel + " is not in the channel list");

    for (const Attribution& a : attributions) {
        if (a.phi.size() != group_labels.size()) throw DataError("channel importance: attribution size differs from the groups");
        for (std::size_t g = 0; g < group_labels.size(); ++g)
            sums[{group_labels[g].channel, static_cast<int>(group_labels[g].chromophore)}] += std::abs(a.phi[g]);
    }
    ChannelImportance out;
    for (const auto& [key, total] : sums)
        out.push_back({key.first, static_cast<Chromophore>(key.second), total / static_cast<double>(attributions.size())});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.mean_abs_shap != b.mean_abs_shap) return a.mean_abs_shap > b.mean_abs_shap;
        if (a.channel != b.channel) return a.channel < b.channel;
        return a.chromophore < b.chromophore;
    });
    return out;
}

ExplainResult explain_cross_validation(const CvResult& cv, std::span<const std::string> all_channels,
    const ExplainConfig& config)
{
    if (config.exact_max_groups > kMaxExactGroups)
        throw ConfigError("explain: exact group limit above " + std::to_string(kMaxExactGroups));
    if (cv.folds.empty()) throw DataError("explain: no folds");

    std::vector<GroupLabel> labels;
    std::map<std::pair<std::string, int>, std::size_t> label_index;
    for (const std::string& ch : all_channels)
        for (Chromophore c : {Chromophore::hbo, Chromophore::hbr}) {
            label_index[{ch, static_cast<int>(c)}] = labels.size();
            labels.push_back({ch, c});
        }

    ExplainResult result;
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        const FoldResult& fold = cv.folds[f];
        FeatureGroups groups;
        std::vector<std::size_t> group_target;
        std::map<std::size_t, std::size_t> group_of_label;
        for (std::size_t j = 0; j < fold.selected.size(); ++j) {
            const FeatureSlot& slot = cv.feature_index.at(fold.selected[j]);
            const auto it = label_index.find({slot.channel, static_cast<int>(slot.chromophore)});
            if (it == label_index.end()) throw DataError("explain: feature channel " + slot.channel + " is not in the channel list");
            auto [pos, inserted] = group_of_label.try_emplace(it->second, groups.size());
            if (inserted) {
                groups.emplace_back();
                group_target.push_back(it->second);
            }
            groups[pos->second].push_back(j);
        }
        result.max_groups = std::max(result.max_groups, groups.size());
        const bool exact = groups.size() <= config.exact_max_groups;
        result.exact = result.exact && exact;

        const Matrix background = make_background(fold.train_x, config.background_extra);
        const std::shared_ptr<const Model> model = fold.model;
        const ScoreFunction score = [model](std::span<const double> row) { return model->score(row); };
        for (Eigen::Index r = 0; r < fold.test_x.rows(); ++r) {
            const auto instance = row_span(fold.test_x, r);
            const std::uint64_t seed = Rng::splitmix64(config.seed ^ (static_cast<std::uint64_t>(f) << 32) ^ static_cast<std::uint64_t>(r));
            const Attribution local = exact ? exact_shapley(score, background, instance, groups)
                                            : kernel_shap(score, background, instance, groups, config.samples, seed);
            Attribution full;
            full.phi.assign(labels.size(), 0.0);
            for (std::size_t g = 0; g < groups.size(); ++g) full.phi[group_target[g]] += local.phi[g];
            full.base_value = local.base_value;
            full.instance_score = local.instance_score;
            full.instance = fold.test_rows.at(static_cast<std::size_t>(r));
            result.attributions.push_back(std::move(full));
        }
    }
    result.importance = channel_importance(result.attributions, labels, all_channels);
    return result;
}

} // namespace nirscope
