#include "nirscope/error.hpp"
#include "nirscope/learn.hpp"
#include "nirscope/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace nirscope {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ---- k nearest neighbours ----

class KnnModel final : public Model {
public:
    KnnModel(const Matrix& x, std::span<const int> y, int k)
        : Model(static_cast<std::size_t>(x.cols())), x_(x), y_(y.begin(), y.end()),
          k_(std::min<std::size_t>(static_cast<std::size_t>(k), y.size()))
    {
    }

    double score(std::span<const double> row) const override
    {
        const auto n = static_cast<std::size_t>(x_.rows());
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = x_.data() + i * x_.cols();
            double d = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) d += (r[j] - row[j]) * (r[j] - row[j]);
            dist[i] = {d, i};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
        double ones = 0.0;
        for (std::size_t i = 0; i < k_; ++i) ones += y_[dist[i].second];
        return ones / static_cast<double>(k_);
    }

private:
    Matrix x_;
    std::vector<int> y_;
    std::size_t k_;
};

// ---- decision trees ----

struct TreeNode {
    int feature = -1; // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

double tree_value(const std::vector<TreeNode>& nodes, std::span<const double> row)
{
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

class CartBuilder {
public:
    CartBuilder(const Matrix& x, std::span<const int> y, const ForestParams& params, Rng& rng)
        : x_(x), y_(y), params_(params), rng_(rng),
          mtry_(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols()))))))
    {
    }

    std::vector<TreeNode> build(std::vector<std::size_t> rows)
    {
        nodes_.clear();
        grow(rows, 0);
        return std::move(nodes_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    int grow(std::vector<std::size_t>& rows, int depth)
    {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        double ones = 0.0;
        for (std::size_t r : rows) ones += y_[r];
        const double n = static_cast<double>(rows.size());
        nodes_[static_cast<std::size_t>(id)].value = ones / n;

        const bool pure = ones == 0.0 || ones == n;
        const bool depth_limited = params_.max_depth > 0 && depth >= params_.max_depth;
        if (pure || depth_limited || rows.size() < 2 * static_cast<std::size_t>(params_.min_leaf)) return id;

        const Split split = best_split(rows, ones);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : rows) (x_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int rgt = grow(right, depth + 1);
        TreeNode& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = rgt;
        return id;
    }

    // Examines mtry random features; keeps drawing beyond mtry while no
    // valid split has been found.
    Split best_split(const std::vector<std::size_t>& rows, double ones_total)
    {
        std::vector<std::size_t> features(static_cast<std::size_t>(x_.cols()));
        std::iota(features.begin(), features.end(), 0);
        rng_.shuffle(features);

        const double n = static_cast<double>(rows.size());
        const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
        Split best;
        best.impurity = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, int>> values(rows.size());
        for (std::size_t tried = 0; tried < features.size(); ++tried) {
            if (tried >= mtry_ && best.feature >= 0) break;
            const auto f = static_cast<Eigen::Index>(features[tried]);
            for (std::size_t i = 0; i < rows.size(); ++i) values[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), y_[rows[i]]};
            std::sort(values.begin(), values.end());
            double left_ones = 0.0;
            for (std::size_t i = 0; i + 1 < values.size(); ++i) {
                left_ones += values[i].second;
                if (values[i].first == values[i + 1].first) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = values.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double pl = left_ones / static_cast<double>(nl);
                const double pr = (ones_total - left_ones) / static_cast<double>(nr);
                const double impurity = (static_cast<double>(nl) * 2.0 * pl * (1.0 - pl) +
                                            static_cast<double>(nr) * 2.0 * pr * (1.0 - pr)) / n;
                if (impurity < best.impurity) {
                    best.impurity = impurity;
                    best.feature = static_cast<int>(f);
                    best.threshold = values[i].first + (values[i + 1].first - values[i].first) / 2.0;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    const ForestParams& params_;
    Rng& rng_;
    std::size_t mtry_;
    std::vector<TreeNode> nodes_;
};

class ForestModel final : public Model {
public:
    ForestModel(const Matrix& x, std::span<const int> y, const ForestParams& params, std::uint64_t seed)
        : Model(static_cast<std::size_t>(x.cols())), trees_(static_cast<std::size_t>(params.n_trees))
    {
        const auto n = static_cast<std::size_t>(x.rows());
#pragma omp parallel for schedule(dynamic)
        for (int t = 0; t < params.n_trees; ++t) {
            Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t));
            std::vector<std::size_t> rows(n);
            if (params.bootstrap)
                for (auto& r : rows) r = static_cast<std::size_t>(rng.index(n));
            else
                std::iota(rows.begin(), rows.end(), 0);
            CartBuilder builder(x, y, params, rng);
            trees_[static_cast<std::size_t>(t)] = builder.build(std::move(rows));
        }
    }

    // Each tree votes for the majority class of its leaf.
    double score(std::span<const double> row) const override
    {
        double votes = 0.0;
        for (const auto& tree : trees_) votes += tree_value(tree, row) > 0.5 ? 1.0 : 0.0;
        return votes / static_cast<double>(trees_.size());
    }

private:
    std::vector<std::vector<TreeNode>> trees_;
};

// ---- linear SVM (Pegasos) ----

class SvmModel final : public Model {
public:
    SvmModel(const Matrix& x, std::span<const int> y, const SvmParams& params, std::uint64_t seed)
        : Model(static_cast<std::size_t>(x.cols())), w_(static_cast<std::size_t>(x.cols()) + 1, 0.0)
    {
        const auto n = static_cast<std::size_t>(x.rows());
        const std::size_t d = w_.size();
        const double lambda = 1.0 / (params.c * static_cast<double>(n));
        const double radius = 1.0 / std::sqrt(lambda);
        Rng rng(seed);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::size_t t = 0;
        for (int epoch = 0; epoch < params.epochs; ++epoch) {
            rng.shuffle(order);
            for (std::size_t i : order) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const double* xi = x.data() + i * x.cols();
                const double yi = y[i] == 1 ? 1.0 : -1.0;
                double margin = w_[d - 1];
                for (std::size_t j = 0; j + 1 < d; ++j) margin += w_[j] * xi[j];
                const double shrink = 1.0 - eta * lambda;
                for (double& v : w_) v *= shrink;
                if (yi * margin < 1.0) {
                    for (std::size_t j = 0; j + 1 < d; ++j) w_[j] += eta * yi * xi[j];
                    w_[d - 1] += eta * yi;
                }
                double norm = 0.0;
                for (double v : w_) norm += v * v;
                norm = std::sqrt(norm);
                if (norm > radius)
                    for (double& v : w_) v *= radius / norm;
            }
        }
    }

    double score(std::span<const double> row) const override
    {
        double margin = w_.back();
        for (std::size_t j = 0; j < row.size(); ++j) margin += w_[j] * row[j];
        return logistic(margin);
    }

private:
    std::vector<double> w_; // weights then bias
};

// ---- histogram gradient boosting ----

class BoostModel final : public Model {
public:
    BoostModel(const Matrix& x, std::span<const int> y, const BoostParams& params)
        : Model(static_cast<std::size_t>(x.cols())), params_(params)
    {
        const auto n = static_cast<std::size_t>(x.rows());
        const auto p = static_cast<std::size_t>(x.cols());
        make_bins(x);
        binned_.resize(n * p);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t f = 0; f < p; ++f) binned_[r * p + f] = bin_of(f, x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));

        const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
        const double rate = pos / static_cast<double>(n);
        init_ = std::log(rate / (1.0 - rate));
        std::vector<double> f(n, init_);
        std::vector<double> g(n);
        std::vector<double> h(n);
        for (int round = 0; round < params.rounds; ++round) {
            for (std::size_t i = 0; i < n; ++i) {
                const double prob = logistic(f[i]);
                g[i] = prob - y[i];
                h[i] = std::max(prob * (1.0 - prob), 1e-16);
            }
            trees_.push_back(grow_tree(g, h, n, p));
            const auto& tree = trees_.back();
            for (std::size_t i = 0; i < n; ++i) f[i] += tree_value(tree, row_span(x, static_cast<Eigen::Index>(i)));
        }
        binned_.clear();
        binned_.shrink_to_fit();
    }

    double score(std::span<const double> row) const override
    {
        double f = init_;
        for (const auto& tree : trees_) f += tree_value(tree, row);
        return logistic(f);
    }

private:
    struct Candidate {
        double gain = 0.0;
        int feature = -1;
        int bin = -1;
    };

    struct Leaf {
        int node = 0;
        std::vector<std::size_t> rows;
        double g = 0.0;
        double h = 0.0;
        Candidate split;
    };

    // Bin upper edges per feature: midpoints between distinct values when
    // there are few, otherwise distinct quantiles.
    void make_bins(const Matrix& x)
    {
        edges_.resize(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index f = 0; f < x.cols(); ++f) {
            std::vector<double> v;
            v.reserve(static_cast<std::size_t>(x.rows()));
            for (Eigen::Index r = 0; r < x.rows(); ++r) v.push_back(x(r, f));
            std::sort(v.begin(), v.end());
            std::vector<double> uniq(v);
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            auto& e = edges_[static_cast<std::size_t>(f)];
            if (uniq.size() <= static_cast<std::size_t>(params_.bins)) {
                for (std::size_t i = 0; i + 1 < uniq.size(); ++i) e.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0);
            } else {
                for (int b = 1; b < params_.bins; ++b) {
                    const double q = quantile(v, static_cast<double>(b) / params_.bins);
                    if (e.empty() || q > e.back()) e.push_back(q);
                }
            }
        }
    }

    std::uint8_t bin_of(std::size_t f, double value) const
    {
        const auto& e = edges_[f];
        return static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
    }

    Candidate find_split(const Leaf& leaf, std::span<const double> g, std::span<const double> h, std::size_t p) const
    {
        Candidate best;
        const double lambda = params_.lambda_l2;
        const double parent = leaf.g * leaf.g / (leaf.h + lambda);
        const auto min_child = static_cast<std::size_t>(params_.min_child_samples);
        if (leaf.rows.size() < 2 * min_child) return best;
        const std::size_t nb = static_cast<std::size_t>(params_.bins);
        std::vector<double> hg(nb);
        std::vector<double> hh(nb);
        std::vector<std::size_t> hc(nb);
        for (std::size_t f = 0; f < p; ++f) {
            const std::size_t used = edges_[f].size() + 1;
            if (used < 2) continue;
            std::fill(hg.begin(), hg.end(), 0.0);
            std::fill(hh.begin(), hh.end(), 0.0);
            std::fill(hc.begin(), hc.end(), 0);
            for (std::size_t r : leaf.rows) {
                const std::uint8_t b = binned_[r * p + f];
                hg[b] += g[r];
                hh[b] += h[r];
                ++hc[b];
            }
            double gl = 0.0;
            double hl = 0.0;
            std::size_t cl = 0;
            for (std::size_t b = 0; b + 1 < used; ++b) {
                gl += hg[b];
                hl += hh[b];
                cl += hc[b];
                const std::size_t cr = leaf.rows.size() - cl;
                if (cl < min_child || cr < min_child) continue;
                const double gr = leaf.g - gl;
                const double hr = leaf.h - hl;
                if (hl < params_.min_sum_hessian || hr < params_.min_sum_hessian) continue;
                const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if (gain > best.gain + 1e-12) best = {gain, static_cast<int>(f), static_cast<int>(b)};
            }
        }
        return best;
    }

    std::vector<TreeNode> grow_tree(std::span<const double> g, std::span<const double> h, std::size_t n, std::size_t p)
    {
        std::vector<TreeNode> nodes(1);
        std::vector<Leaf> leaves(1);
        leaves[0].rows.resize(n);
        std::iota(leaves[0].rows.begin(), leaves[0].rows.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            leaves[0].g += g[i];
            leaves[0].h += h[i];
        }
        leaves[0].split = find_split(leaves[0], g, h, p);

        while (static_cast<int>(leaves.size()) < params_.max_leaves) {
            std::size_t pick = leaves.size();
            for (std::size_t i = 0; i < leaves.size(); ++i)
                if (leaves[i].split.feature >= 0 && (pick == leaves.size() || leaves[i].split.gain > leaves[pick].split.gain))
                    pick = i;
            if (pick == leaves.size()) break;

            Leaf parent = std::move(leaves[pick]);
            const auto f = static_cast<std::size_t>(parent.split.feature);
            Leaf left;
            Leaf right;
            for (std::size_t r : parent.rows) {
                Leaf& side = binned_[r * p + f] <= parent.split.bin ? left : right;
                side.rows.push_back(r);
                side.g += g[r];
                side.h += h[r];
            }
            left.node = static_cast<int>(nodes.size());
            right.node = left.node + 1;
            nodes.resize(nodes.size() + 2);
            TreeNode& node = nodes[static_cast<std::size_t>(parent.node)];
            node.feature = static_cast<int>(f);
            node.threshold = edges_[f][static_cast<std::size_t>(parent.split.bin)];
            node.left = left.node;
            node.right = right.node;
            left.split = find_split(left, g, h, p);
            right.split = find_split(right, g, h, p);
            leaves[pick] = std::move(left);
            leaves.push_back(std::move(right));
        }
        for (const Leaf& leaf : leaves)
            nodes[static_cast<std::size_t>(leaf.node)].value =
                -params_.learning_rate * leaf.g / (leaf.h + params_.lambda_l2);
        return nodes;
    }

    BoostParams params_;
    std::vector<std::vector<double>> edges_;
    std::vector<std::uint8_t> binned_;
    double init_ = 0.0;
    std::vector<std::vector<TreeNode>> trees_;
};

} // namespace

std::shared_ptr<const Model> fit(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y)
{
    spec.validate();
    if (x.rows() == 0 || x.cols() == 0) throw DataError("fit: empty training matrix");
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("fit: label count differs from rows");
    if (!x.allFinite()) throw DataError("fit: non-finite value in training matrix");
    std::size_t ones = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError("fit: labels must be 0 or 1");
        ones += static_cast<std::size_t>(v);
    }
    if (ones == 0 || ones == y.size()) throw DataError("fit: training labels are single-class");

    switch (spec.kind) {
    case ClassifierKind::knn: return std::make_shared<KnnModel>(x, y, spec.knn.k);
    case ClassifierKind::random_forest: return std::make_shared<ForestModel>(x, y, spec.forest, spec.seed);
    case ClassifierKind::linear_svm: return std::make_shared<SvmModel>(x, y, spec.svm, spec.seed);
    case ClassifierKind::boosted_trees: return std::make_shared<BoostModel>(x, y, spec.boost);
    }
    throw ConfigError("fit: unknown classifier kind");
}

} // namespace nirscope
