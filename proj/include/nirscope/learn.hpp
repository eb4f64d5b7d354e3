#pragma once

#include "nirscope/features.hpp"
#include "nirscope/linalg.hpp"
#include "nirscope/model.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nirscope {

enum class ClassifierKind { knn, random_forest, linear_svm, boosted_trees };

std::string_view to_string(ClassifierKind k);
// Accepts the CLI spellings knn, rf, svm, gbdt as well as the long names.
ClassifierKind parse_classifier_kind(std::string_view s);

struct KnnParams {
    int k = 5;
};

struct ForestParams {
    int n_trees = 100;
    int min_leaf = 1;
    int max_depth = 0; // 0 = unlimited
    bool bootstrap = true;
};

struct SvmParams {
    double c = 1.0;
    int epochs = 200;
};

struct BoostParams {
    int rounds = 100;
    double learning_rate = 0.1;
    int max_leaves = 31;
    int bins = 64;
    int min_child_samples = 20;
    double min_sum_hessian = 1e-3;
    double lambda_l2 = 0.0;
};

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::knn;
    KnnParams knn;
    ForestParams forest;
    SvmParams svm;
    BoostParams boost;
    std::uint64_t seed = 0;

    void validate() const; // ConfigError
};

// Fitted binary classifier; immutable and safe to share across threads.
class Model {
public:
    virtual ~Model() = default;

    // Class-1 score in [0, 1] for one row.
    virtual double score(std::span<const double> row) const = 0;

    std::size_t columns() const { return columns_; }

    // Scores every row (OpenMP over rows). Throws DataError on a column mismatch.
    std::vector<double> predict_score(const Matrix& x) const;
    std::vector<int> predict(const Matrix& x) const;

protected:
    explicit Model(std::size_t columns) : columns_(columns) {}

private:
    std::size_t columns_;
};

// Throws DataError for single-class y or non-finite x.
std::shared_ptr<const Model> fit(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y);

namespace reference {
// Serial row loop.
std::vector<double> predict_score(const Model& model, const Matrix& x);
} // namespace reference

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Support-weighted precision/recall/F1 over the two classes.
Metrics evaluate(std::span<const int> y_true, std::span<const int> y_pred);

struct Fold {
    std::vector<std::string> test;
    std::vector<std::string> train;
};

struct FoldPlan {
    std::vector<Fold> folds;

    // Disjoint test sets, every participant tested once, train/test disjoint.
    void validate() const;
};

using ParticipantGroup = std::pair<std::string, Group>;

// Per-class seeded shuffle, then round-robin dealing into n_folds test sets.
FoldPlan make_fold_plan(std::span<const ParticipantGroup> participants, int n_folds, std::uint64_t seed);

struct FeatureConfig {
    FeatureMode mode = FeatureMode::summary;
    std::size_t select_k = 0; // 0 = mode default
};

struct FoldResult {
    std::vector<std::string> test_participants;
    std::vector<std::size_t> selected;  // columns of the full feature matrix
    Standardizer scaler;                // over the selected columns
    std::shared_ptr<const Model> model;
    Matrix train_x;                     // selected + standardized
    Matrix test_x;
    std::vector<int> test_y;
    std::vector<int> test_pred;
    std::vector<double> test_score;
    std::vector<std::size_t> test_rows; // rows of the full feature matrix
    Metrics metrics;
};

struct CvResult {
    std::vector<FeatureSlot> feature_index;
    std::vector<FoldResult> folds;
    Metrics pooled;
};

// Features are built once per trial; selection, scaling and fitting use the
// training participants of each fold only. Fold f trains with seed ^ f.
// Throws DataError naming the fold if its training data is single-class.
CvResult cross_validate(const EpochSet& epochs, const std::string& task, const FeatureConfig& features,
    const ClassifierSpec& spec, const FoldPlan& plan);

// Same, starting from an already built feature matrix.
CvResult cross_validate(const FeatureMatrix& fm, const FeatureConfig& features, const ClassifierSpec& spec,
    const FoldPlan& plan);

std::vector<ParticipantGroup> participants_of(const EpochSet& epochs);

} // namespace nirscope
