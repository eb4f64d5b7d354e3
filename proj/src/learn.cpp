#include "nirscope/learn.hpp"

#include "nirscope/error.hpp"
#include "nirscope/rng.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <set>

namespace nirscope {

std::string_view to_string(ClassifierKind k)
{
    switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::linear_svm: return "linear_svm";
    case ClassifierKind::boosted_trees: return "boosted_trees";
    }
    return "?";
}

ClassifierKind parse_classifier_kind(std::string_view s)
{
    if (s == "knn") return ClassifierKind::knn;
    if (s == "rf" || s == "random_forest") return ClassifierKind::random_forest;
    if (s == "svm" || s == "linear_svm") return ClassifierKind::linear_svm;
    if (s == "gbdt" || s == "boosted_trees") return ClassifierKind::boosted_trees;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected knn, rf, svm or gbdt)");
}

void ClassifierSpec::validate() const
{
    if (knn.k < 1) throw ConfigError("knn: k must be >= 1");
    if (forest.n_trees < 1 || forest.min_leaf < 1 || forest.max_depth < 0)
        throw ConfigError("random forest: n_trees and min_leaf must be >= 1, max_depth >= 0");
    if (!(svm.c > 0.0) || svm.epochs < 1) throw ConfigError("svm: C must be positive and epochs >= 1");
    if (boost.rounds < 1 || !(boost.learning_rate > 0.0) || boost.max_leaves < 2 || boost.bins < 2 ||
        boost.bins > 256 || boost.min_child_samples < 1 || !(boost.min_sum_hessian >= 0.0) || !(boost.lambda_l2 >= 0.0))
        throw ConfigError("boosted trees: invalid hyperparameters");
}

std::vector<double> Model::predict_score(const Matrix& x) const
{
    if (static_cast<std::size_t>(x.cols()) != columns_)
        throw DataError("predict: model expects " + std::to_string(columns_) + " columns, got " + std::to_string(x.cols()));
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index r = 0; r < x.rows(); ++r) out[static_cast<std::size_t>(r)] = score(row_span(x, r));
    return out;
}

std::vector<int> Model::predict(const Matrix& x) const
{
    std::vector<int> out;
    for (double s : predict_score(x)) out.push_back(s > 0.5 ? 1 : 0);
    return out;
}

namespace reference {

std::vector<double> predict_score(const Model& model, const Matrix& x)
{
    if (static_cast<std::size_t>(x.cols()) != model.columns()) throw DataError("predict: column count mismatch");
    std::vector<double> out;
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(model.score(row_span(x, r)));
    return out;
}

} // namespace reference

Metrics evaluate(std::span<const int> y_true, std::span<const int> y_pred)
{
    if (y_true.empty()) throw DataError("evaluate: empty input");
    if (y_true.size() != y_pred.size()) throw DataError("evaluate: label and prediction counts differ");
    double confusion[2][2] = {{0, 0}, {0, 0}}; // [true][pred]
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1))
            throw DataError("evaluate: labels must be 0 or 1");
        confusion[y_true[i]][y_pred[i]] += 1.0;
    }
    const double n = static_cast<double>(y_true.size());
    Metrics m;
    m.accuracy = (confusion[0][0] + confusion[1][1]) / n;
    for (int c = 0; c < 2; ++c) {
        const double tp = confusion[c][c];
        const double support = confusion[c][0] + confusion[c][1];
        const double predicted = confusion[0][c] + confusion[1][c];
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = support > 0 ? tp / support : 0.0;
        const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        const double w = support / n;
        m.precision += w * precision;
        m.recall += w * recall;
        m.f1 += w * f1;
    }
    return m;
}

void FoldPlan::validate() const
{
    if (folds.empty()) throw ConfigError("fold plan: no folds");
    std::set<std::string> tested;
    std::set<std::string> everyone;
    for (const Fold& f : folds) {
        for (const auto& id : f.test) everyone.insert(id);
        for (const auto& id : f.train) everyone.insert(id);
    }
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const Fold& f = folds[i];
        if (f.test.empty()) throw DataError("fold plan: fold " + std::to_string(i) + " has no test participants");
        std::set<std::string> train(f.train.begin(), f.train.end());
        for (const auto& id : f.test) {
            if (train.count(id)) throw DataError("fold plan: participant " + id + " is in train and test of fold " + std::to_string(i));
            if (!tested.insert(id).second) throw DataError("fold plan: participant " + id + " tested twice");
        }
        if (train.size() + f.test.size() != everyone.size())
            throw DataError("fold plan: fold " + std::to_string(i) + " does not cover every participant");
    }
    if (tested != everyone) throw DataError("fold plan: some participants are never tested");
}

FoldPlan make_fold_plan(std::span<const ParticipantGroup> participants, int n_folds, std::uint64_t seed)
{
    if (n_folds < 2) throw ConfigError("folds must be >= 2");
    std::vector<std::string> by_class[2];
    std::set<std::string> seen;
    for (const auto& [id, group] : participants) {
        if (!seen.insert(id).second) throw DataError("fold plan: duplicate participant " + id);
        by_class[label_of(group)].push_back(id);
    }
    const auto folds = static_cast<std::size_t>(n_folds);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < folds)
            throw DataError("fold plan: " + std::to_string(by_class[c].size()) + " " +
                            std::string(c == 1 ? "patients" : "controls") + " for " + std::to_string(n_folds) + " folds");
    }

    FoldPlan plan;
    plan.folds.resize(folds);
    // Controls continue the deal where patients stopped, keeping fold totals level.
    std::size_t next = 0;
    for (int c : {1, 0}) {
        auto ids = by_class[c];
        std::sort(ids.begin(), ids.end());
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
        rng.shuffle(ids);
        for (const auto& id : ids) plan.folds[next++ % folds].test.push_back(id);
    }
    for (Fold& f : plan.folds) {
        std::sort(f.test.begin(), f.test.end());
        const std::set<std::string> test(f.test.begin(), f.test.end());
        for (const auto& id : seen)
            if (!test.count(id)) f.train.push_back(id);
    }
    plan.validate();
    return plan;
}

std::vector<ParticipantGroup> participants_of(const EpochSet& epochs)
{
    std::vector<ParticipantGroup> out;
    std::set<std::string> seen;
    for (const Epoch& e : epochs.epochs)
        if (seen.insert(e.participant_id).second) out.emplace_back(e.participant_id, e.group);
    return out;
}

namespace {

std::vector<std::size_t> rows_of(const FeatureMatrix& fm, const std::vector<std::string>& ids)
{
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < fm.participant_ids.size(); ++r)
        if (wanted.count(fm.participant_ids[r])) rows.push_back(r);
    return rows;
}

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& rows)
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

FoldResult run_fold(const FeatureMatrix& fm, const FeatureConfig& features, const ClassifierSpec& spec,
    const Fold& fold, std::size_t index)
{
    const std::string where = "fold " + std::to_string(index) + ": ";
    const auto train_rows = rows_of(fm, fold.train);
    const auto test_rows = rows_of(fm, fold.test);
    {
        const std::set<std::string> train_ids(fold.train.begin(), fold.train.end());
        for (std::size_t r : test_rows)
            if (train_ids.count(fm.participant_ids[r])) throw DataError(where + "participant in both train and test");
    }
    if (train_rows.empty() || test_rows.empty()) throw DataError(where + "no trials in train or test set");

    std::vector<int> train_y;
    for (std::size_t r : train_rows) train_y.push_back(fm.y[r]);
    if (std::count(train_y.begin(), train_y.end(), 1) == 0 || std::count(train_y.begin(), train_y.end(), 0) == 0)
        throw DataError(where + "training data is single-class");

    const Matrix train_full = take_rows(fm.x, train_rows);
    FoldResult res;
    res.test_participants = fold.test;
    res.test_rows = test_rows;
    try {
        const auto columns = static_cast<std::size_t>(fm.x.cols());
        const std::size_t k = features.select_k ? features.select_k : std::min(default_select_k(features.mode), columns);
        if (k > columns)
            throw ConfigError("select-k " + std::to_string(k) + " exceeds the " + std::to_string(columns) + " feature columns");
        res.selected = select_k_best(anova_f_scores(train_full, train_y), k);
        std::sort(res.selected.begin(), res.selected.end());

        res.scaler = Standardizer::fit(select_columns(train_full, res.selected));
        res.train_x = res.scaler.apply(select_columns(train_full, res.selected));
        res.test_x = res.scaler.apply(select_columns(take_rows(fm.x, test_rows), res.selected));

        ClassifierSpec fold_spec = spec;
        fold_spec.seed = spec.seed ^ static_cast<std::uint64_t>(index);
        res.model = fit(fold_spec, res.train_x, train_y);
    } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
    } catch (const DataError& e) {
        throw DataError(where + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(where + e.what());
    }

    res.test_score = res.model->predict_score(res.test_x);
    for (double s : res.test_score) res.test_pred.push_back(s > 0.5 ? 1 : 0);
    for (std::size_t r : test_rows) res.test_y.push_back(fm.y[r]);
    res.metrics = evaluate(res.test_y, res.test_pred);
    return res;
}

} // namespace

CvResult cross_validate(const FeatureMatrix& fm, const FeatureConfig& features, const ClassifierSpec& spec,
    const FoldPlan& plan)
{
    fm.validate();
    spec.validate();
    plan.validate();
    {
        std::set<std::string> planned;
        for (const Fold& f : plan.folds) planned.insert(f.test.begin(), f.test.end());
        for (const auto& id : fm.participant_ids)
            if (!planned.count(id)) throw DataError("cross-validation: participant " + id + " missing from the fold plan");
    }

    CvResult cv;
    cv.feature_index = fm.feature_index;
    cv.folds.resize(plan.folds.size());
    std::vector<std::exception_ptr> errors(plan.folds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(plan.folds.size()); ++f) {
        try {
            const auto i = static_cast<std::size_t>(f);
            cv.folds[i] = run_fold(fm, features, spec, plan.folds[i], i);
        } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<int> y_true;
    std::vector<int> y_pred;
    for (const FoldResult& f : cv.folds) {
        y_true.insert(y_true.end(), f.test_y.begin(), f.test_y.end());
        y_pred.insert(y_pred.end(), f.test_pred.begin(), f.test_pred.end());
    }
    cv.pooled = evaluate(y_true, y_pred);
    return cv;
}

CvResult cross_validate(const EpochSet& epochs, const std::string& task, const FeatureConfig& features,
    const ClassifierSpec& spec, const FoldPlan& plan)
{
    return cross_validate(build_features(epochs, task, features.mode), features, spec, plan);
}

} // namespace nirscope
