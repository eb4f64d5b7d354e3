#include "helpers.hpp"

#include "nirscope/explain.hpp"
#include "nirscope/features.hpp"
#include "nirscope/learn.hpp"
#include "nirscope/parallel.hpp"
#include "nirscope/pipeline.hpp"
#include "nirscope/synth.hpp"

#include <doctest.h>
#include <omp.h>

#include <cstdlib>

using namespace nirscope;

// Each OpenMP kernel against its serial twin at several thread counts. The
// per-item work is independent, so results must match bit for bit.

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed)
{
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const Series s = testutil::gaussian(static_cast<std::size_t>(cols), seed * 7919 + r);
        for (int c = 0; c < cols; ++c) m(r, c) = s[c];
    }
    return m;
}

struct ThreadGuard {
    int saved = omp_get_max_threads();
    ~ThreadGuard() { omp_set_num_threads(saved); }
};

} // namespace

TEST_CASE("preprocessing: OpenMP channel loop equals the serial loop")
{
    ThreadGuard guard;
    SynthConfig c;
    c.n_patients = 1;
    c.n_controls = 1;
    const auto r = generate_dataset(c);
    const HemoSeries want = reference::preprocess_recording(r.dataset.recordings[1], r.dataset.montage, {});
    for (int threads : {1, 2, 4}) {
        CAPTURE(threads);
        omp_set_num_threads(threads);
        const HemoSeries got = preprocess_recording(r.dataset.recordings[1], r.dataset.montage, {});
        CHECK(got.hbo == want.hbo);
        CHECK(got.hbr == want.hbr);
        CHECK(got.channels == want.channels);
    }
}

TEST_CASE("ANOVA F: OpenMP column loop equals the serial loop")
{
    ThreadGuard guard;
    const Matrix x = random_matrix(48, 777, 2);
    std::vector<int> y(48);
    for (int i = 0; i < 48; ++i) y[i] = i % 3 == 0;
    const auto want = reference::anova_f_scores(x, y);
    for (int threads : {1, 3, 4}) {
        omp_set_num_threads(threads);
        CHECK(anova_f_scores(x, y) == want);
    }
}

TEST_CASE("prediction: OpenMP row loop equals the serial loop for every classifier")
{
    ThreadGuard guard;
    const Matrix x = random_matrix(80, 12, 3), q = random_matrix(333, 12, 4);
    std::vector<int> y(80);
    for (int i = 0; i < 80; ++i) y[i] = x(i, 0) + 0.3 * x(i, 5) > 0.0;
    for (auto kind : {ClassifierKind::knn, ClassifierKind::random_forest, ClassifierKind::linear_svm, ClassifierKind::boosted_trees}) {
        CAPTURE(to_string(kind));
        ClassifierSpec s;
        s.kind = kind;
        omp_set_num_threads(4);
        const auto m = fit(s, x, y);
        omp_set_num_threads(1);
        const auto m1 = fit(s, x, y);
        const auto want = reference::predict_score(*m, q);
        CHECK(m1->predict_score(q) == want);
        for (int threads : {1, 4}) {
            omp_set_num_threads(threads);
            CHECK(m->predict_score(q) == want);
        }
    }
}

TEST_CASE("exact Shapley: OpenMP coalition loop equals the serial loop")
{
    ThreadGuard guard;
    const Matrix bg = random_matrix(6, 11, 5);
    const Series inst = testutil::gaussian(11, 6);
    FeatureGroups groups(11);
    for (std::size_t i = 0; i < 11; ++i) groups[i] = {i};
    const ScoreFunction f = [](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < x.size(); ++i) s += std::tanh(x[i] - x[i + 1]) * x[i];
        return s;
    };
    const Attribution want = reference::exact_shapley(f, bg, inst, groups);
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        const Attribution got = exact_shapley(f, bg, inst, groups);
        for (std::size_t i = 0; i < 11; ++i) CHECK(got.phi[i] == doctest::Approx(want.phi[i]).epsilon(1e-13));
        CHECK(got.base_value == want.base_value);
    }
}

TEST_CASE("NIRSCOPE_THREADS caps the worker count")
{
    ThreadGuard guard;
    omp_set_num_threads(4);
    ::setenv("NIRSCOPE_THREADS", "2", 1);
    CHECK(configure_threads_from_env() == 2);
    ::setenv("NIRSCOPE_THREADS", "zero", 1);
    CHECK(configure_threads_from_env() == 2);
    ::unsetenv("NIRSCOPE_THREADS");
    CHECK(max_threads() == 2);
}
