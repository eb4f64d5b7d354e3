// Serial reference kernels against their OpenMP counterparts.
// Thread count follows NIRSCOPE_THREADS (or OMP_NUM_THREADS).
#include "nirscope/explain.hpp"
#include "nirscope/features.hpp"
#include "nirscope/learn.hpp"
#include "nirscope/parallel.hpp"
#include "nirscope/pipeline.hpp"
#include "nirscope/rng.hpp"
#include "nirscope/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace nirscope;

const SynthResult& one_recording()
{
    static const SynthResult r = [] {
        SynthConfig c;
        c.n_patients = 1;
        c.n_controls = 1;
        return generate_dataset(c);
    }();
    return r;
}

struct Table {
    Matrix x;
    std::vector<int> y;
};

Table random_table(Eigen::Index rows, Eigen::Index cols)
{
    Rng rng = Rng::stream(7, 0);
    Table t{Matrix(rows, cols), {}};
    for (Eigen::Index r = 0; r < rows; ++r) {
        t.y.push_back(static_cast<int>(r % 2));
        for (Eigen::Index c = 0; c < cols; ++c) t.x(r, c) = rng.normal() + 0.3 * t.y.back() * (c % 7 == 0);
    }
    return t;
}

template <bool Parallel>
void BM_preprocess(benchmark::State& state)
{
    const auto& d = one_recording().dataset;
    const PreprocessConfig cfg;
    for (auto _ : state) {
        auto h = Parallel ? preprocess_recording(d.recordings[0], d.montage, cfg)
                          : reference::preprocess_recording(d.recordings[0], d.montage, cfg);
        benchmark::DoNotOptimize(h.hbo.data());
    }
}

template <bool Parallel>
void BM_anova(benchmark::State& state)
{
    const Table t = random_table(240, state.range(0));
    for (auto _ : state) {
        auto f = Parallel ? anova_f_scores(t.x, t.y) : reference::anova_f_scores(t.x, t.y);
        benchmark::DoNotOptimize(f.data());
    }
}

template <bool Parallel>
void BM_predict(benchmark::State& state)
{
    const Table train = random_table(200, 40);
    const Table test = random_table(state.range(0), 40);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::random_forest;
    const auto model = fit(spec, train.x, train.y);
    for (auto _ : state) {
        auto s = Parallel ? model->predict_score(test.x) : reference::predict_score(*model, test.x);
        benchmark::DoNotOptimize(s.data());
    }
}

template <bool Parallel>
void BM_exact_shapley(benchmark::State& state)
{
    const auto groups_n = static_cast<std::size_t>(state.range(0));
    const Table train = random_table(120, static_cast<Eigen::Index>(2 * groups_n));
    ClassifierSpec spec;
    const auto model = fit(spec, train.x, train.y);
    const Matrix background = make_background(train.x);
    FeatureGroups groups(groups_n);
    for (std::size_t g = 0; g < groups_n; ++g) groups[g] = {2 * g, 2 * g + 1};
    const std::vector<double> instance(train.x.row(0).begin(), train.x.row(0).end());
    const ScoreFunction score = [&](std::span<const double> row) { return model->score(row); };
    for (auto _ : state) {
        auto a = Parallel ? exact_shapley(score, background, instance, groups)
                          : reference::exact_shapley(score, background, instance, groups);
        benchmark::DoNotOptimize(a.phi.data());
    }
}

BENCHMARK_TEMPLATE(BM_preprocess, false)->Name("preprocess_recording/serial")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_preprocess, true)->Name("preprocess_recording/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_anova, false)->Name("anova_f_scores/serial")->Arg(160)->Arg(3120);
BENCHMARK_TEMPLATE(BM_anova, true)->Name("anova_f_scores/openmp")->Arg(160)->Arg(3120);
BENCHMARK_TEMPLATE(BM_predict, false)->Name("predict_score/serial")->Arg(240);
BENCHMARK_TEMPLATE(BM_predict, true)->Name("predict_score/openmp")->Arg(240);
BENCHMARK_TEMPLATE(BM_exact_shapley, false)->Name("exact_shapley/serial")->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_exact_shapley, true)->Name("exact_shapley/openmp")->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

} // namespace

int main(int argc, char** argv)
{
    configure_threads_from_env();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
