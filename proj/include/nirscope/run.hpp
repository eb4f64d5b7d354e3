#pragma once

#include "nirscope/epochs.hpp"
#include "nirscope/explain.hpp"
#include "nirscope/features.hpp"
#include "nirscope/learn.hpp"
#include "nirscope/pipeline.hpp"
#include "nirscope/stats.hpp"
#include "nirscope/synth.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nirscope {

inline constexpr std::string_view kToolVersion = "nirscope 0.1.0";

// How group comparisons pool observations: every time sample of every task
// trial, or one trial-mean value per trial.
enum class PoolMode { sample, trial };
std::string_view to_string(PoolMode m);
PoolMode parse_pool_mode(std::string_view s);

struct PipelineConfig {
    std::optional<std::filesystem::path> dataset; // raw or hemo dataset; synthesised when absent
    SynthConfig synth;
    PreprocessConfig preprocess;
    SegmentOptions epochs;
    std::string task = "single";
    FeatureConfig features;
    ClassifierSpec classifier;               // explained model
    std::vector<ClassifierKind> compare{ClassifierKind::knn, ClassifierKind::random_forest, ClassifierKind::linear_svm,
        ClassifierKind::boosted_trees};      // metrics table rows
    int folds = 6;
    std::uint64_t seed = 1;                  // fold plan, classifiers, explain
    bool explain = true;
    ExplainConfig explain_config;
    std::string peak_roi = "supramarginal";  // montage ROI for the time-to-peak figure
    Chromophore peak_chromophore = Chromophore::hbr;
    PoolMode pool = PoolMode::sample;
    std::size_t curve_channels = 2;          // top-ranked channels drawn as group curves
    std::optional<std::filesystem::path> output;

    void validate() const; // ConfigError
};

struct ModelMetrics {
    ClassifierKind kind = ClassifierKind::knn;
    std::vector<Metrics> folds;
    Metrics pooled;
};

struct GroupComparison {
    std::string channel;
    Chromophore chromophore = Chromophore::hbo;
    stats::GroupSummary control;
    stats::GroupSummary patient;
    stats::TestResult pooled;
    stats::TestResult welch;
    stats::TestResult levene;
};

struct RunReport {
    Montage montage;
    std::optional<GroundTruth> truth;
    EpochSet epochs;
    CvResult cv;
    std::vector<ModelMetrics> metrics;
    std::optional<ExplainResult> explanation;
    std::vector<PeakTiming> peaks;
    stats::TestResult peak_test; // patient vs control time to peak, pooled t
    std::vector<GroupComparison> comparisons;
    std::map<std::string, std::string> files; // report file name -> content
};

// Loaded or synthesised data carried through preprocessing and epoching.
struct PreparedData {
    Montage montage;
    std::optional<GroundTruth> truth;
    std::vector<HemoSeries> hemo;
    EpochSet epochs;
    std::vector<std::string> stages; // stages run so far
};

// The synth|ingest, preprocess and epoch stages of run_pipeline.
PreparedData prepare_data(const PipelineConfig& config);

// Stage order: synth|ingest, preprocess, epoch, features, train, explain,
// stats, report. Errors keep their type and are prefixed "<stage>: ".
// Files are written only when config.output is set; they are staged in a
// sibling directory and moved into place after every stage succeeded.
RunReport run_pipeline(const PipelineConfig& config);

// The report files in a stable order.
std::vector<std::string> report_file_names(const RunReport& report);

// Config echo in the `--config` file format of the CLI.
std::string config_echo(const PipelineConfig& config);

void write_report(const RunReport& report, const std::filesystem::path& dir);

// Report tables and charts; numbers use 17 significant digits.
std::string metrics_csv(const std::vector<ModelMetrics>& metrics);
std::string importance_csv(const ChannelImportance& importance);
std::string peaks_csv(const std::vector<PeakTiming>& peaks);
std::string importance_svg(const ChannelImportance& importance, const std::string& title);
std::string peaks_svg(const std::vector<PeakTiming>& peaks, const std::string& title);

} // namespace nirscope
