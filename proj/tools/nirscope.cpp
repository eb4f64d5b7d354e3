#include "nirscope/dataset_io.hpp"
#include "nirscope/error.hpp"
#include "nirscope/parallel.hpp"
#include "nirscope/report.hpp"
#include "nirscope/run.hpp"
#include "nirscope/stats.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace nirscope;
namespace fs = std::filesystem;

const std::vector<std::string> kModels{"knn", "rf", "svm", "gbdt"};

// Flag values as parsed; resolve() turns them into a PipelineConfig.
struct Options {
    PipelineConfig config;
    std::string dataset;
    std::string out;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> synth_seed;
    std::vector<std::string> effect_channels;
    double noise_scale = 1.0;
    bool short_channel = true;
    bool motion_correction = true;
    bool band_pass = true;
    std::string feature_mode = "summary";
    std::size_t select_k = 0;
    std::string model = "knn";
    std::vector<std::string> compare = kModels;
    bool explain = true;
    std::string peak_chromophore = "hbr";
    std::string pool = "sample";

    PipelineConfig resolve() const
    {
        PipelineConfig c = config;
        if (!dataset.empty()) c.dataset = fs::path(dataset);
        if (!out.empty()) c.output = fs::path(out);
        c.seed = seed;
        c.synth.seed = synth_seed.value_or(seed);
        c.synth.effect.target_channels = effect_channels;
        c.synth.noise = NoiseSpec{}.scaled(noise_scale);
        c.preprocess.short_channel = short_channel;
        c.preprocess.motion_correction = motion_correction;
        c.preprocess.band_pass = band_pass;
        c.features.mode = parse_feature_mode(feature_mode);
        c.features.select_k = select_k;
        c.classifier.kind = parse_classifier_kind(model);
        c.compare.clear();
        for (const auto& m : compare) c.compare.push_back(parse_classifier_kind(m));
        c.explain = explain;
        c.peak_chromophore = peak_chromophore == "hbo" ? Chromophore::hbo : Chromophore::hbr;
        c.pool = parse_pool_mode(pool);
        return c;
    }
};

void add_config_file(CLI::App* app)
{
    app->set_config("--config", "", "key = value file (as written to config.toml by run)");
    app->allow_config_extras(CLI::config_extras_mode::ignore);
}

void add_source_options(CLI::App* app, Options& o, bool with_dataset = true)
{
    auto& s = o.config.synth;
    if (with_dataset) app->add_option("--dataset", o.dataset, "dataset directory (synthetic data when omitted)");
    app->add_option("--seed", o.seed, "seed for synthesis, fold plan, classifiers and explanations");
    app->add_option("--synth-seed", o.synth_seed, "separate seed for the synthetic dataset");
    app->add_option("--patients", s.n_patients, "synthetic patients")->check(CLI::Range(1, 99));
    app->add_option("--controls", s.n_controls, "synthetic controls")->check(CLI::Range(1, 99));
    app->add_option("--effect-channels", o.effect_channels, "channels carrying the group effect")->delimiter(',');
    app->add_option("--amplitude-ratio", s.effect.amplitude_ratio, "patient amplitude factor in (0, 1]");
    app->add_option("--peak-delay", s.effect.peak_delay_s, "patient response latency shift (s)");
    app->add_option("--hbo-weight", s.effect.hbo_weight, "share of the effect applied to HbO");
    app->add_option("--hbr-weight", s.effect.hbr_weight, "share of the effect applied to HbR");
    app->add_option("--noise-scale", o.noise_scale, "multiplier on every default noise amplitude");
}

void add_preprocess_options(CLI::App* app, Options& o)
{
    auto& p = o.config.preprocess;
    app->add_option("--low-cut", p.filter.low_cut_hz, "band-pass low cutoff (Hz)");
    app->add_option("--high-cut", p.filter.high_cut_hz, "band-pass high cutoff (Hz)");
    app->add_option("--filter-order", p.filter.order, "total Butterworth order (even)");
    app->add_option("--motion-amp-sigma", p.motion.amp_sigma, "artifact amplitude threshold (series std)");
    app->add_option("--motion-iqr", p.motion.iqr_multiplier, "wavelet outlier IQR multiplier");
    app->add_option("--spline-p", p.motion.spline_p, "smoothing spline parameter");
    app->add_option("--short-channel", o.short_channel, "short-channel regression (true|false)");
    app->add_option("--motion-correction", o.motion_correction, "spline + wavelet correction (true|false)");
    app->add_option("--band-pass", o.band_pass, "band-pass filtering (true|false)");
}

void add_epoch_options(CLI::App* app, Options& o)
{
    app->add_option("--window", o.config.epochs.window_s, "epoch window (s)");
    app->add_option("--baseline", o.config.epochs.baseline_s, "pre-onset baseline (s)");
    app->add_option("--task", o.config.task, "task label to classify and compare");
}

void add_learning_options(CLI::App* app, Options& o)
{
    app->add_option("--feature-mode", o.feature_mode, "raw or summary")->check(CLI::IsMember({"raw", "summary"}));
    app->add_option("--select-k", o.select_k, "SelectKBest k (0 = mode default)");
    app->add_option("--model", o.model, "classifier to explain")->check(CLI::IsMember(kModels));
    app->add_option("--compare", o.compare, "classifiers in the metrics table")->delimiter(',')->check(CLI::IsMember(kModels));
    app->add_option("--knn-k", o.config.classifier.knn.k, "KNN neighbours")->check(CLI::PositiveNumber);
    app->add_option("--folds", o.config.folds, "cross-participant folds")->check(CLI::Range(2, 1000));
}

void add_explain_options(CLI::App* app, Options& o)
{
    auto& e = o.config.explain_config;
    app->add_option("--explain", o.explain, "Shapley attribution (true|false)");
    app->add_option("--samples", e.samples, "kernel SHAP coalitions");
    app->add_option("--exact-max-groups", e.exact_max_groups, "exact enumeration up to this many channel groups");
}

void add_stats_options(CLI::App* app, Options& o)
{
    app->add_option("--peak-roi", o.config.peak_roi, "montage ROI or comma-separated channels for time to peak");
    app->add_option("--peak-chromophore", o.peak_chromophore, "hbo or hbr")->check(CLI::IsMember({"hbo", "hbr"}));
    app->add_option("--pool", o.pool, "group tests pool every sample or one mean per trial")
        ->check(CLI::IsMember({"sample", "trial"}));
    app->add_option("--curve-channels", o.config.curve_channels, "top channels drawn as group curves");
}

// A directory we may fill: absent, empty, or holding a previous output with `marker`.
void check_out_dir(const fs::path& dir, const std::string& marker)
{
    if (!fs::exists(dir)) return;
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !fs::exists(dir / marker))
        throw ConfigError(dir.string() + " is not empty and holds no previous " + marker);
    fs::remove_all(dir);
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        rows.push_back(std::move(fields));
    }
    return rows;
}

// One sample per line or comma-separated; a non-numeric first line is a header.
std::vector<double> read_samples(const fs::path& path)
{
    std::vector<double> out;
    const auto rows = read_csv(path);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& f : rows[r]) {
            try {
                out.push_back(parse_double(f));
            } catch (const DataError&) {
                if (r == 0) break;
                throw DataError(path.string() + " line " + std::to_string(r + 1) + ": not a number: " + f);
            }
        }
    }
    return out;
}

stats::GroupSummary parse_summary(const std::string& text)
{
    std::vector<double> v;
    std::stringstream s(text);
    std::string f;
    while (std::getline(s, f, ',')) v.push_back(parse_double(f));
    if (v.size() != 3) throw ConfigError("--summary expects n,mean,sd; got '" + text + "'");
    stats::GroupSummary g{v[0], v[1], v[2]};
    g.validate();
    return g;
}

void print_result(const std::string& name, const stats::TestResult& r)
{
    std::cout << name << "," << format_double(r.statistic) << "," << format_double(r.df1) << "," << format_double(r.df2)
              << "," << format_double(r.p_two_sided) << "," << format_double(r.mean_difference) << "\n";
}

CvResult cross_validate_prepared(const PipelineConfig& c, const PreparedData& data, ClassifierKind kind)
{
    const FeatureMatrix fm = build_features(data.epochs, c.task, c.features.mode);
    const auto columns = static_cast<std::size_t>(fm.x.cols());
    if (c.features.select_k > columns)
        throw ConfigError("features: select-k " + std::to_string(c.features.select_k) + " exceeds the " +
                          std::to_string(columns) + " feature columns");
    const FoldPlan plan = make_fold_plan(participants_of(data.epochs), c.folds, c.seed);
    ClassifierSpec spec = c.classifier;
    spec.kind = kind;
    spec.seed = c.seed;
    return cross_validate(fm, c.features, spec, plan);
}

int cmd_synth(const Options& o)
{
    const PipelineConfig c = o.resolve();
    c.synth.validate();
    const fs::path out(o.out);
    check_out_dir(out, std::string(kManifestName));
    SynthResult r = generate_dataset(c.synth, c.preprocess.table);
    save_dataset(r.dataset, out);
    write_text_file(out / "ground_truth.json", ground_truth_report(r.truth));
    std::cout << "wrote " << r.dataset.participant_count() << " recordings to " << out.string() << "\n";
    return 0;
}

int cmd_preprocess(const Options& o)
{
    const PipelineConfig c = o.resolve();
    if (!c.dataset) throw ConfigError("preprocess needs --dataset");
    Dataset raw = load_dataset(*c.dataset);
    if (raw.kind != DatasetKind::raw) throw DataError("preprocess: " + c.dataset->string() + " is already preprocessed");
    Dataset hemo;
    hemo.manifest = raw.manifest;
    hemo.kind = DatasetKind::hemo;
    hemo.sample_rate_hz = raw.sample_rate_hz;
    hemo.wavelengths_nm = raw.wavelengths_nm;
    hemo.montage = raw.montage;
    hemo.hemo = preprocess_dataset(raw, c.preprocess);
    const fs::path out(o.out);
    check_out_dir(out, std::string(kManifestName));
    save_dataset(hemo, out);
    std::cout << "wrote " << hemo.participant_count() << " preprocessed recordings to " << out.string() << "\n";
    return 0;
}

int cmd_epoch(const Options& o)
{
    const PipelineConfig c = o.resolve();
    const PreparedData data = prepare_data(c);
    const EpochSet& e = data.epochs;
    std::string listing = "participant_id,group,task,trial\n";
    for (const Epoch& ep : e.epochs)
        listing += ep.participant_id + "," + std::string(to_string(ep.group)) + "," + ep.task + "," + std::to_string(ep.trial) + "\n";

    std::string curves = "task,group,channel,chromophore,t_s,mean,std\n";
    std::set<std::string> tasks;
    for (const Epoch& ep : e.epochs) tasks.insert(ep.task);
    for (const std::string& task : tasks) {
        for (Group g : {Group::control, Group::patient}) {
            bool any = false;
            for (const Epoch& ep : e.epochs) any |= ep.task == task && ep.group == g;
            if (!any) continue;
            const BlockAverage avg = block_average(e, {task, g, std::nullopt});
            for (std::size_t ch = 0; ch < e.channels.size(); ++ch)
                for (Chromophore chrom : {Chromophore::hbo, Chromophore::hbr})
                    for (std::size_t i = 0; i < e.window_samples; ++i)
                        curves += task + "," + std::string(to_string(g)) + "," + e.channels[ch] + "," +
                                  std::string(to_string(chrom)) + "," + format_double(static_cast<double>(i) / e.sample_rate_hz) +
                                  "," + format_double(avg.mean_of(chrom)[ch][i]) + "," + format_double(avg.std_of(chrom)[ch][i]) + "\n";
        }
    }
    std::cout << e.epochs.size() << " epochs of " << e.window_samples << " samples over " << e.channels.size()
              << " channels\n";
    if (!o.out.empty()) {
        const fs::path out(o.out);
        check_out_dir(out, "epochs.csv");
        fs::create_directories(out);
        write_text_file(out / "epochs.csv", listing);
        write_text_file(out / "block_average.csv", curves);
    }
    return 0;
}

int cmd_train(const Options& o)
{
    const PipelineConfig c = o.resolve();
    c.validate();
    const PreparedData data = prepare_data(c);
    const CvResult cv = cross_validate_prepared(c, data, c.classifier.kind);
    ModelMetrics m{c.classifier.kind, {}, cv.pooled};
    for (const auto& f : cv.folds) m.folds.push_back(f.metrics);
    const std::string table = metrics_csv({m});
    std::cout << table;
    if (!o.out.empty()) write_text_file(o.out, table);
    return 0;
}

int cmd_explain(const Options& o)
{
    const PipelineConfig c = o.resolve();
    c.validate();
    const PreparedData data = prepare_data(c);
    const CvResult cv = cross_validate_prepared(c, data, c.classifier.kind);
    ExplainConfig ec = c.explain_config;
    ec.seed = c.seed;
    const ExplainResult r = explain_cross_validation(cv, data.montage.long_channel_labels(), ec);
    const std::string table = importance_csv(r.importance);
    std::cout << table;
    if (!o.out.empty()) {
        const fs::path out(o.out);
        check_out_dir(out, "channel_importance.csv");
        fs::create_directories(out);
        write_text_file(out / "channel_importance.csv", table);
        write_text_file(out / "channel_importance.svg",
            importance_svg(r.importance, "Channel importance (" + std::string(to_string(c.features.mode)) + " features, " +
                                             (r.exact ? "exact" : "kernel") + " Shapley)"));
    }
    return 0;
}

struct StatsOptions {
    std::vector<std::string> files;
    std::vector<std::string> summaries;
    std::string center = "mean";
};

std::vector<std::vector<double>> sample_groups(const StatsOptions& s)
{
    std::vector<std::vector<double>> groups;
    for (const auto& f : s.files) groups.push_back(read_samples(f));
    return groups;
}

std::vector<stats::GroupSummary> summary_groups(const StatsOptions& s)
{
    std::vector<stats::GroupSummary> out;
    if (!s.summaries.empty() && !s.files.empty()) throw ConfigError("give either sample files or --summary triplets");
    if (!s.summaries.empty())
        for (const auto& t : s.summaries) out.push_back(parse_summary(t));
    else
        for (const auto& g : sample_groups(s)) out.push_back(stats::summarize(g));
    return out;
}

int cmd_ttest(const StatsOptions& s)
{
    const auto g = summary_groups(s);
    if (g.size() != 2) throw ConfigError("ttest needs exactly two groups");
    std::cout << "test,statistic,df1,df2,p,mean_difference\n";
    print_result("t_pooled", stats::t_test_from_summary(g[0], g[1], true));
    print_result("t_welch", stats::t_test_from_summary(g[0], g[1], false));
    return 0;
}

int cmd_anova(const StatsOptions& s)
{
    const auto g = summary_groups(s);
    if (g.size() < 2) throw ConfigError("anova needs at least two groups");
    std::cout << "test,statistic,df1,df2,p,mean_difference\n";
    print_result("anova_f", stats::one_way_anova_from_summary(g));
    return 0;
}

int cmd_levene(const StatsOptions& s)
{
    if (!s.summaries.empty()) throw ConfigError("levene needs raw samples; --summary is not enough");
    const auto g = sample_groups(s);
    if (g.size() < 2) throw ConfigError("levene needs at least two sample files");
    std::cout << "test,statistic,df1,df2,p,mean_difference\n";
    print_result(s.center == "median" ? "brown_forsythe" : "levene",
        stats::levene(g, s.center == "median" ? stats::LeveneCenter::median : stats::LeveneCenter::mean));
    return 0;
}

// Re-renders the bar charts of a run directory from its CSV tables.
int cmd_report(const std::string& from)
{
    const fs::path dir(from);
    if (!fs::exists(dir / "provenance.json")) throw ConfigError(dir.string() + " is not a run output directory");
    int written = 0;
    if (fs::exists(dir / "channel_importance.csv")) {
        ChannelImportance imp;
        const auto rows = read_csv(dir / "channel_importance.csv");
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != 3) throw DataError("channel_importance.csv line " + std::to_string(r + 1) + ": 3 fields expected");
            imp.push_back({rows[r][0], parse_chromophore(rows[r][1]), parse_double(rows[r][2])});
        }
        write_text_file(dir / "channel_importance.svg", importance_svg(imp, "Channel importance"));
        ++written;
    }
    if (fs::exists(dir / "time_to_peak.csv")) {
        std::vector<PeakTiming> peaks;
        const auto rows = read_csv(dir / "time_to_peak.csv");
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != 5) throw DataError("time_to_peak.csv line " + std::to_string(r + 1) + ": 5 fields expected");
            peaks.push_back({rows[r][0], parse_group(rows[r][1]), rows[r][2], parse_chromophore(rows[r][3]), parse_double(rows[r][4])});
        }
        if (!peaks.empty())
            write_text_file(dir / "time_to_peak.svg", peaks_svg(peaks, "Time to peak, " + std::string(to_string(peaks.front().chromophore)) +
                                                                     ", ROI " + peaks.front().roi));
        ++written;
    }
    std::cout << "re-rendered " << written << " chart(s) in " << dir.string() << "\n";
    return 0;
}

int cmd_run(const Options& o)
{
    const PipelineConfig c = o.resolve();
    const RunReport r = run_pipeline(c);
    std::cout << r.epochs.epochs.size() << " epochs, " << r.epochs.channels.size() << " channels\n";
    for (const auto& m : r.metrics)
        std::printf("%-14s accuracy %.3f  precision %.3f  recall %.3f  f1 %.3f\n", std::string(to_string(m.kind)).c_str(),
            m.pooled.accuracy, m.pooled.precision, m.pooled.recall, m.pooled.f1);
    if (r.explanation) {
        std::cout << "top channels:";
        for (std::size_t i = 0; i < std::min<std::size_t>(4, r.explanation->importance.size()); ++i)
            std::cout << " " << r.explanation->importance[i].channel << "/" << to_string(r.explanation->importance[i].chromophore);
        std::cout << "\n";
    }
    std::cout << "report written to " << o.out << "\n";
    return 0;
}

int dispatch(int argc, char** argv)
{
    CLI::App app{"fNIRS preprocessing, classification, attribution and group statistics"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Options o;
    auto* synth = app.add_subcommand("synth", "generate a synthetic raw dataset with known ground truth");
    add_config_file(synth);
    add_source_options(synth, o, false);
    synth->add_option("--out", o.out, "output dataset directory")->required();

    auto* preprocess = app.add_subcommand("preprocess", "raw intensities to dHbO/dHbR");
    add_config_file(preprocess);
    preprocess->add_option("--dataset", o.dataset, "raw dataset directory")->required();
    add_preprocess_options(preprocess, o);
    preprocess->add_option("--out", o.out, "output dataset directory")->required();

    auto* epoch = app.add_subcommand("epoch", "segment task blocks and block-average them");
    add_config_file(epoch);
    add_source_options(epoch, o);
    add_preprocess_options(epoch, o);
    add_epoch_options(epoch, o);
    epoch->add_option("--out", o.out, "directory for epochs.csv and block_average.csv");

    auto* train = app.add_subcommand("train", "cross-participant validation of one classifier");
    add_config_file(train);
    add_source_options(train, o);
    add_preprocess_options(train, o);
    add_epoch_options(train, o);
    add_learning_options(train, o);
    train->add_option("--out", o.out, "metrics CSV file");

    auto* explain = app.add_subcommand("explain", "Shapley channel importance over the validation folds");
    add_config_file(explain);
    add_source_options(explain, o);
    add_preprocess_options(explain, o);
    add_epoch_options(explain, o);
    add_learning_options(explain, o);
    add_explain_options(explain, o);
    explain->add_option("--out", o.out, "directory for channel_importance.csv and .svg");

    StatsOptions so;
    auto* stats_cmd = app.add_subcommand("stats", "t-test, one-way ANOVA and Levene's test");
    stats_cmd->require_subcommand(1);
    auto add_groups = [&](CLI::App* sub, bool summaries) {
        sub->add_option("files", so.files, "one sample file per group (one value per line or comma-separated)");
        if (summaries) sub->add_option("--summary", so.summaries, "group summary n,mean,sd (repeat per group)");
    };
    auto* ttest = stats_cmd->add_subcommand("ttest", "independent-samples t-test, pooled and Welch");
    add_groups(ttest, true);
    auto* anova = stats_cmd->add_subcommand("anova", "one-way ANOVA");
    add_groups(anova, true);
    auto* levene = stats_cmd->add_subcommand("levene", "Levene's test for equal variances");
    add_groups(levene, false);
    levene->add_option("--center", so.center, "mean (Levene) or median (Brown-Forsythe)")->check(CLI::IsMember({"mean", "median"}));

    std::string from;
    auto* report = app.add_subcommand("report", "re-render the charts of a run directory from its tables");
    report->add_option("--from", from, "run output directory")->required();

    auto* run = app.add_subcommand("run", "full pipeline: data, preprocessing, epochs, validation, explanation, statistics, report");
    add_config_file(run);
    add_source_options(run, o);
    add_preprocess_options(run, o);
    add_epoch_options(run, o);
    add_learning_options(run, o);
    add_explain_options(run, o);
    add_stats_options(run, o);
    run->add_option("--out", o.out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*synth) return cmd_synth(o);
    if (*preprocess) return cmd_preprocess(o);
    if (*epoch) return cmd_epoch(o);
    if (*train) return cmd_train(o);
    if (*explain) return cmd_explain(o);
    if (*ttest) return cmd_ttest(so);
    if (*anova) return cmd_anova(so);
    if (*levene) return cmd_levene(so);
    if (*report) return cmd_report(from);
    if (*run) return cmd_run(o);
    return 2;
}

} // namespace

int main(int argc, char** argv)
{
    nirscope::configure_threads_from_env();
    try {
        return dispatch(argc, argv);
    } catch (const nirscope::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nirscope::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const nirscope::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    }
}
