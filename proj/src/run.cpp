#include "nirscope/run.hpp"

#include "nirscope/dataset_io.hpp"
#include "nirscope/error.hpp"
#include "nirscope/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace nirscope {

namespace fs = std::filesystem;

std::string_view to_string(PoolMode m) { return m == PoolMode::sample ? "sample" : "trial"; }

PoolMode parse_pool_mode(std::string_view s)
{
    if (s == "sample") return PoolMode::sample;
    if (s == "trial") return PoolMode::trial;
    throw ConfigError("unknown pool mode '" + std::string(s) + "' (expected sample or trial)");
}

void PipelineConfig::validate() const
{
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (task.empty() || task == "rest") throw ConfigError("task label must be a nonempty task name");
    if (curve_channels < 1) throw ConfigError("curve-channels must be >= 1");
    if (peak_roi.empty()) throw ConfigError("peak ROI must be named");
    if (compare.empty()) throw ConfigError("at least one model is needed for the metrics table");
    if (explain_config.exact_max_groups > kMaxExactGroups)
        throw ConfigError("exact-max-groups above " + std::to_string(kMaxExactGroups));
    if (explain_config.samples < 4) throw ConfigError("samples must be >= 4");
    classifier.validate();
    preprocess.motion.validate();
    if (!dataset) synth.validate();
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body())
{
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    } catch (const std::exception& e) {
        throw NumericalError(name + ": " + e.what());
    }
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string list(const std::vector<std::string>& items)
{
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + quote(items[i]);
    return out + "]";
}

std::string boolean(bool b) { return b ? "true" : "false"; }

std::string short_model_name(ClassifierKind k)
{
    switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::random_forest: return "rf";
    case ClassifierKind::linear_svm: return "svm";
    case ClassifierKind::boosted_trees: return "gbdt";
    }
    return "?";
}

std::string chromophore_label(Chromophore c) { return c == Chromophore::hbo ? "HbO" : "HbR"; }

std::vector<std::string> roi_channels(const Montage& montage, const std::string& roi)
{
    if (const auto it = montage.roi_map.find(roi); it != montage.roi_map.end()) return it->second;
    std::vector<std::string> out;
    std::stringstream ss(roi);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    for (const auto& ch : out)
        if (!montage.find(ch)) throw ConfigError("peak ROI '" + roi + "' is neither a montage ROI nor a channel list");
    if (out.empty()) throw ConfigError("peak ROI '" + roi + "' is empty");
    return out;
}

std::vector<double> pooled_values(const EpochSet& epochs, const std::string& task, Group group, std::size_t channel,
    Chromophore chrom, PoolMode pool)
{
    std::vector<double> out;
    for (const Epoch& e : epochs.epochs) {
        if (e.task != task || e.group != group) continue;
        const Series& s = e.of(chrom)[channel];
        if (pool == PoolMode::sample)
            out.insert(out.end(), s.begin(), s.end());
        else
            out.push_back(mean(s));
    }
    return out;
}




std::string comparisons_csv(const std::vector<GroupComparison>& rows)
{
    std::string out = "channel,chromophore,control_n,control_mean,control_sd,patient_n,patient_mean,patient_sd,"
                      "t_pooled,df_pooled,p_pooled,t_welch,df_welch,p_welch,levene_f,levene_p\n";
    for (const auto& r : rows) {
        out += r.channel + "," + std::string(to_string(r.chromophore));
        for (double v : {r.control.n, r.control.mean, r.control.sd, r.patient.n, r.patient.mean, r.patient.sd,
                 r.pooled.statistic, r.pooled.df1, r.pooled.p_two_sided, r.welch.statistic, r.welch.df1,
                 r.welch.p_two_sided, r.levene.statistic, r.levene.p_two_sided})
            out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

const char* kControlColor = "#1f77b4";
const char* kPatientColor = "#d62728";

std::string provenance_json(const PipelineConfig& config, const RunReport& report, const std::vector<HemoSeries>& hemo,
    const std::vector<std::string>& stages)
{
    nlohmann::ordered_json j;
    j["tool"] = std::string(kToolVersion);
    j["source"] = config.dataset ? config.dataset->generic_string() : std::string("synthetic");
    j["seed"] = config.seed;
    if (!config.dataset) j["synth_seed"] = config.synth.seed;
    j["stages"] = stages;
    j["config"] = config_echo(config);
    j["participants"] = report.epochs.epochs.empty() ? 0 : participants_of(report.epochs).size();
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const HemoSeries& h : hemo) {
        nlohmann::ordered_json p;
        p["participant_id"] = h.participant_id;
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& s : h.provenance.steps()) list.push_back({{"step", s.step}, {"parameters", s.parameters}});
        p["steps"] = std::move(list);
        steps.push_back(std::move(p));
    }
    j["preprocessing"] = std::move(steps);
    if (report.explanation) {
        j["explain"] = {{"exact", report.explanation->exact}, {"max_groups", report.explanation->max_groups},
            {"attributions", report.explanation->attributions.size()}};
    }
    return j.dump(2) + "\n";
}

void check_output_target(const fs::path& out)
{
    if (fs::exists(out)) {
        if (!fs::is_directory(out)) throw ConfigError("output path " + out.string() + " exists and is not a directory");
        if (!fs::is_empty(out) && !fs::exists(out / "provenance.json"))
            throw ConfigError("output directory " + out.string() + " is not empty and holds no previous report");
    }
}

} // namespace

std::string metrics_csv(const std::vector<ModelMetrics>& metrics)
{
    std::string out = "model,fold,accuracy,precision,recall,f1\n";
    auto row = [&](const std::string& model, const std::string& fold, const Metrics& m) {
        out += model + "," + fold + "," + format_double(m.accuracy) + "," + format_double(m.precision) + "," +
               format_double(m.recall) + "," + format_double(m.f1) + "\n";
    };
    for (const auto& mm : metrics) {
        for (std::size_t f = 0; f < mm.folds.size(); ++f) row(std::string(to_string(mm.kind)), std::to_string(f), mm.folds[f]);
        row(std::string(to_string(mm.kind)), "pooled", mm.pooled);
    }
    return out;
}

std::string importance_csv(const ChannelImportance& imp)
{
    std::string out = "channel,chromophore,mean_abs_shap\n";
    for (const auto& e : imp) out += e.channel + "," + std::string(to_string(e.chromophore)) + "," + format_double(e.mean_abs_shap) + "\n";
    return out;
}

std::string peaks_csv(const std::vector<PeakTiming>& peaks)
{
    std::string out = "participant,group,roi,chromophore,time_to_peak_s\n";
    for (const auto& p : peaks) {
        std::string roi = p.roi; // channel lists are written S1-D1+S2-D1
        std::replace(roi.begin(), roi.end(), ',', '+');
        out += p.participant_id + "," + std::string(to_string(p.group)) + "," + roi + "," +
               std::string(to_string(p.chromophore)) + "," + format_double(p.time_to_peak_s) + "\n";
    }
    return out;
}

std::string importance_svg(const ChannelImportance& importance, const std::string& title)
{
    std::vector<double> values;
    std::vector<std::string> labels;
    SvgBarOptions opts;
    opts.title = title;
    for (const auto& e : importance) {
        values.push_back(e.mean_abs_shap);
        labels.push_back(e.channel + " " + chromophore_label(e.chromophore));
        opts.colors.push_back(e.chromophore == Chromophore::hbo ? kPatientColor : kControlColor);
    }
    return svg_bar_chart(values, labels, opts);
}

std::string peaks_svg(const std::vector<PeakTiming>& peaks, const std::string& title)
{
    std::vector<double> values;
    std::vector<std::string> labels;
    SvgBarOptions opts;
    opts.title = title;
    opts.y_label = "time to peak (s)";
    for (const auto& p : peaks) {
        values.push_back(p.time_to_peak_s);
        labels.push_back(p.participant_id);
        opts.colors.push_back(p.group == Group::patient ? kPatientColor : kControlColor);
    }
    return svg_bar_chart(values, labels, opts);
}

std::string config_echo(const PipelineConfig& c)
{
    std::ostringstream s;
    if (c.dataset) s << "dataset = " << quote(c.dataset->generic_string()) << "\n";
    s << "seed = " << c.seed << "\n";
    if (!c.dataset) {
        s << "synth-seed = " << c.synth.seed << "\n";
        s << "patients = " << c.synth.n_patients << "\n";
        s << "controls = " << c.synth.n_controls << "\n";
        s << "effect-channels = " << list(c.synth.effect.target_channels) << "\n";
        s << "amplitude-ratio = " << format_double(c.synth.effect.amplitude_ratio) << "\n";
        s << "peak-delay = " << format_double(c.synth.effect.peak_delay_s) << "\n";
        s << "hbo-weight = " << format_double(c.synth.effect.hbo_weight) << "\n";
        s << "hbr-weight = " << format_double(c.synth.effect.hbr_weight) << "\n";
        s << "noise-scale = " << format_double(c.synth.noise.white_od / NoiseSpec{}.white_od) << "\n";
    }
    const auto& p = c.preprocess;
    s << "low-cut = " << format_double(p.filter.low_cut_hz) << "\n";
    s << "high-cut = " << format_double(p.filter.high_cut_hz) << "\n";
    s << "filter-order = " << p.filter.order << "\n";
    s << "motion-amp-sigma = " << format_double(p.motion.amp_sigma) << "\n";
    s << "motion-iqr = " << format_double(p.motion.iqr_multiplier) << "\n";
    s << "spline-p = " << format_double(p.motion.spline_p) << "\n";
    s << "short-channel = " << boolean(p.short_channel) << "\n";
    s << "motion-correction = " << boolean(p.motion_correction) << "\n";
    s << "band-pass = " << boolean(p.band_pass) << "\n";
    s << "window = " << format_double(c.epochs.window_s) << "\n";
    s << "baseline = " << format_double(c.epochs.baseline_s) << "\n";
    s << "task = " << quote(c.task) << "\n";
    s << "feature-mode = " << quote(std::string(to_string(c.features.mode))) << "\n";
    s << "select-k = " << c.features.select_k << "\n";
    s << "model = " << quote(short_model_name(c.classifier.kind)) << "\n";
    std::vector<std::string> compare;
    for (auto k : c.compare) compare.push_back(short_model_name(k));
    s << "compare = " << list(compare) << "\n";
    s << "knn-k = " << c.classifier.knn.k << "\n";
    s << "folds = " << c.folds << "\n";
    s << "explain = " << boolean(c.explain) << "\n";
    s << "samples = " << c.explain_config.samples << "\n";
    s << "exact-max-groups = " << c.explain_config.exact_max_groups << "\n";
    s << "peak-roi = " << quote(c.peak_roi) << "\n";
    s << "peak-chromophore = " << quote(std::string(to_string(c.peak_chromophore))) << "\n";
    s << "pool = " << quote(std::string(to_string(c.pool))) << "\n";
    s << "curve-channels = " << c.curve_channels << "\n";
    return s.str();
}

std::vector<std::string> report_file_names(const RunReport& report)
{
    std::vector<std::string> names;
    for (const auto& [name, content] : report.files) names.push_back(name);
    return names;
}

void write_report(const RunReport& report, const fs::path& dir)
{
    fs::create_directories(dir);
    for (const auto& [name, content] : report.files) write_text_file(dir / name, content);
}

PreparedData prepare_data(const PipelineConfig& config)
{
    PreparedData out;
    Dataset data;
    if (config.dataset) {
        out.stages.push_back("ingest");
        data = stage("ingest", [&] { return load_dataset(*config.dataset); });
    } else {
        out.stages.push_back("synth");
        stage("synth", [&] {
            SynthResult r = generate_dataset(config.synth, config.preprocess.table);
            data = std::move(r.dataset);
            out.truth = std::move(r.truth);
        });
    }
    out.montage = data.montage;
    if (data.kind == DatasetKind::raw) {
        out.stages.push_back("preprocess");
        out.hemo = stage("preprocess", [&] { return preprocess_dataset(data, config.preprocess); });
    } else {
        out.hemo = std::move(data.hemo);
    }
    out.stages.push_back("epoch");
    out.epochs = stage("epoch", [&] { return segment_all(out.hemo, config.epochs); });
    return out;
}

RunReport run_pipeline(const PipelineConfig& config)
{
    stage("config", [&] {
        config.validate();
        if (config.output) check_output_target(*config.output);
    });

    PreparedData data = prepare_data(config);
    RunReport report;
    report.montage = std::move(data.montage);
    report.truth = std::move(data.truth);
    report.epochs = std::move(data.epochs);
    const std::vector<HemoSeries>& hemo = data.hemo;
    std::vector<std::string>& stages = data.stages;

    stages.push_back("features");
    const FeatureMatrix fm = stage("features", [&] {
        FeatureMatrix m = build_features(report.epochs, config.task, config.features.mode);
        const auto columns = static_cast<std::size_t>(m.x.cols());
        if (config.features.select_k > columns)
            throw ConfigError("select-k " + std::to_string(config.features.select_k) + " exceeds the " +
                              std::to_string(columns) + " feature columns");
        return m;
    });

    stages.push_back("train");
    stage("train", [&] {
        const auto participants = participants_of(report.epochs);
        const FoldPlan plan = make_fold_plan(participants, config.folds, config.seed);
        std::vector<ClassifierKind> kinds = config.compare;
        if (std::find(kinds.begin(), kinds.end(), config.classifier.kind) == kinds.end()) kinds.push_back(config.classifier.kind);
        for (ClassifierKind kind : kinds) {
            ClassifierSpec spec = config.classifier;
            spec.kind = kind;
            spec.seed = config.seed;
            CvResult cv = cross_validate(fm, config.features, spec, plan);
            ModelMetrics mm;
            mm.kind = kind;
            for (const auto& f : cv.folds) mm.folds.push_back(f.metrics);
            mm.pooled = cv.pooled;
            if (std::find(config.compare.begin(), config.compare.end(), kind) != config.compare.end())
                report.metrics.push_back(mm);
            if (kind == config.classifier.kind) report.cv = std::move(cv);
        }
    });

    const auto long_labels = report.montage.long_channel_labels();
    if (config.explain) {
        stages.push_back("explain");
        report.explanation = stage("explain", [&] {
            ExplainConfig ec = config.explain_config;
            ec.seed = config.seed;
            return explain_cross_validation(report.cv, long_labels, ec);
        });
    }

    stages.push_back("stats");
    stage("stats", [&] {
        const auto roi = roi_channels(report.montage, config.peak_roi);
        report.peaks = participant_peak_timing(report.epochs, config.task, config.peak_roi, roi, config.peak_chromophore);
        std::vector<double> patient;
        std::vector<double> control;
        for (const auto& p : report.peaks) (p.group == Group::patient ? patient : control).push_back(p.time_to_peak_s);
        if (patient.size() >= 2 && control.size() >= 2) report.peak_test = stats::t_test(patient, control, true);

        for (std::size_t c = 0; c < report.epochs.channels.size(); ++c) {
            for (Chromophore chrom : {Chromophore::hbo, Chromophore::hbr}) {
                const auto ctl = pooled_values(report.epochs, config.task, Group::control, c, chrom, config.pool);
                const auto pat = pooled_values(report.epochs, config.task, Group::patient, c, chrom, config.pool);
                if (ctl.size() < 2 || pat.size() < 2) continue;
                GroupComparison g;
                g.channel = report.epochs.channels[c];
                g.chromophore = chrom;
                g.control = stats::summarize(ctl);
                g.patient = stats::summarize(pat);
                g.pooled = stats::t_test_from_summary(g.control, g.patient, true);
                g.welch = stats::t_test_from_summary(g.control, g.patient, false);
                g.levene = stats::levene({ctl, pat});
                report.comparisons.push_back(g);
            }
        }
    });

    stages.push_back("report");
    stage("report", [&] {
        auto& files = report.files;
        files["metrics.csv"] = metrics_csv(report.metrics);
        files["group_tests.csv"] = comparisons_csv(report.comparisons);
        files["time_to_peak.csv"] = peaks_csv(report.peaks);

        files["time_to_peak.svg"] =
            peaks_svg(report.peaks, "Time to peak, " + chromophore_label(config.peak_chromophore) + ", ROI " + config.peak_roi);

        // Group curves for the most important channels (montage order without explain).
        std::vector<std::pair<std::string, Chromophore>> curve_targets;
        if (report.explanation) {
            for (const auto& e : report.explanation->importance) {
                if (curve_targets.size() >= config.curve_channels) break;
                curve_targets.emplace_back(e.channel, e.chromophore);
            }
            files["channel_importance.csv"] = importance_csv(report.explanation->importance);
            files["channel_importance.svg"] = importance_svg(report.explanation->importance,
                "Channel importance (" + std::string(to_string(config.features.mode)) + " features, " +
                    (report.explanation->exact ? "exact" : "kernel") + " Shapley)");
        } else {
            for (std::size_t c = 0; c < report.epochs.channels.size() && curve_targets.size() < config.curve_channels; ++c)
                curve_targets.emplace_back(report.epochs.channels[c], Chromophore::hbr);
        }

        std::vector<CurveSeries> curves;
        const char* dark[] = {"#08306b", "#67000d"};
        for (std::size_t i = 0; i < curve_targets.size(); ++i) {
            const auto& [channel, chrom] = curve_targets[i];
            const auto it = std::find(report.epochs.channels.begin(), report.epochs.channels.end(), channel);
            const auto c = static_cast<std::size_t>(it - report.epochs.channels.begin());
            for (Group g : {Group::control, Group::patient}) {
                const BlockAverage avg = block_average(report.epochs, {config.task, g, std::nullopt});
                CurveSeries cs;
                cs.name = channel + " " + chromophore_label(chrom) + " " + std::string(to_string(g));
                for (double v : avg.mean_of(chrom)[c]) cs.mean.push_back(v * 1e6);
                for (double v : avg.std_of(chrom)[c]) cs.std.push_back(v * 1e6);
                cs.color = i == 0 ? (g == Group::control ? kControlColor : kPatientColor) : dark[g == Group::control ? 0 : 1];
                cs.dashed = i > 0;
                curves.push_back(std::move(cs));
            }
        }
        SvgCurveOptions copts;
        copts.title = "Block average, task " + config.task;
        files["block_average.svg"] = svg_curves(curves, report.epochs.sample_rate_hz, copts);

        if (report.truth) files["ground_truth.json"] = ground_truth_report(*report.truth);
        files["config.toml"] = config_echo(config);
        files["provenance.json"] = provenance_json(config, report, hemo, stages);

        if (config.output) {
            const fs::path out = *config.output;
            fs::path staging = out;
            staging += ".partial";
            fs::remove_all(staging);
            try {
                write_report(report, staging);
                if (fs::exists(out)) fs::remove_all(out);
                fs::rename(staging, out);
            } catch (...) {
                std::error_code ec;
                fs::remove_all(staging, ec);
                throw;
            }
        }
    });
    return report;
}

} // namespace nirscope
