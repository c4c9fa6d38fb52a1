#pragma once

// ============================================================================
// Evaluation: confusion metrics, temporal profiles, strategy comparison,
// content-view study
// ============================================================================
// Pure computations over prediction/label arrays plus two orchestrations:
// repeated train+eval cycles per strategy (mean and sample std per metric),
// and the TAP accuracy study that varies crop size and frame resolution to
// separate image content from image quality.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/image.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/datapipe.hpp"
#include "taprec/eventtrain.hpp"
#include "taprec/io/kvconfig.hpp"
#include "taprec/model.hpp"
#include "taprec/synthmovie.hpp"

namespace taprec {

// ---------------------------------------------------------------------------
// Confusion matrix and precision/recall
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    int64_t tn = 0, fp = 0, fn = 0, tp = 0;

    int64_t total() const { return tn + fp + fn + tp; }
    int64_t actual0() const { return tn + fp; }
    int64_t actual1() const { return fn + tp; }
    int64_t predicted0() const { return tn + fn; }
    int64_t predicted1() const { return fp + tp; }
};

// Per-class precision/recall; a metric whose denominator is zero (class
// never predicted, or absent from the labels) is the undefined marker NaN.
struct PrfReport {
    ConfusionMatrix counts;
    double precision0 = 0.0, recall0 = 0.0;
    double precision1 = 0.0, recall1 = 0.0;
    double accuracy = 0.0;
};

namespace evaldetail {

inline void check_binary(const std::vector<int>& v, const char* what) {
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i] != 0 && v[i] != 1)
            throw DataError(std::string(what) + "[" + std::to_string(i) + "] = " +
                            std::to_string(v[i]) + " is not a binary class");
}

inline double ratio_or_nan(int64_t num, int64_t den) {
    return den == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace evaldetail

inline ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                        const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw DataError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
    evaldetail::check_binary(predictions, "prediction");
    evaldetail::check_binary(labels, "label");
    ConfusionMatrix m;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            ++(predictions[i] == 1 ? m.tp : m.fn);
        else
            ++(predictions[i] == 1 ? m.fp : m.tn);
    }
    return m;
}

inline PrfReport prf_from_counts(const ConfusionMatrix& m) {
    using evaldetail::ratio_or_nan;
    PrfReport r;
    r.counts = m;
    r.precision0 = ratio_or_nan(m.tn, m.predicted0());
    r.recall0 = ratio_or_nan(m.tn, m.actual0());
    r.precision1 = ratio_or_nan(m.tp, m.predicted1());
    r.recall1 = ratio_or_nan(m.tp, m.actual1());
    r.accuracy = ratio_or_nan(m.tn + m.tp, m.total());
    return r;
}

inline PrfReport confusion_and_prf(const std::vector<int>& predictions,
                                   const std::vector<int>& labels) {
    return prf_from_counts(confusion_matrix(predictions, labels));
}

// ---------------------------------------------------------------------------
// Temporal error profiles
// ---------------------------------------------------------------------------

enum class PredCategory {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
    ActualPositive,
    ActualNegative
};

inline std::string pred_category_name(PredCategory c) {
    switch (c) {
        case PredCategory::TruePositive: return "tp";
        case PredCategory::FalsePositive: return "fp";
        case PredCategory::TrueNegative: return "tn";
        case PredCategory::FalseNegative: return "fn";
        case PredCategory::ActualPositive: return "actual1";
        case PredCategory::ActualNegative: return "actual0";
    }
    return "?";
}

inline PredCategory pred_category_from_name(const std::string& s) {
    if (s == "tp") return PredCategory::TruePositive;
    if (s == "fp") return PredCategory::FalsePositive;
    if (s == "tn") return PredCategory::TrueNegative;
    if (s == "fn") return PredCategory::FalseNegative;
    if (s == "actual1") return PredCategory::ActualPositive;
    if (s == "actual0") return PredCategory::ActualNegative;
    throw ConfigError("category: unknown '" + s + "' (expected tp|fp|tn|fn|actual1|actual0)");
}

// Per-frame share of one prediction category, as percentages of the
// category's global total. Pairs are bucketed by their earlier frame index.
struct TemporalErrorProfile {
    PredCategory category = PredCategory::FalsePositive;
    std::vector<double> percent;  // one entry per frame; sums to 100 when total > 0
    std::vector<int64_t> count;   // raw per-frame counts
    int64_t total = 0;            // 0 flags an empty category: percent is all zeros
};

inline TemporalErrorProfile temporal_error_distribution(const std::vector<int>& predictions,
                                                        const std::vector<int>& labels,
                                                        const std::vector<int>& frame_indices,
                                                        PredCategory category, int n_frames) {
    if (predictions.size() != labels.size() || predictions.size() != frame_indices.size())
        throw DataError("temporal profile: prediction/label/frame sequences differ in length");
    if (n_frames < 1) throw DataError("temporal profile: n_frames must be >= 1");
    evaldetail::check_binary(predictions, "prediction");
    evaldetail::check_binary(labels, "label");

    TemporalErrorProfile out;
    out.category = category;
    out.count.assign(static_cast<size_t>(n_frames), 0);
    out.percent.assign(static_cast<size_t>(n_frames), 0.0);
    for (size_t i = 0; i < predictions.size(); ++i) {
        const int t = frame_indices[i];
        if (t < 0 || t >= n_frames)
            throw DataError("temporal profile: frame index " + std::to_string(t) +
                            " outside [0, " + std::to_string(n_frames) + ")");
        bool hit = false;
        switch (category) {
            case PredCategory::TruePositive: hit = labels[i] == 1 && predictions[i] == 1; break;
            case PredCategory::FalsePositive: hit = labels[i] == 0 && predictions[i] == 1; break;
            case PredCategory::TrueNegative: hit = labels[i] == 0 && predictions[i] == 0; break;
            case PredCategory::FalseNegative: hit = labels[i] == 1 && predictions[i] == 0; break;
            case PredCategory::ActualPositive: hit = labels[i] == 1; break;
            case PredCategory::ActualNegative: hit = labels[i] == 0; break;
        }
        if (hit) {
            ++out.count[static_cast<size_t>(t)];
            ++out.total;
        }
    }
    if (out.total > 0)
        for (size_t t = 0; t < out.count.size(); ++t)
            out.percent[t] = 100.0 * static_cast<double>(out.count[t]) /
                             static_cast<double>(out.total);
    return out;
}

// Largest |difference|/2 of two percentage profiles, in [0,1]; the usual
// total-variation distance between the normalized distributions.
inline double profile_total_variation(const TemporalErrorProfile& a,
                                      const TemporalErrorProfile& b) {
    if (a.percent.size() != b.percent.size())
        throw DataError("profile distance: frame counts differ");
    double sum = 0.0;
    for (size_t i = 0; i < a.percent.size(); ++i) sum += std::abs(a.percent[i] - b.percent[i]);
    return sum / 200.0;
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

struct StrategyRunMetrics {
    double precision0 = 0.0, recall0 = 0.0;
    double precision1 = 0.0, recall1 = 0.0;
    double accuracy = 0.0;
};

struct StrategySummary {
    std::string code;
    int n_runs = 0;
    StrategyRunMetrics mean, stddev;  // sample standard deviation (n-1)
    std::vector<StrategyRunMetrics> runs;
};

struct CompareOptions {
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};  // one run per seed
    EventTrainConfig train;  // per-run seed overrides train.seed

    void validate() const {
        if (seeds.size() < 2) throw ConfigError("compare: need at least 2 run seeds");
        train.validate();
    }
};

namespace evaldetail {

inline StrategyRunMetrics run_metrics_from(const PrfReport& r) {
    return {r.precision0, r.recall0, r.precision1, r.recall1, r.accuracy};
}

inline void accumulate_mean_std(const std::vector<StrategyRunMetrics>& runs,
                                StrategyRunMetrics& mean, StrategyRunMetrics& stddev) {
    const double n = static_cast<double>(runs.size());
    auto each = [&](double StrategyRunMetrics::*field) {
        double m = 0.0;
        for (const auto& r : runs) m += r.*field;
        m /= n;
        double s2 = 0.0;
        for (const auto& r : runs) s2 += (r.*field - m) * (r.*field - m);
        mean.*field = m;
        stddev.*field = runs.size() > 1 ? std::sqrt(s2 / (n - 1.0)) : 0.0;
    };
    each(&StrategyRunMetrics::precision0);
    each(&StrategyRunMetrics::recall0);
    each(&StrategyRunMetrics::precision1);
    each(&StrategyRunMetrics::recall1);
    each(&StrategyRunMetrics::accuracy);
}

}  // namespace evaldetail

// Trains and evaluates each strategy once per seed and reports per-metric
// mean and sample std over the runs. Each run re-randomizes both the head
// initialization and the batch order through its seed; everything else,
// including the splits and the pretrained backbone, is shared, so the
// strategy fields are the only differing inputs across rows.
inline std::vector<StrategySummary> compare_strategies(
    const std::vector<TrainingStrategy>& strategies, const BackboneConfig& backbone,
    const ModelBundle* pretrained, const std::vector<CropPairSample>& train,
    const std::vector<CropPairSample>& val, const std::vector<CropPairSample>& test,
    const CompareOptions& opt) {
    opt.validate();
    if (test.empty()) throw DataError("compare: empty test split");
    std::vector<int> test_labels;
    test_labels.reserve(test.size());
    for (const auto& s : test) test_labels.push_back(s.label);
    evaldetail::check_binary(test_labels, "test label");

    std::vector<StrategySummary> out;
    for (const TrainingStrategy& strategy : strategies) {
        StrategySummary row;
        row.code = strategy.code();
        row.n_runs = static_cast<int>(opt.seeds.size());
        for (size_t k = 0; k < opt.seeds.size(); ++k) {
            EventTrainConfig cfg = opt.train;
            cfg.seed = opt.seeds[k];
            const ModelBundle* src = strategy.uses_pretrained() ? pretrained : nullptr;
            EventTrainResult res;
            try {
                res = train_event_head(strategy, backbone, src, train, val, cfg);
            } catch (const Error& e) {
                throw DataError("compare: strategy " + row.code + " run " + std::to_string(k) +
                                " (seed " + std::to_string(opt.seeds[k]) + ") failed: " +
                                e.what());
            }
            auto preds = predict_events(res.bundle, test);
            std::vector<int> hard;
            hard.reserve(preds.size());
            for (const auto& p : preds) hard.push_back(p.label);
            row.runs.push_back(
                evaldetail::run_metrics_from(confusion_and_prf(hard, test_labels)));
        }
        evaldetail::accumulate_mean_std(row.runs, row.mean, row.stddev);
        out.push_back(std::move(row));
    }
    return out;
}

// Comparison table as CSV: one row per strategy, mean and std per metric.
inline std::string strategy_table_csv(const std::vector<StrategySummary>& rows) {
    std::string out =
        "strategy,n_runs,prec0_mean,prec0_std,rec0_mean,rec0_std,"
        "prec1_mean,prec1_std,rec1_mean,rec1_std,acc_mean,acc_std\n";
    char line[320];
    for (const StrategySummary& r : rows) {
        std::snprintf(line, sizeof(line),
                      "%s,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      r.code.c_str(), r.n_runs, r.mean.precision0, r.stddev.precision0,
                      r.mean.recall0, r.stddev.recall0, r.mean.precision1, r.stddev.precision1,
                      r.mean.recall1, r.stddev.recall1, r.mean.accuracy, r.stddev.accuracy);
        out += line;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Content-view TAP accuracy study
// ---------------------------------------------------------------------------

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
};

struct ContentViewOptions {
    int base_crop = 48;              // reference crop side the factors scale
    double crop_factor = 1.0;        // image content per view: 0.5, 1 or 2
    double resolution_factor = 1.0;  // frame resampling: 0.5, 1 or 2
    int n_runs = 3;                  // independent evaluation draws
    int pairs_per_run = 256;         // random ordered pairs per draw
    uint64_t seed = 1;

    void validate() const {
        if (base_crop < 1) throw ConfigError("content-view.base_crop: must be >= 1");
        auto allowed = [](double f) { return f == 0.5 || f == 1.0 || f == 2.0; };
        if (!allowed(crop_factor))
            throw ConfigError("content-view.crop_factor: must be 0.5, 1 or 2");
        if (!allowed(resolution_factor))
            throw ConfigError("content-view.resolution_factor: must be 0.5, 1 or 2");
        if (n_runs < 1) throw ConfigError("content-view.n_runs: must be >= 1");
        if (pairs_per_run < 1) throw ConfigError("content-view.pairs_per_run: must be >= 1");
    }
};

namespace evaldetail {

// Movie resampled per frame by the given factor (antialiased bilinear).
inline Movie resample_movie(const Movie& movie, double factor) {
    if (factor == 1.0) return movie;
    Movie out;
    out.n_frames = movie.n_frames;
    out.height = std::max(1, static_cast<int>(std::lround(movie.height * factor)));
    out.width = std::max(1, static_cast<int>(std::lround(movie.width * factor)));
    out.frame_interval_minutes = movie.frame_interval_minutes;
    out.data.reserve(static_cast<size_t>(out.n_frames) * out.height * out.width);
    for (int t = 0; t < movie.n_frames; ++t) {
        ImageU8 r = to_u8(resize_bilinear(to_float(movie.frame(t)), out.height, out.width));
        out.data.insert(out.data.end(), r.pixels.begin(), r.pixels.end());
    }
    return out;
}

inline ImageU8 crop_frame(const Movie& movie, int t, int top, int left, int size) {
    ImageU8 img;
    img.height = img.width = size;
    img.channels = 1;
    img.pixels.resize(static_cast<size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.pixels[static_cast<size_t>(y) * size + x] = movie.px(t, top + y, left + x);
    return img;
}

}  // namespace evaldetail

// TAP direction accuracy when the evaluated crops cover crop_factor times
// the training content and frames are resampled by resolution_factor.
// Each run draws pairs_per_run random ordered crop pairs (order flipped with
// probability one half); reported as mean and sample std over n_runs.
inline MeanStd tap_accuracy_content_view(const ModelBundle& bundle, const Movie& movie,
                                         const ContentViewOptions& opt) {
    opt.validate();
    if (bundle.head_kind != HeadKind::TapHead)
        throw WrongHeadError("content-view: bundle carries an event head");
    if (movie.n_frames < 2) throw DataError("content-view: movie needs at least 2 frames");

    const Movie view = evaldetail::resample_movie(movie, opt.resolution_factor);
    const int crop = static_cast<int>(std::lround(opt.base_crop * opt.crop_factor));
    if (crop > view.height || crop > view.width)
        throw DimensionError("content-view: crop " + std::to_string(crop) +
                             " exceeds resampled frame " + std::to_string(view.height) + "x" +
                             std::to_string(view.width));
    if (crop % bundle.config.encoder_downsample() != 0)
        throw ConfigError("content-view: crop " + std::to_string(crop) +
                          " not divisible by the backbone downsample factor " +
                          std::to_string(bundle.config.encoder_downsample()));

    Rng root(opt.seed);
    std::vector<double> accs;
    for (int run = 0; run < opt.n_runs; ++run) {
        Rng rng = root.fork(0xCE0 + static_cast<uint64_t>(run));
        int correct = 0;
        for (int i = 0; i < opt.pairs_per_run; ++i) {
            const int t = static_cast<int>(rng.uniform_int(0, view.n_frames - 2));
            const int top = static_cast<int>(rng.uniform_int(0, view.height - crop));
            const int left = static_cast<int>(rng.uniform_int(0, view.width - crop));
            ImageU8 a = evaldetail::crop_frame(view, t, top, left, crop);
            ImageU8 b = evaldetail::crop_frame(view, t + 1, top, left, crop);
            int label = 0;
            if (rng.bernoulli(0.5)) {
                std::swap(a, b);
                label = 1;
            }
            auto [fwd, bwd] = tap_logit_pair(bundle, a, b);
            const int pred = fwd >= bwd ? 0 : 1;  // tie resolves to "correct order"
            correct += (pred == label);
        }
        accs.push_back(static_cast<double>(correct) / opt.pairs_per_run);
    }

    MeanStd out;
    for (double a : accs) out.mean += a;
    out.mean /= static_cast<double>(accs.size());
    if (accs.size() > 1) {
        double s2 = 0.0;
        for (double a : accs) s2 += (a - out.mean) * (a - out.mean);
        out.stddev = std::sqrt(s2 / static_cast<double>(accs.size() - 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

// Structured-text evaluation report: counts plus per-class metrics.
inline std::string prf_report_text(const PrfReport& r) {
    KvWriter w;
    w.section("confusion");
    w.put("tn", r.counts.tn);
    w.put("fp", r.counts.fp);
    w.put("fn", r.counts.fn);
    w.put("tp", r.counts.tp);
    w.put("total", r.counts.total());
    w.section("metrics");
    w.put("precision0", r.precision0);
    w.put("recall0", r.recall0);
    w.put("precision1", r.precision1);
    w.put("recall1", r.recall1);
    w.put("accuracy", r.accuracy);
    return w.str();
}

// Temporal profiles as CSV: frame,<name> percentage columns per profile.
inline std::string temporal_profiles_csv(const std::vector<TemporalErrorProfile>& profiles) {
    if (profiles.empty()) throw DataError("temporal profiles: nothing to serialize");
    const size_t frames = profiles[0].percent.size();
    std::string out = "frame";
    for (const auto& p : profiles) {
        if (p.percent.size() != frames)
            throw DataError("temporal profiles: frame counts differ");
        out += "," + pred_category_name(p.category) + "_percent";
    }
    out += "\n";
    char buf[64];
    for (size_t t = 0; t < frames; ++t) {
        out += std::to_string(t);
        for (const auto& p : profiles) {
            std::snprintf(buf, sizeof(buf), ",%.10g", p.percent[t]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace taprec
