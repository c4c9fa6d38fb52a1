#pragma once

// ============================================================================
// Downstream event-recognition training
// ============================================================================
// Trains the two-class event head on labeled crop pairs under one of six
// strategies: the feature source is a TAP-pretrained backbone (frozen), a
// randomly initialized frozen backbone, or a randomly initialized backbone
// trained jointly with the head; the head is either the linear probe or the
// small residual head. Frozen-feature strategies never touch backbone
// weights, which also lets the trainer precompute the feature maps once and
// train the head on the cached tensors — numerically identical to rerunning
// the backbone every step, because per-sample forward passes are independent
// of batch composition.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/graph.hpp"
#include "taprec/core/image.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/datapipe.hpp"
#include "taprec/model.hpp"

namespace taprec {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class FeatureSource { TapPretrained, RandomFixed, RandomTrained };

inline std::string feature_source_name(FeatureSource s) {
    switch (s) {
        case FeatureSource::TapPretrained: return "tap-pretrained";
        case FeatureSource::RandomFixed: return "random-fixed";
        case FeatureSource::RandomTrained: return "random-trained";
    }
    return "?";
}

// One of the six training strategies: the letter picks the feature source
// (a = TAP-pretrained frozen, b = random frozen, c = random trained), the
// digit picks the head (0 = linear, 1 = resnet).
struct TrainingStrategy {
    FeatureSource feature_source = FeatureSource::TapPretrained;
    HeadKind head = HeadKind::LinearEventHead;

    void validate() const {
        if (head == HeadKind::TapHead)
            throw ConfigError("strategy: head must be an event head (linear | resnet)");
    }

    bool trains_backbone() const { return feature_source == FeatureSource::RandomTrained; }
    bool uses_pretrained() const { return feature_source == FeatureSource::TapPretrained; }

    std::string code() const {
        validate();
        char letter = 'a';
        if (feature_source == FeatureSource::RandomFixed) letter = 'b';
        if (feature_source == FeatureSource::RandomTrained) letter = 'c';
        return std::string(1, letter) + (head == HeadKind::LinearEventHead ? "0" : "1");
    }

    static TrainingStrategy from_code(std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        TrainingStrategy st;
        if (s.size() != 2 || s[0] < 'a' || s[0] > 'c' || (s[1] != '0' && s[1] != '1'))
            throw ConfigError("strategy: unknown code '" + s +
                              "' (expected a0, a1, b0, b1, c0 or c1)");
        st.feature_source = s[0] == 'a'   ? FeatureSource::TapPretrained
                            : s[0] == 'b' ? FeatureSource::RandomFixed
                                          : FeatureSource::RandomTrained;
        st.head = s[1] == '0' ? HeadKind::LinearEventHead : HeadKind::ResNetEventHead;
        return st;
    }
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Two-class softmax cross-entropy of one logit pair: -log softmax(y)[label],
// computed in the overflow-safe softplus form.
inline double event_loss(double y0, double y1, int label) {
    if (!std::isfinite(y0) || !std::isfinite(y1))
        throw DataError("event_loss: logits must be finite");
    if (label != 0 && label != 1) throw DataError("event_loss: label must be 0 or 1");
    const double d = label == 1 ? y0 - y1 : y1 - y0;  // -log sigma(-d) = softplus(d)
    return d > 0.0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct EventTrainConfig {
    int epochs = -1;          // negative = head default: 10 linear, 30 resnet
    int batch_size = 16;      // crop pairs per optimizer step
    double lr = 1e-3;         // constant Adam step size
    bool balance = true;      // subsample the majority class of the train split
    bool symmetrize = false;  // average the head over both temporal orderings
    uint64_t seed = 1;        // head init, class balancing and batch order

    void validate() const {
        if (batch_size < 1) throw ConfigError("event.batch_size: must be >= 1");
        if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("event.lr: must be > 0");
    }

    int resolved_epochs(const TrainingStrategy& strategy) const {
        if (epochs >= 0) return epochs;
        return strategy.head == HeadKind::LinearEventHead ? 10 : 30;
    }
};

struct EventEpochMetrics {
    int epoch = 0;
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;  // NaN when no validation samples
};

struct EventTrainResult {
    ModelBundle bundle;
    std::vector<EventEpochMetrics> history;
};

// Per-epoch metrics as CSV with the columns epoch,split,loss,accuracy
// (two rows per epoch).
inline std::string event_metrics_csv(const std::vector<EventEpochMetrics>& history) {
    std::string out = "epoch,split,loss,accuracy\n";
    char line[128];
    for (const EventEpochMetrics& m : history) {
        std::snprintf(line, sizeof(line), "%d,train,%.10g,%.10g\n", m.epoch, m.train_loss,
                      m.train_acc);
        out += line;
        std::snprintf(line, sizeof(line), "%d,val,%.10g,%.10g\n", m.epoch, m.val_loss, m.val_acc);
        out += line;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trainer internals
// ---------------------------------------------------------------------------

namespace eventdetail {

inline void check_labeled(const std::vector<CropPairSample>& samples, const char* split) {
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].label != 0 && samples[i].label != 1)
            throw DataError(std::string("event training: ") + split + " sample " +
                            std::to_string(i) + " is unlabeled");
}

// Per-sample feature tensors of a frozen backbone, either the dense map or,
// for the linear head, the spatially pooled vector (the head's own pooling
// of a 1x1 map reproduces it exactly, and it is far smaller to hold).
struct FeatureCache {
    std::vector<Tensor> za, zb;  // (1,c,h,w) per sample
};

inline Tensor slice_sample(const Tensor& batch, int n) {
    Tensor out(1, batch.c(), batch.h(), batch.w());
    const size_t plane = out.numel();
    std::copy_n(batch.data() + static_cast<size_t>(n) * plane, plane, out.data());
    return out;
}

inline FeatureCache encode_frozen(const ModelBundle& bundle,
                                  const std::vector<CropPairSample>& samples, bool pooled) {
    FeatureCache cache;
    cache.za.reserve(samples.size());
    cache.zb.reserve(samples.size());
    const int chunk = 32;
    for (size_t at = 0; at < samples.size(); at += chunk) {
        const size_t n = std::min<size_t>(chunk, samples.size() - at);
        std::vector<const ImageU8*> pa, pb;
        for (size_t i = 0; i < n; ++i) {
            pa.push_back(&samples[at + i].crop_t);
            pb.push_back(&samples[at + i].crop_t1);
        }
        Tape t;
        Var za = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pa)));
        Var zb = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pb)));
        if (pooled) {
            za = t.global_avg_pool(za);
            zb = t.global_avg_pool(zb);
        }
        for (size_t i = 0; i < n; ++i) {
            cache.za.push_back(slice_sample(t.val(za), static_cast<int>(i)));
            cache.zb.push_back(slice_sample(t.val(zb), static_cast<int>(i)));
        }
    }
    return cache;
}

inline Tensor gather_features(const std::vector<Tensor>& per_sample,
                              const std::vector<size_t>& ids, size_t at, size_t n) {
    const Tensor& first = per_sample[ids[at]];
    Tensor out(static_cast<int>(n), first.c(), first.h(), first.w());
    const size_t plane = first.numel();
    for (size_t i = 0; i < n; ++i)
        std::copy_n(per_sample[ids[at + i]].data(), plane, out.data() + i * plane);
    return out;
}

struct EventBatchEval {
    double loss = 0.0;
    int correct = 0;
};

// Forward (and optional backward) of the event objective on one batch. The
// feature cache, when given, replaces the backbone forward pass.
inline EventBatchEval event_batch_pass(ModelBundle& bundle, const FeatureCache* cache,
                                       const std::vector<CropPairSample>& samples,
                                       const std::vector<size_t>& ids, size_t at, size_t n,
                                       Adam* adam, double lr) {
    Tape t;
    Var za, zb;
    if (cache != nullptr) {
        za = t.input(gather_features(cache->za, ids, at, n));
        zb = t.input(gather_features(cache->zb, ids, at, n));
    } else {
        std::vector<const ImageU8*> pa, pb;
        for (size_t i = 0; i < n; ++i) {
            pa.push_back(&samples[ids[at + i]].crop_t);
            pb.push_back(&samples[ids[at + i]].crop_t1);
        }
        za = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pa)));
        zb = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pb)));
    }
    std::vector<int> labels(n);
    for (size_t i = 0; i < n; ++i) labels[i] = samples[ids[at + i]].label;

    Var logits = event_head_forward(t, bundle.params, bundle.head_kind, bundle.symmetrize, za, zb);
    Var loss = t.softmax_cross_entropy(logits, labels);

    EventBatchEval ev;
    ev.loss = t.val(loss)[0];
    const Tensor& lg = t.val(logits);
    for (size_t i = 0; i < n; ++i) {
        const int pred = lg.at(static_cast<int>(i), 1, 0, 0) > lg.at(static_cast<int>(i), 0, 0, 0)
                             ? 1
                             : 0;
        ev.correct += (pred == labels[i]);
    }

    if (adam != nullptr) {
        adam->zero_grad();
        t.backward(loss);
        adam->step(lr);
    }
    return ev;
}

}  // namespace eventdetail

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// Trains the event head (and, for the random-trained source, the backbone)
// on labeled crop pairs. The head is always initialized from cfg.seed, so
// runs that differ only in the feature source start from bitwise-identical
// head weights. For the TAP-pretrained source the backbone weights are
// copied from `pretrained`, whose architecture must match `backbone`; the
// other sources must not pass a pretrained bundle.
inline EventTrainResult train_event_head(const TrainingStrategy& strategy,
                                         const BackboneConfig& backbone,
                                         const ModelBundle* pretrained,
                                         const std::vector<CropPairSample>& train,
                                         const std::vector<CropPairSample>& val,
                                         const EventTrainConfig& cfg) {
    strategy.validate();
    cfg.validate();
    backbone.validate();
    if (strategy.uses_pretrained()) {
        if (pretrained == nullptr)
            throw ConfigError("strategy " + strategy.code() +
                              ": requires a pretrained backbone");
        if (!(pretrained->config == backbone))
            throw ConfigError("strategy " + strategy.code() +
                              ": pretrained backbone architecture differs from the requested one");
    } else if (pretrained != nullptr) {
        throw ConfigError("strategy " + strategy.code() + ": does not take a pretrained backbone");
    }
    if (train.empty()) throw DataError("event training: empty training split");
    eventdetail::check_labeled(train, "train");
    eventdetail::check_labeled(val, "val");
    const int crop = train[0].crop_t.height;
    if (crop % backbone.encoder_downsample() != 0)
        throw ConfigError("event training: crop size must be divisible by the backbone "
                          "downsample factor " +
                          std::to_string(backbone.encoder_downsample()));

    Rng root(cfg.seed);
    EventTrainResult out;
    out.bundle = init_random(backbone, strategy.head, cfg.seed, cfg.symmetrize);
    if (strategy.uses_pretrained()) {
        for (const auto& p : pretrained->params.items())
            if (p->name.rfind("backbone.", 0) == 0)
                out.bundle.params.get(p->name).value = p->value;
    }
    out.bundle.strategy = strategy.code();
    out.bundle.train_seed = cfg.seed;

    const std::vector<CropPairSample> train_set =
        cfg.balance ? balance_training_set(train, root.fork(0xBA).seed()) : train;

    std::vector<Param*> trainable;
    for (Param* p : out.bundle.params.pointers())
        if (strategy.trains_backbone() || p->name.rfind("head.", 0) == 0) trainable.push_back(p);
    Adam adam(trainable);

    // frozen sources: run the backbone once per sample, train on the cache
    using eventdetail::FeatureCache;
    FeatureCache cache_train, cache_val;
    const bool frozen = !strategy.trains_backbone();
    const bool pooled = strategy.head == HeadKind::LinearEventHead;
    if (frozen) {
        cache_train = eventdetail::encode_frozen(out.bundle, train_set, pooled);
        cache_val = eventdetail::encode_frozen(out.bundle, val, pooled);
    }

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<size_t> val_order(val.size());
    for (size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;

    Rng shuffle_rng = root.fork(0x5F);
    const int epochs = cfg.resolved_epochs(strategy);
    const size_t bs = static_cast<size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EventEpochMetrics m;
        m.epoch = epoch;
        int correct = 0, step = 0;
        for (size_t at = 0; at < order.size(); at += bs, ++step) {
            const size_t n = std::min(bs, order.size() - at);
            auto ev = eventdetail::event_batch_pass(out.bundle, frozen ? &cache_train : nullptr,
                                                    train_set, order, at, n, &adam, cfg.lr);
            if (!std::isfinite(ev.loss))
                throw TrainingDivergedError("event training diverged at epoch " +
                                            std::to_string(epoch) + ", step " +
                                            std::to_string(step));
            m.train_loss += ev.loss * static_cast<double>(n);
            correct += ev.correct;
        }
        m.train_loss /= static_cast<double>(order.size());
        m.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());

        if (val.empty()) {
            m.val_loss = m.val_acc = std::numeric_limits<double>::quiet_NaN();
        } else {
            int vcorrect = 0;
            for (size_t at = 0; at < val.size(); at += bs) {
                const size_t n = std::min(bs, val.size() - at);
                auto ev = eventdetail::event_batch_pass(out.bundle, frozen ? &cache_val : nullptr,
                                                        val, val_order, at, n, nullptr, 0.0);
                m.val_loss += ev.loss * static_cast<double>(n);
                vcorrect += ev.correct;
            }
            m.val_loss /= static_cast<double>(val.size());
            m.val_acc = static_cast<double>(vcorrect) / static_cast<double>(val.size());
        }
        out.history.push_back(m);
    }
    out.bundle.trained_epochs = epochs;
    return out;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct EventPrediction {
    double probability = 0.0;  // probability of the event class (index 1)
    int label = 0;             // hard decision at 0.5; ties go to 0
};

namespace eventdetail {

inline EventPrediction prediction_from_logits(double y0, double y1, double temperature) {
    const double tdiv = temperature > 0.0 ? temperature : 1.0;
    const double d = (y0 - y1) / tdiv;
    EventPrediction p;
    p.probability = 1.0 / (1.0 + std::exp(d));  // softmax(y/T)[1]
    p.label = p.probability > 0.5 ? 1 : 0;
    return p;
}

}  // namespace eventdetail

// Event probability and hard label for one crop pair. The bundle's
// calibration temperature, when set, divides the logits; that never changes
// the hard label because the division is a monotone transform.
inline EventPrediction predict_event(const ModelBundle& bundle, const ImageU8& crop_t,
                                     const ImageU8& crop_t1) {
    auto [y0, y1] = event_logit_pair(bundle, crop_t, crop_t1);
    return eventdetail::prediction_from_logits(y0, y1, bundle.temperature);
}

// Batched prediction over crop-pair samples, order-preserving.
inline std::vector<EventPrediction> predict_events(const ModelBundle& bundle,
                                                   const std::vector<CropPairSample>& samples) {
    if (bundle.head_kind == HeadKind::TapHead)
        throw WrongHeadError("predict_events: bundle carries the TAP head");
    std::vector<EventPrediction> out;
    out.reserve(samples.size());
    const size_t chunk = 32;
    for (size_t at = 0; at < samples.size(); at += chunk) {
        const size_t n = std::min(chunk, samples.size() - at);
        std::vector<const ImageU8*> pa, pb;
        for (size_t i = 0; i < n; ++i) {
            pa.push_back(&samples[at + i].crop_t);
            pb.push_back(&samples[at + i].crop_t1);
        }
        Tape t;
        Var za = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pa)));
        Var zb = backbone_forward(t, bundle.params, bundle.config, t.input(crops_to_tensor(pb)));
        Var logits =
            event_head_forward(t, bundle.params, bundle.head_kind, bundle.symmetrize, za, zb);
        const Tensor& lg = t.val(logits);
        for (size_t i = 0; i < n; ++i)
            out.push_back(eventdetail::prediction_from_logits(lg.at(static_cast<int>(i), 0, 0, 0),
                                                              lg.at(static_cast<int>(i), 1, 0, 0),
                                                              bundle.temperature));
    }
    return out;
}

}  // namespace taprec
