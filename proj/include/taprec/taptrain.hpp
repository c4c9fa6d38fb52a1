#pragma once

// ============================================================================
// Time-arrow-prediction pretraining
// ============================================================================
// The pretext task: sample a crop pair from consecutive frames, possibly
// flip its temporal order, and train backbone + TAP head to predict the
// order. Total loss = softmax cross-entropy on the two direction logits plus
// lambda times the channel-decorrelation term evaluated on the dense
// features of both crops. Augmentation applies rotation, elastic warp and
// scale jointly to the pair, translation/noise/intensity independently per
// crop, and the order flip that defines the label.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/graph.hpp"
#include "taprec/core/image.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/datapipe.hpp"
#include "taprec/model.hpp"
#include "taprec/synthmovie.hpp"

namespace taprec {

// ---------------------------------------------------------------------------
// Loss configuration and wrappers
// ---------------------------------------------------------------------------

struct TapLossConfig {
    double lambda = 0.01;  // decorrelation weight
    double tau = 0.2;      // softmax temperature over channel correlations

    void validate() const {
        if (!(lambda >= 0.0)) throw ConfigError("tap.lambda: must be >= 0");
        if (!(tau > 0.0)) throw ConfigError("tap.tau: must be > 0");
    }
};

// Channel-decorrelation loss over a feature batch (see the tape op for the
// arithmetic); rejects single-channel features where the term is vacuous.
inline Var decorrelation_loss(Tape& t, Var z, double tau) {
    if (t.val(z).c() < 2) throw ConfigError("decorrelation: needs at least 2 feature channels");
    return t.decorrelation(z, tau);
}

// Total TAP loss for a batch: cross-entropy of the direction logits plus
// lambda times the decorrelation term of the given feature batch.
inline Var tap_total_loss(Tape& t, Var logits, const std::vector<int>& labels, Var z,
                          const TapLossConfig& cfg) {
    cfg.validate();
    Var ce = t.softmax_cross_entropy(logits, labels);
    if (cfg.lambda == 0.0) return ce;
    return t.add_scaled(ce, decorrelation_loss(t, z, cfg.tau), cfg.lambda);
}

// Pair variant: the decorrelation term is averaged over both crops' features.
inline Var tap_total_loss(Tape& t, Var logits, const std::vector<int>& labels, Var za, Var zb,
                          const TapLossConfig& cfg) {
    cfg.validate();
    Var ce = t.softmax_cross_entropy(logits, labels);
    if (cfg.lambda == 0.0) return ce;
    Var d = t.scale(t.add(decorrelation_loss(t, za, cfg.tau), decorrelation_loss(t, zb, cfg.tau)),
                    0.5);
    return t.add_scaled(ce, d, cfg.lambda);
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentationConfig {
    double flip_pair_prob = 0.5;      // temporal order flip; flips the label
    double rotation_max_deg = 180.0;  // joint rotation, uniform in +-range
    double elastic_amp_px = 3.0;      // joint elastic displacement amplitude
    int elastic_grid = 4;             // control points per side (0 disables)
    double scale_min = 0.9;           // joint spatial scale range
    double scale_max = 1.1;
    double translate_max_px = 2.0;    // per-crop translation, uniform in +-range
    double noise_sigma = 2.0;         // per-crop additive gaussian, 8-bit units
    double intensity_scale_min = 0.9; // per-crop multiplicative intensity
    double intensity_scale_max = 1.1;
    double intensity_shift_max = 10.0;  // per-crop additive intensity, 8-bit units
    uint64_t seed = 0;

    void validate() const {
        if (flip_pair_prob < 0.0 || flip_pair_prob > 1.0)
            throw ConfigError("augment.flip_pair_prob: must be in [0,1]");
        if (rotation_max_deg < 0.0) throw ConfigError("augment.rotation_max_deg: must be >= 0");
        if (elastic_amp_px < 0.0) throw ConfigError("augment.elastic_amp_px: must be >= 0");
        if (elastic_grid < 0) throw ConfigError("augment.elastic_grid: must be >= 0");
        if (!(scale_min > 0.0) || scale_max < scale_min)
            throw ConfigError("augment.scale range: need 0 < min <= max");
        if (translate_max_px < 0.0) throw ConfigError("augment.translate_max_px: must be >= 0");
        if (noise_sigma < 0.0) throw ConfigError("augment.noise_sigma: must be >= 0");
        if (!(intensity_scale_min > 0.0) || intensity_scale_max < intensity_scale_min)
            throw ConfigError("augment.intensity_scale range: need 0 < min <= max");
        if (intensity_shift_max < 0.0)
            throw ConfigError("augment.intensity_shift_max: must be >= 0");
    }

    // identity configuration: no geometric, intensity, or order changes
    static AugmentationConfig disabled() {
        AugmentationConfig c;
        c.flip_pair_prob = 0.0;
        c.rotation_max_deg = 0.0;
        c.elastic_amp_px = 0.0;
        c.elastic_grid = 0;
        c.scale_min = c.scale_max = 1.0;
        c.translate_max_px = 0.0;
        c.noise_sigma = 0.0;
        c.intensity_scale_min = c.intensity_scale_max = 1.0;
        c.intensity_shift_max = 0.0;
        return c;
    }
};

namespace tapdetail {

inline ImageU8 transform_crop(const ImageU8& src, double angle, double scale,
                              const ElasticField& elastic, double t_dy, double t_dx,
                              double gain, double shift, double noise_sigma, Rng& rng) {
    ImageF f = warp_image(to_float(src), angle, scale, elastic, t_dy, t_dx);
    for (double& v : f.pixels) {
        v = gain * v + shift;
        if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
    }
    return to_u8(f);
}

}  // namespace tapdetail

// One augmented crop pair plus its (possibly flipped) direction label.
// direction_label 0 means "crop_t precedes crop_t1". Masks ride along
// untouched; the pretext task never reads them.
inline std::pair<CropPairSample, int> augment_pair(const CropPairSample& sample,
                                                   int direction_label,
                                                   const AugmentationConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    // joint geometric draw
    const double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg) * M_PI / 180.0;
    const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    ElasticField elastic;
    if (cfg.elastic_grid >= 2 && cfg.elastic_amp_px > 0.0) {
        elastic.gh = elastic.gw = cfg.elastic_grid;
        elastic.dy.resize(static_cast<size_t>(cfg.elastic_grid) * cfg.elastic_grid);
        elastic.dx.resize(elastic.dy.size());
        for (size_t i = 0; i < elastic.dy.size(); ++i) {
            elastic.dy[i] = rng.uniform(-cfg.elastic_amp_px, cfg.elastic_amp_px);
            elastic.dx[i] = rng.uniform(-cfg.elastic_amp_px, cfg.elastic_amp_px);
        }
    }

    CropPairSample out = sample;
    for (ImageU8* crop : {&out.crop_t, &out.crop_t1}) {
        const double t_dy = rng.uniform(-cfg.translate_max_px, cfg.translate_max_px);
        const double t_dx = rng.uniform(-cfg.translate_max_px, cfg.translate_max_px);
        const double gain = rng.uniform(cfg.intensity_scale_min, cfg.intensity_scale_max);
        const double shift = rng.uniform(-cfg.intensity_shift_max, cfg.intensity_shift_max);
        *crop = tapdetail::transform_crop(*crop, angle, scale, elastic, t_dy, t_dx, gain, shift,
                                          cfg.noise_sigma, rng);
    }

    int label = direction_label;
    if (rng.bernoulli(cfg.flip_pair_prob)) {
        std::swap(out.crop_t, out.crop_t1);
        std::swap(out.mask_t, out.mask_t1);
        label = 1 - label;
    }
    return {out, label};
}

// ---------------------------------------------------------------------------
// Pretraining loop
// ---------------------------------------------------------------------------

struct TapTrainConfig {
    int epochs = 40;
    int patch = 96;            // square training patch side
    int batch_size = 8;
    int steps_per_epoch = 64;  // on-the-fly batches per epoch
    int val_batches = 16;      // fixed-seed validation batches per epoch
    double lr_start = 1e-3;    // cosine decay endpoints
    double lr_end = 1e-5;
    TapLossConfig loss;
    AugmentationConfig aug;
    uint64_t seed = 1;

    void validate() const {
        if (epochs < 0) throw ConfigError("tap.epochs: must be >= 0");
        if (patch < 1) throw ConfigError("tap.patch: must be >= 1");
        if (batch_size < 1) throw ConfigError("tap.batch_size: must be >= 1");
        if (steps_per_epoch < 1) throw ConfigError("tap.steps_per_epoch: must be >= 1");
        if (val_batches < 1) throw ConfigError("tap.val_batches: must be >= 1");
        if (!(lr_start > 0.0) || !(lr_end > 0.0))
            throw ConfigError("tap.lr: learning rates must be > 0");
        loss.validate();
        aug.validate();
    }
};

struct TapEpochMetrics {
    int epoch = 0;
    double train_total = 0.0, train_decorr = 0.0, train_acc = 0.0;
    double val_total = 0.0, val_decorr = 0.0, val_acc = 0.0;
};

struct PretrainResult {
    ModelBundle bundle;
    std::vector<TapEpochMetrics> history;
};

// Per-epoch metrics as CSV with the columns
// epoch,split,total_loss,decorr_loss,accuracy (two rows per epoch).
inline std::string tap_metrics_csv(const std::vector<TapEpochMetrics>& history) {
    std::string out = "epoch,split,total_loss,decorr_loss,accuracy\n";
    char line[160];
    for (const TapEpochMetrics& m : history) {
        std::snprintf(line, sizeof(line), "%d,train,%.10g,%.10g,%.10g\n", m.epoch, m.train_total,
                      m.train_decorr, m.train_acc);
        out += line;
        std::snprintf(line, sizeof(line), "%d,val,%.10g,%.10g,%.10g\n", m.epoch, m.val_total,
                      m.val_decorr, m.val_acc);
        out += line;
    }
    return out;
}

namespace tapdetail {

struct PatchBatch {
    Tensor xa, xb;             // (N,1,p,p) in [0,1]
    std::vector<int> labels;   // 0 = correct order
};

// Samples one batch of augmented direction-labeled patch pairs from the
// given frame range [t_lo, t_hi) (pairs use frames t and t+1).
inline PatchBatch sample_batch(const Movie& movie, int t_lo, int t_hi, int patch, int batch_size,
                               const AugmentationConfig& aug, Rng& rng) {
    std::vector<ImageU8> first(static_cast<size_t>(batch_size));
    std::vector<ImageU8> second(static_cast<size_t>(batch_size));
    PatchBatch out;
    out.labels.resize(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const int t = static_cast<int>(rng.uniform_int(t_lo, t_hi - 2));
        const int oy = static_cast<int>(rng.uniform_int(0, movie.height - patch));
        const int ox = static_cast<int>(rng.uniform_int(0, movie.width - patch));
        CropPairSample s;
        s.t = t;
        s.origin_row = oy;
        s.origin_col = ox;
        for (auto [img, frame] : {std::pair{&s.crop_t, t}, {&s.crop_t1, t + 1}}) {
            img->height = patch;
            img->width = patch;
            img->channels = 1;
            img->pixels.resize(static_cast<size_t>(patch) * patch);
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    img->pixels[static_cast<size_t>(y) * patch + x] =
                        movie.px(frame, oy + y, ox + x);
        }
        AugmentationConfig per_sample = aug;
        // fresh stream draw: forks are pure in the constructing seed, so a
        // fork-derived seed here would repeat the same augmentation (and the
        // same flip decision) for this batch slot on every step
        per_sample.seed = static_cast<uint64_t>(rng.uniform_int(0, int64_t(1) << 62));
        auto [augmented, label] = augment_pair(s, 0, per_sample);
        first[static_cast<size_t>(i)] = std::move(augmented.crop_t);
        second[static_cast<size_t>(i)] = std::move(augmented.crop_t1);
        out.labels[static_cast<size_t>(i)] = label;
    }
    std::vector<const ImageU8*> pa, pb;
    for (int i = 0; i < batch_size; ++i) {
        pa.push_back(&first[static_cast<size_t>(i)]);
        pb.push_back(&second[static_cast<size_t>(i)]);
    }
    out.xa = crops_to_tensor(pa);
    out.xb = crops_to_tensor(pb);
    return out;
}

struct BatchEval {
    double total = 0.0, decorr = 0.0, acc = 0.0;
};

// Forward pass (and optional backward) of the TAP objective on one batch.
inline BatchEval tap_batch_pass(ModelBundle& bundle, const PatchBatch& batch,
                                const TapLossConfig& loss_cfg, Adam* adam, double lr) {
    Tape t;
    Var za = backbone_forward(t, bundle.params, bundle.config, t.input(batch.xa));
    Var zb = backbone_forward(t, bundle.params, bundle.config, t.input(batch.xb));
    Var logits = tap_head_logits(t, bundle.params, za, zb);
    Var total = tap_total_loss(t, logits, batch.labels, za, zb, loss_cfg);

    BatchEval ev;
    ev.total = t.val(total)[0];
    {
        Tape probe;  // decorrelation value alone, for the metrics history
        Var pa = probe.input(t.val(za));
        Var pb = probe.input(t.val(zb));
        ev.decorr = 0.5 * (probe.val(decorrelation_loss(probe, pa, loss_cfg.tau))[0] +
                           probe.val(decorrelation_loss(probe, pb, loss_cfg.tau))[0]);
    }
    const Tensor& lg = t.val(logits);
    int correct = 0;
    for (int i = 0; i < lg.n(); ++i) {
        const int pred = lg.at(i, 0, 0, 0) >= lg.at(i, 1, 0, 0) ? 0 : 1;
        correct += (pred == batch.labels[static_cast<size_t>(i)]);
    }
    ev.acc = static_cast<double>(correct) / lg.n();

    if (adam != nullptr) {
        adam->zero_grad();
        t.backward(total);
        adam->step(lr);
    }
    return ev;
}

}  // namespace tapdetail

// Pretrains backbone + TAP head on a movie. Validation patches come from
// val_movie when given, otherwise from a held-out trailing frame range of
// the training movie (roughly one fifth, at least two frames).
inline PretrainResult pretrain_tap(const Movie& movie, const Movie* val_movie,
                                   const BackboneConfig& backbone_cfg, const TapTrainConfig& cfg) {
    cfg.validate();
    backbone_cfg.validate();
    if (movie.n_frames < 2) throw ConfigError("pretrain: movie needs at least 2 frames");
    if (cfg.patch > movie.height || cfg.patch > movie.width)
        throw ConfigError("tap.patch: " + std::to_string(cfg.patch) +
                          " exceeds movie dims " + std::to_string(movie.height) + "x" +
                          std::to_string(movie.width));
    if (cfg.patch % backbone_cfg.encoder_downsample() != 0)
        throw ConfigError("tap.patch: must be divisible by the backbone downsample factor " +
                          std::to_string(backbone_cfg.encoder_downsample()));
    if (val_movie != nullptr &&
        (cfg.patch > val_movie->height || cfg.patch > val_movie->width ||
         val_movie->n_frames < 2))
        throw ConfigError("pretrain: validation movie too small for the patch size");

    // train/validation frame ranges
    const Movie* val_src = val_movie != nullptr ? val_movie : &movie;
    int train_hi = movie.n_frames;
    int val_lo = 0;
    if (val_movie == nullptr) {
        const int held = std::max(2, movie.n_frames / 5);
        train_hi = std::max(2, movie.n_frames - held);
        val_lo = std::min(train_hi, movie.n_frames - 2);
    }

    Rng root(cfg.seed);
    PretrainResult result;
    result.bundle = init_random(backbone_cfg, HeadKind::TapHead, root.fork(0x171).seed());
    result.bundle.strategy = "tap-pretrain";
    result.bundle.train_seed = cfg.seed;

    Adam adam(result.bundle.params.pointers());
    Rng train_rng = root.fork(0x7A);
    AugmentationConfig val_aug = AugmentationConfig::disabled();
    val_aug.flip_pair_prob = 0.5;  // direction labels must stay balanced

    const int total_steps = cfg.epochs * cfg.steps_per_epoch;
    int step_index = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        TapEpochMetrics m;
        m.epoch = epoch;
        for (int step = 0; step < cfg.steps_per_epoch; ++step, ++step_index) {
            const double lr = cosine_lr(cfg.lr_start, cfg.lr_end, step_index, total_steps);
            tapdetail::PatchBatch batch = tapdetail::sample_batch(
                movie, 0, train_hi, cfg.patch, cfg.batch_size, cfg.aug, train_rng);
            tapdetail::BatchEval ev =
                tapdetail::tap_batch_pass(result.bundle, batch, cfg.loss, &adam, lr);
            if (!std::isfinite(ev.total))
                throw TrainingDivergedError("tap pretraining diverged at epoch " +
                                            std::to_string(epoch) + ", step " +
                                            std::to_string(step));
            m.train_total += ev.total;
            m.train_decorr += ev.decorr;
            m.train_acc += ev.acc;
        }
        m.train_total /= cfg.steps_per_epoch;
        m.train_decorr /= cfg.steps_per_epoch;
        m.train_acc /= cfg.steps_per_epoch;

        // fixed stream per epoch: same validation batches for every epoch
        Rng val_rng = root.fork(0x7A1);
        for (int vb = 0; vb < cfg.val_batches; ++vb) {
            tapdetail::PatchBatch batch = tapdetail::sample_batch(
                *val_src, val_lo, val_src->n_frames, cfg.patch, cfg.batch_size, val_aug, val_rng);
            tapdetail::BatchEval ev =
                tapdetail::tap_batch_pass(result.bundle, batch, cfg.loss, nullptr, 0.0);
            m.val_total += ev.total;
            m.val_decorr += ev.decorr;
            m.val_acc += ev.acc;
        }
        m.val_total /= cfg.val_batches;
        m.val_decorr /= cfg.val_batches;
        m.val_acc /= cfg.val_batches;
        result.history.push_back(m);
    }
    result.bundle.trained_epochs = cfg.epochs;
    return result;
}

}  // namespace taprec
