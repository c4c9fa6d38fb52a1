#pragma once

// ============================================================================
// Model architecture
// ============================================================================
// Three pieces, all built on the autodiff tape:
//   - a U-net style dense backbone f mapping an 8-bit image to a
//     feature map of shape (feature_channels, h/D, w/D) with D the output
//     downsample factor;
//   - a time-equivariant TAP head u: swapping its two inputs swaps its two
//     logits, structurally (the head scores the antisymmetric difference of
//     a shared per-frame embedding);
//   - two event heads h (linear, ResNet) mapping a feature pair to two
//     class logits, order-sensitive by default with an optional
//     symmetrization toggle (average over both orderings).
//
// The backbone is deliberately normalization-free: dense features must be
// translation-local so that encoding a crop reproduces the interior of the
// full-frame features, which any statistic computed over the whole spatial
// extent would break.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/graph.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/io/tiff.hpp"

namespace taprec {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackboneConfig {
    int n_blocks = 3;             // encoder blocks below the stem
    int base_channels = 32;       // stem width; block i has base << i channels
    int feature_channels = 32;    // c0, channels of the dense feature map
    int downsample_per_block = 2; // pooling factor per encoder block
    int output_downsample = 4;    // total downsample of the feature map

    void validate() const {
        if (n_blocks < 1) throw ConfigError("backbone.n_blocks: must be >= 1");
        if (base_channels < 1) throw ConfigError("backbone.base_channels: must be >= 1");
        if (feature_channels < 1) throw ConfigError("backbone.feature_channels: must be >= 1");
        if (downsample_per_block != 2)
            throw ConfigError("backbone.downsample_per_block: only factor 2 is supported");
        int d = output_downsample;
        int steps = 0;
        while (d > 1 && d % 2 == 0) {
            d /= 2;
            ++steps;
        }
        if (d != 1 || steps > n_blocks)
            throw ConfigError(
                "backbone.output_downsample: must be a power of 2 no deeper than the encoder");
    }

    int encoder_downsample() const { return 1 << n_blocks; }

    // Stable textual identity, hashed into checkpoint headers.
    std::string canonical_text() const {
        return "n_blocks=" + std::to_string(n_blocks) +
               ";base_channels=" + std::to_string(base_channels) +
               ";feature_channels=" + std::to_string(feature_channels) +
               ";downsample_per_block=" + std::to_string(downsample_per_block) +
               ";output_downsample=" + std::to_string(output_downsample);
    }

    bool operator==(const BackboneConfig& o) const {
        return canonical_text() == o.canonical_text();
    }
};

enum class HeadKind { TapHead, LinearEventHead, ResNetEventHead };

inline std::string head_kind_name(HeadKind k) {
    switch (k) {
        case HeadKind::TapHead: return "tap";
        case HeadKind::LinearEventHead: return "linear";
        case HeadKind::ResNetEventHead: return "resnet";
    }
    return "?";
}

inline HeadKind head_kind_from_name(const std::string& s) {
    if (s == "tap") return HeadKind::TapHead;
    if (s == "linear") return HeadKind::LinearEventHead;
    if (s == "resnet") return HeadKind::ResNetEventHead;
    throw ConfigError("head: unknown kind '" + s + "' (expected tap | linear | resnet)");
}

// ---------------------------------------------------------------------------
// Named parameter collection
// ---------------------------------------------------------------------------

class ParamSet {
public:
    Param& create(const std::string& name, int n, int c, int h, int w) {
        if (index_.count(name)) throw ConfigError("param '" + name + "' already exists");
        auto p = std::make_shared<Param>(name, Tensor(n, c, h, w));
        index_[name] = items_.size();
        items_.push_back(std::move(p));
        return *items_.back();
    }

    Param& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("param '" + name + "' not found");
        return *items_[it->second];
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::shared_ptr<Param>>& items() const { return items_; }

    std::vector<Param*> pointers() const {
        std::vector<Param*> out;
        out.reserve(items_.size());
        for (const auto& p : items_) out.push_back(p.get());
        return out;
    }

private:
    std::vector<std::shared_ptr<Param>> items_;
    std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

struct ModelBundle {
    BackboneConfig config;
    HeadKind head_kind = HeadKind::TapHead;
    bool symmetrize = false;  // event heads only: average over both orderings
    ParamSet params;

    // training provenance
    std::string strategy = "untrained";
    int trained_epochs = 0;
    uint64_t init_seed = 0;
    uint64_t train_seed = 0;
    double temperature = 0.0;  // calibration temperature; <= 0 means unset
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace modeldetail {

// Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases.
inline void init_conv(ParamSet& ps, const std::string& stem, int cout, int cin, int k, Rng& rng) {
    Param& w = ps.create(stem + ".w", cout, cin, k, k);
    kaiming_uniform(w.value, cin * k * k, rng);
    ps.create(stem + ".b", 1, cout, 1, 1);
}

inline void init_linear(ParamSet& ps, const std::string& stem, int out, int in, Rng& rng) {
    Param& w = ps.create(stem + ".w", out, in, 1, 1);
    kaiming_uniform(w.value, in, rng);
    ps.create(stem + ".b", 1, out, 1, 1);
}

inline int enc_channels(const BackboneConfig& cfg, int level) {
    return cfg.base_channels << level;
}

inline int output_steps(const BackboneConfig& cfg) {
    int d = cfg.output_downsample, steps = 0;
    while (d > 1) {
        d /= 2;
        ++steps;
    }
    return steps;  // output stride = 2^steps
}

}  // namespace modeldetail

inline void init_backbone(ParamSet& ps, const BackboneConfig& cfg, Rng& rng) {
    cfg.validate();
    using namespace modeldetail;
    init_conv(ps, "backbone.stem", enc_channels(cfg, 0), 1, 3, rng);
    for (int i = 1; i <= cfg.n_blocks; ++i)
        init_conv(ps, "backbone.enc" + std::to_string(i), enc_channels(cfg, i),
                  enc_channels(cfg, i - 1), 3, rng);
    const int k = output_steps(cfg);
    for (int j = cfg.n_blocks; j > k; --j)
        init_conv(ps, "backbone.dec" + std::to_string(j - 1), enc_channels(cfg, j - 1),
                  enc_channels(cfg, j) + enc_channels(cfg, j - 1), 3, rng);
    init_conv(ps, "backbone.out", cfg.feature_channels, enc_channels(cfg, k), 1, rng);
}

inline void init_head(ParamSet& ps, HeadKind kind, int c0, Rng& rng) {
    using namespace modeldetail;
    switch (kind) {
        case HeadKind::TapHead:
            init_conv(ps, "head.tap.embed", c0, c0, 3, rng);
            init_conv(ps, "head.tap.cls", c0, c0, 3, rng);
            init_linear(ps, "head.tap.out", 1, c0, rng);
            break;
        case HeadKind::LinearEventHead:
            init_linear(ps, "head.linear.out", 2, 2 * c0, rng);
            break;
        case HeadKind::ResNetEventHead: {
            const int ch = 2 * c0;
            init_conv(ps, "head.resnet.t0", ch, c0, 3, rng);
            init_conv(ps, "head.resnet.t1", ch, c0, 3, rng);
            init_conv(ps, "head.resnet.r1", ch, ch, 3, rng);
            init_conv(ps, "head.resnet.r2", ch, ch, 3, rng);
            init_linear(ps, "head.resnet.out", 2, ch, rng);
            break;
        }
    }
}

// Fresh bundle with Kaiming-uniform weights, deterministic in the seed.
inline ModelBundle init_random(const BackboneConfig& cfg, HeadKind kind, uint64_t seed,
                               bool symmetrize = false) {
    if (kind == HeadKind::TapHead && symmetrize)
        throw ConfigError("head.symmetrize: not applicable to the TAP head");
    ModelBundle b;
    b.config = cfg;
    b.head_kind = kind;
    b.symmetrize = symmetrize;
    b.init_seed = seed;
    Rng root(seed);
    Rng bb = root.fork(0xBB);
    Rng hd = root.fork(0x4D);
    init_backbone(b.params, cfg, bb);
    init_head(b.params, kind, cfg.feature_channels, hd);
    return b;
}

// ---------------------------------------------------------------------------
// Forward graphs
// ---------------------------------------------------------------------------

namespace modeldetail {

inline Var conv_block(Tape& t, const ParamSet& ps, const std::string& stem, Var x, int pad = 1) {
    Var w = t.param(ps.get(stem + ".w"));
    Var b = t.param(ps.get(stem + ".b"));
    return t.leaky_relu(t.conv2d(x, w, b, 1, pad));
}

}  // namespace modeldetail

// Dense feature map forward pass. Input x: (N, 1, h, w) already scaled to
// [0,1]; output: (N, c0, h/D, w/D).
inline Var backbone_forward(Tape& t, const ParamSet& ps, const BackboneConfig& cfg, Var x) {
    using namespace modeldetail;
    const Tensor& tx = t.val(x);
    const int D = cfg.output_downsample;
    if (tx.h() % cfg.encoder_downsample() != 0 || tx.w() % cfg.encoder_downsample() != 0)
        throw DimensionError("encode: input " + std::to_string(tx.h()) + "x" +
                             std::to_string(tx.w()) + " not divisible by downsample factor " +
                             std::to_string(cfg.encoder_downsample()) + " (output factor " +
                             std::to_string(D) + ")");

    std::vector<Var> feats;
    Var cur = conv_block(t, ps, "backbone.stem", x);
    feats.push_back(cur);
    for (int i = 1; i <= cfg.n_blocks; ++i) {
        cur = conv_block(t, ps, "backbone.enc" + std::to_string(i), t.maxpool2(cur));
        feats.push_back(cur);
    }
    const int k = output_steps(cfg);
    for (int j = cfg.n_blocks; j > k; --j) {
        cur = t.upsample_nearest2(cur);
        cur = t.concat_channels(cur, feats[static_cast<size_t>(j) - 1]);
        cur = conv_block(t, ps, "backbone.dec" + std::to_string(j - 1), cur);
    }
    Var w = t.param(ps.get("backbone.out.w"));
    Var b = t.param(ps.get("backbone.out.b"));
    return t.conv2d(cur, w, b, 1, 0);  // 1x1 projection, linear output
}

// TAP head: shared embedding e, antisymmetric difference d = e(a) - e(b),
// shared scorer g; logits (g(d), g(-d)). Swapping a and b negates d exactly
// (IEEE subtraction), so the two logits swap bit-for-bit.
inline std::pair<Var, Var> tap_head_forward(Tape& t, const ParamSet& ps, Var za, Var zb) {
    using namespace modeldetail;
    const Tensor& a = t.val(za);
    const Tensor& b = t.val(zb);
    if (a.c() != b.c() || a.h() != b.h() || a.w() != b.w() || a.n() != b.n())
        throw DimensionError("tap_head: feature shapes differ");

    Var ea = conv_block(t, ps, "head.tap.embed", za);
    Var eb = conv_block(t, ps, "head.tap.embed", zb);
    Var d = t.sub(ea, eb);
    Var dn = t.scale(d, -1.0);

    auto score = [&](Var v) {
        Var h = conv_block(t, ps, "head.tap.cls", v);
        Var pooled = t.global_avg_pool(h);
        Var w = t.param(ps.get("head.tap.out.w"));
        Var bias = t.param(ps.get("head.tap.out.b"));
        return t.linear(pooled, w, bias);  // (N,1,1,1)
    };
    return {score(d), score(dn)};
}

// TAP logits as one (N,2,1,1) tensor: channel 0 = "a precedes b".
inline Var tap_head_logits(Tape& t, const ParamSet& ps, Var za, Var zb) {
    auto [fwd, bwd] = tap_head_forward(t, ps, za, zb);
    return t.concat_channels(fwd, bwd);
}

namespace modeldetail {

inline Var event_forward_once(Tape& t, const ParamSet& ps, HeadKind kind, Var za, Var zb) {
    const Tensor& a = t.val(za);
    const Tensor& b = t.val(zb);
    if (a.c() != b.c() || a.h() != b.h() || a.w() != b.w() || a.n() != b.n())
        throw DimensionError("event_head: feature shapes differ");

    if (kind == HeadKind::LinearEventHead) {
        Var pooled = t.concat_channels(t.global_avg_pool(za), t.global_avg_pool(zb));
        Var w = t.param(ps.get("head.linear.out.w"));
        Var bias = t.param(ps.get("head.linear.out.b"));
        return t.linear(pooled, w, bias);  // (N,2,1,1)
    }

    // ResNet head. The feature pair is a temporal stack of length 2; the
    // first conv couples each slice with its successor (zero-padded), the
    // residual block is shared across slices, and the slices are mean-pooled
    // before the classifier, so temporal structure enters only through the
    // first layer's coupling weights.
    auto tconv = [&](Var z, const char* stem) {
        Var w = t.param(ps.get(std::string("head.resnet.") + stem + ".w"));
        Var bias = t.param(ps.get(std::string("head.resnet.") + stem + ".b"));
        return t.conv2d(z, w, bias, 1, 1);
    };
    Var slice0 = t.leaky_relu(t.add(tconv(za, "t0"), tconv(zb, "t1")));
    Var slice1 = t.leaky_relu(tconv(zb, "t0"));
    auto residual = [&](Var x) {
        Var h = t.leaky_relu(tconv(x, "r1"));
        return t.leaky_relu(t.add(x, tconv(h, "r2")));
    };
    Var mean = t.scale(t.add(residual(slice0), residual(slice1)), 0.5);
    Var pooled = t.global_avg_pool(mean);
    Var w = t.param(ps.get("head.resnet.out.w"));
    Var bias = t.param(ps.get("head.resnet.out.b"));
    return t.linear(pooled, w, bias);  // (N,2,1,1)
}

}  // namespace modeldetail

// Event head forward: two class logits per sample, (N,2,1,1). With
// symmetrize set the result is the average over both input orderings and is
// exactly swap-invariant.
inline Var event_head_forward(Tape& t, const ParamSet& ps, HeadKind kind, bool symmetrize,
                              Var za, Var zb) {
    if (kind == HeadKind::TapHead)
        throw WrongHeadError("event_head: bundle carries the TAP head");
    using modeldetail::event_forward_once;
    Var fwd = event_forward_once(t, ps, kind, za, zb);
    if (!symmetrize) return fwd;
    Var rev = event_forward_once(t, ps, kind, zb, za);
    return t.scale(t.add(fwd, rev), 0.5);
}

// ---------------------------------------------------------------------------
// Inference helpers
// ---------------------------------------------------------------------------

// Stacks single-channel 8-bit crops into an (N,1,h,w) tensor scaled to [0,1].
inline Tensor crops_to_tensor(const std::vector<const ImageU8*>& crops) {
    if (crops.empty()) throw DataError("crops_to_tensor: empty batch");
    const int h = crops[0]->height, w = crops[0]->width;
    Tensor out(static_cast<int>(crops.size()), 1, h, w);
    size_t at = 0;
    for (const ImageU8* img : crops) {
        if (img->channels != 1 || img->height != h || img->width != w)
            throw DimensionError("crops_to_tensor: inconsistent crop shapes");
        for (uint8_t v : img->pixels) out[at++] = static_cast<double>(v) / 255.0;
    }
    return out;
}

inline Tensor crop_to_tensor(const ImageU8& img) { return crops_to_tensor({&img}); }

// Dense features of one image: returns a (1, c0, h/D, w/D) tensor.
inline Tensor encode(const ModelBundle& bundle, const ImageU8& image) {
    Tape t;
    Var x = t.input(crop_to_tensor(image));
    Var z = backbone_forward(t, bundle.params, bundle.config, x);
    return t.val(z);
}

// TAP logits for an ordered crop pair.
inline std::pair<double, double> tap_logit_pair(const ModelBundle& bundle, const ImageU8& a,
                                                const ImageU8& b) {
    if (bundle.head_kind != HeadKind::TapHead)
        throw WrongHeadError("tap_logit_pair: bundle carries an event head");
    Tape t;
    Var xa = t.input(crop_to_tensor(a));
    Var xb = t.input(crop_to_tensor(b));
    Var za = backbone_forward(t, bundle.params, bundle.config, xa);
    Var zb = backbone_forward(t, bundle.params, bundle.config, xb);
    auto [fwd, bwd] = tap_head_forward(t, bundle.params, za, zb);
    return {t.val(fwd)[0], t.val(bwd)[0]};
}

// Event logits for a crop pair (ordered t, t+1).
inline std::pair<double, double> event_logit_pair(const ModelBundle& bundle, const ImageU8& a,
                                                  const ImageU8& b) {
    Tape t;
    Var xa = t.input(crop_to_tensor(a));
    Var xb = t.input(crop_to_tensor(b));
    Var za = backbone_forward(t, bundle.params, bundle.config, xa);
    Var zb = backbone_forward(t, bundle.params, bundle.config, xb);
    Var logits = event_head_forward(t, bundle.params, bundle.head_kind, bundle.symmetrize, za, zb);
    return {t.val(logits)[0], t.val(logits)[1]};
}

}  // namespace taprec
