// Architecture tests: shape contracts, structural head properties
// (equivariance, symmetrization), initialization statistics, the
// fully-convolutional interior-window property, checkpoint integrity, and
// finite-difference gradient checks through the composite graphs.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taprec/io/checkpoint.hpp"
#include "taprec/model.hpp"

using namespace taprec;
using Catch::Approx;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
    Tensor t(n, c, h, w);
    for (size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

ImageU8 random_image(int h, int w, Rng& rng) {
    ImageU8 img;
    img.height = h;
    img.width = w;
    img.channels = 1;
    img.pixels.resize(static_cast<size_t>(h) * w);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
    return img;
}

BackboneConfig tiny_config(int n_blocks = 1, int base = 3, int c0 = 4, int out_down = 2) {
    BackboneConfig cfg;
    cfg.n_blocks = n_blocks;
    cfg.base_channels = base;
    cfg.feature_channels = c0;
    cfg.output_downsample = out_down;
    return cfg;
}

}  // namespace

// ============================================================================
// encode: shape contracts
// ============================================================================

TEST_CASE("model: default backbone maps 48x48 to (32,12,12)") {
    ModelBundle bundle = init_random(BackboneConfig{}, HeadKind::TapHead, 1);
    Rng rng(2);
    Tensor z = encode(bundle, random_image(48, 48, rng));
    REQUIRE(z.n() == 1);
    REQUIRE(z.c() == 32);
    REQUIRE(z.h() == 12);
    REQUIRE(z.w() == 12);
    for (size_t i = 0; i < z.numel(); ++i) REQUIRE(std::isfinite(z[i]));
}

TEST_CASE("model: doubling input size doubles feature dims") {
    ModelBundle bundle = init_random(BackboneConfig{}, HeadKind::TapHead, 1);
    Rng rng(3);
    Tensor z = encode(bundle, random_image(96, 96, rng));
    REQUIRE(z.h() == 24);
    REQUIRE(z.w() == 24);
}

TEST_CASE("model: indivisible input dims are rejected") {
    ModelBundle bundle = init_random(tiny_config(2, 2, 3, 4), HeadKind::TapHead, 1);
    Rng rng(4);
    ImageU8 img = random_image(18, 16, rng);
    REQUIRE_THROWS_AS(encode(bundle, img), DimensionError);
}

TEST_CASE("model: encoding is deterministic") {
    ModelBundle bundle = init_random(tiny_config(), HeadKind::TapHead, 9);
    Rng rng(5);
    ImageU8 img = random_image(16, 16, rng);
    Tensor a = encode(bundle, img);
    Tensor b = encode(bundle, img);
    for (size_t i = 0; i < a.numel(); ++i) REQUIRE(a[i] == b[i]);
}

// ============================================================================
// TAP head: structural time equivariance
// ============================================================================

TEST_CASE("model: TAP head swaps logits when inputs swap, 100 pairs x 10 inits") {
    const int c0 = 6;
    for (uint64_t init = 0; init < 10; ++init) {
        ParamSet ps;
        Rng rng(100 + init);
        init_head(ps, HeadKind::TapHead, c0, rng);
        Rng data(200 + init);
        for (int trial = 0; trial < 100; ++trial) {
            Tape t;
            Var za = t.input(random_tensor(1, c0, 8, 8, data));
            Var zb = t.input(random_tensor(1, c0, 8, 8, data));
            auto [p, q] = tap_head_forward(t, ps, za, zb);
            auto [p2, q2] = tap_head_forward(t, ps, zb, za);
            REQUIRE(t.val(p2)[0] == t.val(q)[0]);
            REQUIRE(t.val(q2)[0] == t.val(p)[0]);
        }
    }
}

TEST_CASE("model: TAP head gives equal logits for identical inputs") {
    ParamSet ps;
    Rng rng(7);
    init_head(ps, HeadKind::TapHead, 5, rng);
    Tape t;
    Tensor z = random_tensor(2, 5, 6, 6, rng);
    Var za = t.input(z);
    Var zb = t.input(z);
    auto [p, q] = tap_head_forward(t, ps, za, zb);
    for (int i = 0; i < 2; ++i) REQUIRE(t.val(p)[i] == t.val(q)[i]);
}

TEST_CASE("model: TAP head rejects mismatched feature shapes") {
    ParamSet ps;
    Rng rng(8);
    init_head(ps, HeadKind::TapHead, 4, rng);
    Tape t;
    Var za = t.input(random_tensor(1, 4, 8, 8, rng));
    Var zb = t.input(random_tensor(1, 4, 6, 8, rng));
    REQUIRE_THROWS_AS(tap_head_forward(t, ps, za, zb), DimensionError);
}

// ============================================================================
// Event heads
// ============================================================================

TEST_CASE("model: zero final layer gives (0,0) logits for any input") {
    Rng rng(11);
    for (HeadKind kind : {HeadKind::LinearEventHead, HeadKind::ResNetEventHead}) {
        ParamSet ps;
        init_head(ps, kind, 4, rng);
        const std::string out =
            kind == HeadKind::LinearEventHead ? "head.linear.out" : "head.resnet.out";
        ps.get(out + ".w").value.fill(0.0);
        ps.get(out + ".b").value.fill(0.0);
        for (int trial = 0; trial < 5; ++trial) {
            Tape t;
            Var za = t.input(random_tensor(3, 4, 8, 8, rng));
            Var zb = t.input(random_tensor(3, 4, 8, 8, rng));
            Var logits = event_head_forward(t, ps, kind, false, za, zb);
            for (size_t i = 0; i < t.val(logits).numel(); ++i) REQUIRE(t.val(logits)[i] == 0.0);
        }
    }
}

TEST_CASE("model: symmetrize makes event heads exactly swap-invariant") {
    Rng rng(12);
    for (HeadKind kind : {HeadKind::LinearEventHead, HeadKind::ResNetEventHead}) {
        ParamSet ps;
        init_head(ps, kind, 5, rng);
        for (int trial = 0; trial < 10; ++trial) {
            Tape t;
            Var za = t.input(random_tensor(2, 5, 6, 6, rng));
            Var zb = t.input(random_tensor(2, 5, 6, 6, rng));
            Var ab = event_head_forward(t, ps, kind, true, za, zb);
            Var ba = event_head_forward(t, ps, kind, true, zb, za);
            for (size_t i = 0; i < t.val(ab).numel(); ++i)
                REQUIRE(t.val(ab)[i] == t.val(ba)[i]);
        }
    }
}

TEST_CASE("model: unsymmetrized event heads are order-sensitive") {
    Rng rng(13);
    for (HeadKind kind : {HeadKind::LinearEventHead, HeadKind::ResNetEventHead}) {
        ParamSet ps;
        init_head(ps, kind, 5, rng);
        Tape t;
        Var za = t.input(random_tensor(1, 5, 6, 6, rng));
        Var zb = t.input(random_tensor(1, 5, 6, 6, rng));
        Var ab = event_head_forward(t, ps, kind, false, za, zb);
        Var ba = event_head_forward(t, ps, kind, false, zb, za);
        bool differs = false;
        for (size_t i = 0; i < t.val(ab).numel(); ++i)
            if (t.val(ab)[i] != t.val(ba)[i]) differs = true;
        REQUIRE(differs);
    }
}

TEST_CASE("model: ResNet head on (32,12,12) features yields 2 logits") {
    ParamSet ps;
    Rng rng(14);
    init_head(ps, HeadKind::ResNetEventHead, 32, rng);
    Tape t;
    Var za = t.input(random_tensor(1, 32, 12, 12, rng));
    Var zb = t.input(random_tensor(1, 32, 12, 12, rng));
    Var logits = event_head_forward(t, ps, HeadKind::ResNetEventHead, false, za, zb);
    REQUIRE(t.val(logits).n() == 1);
    REQUIRE(t.val(logits).c() == 2);
    REQUIRE(t.val(logits).h() == 1);
    REQUIRE(t.val(logits).w() == 1);
    for (size_t i = 0; i < 2; ++i) REQUIRE(std::isfinite(t.val(logits)[i]));
}

TEST_CASE("model: event forward refuses the TAP head and vice versa") {
    ModelBundle tap = init_random(tiny_config(), HeadKind::TapHead, 3);
    Rng rng(15);
    ImageU8 a = random_image(16, 16, rng);
    ImageU8 b = random_image(16, 16, rng);
    REQUIRE_THROWS_AS(event_logit_pair(tap, a, b), WrongHeadError);

    ModelBundle lin = init_random(tiny_config(), HeadKind::LinearEventHead, 3);
    REQUIRE_THROWS_AS(tap_logit_pair(lin, a, b), WrongHeadError);
    // the event bundle evaluates fine
    auto [l0, l1] = event_logit_pair(lin, a, b);
    REQUIRE(std::isfinite(l0));
    REQUIRE(std::isfinite(l1));
}

TEST_CASE("model: symmetrize flag is rejected on the TAP head") {
    REQUIRE_THROWS_AS(init_random(tiny_config(), HeadKind::TapHead, 1, true), ConfigError);
}

// ============================================================================
// Initialization
// ============================================================================

TEST_CASE("model: initialization is deterministic in the seed") {
    ModelBundle a = init_random(tiny_config(2, 4, 4, 4), HeadKind::ResNetEventHead, 42);
    ModelBundle b = init_random(tiny_config(2, 4, 4, 4), HeadKind::ResNetEventHead, 42);
    ModelBundle c = init_random(tiny_config(2, 4, 4, 4), HeadKind::ResNetEventHead, 43);
    REQUIRE(a.params.items().size() == b.params.items().size());
    bool all_equal = true, any_diff_c = false;
    for (size_t i = 0; i < a.params.items().size(); ++i) {
        const Tensor& va = a.params.items()[i]->value;
        const Tensor& vb = b.params.items()[i]->value;
        const Tensor& vc = c.params.items()[i]->value;
        for (size_t k = 0; k < va.numel(); ++k) {
            if (va[k] != vb[k]) all_equal = false;
            if (va[k] != vc[k]) any_diff_c = true;
        }
    }
    REQUIRE(all_equal);
    REQUIRE(any_diff_c);
}

TEST_CASE("model: weights respect the Kaiming-uniform fan-in bound") {
    ModelBundle bundle = init_random(BackboneConfig{}, HeadKind::ResNetEventHead, 77);
    int checked = 0;
    for (const auto& p : bundle.params.items()) {
        const Tensor& v = p->value;
        const bool is_weight = p->name.size() > 2 && p->name.substr(p->name.size() - 2) == ".w";
        if (!is_weight) {
            for (size_t i = 0; i < v.numel(); ++i) REQUIRE(v[i] == 0.0);  // zero biases
            continue;
        }
        const int fan_in = v.c() * v.h() * v.w();
        const double bound = std::sqrt(6.0 / fan_in);
        double max_abs = 0.0;
        for (size_t i = 0; i < v.numel(); ++i) max_abs = std::max(max_abs, std::abs(v[i]));
        REQUIRE(max_abs <= bound);
        if (v.numel() >= 512) REQUIRE(max_abs >= 0.5 * bound);  // not degenerate
        ++checked;
    }
    REQUIRE(checked >= 8);
}

// ============================================================================
// Fully-convolutional interior-window property
// ============================================================================

TEST_CASE("model: crop features equal the interior of full-frame features") {
    // Norm-free backbone: a feature cell whose receptive cone lies inside the
    // crop must be identical whether the crop or the full frame was encoded.
    BackboneConfig cfg = tiny_config(3, 4, 4, 4);
    ModelBundle bundle = init_random(cfg, HeadKind::TapHead, 5);
    Rng rng(21);
    ImageU8 full = random_image(96, 96, rng);

    const int origin = 16, crop_px = 64;  // origin aligned to the encoder stride (8)
    ImageU8 crop;
    crop.height = crop_px;
    crop.width = crop_px;
    crop.channels = 1;
    crop.pixels.resize(static_cast<size_t>(crop_px) * crop_px);
    for (int y = 0; y < crop_px; ++y)
        for (int x = 0; x < crop_px; ++x)
            crop.pixels[static_cast<size_t>(y) * crop_px + x] = full.at(origin + y, origin + x);

    Tensor zf = encode(bundle, full);   // (1,4,24,24)
    Tensor zc = encode(bundle, crop);   // (1,4,16,16)
    const int off = origin / cfg.output_downsample;  // 4 feature cells
    const int margin = 6;  // receptive-field half-width ~23 px / stride 4
    double max_diff = 0.0;
    for (int ch = 0; ch < zc.c(); ++ch)
        for (int y = margin; y < zc.h() - margin; ++y)
            for (int x = margin; x < zc.w() - margin; ++x)
                max_diff = std::max(max_diff, std::abs(zc.at(0, ch, y, x) -
                                                       zf.at(0, ch, off + y, off + x)));
    REQUIRE(max_diff <= 1e-12);
}

// ============================================================================
// Gradient flow through composite graphs
// ============================================================================

namespace {

// Central finite difference on individual parameter entries against the
// tape's accumulated gradients.
template <typename BuildLoss>
void check_param_gradients(ParamSet& ps, BuildLoss build, int probes, Rng& rng, double tol) {
    Tape t;
    Var loss = build(t);
    t.backward(loss);

    std::vector<std::pair<Param*, size_t>> entries;
    for (const auto& p : ps.items())
        for (size_t i = 0; i < p->value.numel(); ++i) entries.push_back({p.get(), i});

    const double h = 1e-5;
    for (int k = 0; k < probes; ++k) {
        auto [p, i] = entries[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(entries.size()) - 1))];
        const double keep = p->value[i];
        p->value[i] = keep + h;
        Tape tp;
        const double fp = tp.val(build(tp))[0];
        p->value[i] = keep - h;
        Tape tm;
        const double fm = tm.val(build(tm))[0];
        p->value[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = p->grad[i];
        REQUIRE(std::abs(fd - an) <= tol * std::max({1.0, std::abs(fd), std::abs(an)}));
    }
}

}  // namespace

TEST_CASE("model: parameter gradients through backbone + TAP head match finite differences") {
    BackboneConfig cfg = tiny_config(2, 3, 4, 2);  // exercises the decoder path
    ParamSet ps;
    Rng rng(31);
    init_backbone(ps, cfg, rng);
    init_head(ps, HeadKind::TapHead, cfg.feature_channels, rng);

    Rng data(32);
    Tensor xa = random_tensor(2, 1, 16, 16, data, 0.5);
    Tensor xb = random_tensor(2, 1, 16, 16, data, 0.5);
    auto build = [&](Tape& t) {
        Var za = backbone_forward(t, ps, cfg, t.input(xa));
        Var zb = backbone_forward(t, ps, cfg, t.input(xb));
        Var logits = tap_head_logits(t, ps, za, zb);
        return t.softmax_cross_entropy(logits, {0, 1});
    };
    Rng probe(33);
    check_param_gradients(ps, build, 14, probe, 1e-4);
}

TEST_CASE("model: parameter gradients through the ResNet event head match finite differences") {
    ParamSet ps;
    Rng rng(34);
    init_head(ps, HeadKind::ResNetEventHead, 5, rng);
    Rng data(35);
    Tensor za = random_tensor(2, 5, 6, 6, data);
    Tensor zb = random_tensor(2, 5, 6, 6, data);
    auto build = [&](Tape& t) {
        Var logits =
            event_head_forward(t, ps, HeadKind::ResNetEventHead, false, t.input(za), t.input(zb));
        return t.softmax_cross_entropy(logits, {1, 0});
    };
    Rng probe(36);
    check_param_gradients(ps, build, 12, probe, 1e-4);
}

TEST_CASE("model: parameter gradients through the symmetrized linear head match finite differences") {
    ParamSet ps;
    Rng rng(37);
    init_head(ps, HeadKind::LinearEventHead, 4, rng);
    Rng data(38);
    Tensor za = random_tensor(3, 4, 4, 4, data);
    Tensor zb = random_tensor(3, 4, 4, 4, data);
    auto build = [&](Tape& t) {
        Var logits =
            event_head_forward(t, ps, HeadKind::LinearEventHead, true, t.input(za), t.input(zb));
        return t.softmax_cross_entropy(logits, {1, 0, 1});
    };
    Rng probe(39);
    check_param_gradients(ps, build, 8, probe, 1e-4);
}

// ============================================================================
// Checkpoints
// ============================================================================

namespace {

// Rewrites the trailing file digest after a deliberate byte patch, so the
// loader reaches the header validation being probed.
void refresh_trailer(std::vector<uint8_t>& bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size() - 32);
    const auto tail = h.finish();
    std::copy(tail.begin(), tail.end(), bytes.end() - 32);
}

ModelBundle sample_bundle() {
    ModelBundle b = init_random(tiny_config(2, 3, 4, 4), HeadKind::ResNetEventHead, 99, true);
    b.strategy = "tap-pretrained+resnet";
    b.trained_epochs = 30;
    b.train_seed = 1234;
    b.temperature = 1.75;
    return b;
}

}  // namespace

TEST_CASE("checkpoint: save/load roundtrip preserves weights and provenance") {
    ModelBundle b = sample_bundle();
    const std::string path = temp_path("taprec_ckpt_roundtrip.bin");
    save_checkpoint(b, path);
    ModelBundle r = load_checkpoint(path);

    REQUIRE(r.config == b.config);
    REQUIRE(r.head_kind == b.head_kind);
    REQUIRE(r.symmetrize == b.symmetrize);
    REQUIRE(r.strategy == b.strategy);
    REQUIRE(r.trained_epochs == b.trained_epochs);
    REQUIRE(r.init_seed == b.init_seed);
    REQUIRE(r.train_seed == b.train_seed);
    REQUIRE(r.temperature == b.temperature);
    REQUIRE(r.params.items().size() == b.params.items().size());
    for (size_t i = 0; i < b.params.items().size(); ++i) {
        const Param& pa = *b.params.items()[i];
        const Param& pb = r.params.get(pa.name);
        REQUIRE(pa.value.numel() == pb.value.numel());
        for (size_t k = 0; k < pa.value.numel(); ++k) REQUIRE(pa.value[k] == pb.value[k]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: corrupted payload is refused by the checksum") {
    ModelBundle b = sample_bundle();
    const std::string path = temp_path("taprec_ckpt_corrupt.bin");
    save_checkpoint(b, path);
    std::vector<uint8_t> bytes = read_file(path);
    bytes[bytes.size() / 2] ^= 0x40;
    write_file(path, bytes);
    REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("checksum"));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: unsupported version is refused by name") {
    ModelBundle b = sample_bundle();
    const std::string path = temp_path("taprec_ckpt_version.bin");
    save_checkpoint(b, path);
    std::vector<uint8_t> bytes = read_file(path);
    bytes[8] = 99;  // version field follows the 8-byte magic
    refresh_trailer(bytes);
    write_file(path, bytes);
    REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("version"));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: weight shapes must match the stored config") {
    ModelBundle b = sample_bundle();
    const std::string path = temp_path("taprec_ckpt_shape.bin");
    save_checkpoint(b, path);
    std::vector<uint8_t> bytes = read_file(path);
    // patch base_channels (second config field) from 3 to 4 and fix both the
    // config digest and the trailer, so shape validation is what trips
    const size_t cfg_off = 8 + 4 + 32 + 2;
    bytes[cfg_off + 4] = 4;
    BackboneConfig patched = b.config;
    patched.base_channels = 4;
    Sha256 h;
    h.update(patched.canonical_text());
    const auto digest = h.finish();
    std::copy(digest.begin(), digest.end(), bytes.begin() + 12);
    refresh_trailer(bytes);
    write_file(path, bytes);
    REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("shape"));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncated file is refused") {
    ModelBundle b = sample_bundle();
    const std::string path = temp_path("taprec_ckpt_trunc.bin");
    save_checkpoint(b, path);
    std::vector<uint8_t> bytes = read_file(path);
    bytes.resize(bytes.size() / 3);
    write_file(path, bytes);
    REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: garbage bytes are refused") {
    const std::string path = temp_path("taprec_ckpt_garbage.bin");
    std::vector<uint8_t> bytes(4096, 0xAB);
    write_file(path, bytes);
    REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
    std::filesystem::remove(path);
}
