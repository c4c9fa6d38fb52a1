#pragma once

// ============================================================================
// Model checkpoint container
// ============================================================================
// Versioned little-endian binary layout:
//
//   offset  size  field
//   0       8     magic "TAPCKPT\0"
//   8       4     format version (u32, currently 1)
//   12      32    SHA-256 of the backbone config's canonical text
//   44      1     head kind (0 tap, 1 linear, 2 resnet)
//   45      1     symmetrize flag
//   46      20    backbone config (5 x i32)
//   66      ...   provenance: strategy (u32 len + bytes), trained_epochs i32,
//                 init_seed u64, train_seed u64, temperature f64
//   ...     4     record count (u32)
//   ...           records: name (u32 len + bytes), shape (4 x u32),
//                 values (f64 x numel)
//   end-32  32    SHA-256 of everything before it
//
// Loading refuses wrong magic, unknown versions, digest mismatches, and any
// record whose name or shape disagrees with what the stored config implies.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/sha256.hpp"
#include "taprec/io/fsio.hpp"
#include "taprec/model.hpp"

namespace taprec {

namespace ckptdetail {

constexpr char kMagic[8] = {'T', 'A', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_i32(std::vector<uint8_t>& b, int32_t v) { put_u32(b, static_cast<uint32_t>(v)); }
inline void put_f64(std::vector<uint8_t>& b, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(b, bits);
}
inline void put_str(std::vector<uint8_t>& b, const std::string& s) {
    put_u32(b, static_cast<uint32_t>(s.size()));
    b.insert(b.end(), s.begin(), s.end());
}

class Cursor {
public:
    Cursor(const std::vector<uint8_t>& data, size_t limit) : data_(data), limit_(limit) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[at_ + i]) << (8 * i);
        at_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[at_ + i]) << (8 * i);
        at_ += 8;
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    uint8_t u8() {
        need(1);
        return data_[at_++];
    }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + at_), n);
        at_ += n;
        return s;
    }
    void raw(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, data_.data() + at_, n);
        at_ += n;
    }
    size_t at() const { return at_; }

private:
    void need(size_t n) const {
        if (at_ + n > limit_) throw IoError("checkpoint: truncated file");
    }
    const std::vector<uint8_t>& data_;
    size_t limit_;
    size_t at_ = 0;
};

inline std::array<uint8_t, 32> config_digest(const BackboneConfig& cfg) {
    Sha256 h;
    h.update(cfg.canonical_text());
    return h.finish();
}

}  // namespace ckptdetail

inline void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
    using namespace ckptdetail;
    std::vector<uint8_t> b;
    b.insert(b.end(), kMagic, kMagic + 8);
    put_u32(b, kVersion);
    const auto digest = config_digest(bundle.config);
    b.insert(b.end(), digest.begin(), digest.end());
    b.push_back(static_cast<uint8_t>(bundle.head_kind));
    b.push_back(bundle.symmetrize ? 1 : 0);
    put_i32(b, bundle.config.n_blocks);
    put_i32(b, bundle.config.base_channels);
    put_i32(b, bundle.config.feature_channels);
    put_i32(b, bundle.config.downsample_per_block);
    put_i32(b, bundle.config.output_downsample);
    put_str(b, bundle.strategy);
    put_i32(b, bundle.trained_epochs);
    put_u64(b, bundle.init_seed);
    put_u64(b, bundle.train_seed);
    put_f64(b, bundle.temperature);

    const auto& items = bundle.params.items();
    put_u32(b, static_cast<uint32_t>(items.size()));
    for (const auto& p : items) {
        put_str(b, p->name);
        put_u32(b, static_cast<uint32_t>(p->value.n()));
        put_u32(b, static_cast<uint32_t>(p->value.c()));
        put_u32(b, static_cast<uint32_t>(p->value.h()));
        put_u32(b, static_cast<uint32_t>(p->value.w()));
        for (size_t i = 0; i < p->value.numel(); ++i) put_f64(b, p->value[i]);
    }

    Sha256 h;
    h.update(b.data(), b.size());
    const auto tail = h.finish();
    b.insert(b.end(), tail.begin(), tail.end());
    write_file(path, b);
}

inline ModelBundle load_checkpoint(const std::string& path) {
    using namespace ckptdetail;
    const std::vector<uint8_t> b = read_file(path);
    if (b.size() < 8 + 4 + 32 + 2 + 20 + 32) throw IoError("checkpoint: truncated file");

    // trailer digest covers everything before it
    Sha256 h;
    h.update(b.data(), b.size() - 32);
    const auto want = h.finish();
    if (std::memcmp(want.data(), b.data() + b.size() - 32, 32) != 0)
        throw IoError("checkpoint: checksum mismatch (file corrupted)");

    Cursor c(b, b.size() - 32);
    char magic[8];
    c.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw IoError("checkpoint: bad magic bytes");
    const uint32_t version = c.u32();
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + ")");

    uint8_t stored_cfg_digest[32];
    c.raw(stored_cfg_digest, 32);
    const uint8_t kind_raw = c.u8();
    if (kind_raw > 2) throw IoError("checkpoint: invalid head kind");
    const bool symmetrize = c.u8() != 0;

    BackboneConfig cfg;
    cfg.n_blocks = c.i32();
    cfg.base_channels = c.i32();
    cfg.feature_channels = c.i32();
    cfg.downsample_per_block = c.i32();
    cfg.output_downsample = c.i32();
    cfg.validate();
    const auto cfg_digest = config_digest(cfg);
    if (std::memcmp(cfg_digest.data(), stored_cfg_digest, 32) != 0)
        throw IoError("checkpoint: config digest mismatch");

    ModelBundle bundle;
    bundle.config = cfg;
    bundle.head_kind = static_cast<HeadKind>(kind_raw);
    bundle.symmetrize = symmetrize;
    bundle.strategy = c.str();
    bundle.trained_epochs = c.i32();
    bundle.init_seed = c.u64();
    bundle.train_seed = c.u64();
    bundle.temperature = c.f64();

    // canonical shapes implied by the stored config
    ParamSet expected;
    {
        Rng dummy(0);
        init_backbone(expected, cfg, dummy);
        init_head(expected, bundle.head_kind, cfg.feature_channels, dummy);
    }

    const uint32_t n_records = c.u32();
    if (n_records != expected.items().size())
        throw IoError("checkpoint: expected " + std::to_string(expected.items().size()) +
                      " weight records, found " + std::to_string(n_records));
    for (uint32_t i = 0; i < n_records; ++i) {
        const std::string name = c.str();
        const int n = static_cast<int>(c.u32());
        const int ch = static_cast<int>(c.u32());
        const int hh = static_cast<int>(c.u32());
        const int ww = static_cast<int>(c.u32());
        if (!expected.has(name)) throw IoError("checkpoint: unexpected record '" + name + "'");
        Param& dst = expected.get(name);
        const Tensor& like = dst.value;
        if (like.n() != n || like.c() != ch || like.h() != hh || like.w() != ww)
            throw IoError("checkpoint: shape mismatch for '" + name + "': stored " +
                          std::to_string(n) + "x" + std::to_string(ch) + "x" +
                          std::to_string(hh) + "x" + std::to_string(ww) + ", config implies " +
                          std::to_string(like.n()) + "x" + std::to_string(like.c()) + "x" +
                          std::to_string(like.h()) + "x" + std::to_string(like.w()));
        for (size_t k = 0; k < dst.value.numel(); ++k) dst.value[k] = c.f64();
    }
    bundle.params = std::move(expected);
    return bundle;
}

}  // namespace taprec
