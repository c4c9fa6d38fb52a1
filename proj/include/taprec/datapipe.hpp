#pragma once

// ============================================================================
// Crop-pair dataset construction
// ============================================================================
// Builds labeled datasets from a movie and its event mask: random same-origin
// crop pairs from consecutive frames, three labeling criteria, shuffled
// train/val/test splitting, and class balancing by majority subsampling.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/io/kvconfig.hpp"
#include "taprec/synthmovie.hpp"

namespace taprec {

struct CropPairSample {
    ImageU8 crop_t, crop_t1;  // grayscale intensity crops
    ImageU8 mask_t, mask_t1;  // {0,1} event-mask crops at the same origin
    int t = 0;                // earlier frame index of the pair
    int origin_row = 0;
    int origin_col = 0;
    int label = -1;           // -1 = unlabeled, otherwise {0,1}
};

enum class LabelKind { AnySizeBoth, AnySizeEither, SizeFilterEither };

inline std::string label_kind_name(LabelKind k) {
    switch (k) {
        case LabelKind::AnySizeBoth: return "any-size-both";
        case LabelKind::AnySizeEither: return "any-size-either";
        case LabelKind::SizeFilterEither: return "size-filter-either";
    }
    return "?";
}

inline LabelKind label_kind_from_name(const std::string& s) {
    if (s == "any-size-both") return LabelKind::AnySizeBoth;
    if (s == "any-size-either") return LabelKind::AnySizeEither;
    if (s == "size-filter-either") return LabelKind::SizeFilterEither;
    throw ConfigError("unknown labeling criterion '" + s +
                      "' (expected any-size-both, any-size-either, size-filter-either)");
}

struct LabelCriterion {
    LabelKind kind = LabelKind::SizeFilterEither;
    int area_threshold = 40;  // pixels; used only by SizeFilterEither

    void validate() const {
        if (kind == LabelKind::SizeFilterEither && area_threshold <= 0)
            throw ConfigError("label criterion: area_threshold must be > 0 for " +
                              label_kind_name(kind));
    }
};

struct DatasetManifest {
    std::vector<uint32_t> train_ids, val_ids, test_ids;
    int train_pos = 0, val_pos = 0, test_pos = 0;
    LabelCriterion criterion;
    int crop_size = 0;
    int dt = 1;
    uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Crop extraction
// ---------------------------------------------------------------------------

namespace datadetail {

inline ImageU8 crop_from(const uint8_t* base, int H, int W, int top, int left, int size) {
    ImageU8 out;
    out.height = size;
    out.width = size;
    out.channels = 1;
    out.pixels.resize(static_cast<size_t>(size) * size);
    (void)H;
    for (int r = 0; r < size; ++r)
        std::copy_n(base + static_cast<size_t>(top + r) * W + left, size,
                    out.pixels.begin() + static_cast<size_t>(r) * size);
    return out;
}

}  // namespace datadetail

// For each consecutive frame pair (t, t+1), samples `pairs_per_frame_pair`
// crop origins uniformly over valid positions; intensity and mask crops are
// taken at identical origins.
inline std::vector<CropPairSample> extract_crop_pairs(const Movie& movie, const EventMask& mask,
                                                      int crop_size, int pairs_per_frame_pair,
                                                      uint64_t seed) {
    if (movie.n_frames != mask.n_frames || movie.height != mask.height ||
        movie.width != mask.width)
        throw DimensionError("extract_crop_pairs: movie and mask shapes differ");
    if (movie.n_frames < 2) throw DimensionError("extract_crop_pairs: movie needs >= 2 frames");
    if (crop_size < 1 || crop_size > movie.height || crop_size > movie.width)
        throw DimensionError("extract_crop_pairs: crop size " + std::to_string(crop_size) +
                             " does not fit " + std::to_string(movie.height) + "x" +
                             std::to_string(movie.width) + " frames");
    if (pairs_per_frame_pair < 0)
        throw ConfigError("extract_crop_pairs: pairs_per_frame_pair must be >= 0");

    const int max_row = movie.height - crop_size;
    const int max_col = movie.width - crop_size;
    Rng root(seed);
    std::vector<CropPairSample> out;
    out.reserve(static_cast<size_t>(movie.n_frames - 1) * pairs_per_frame_pair);
    for (int t = 0; t + 1 < movie.n_frames; ++t) {
        Rng rng = root.fork(static_cast<uint64_t>(t));
        const uint8_t* m0 = movie.data.data() + movie.index(t, 0, 0);
        const uint8_t* m1 = movie.data.data() + movie.index(t + 1, 0, 0);
        const uint8_t* k0 = mask.data.data() + mask.index(t, 0, 0);
        const uint8_t* k1 = mask.data.data() + mask.index(t + 1, 0, 0);
        for (int i = 0; i < pairs_per_frame_pair; ++i) {
            CropPairSample s;
            s.t = t;
            s.origin_row = static_cast<int>(rng.uniform_int(0, max_row));
            s.origin_col = static_cast<int>(rng.uniform_int(0, max_col));
            using datadetail::crop_from;
            s.crop_t = crop_from(m0, movie.height, movie.width, s.origin_row, s.origin_col,
                                 crop_size);
            s.crop_t1 = crop_from(m1, movie.height, movie.width, s.origin_row, s.origin_col,
                                  crop_size);
            s.mask_t = crop_from(k0, movie.height, movie.width, s.origin_row, s.origin_col,
                                 crop_size);
            s.mask_t1 = crop_from(k1, movie.height, movie.width, s.origin_row, s.origin_col,
                                  crop_size);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

inline int count_nonzero(const ImageU8& img) {
    int n = 0;
    for (uint8_t v : img.pixels) n += (v != 0);
    return n;
}

inline int apply_label_criterion(const CropPairSample& sample, const LabelCriterion& criterion) {
    criterion.validate();
    const int a_t = count_nonzero(sample.mask_t);
    const int a_t1 = count_nonzero(sample.mask_t1);
    switch (criterion.kind) {
        case LabelKind::AnySizeBoth: return (a_t > 0 && a_t1 > 0) ? 1 : 0;
        case LabelKind::AnySizeEither: return (a_t > 0 || a_t1 > 0) ? 1 : 0;
        case LabelKind::SizeFilterEither:
            return (std::max(a_t, a_t1) >= criterion.area_threshold) ? 1 : 0;
    }
    return 0;
}

inline void label_samples(std::vector<CropPairSample>& samples,
                          const LabelCriterion& criterion) {
    for (CropPairSample& s : samples) s.label = apply_label_criterion(s, criterion);
}

// ---------------------------------------------------------------------------
// Splitting and balancing
// ---------------------------------------------------------------------------

// Shuffled split with sizes floor(ratio*N) for val and test and the
// remainder assigned to train.
inline DatasetManifest split_dataset(const std::vector<CropPairSample>& samples, double r_train,
                                     double r_val, double r_test, uint64_t seed) {
    if (r_train <= 0 || r_val <= 0 || r_test <= 0)
        throw ConfigError("split_dataset: ratios must be positive");
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw ConfigError("split_dataset: ratios must sum to 1, got " +
                          std::to_string(r_train + r_val + r_test));
    const size_t n = samples.size();
    std::vector<uint32_t> ids(n);
    for (size_t i = 0; i < n; ++i) ids[i] = static_cast<uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(ids);
    const size_t n_val = static_cast<size_t>(r_val * static_cast<double>(n));
    const size_t n_test = static_cast<size_t>(r_test * static_cast<double>(n));
    const size_t n_train = n - n_val - n_test;

    DatasetManifest m;
    m.seed = seed;
    m.train_ids.assign(ids.begin(), ids.begin() + n_train);
    m.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    m.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
    auto count_pos = [&](const std::vector<uint32_t>& part) {
        int p = 0;
        for (uint32_t id : part) p += (samples[id].label == 1);
        return p;
    };
    m.train_pos = count_pos(m.train_ids);
    m.val_pos = count_pos(m.val_ids);
    m.test_pos = count_pos(m.test_ids);
    return m;
}

// Spatial holdout variant: assignment by crop origin column band rather than
// random shuffle, so val/test crops never share image regions with train.
// Split sizes are then approximate.
inline DatasetManifest split_dataset_spatial(const std::vector<CropPairSample>& samples,
                                             double r_train, double r_val, double r_test,
                                             int frame_width, int crop_size, uint64_t seed) {
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw ConfigError("split_dataset: ratios must sum to 1");
    const int span = std::max(1, frame_width - crop_size + 1);
    DatasetManifest m;
    m.seed = seed;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double band = (samples[i].origin_col + 0.5) / span;
        const uint32_t id = static_cast<uint32_t>(i);
        if (band < r_train)
            m.train_ids.push_back(id);
        else if (band < r_train + r_val)
            m.val_ids.push_back(id);
        else
            m.test_ids.push_back(id);
    }
    auto count_pos = [&](const std::vector<uint32_t>& part) {
        int p = 0;
        for (uint32_t id : part) p += (samples[id].label == 1);
        return p;
    };
    m.train_pos = count_pos(m.train_ids);
    m.val_pos = count_pos(m.val_ids);
    m.test_pos = count_pos(m.test_ids);
    return m;
}

// Subsamples the majority class uniformly without replacement so both classes
// end up with exactly min(n_pos, n_neg) samples; kept samples preserve their
// original relative order.
inline std::vector<CropPairSample> balance_training_set(
    const std::vector<CropPairSample>& train, uint64_t seed) {
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < train.size(); ++i) {
        if (train[i].label == 1)
            pos.push_back(i);
        else if (train[i].label == 0)
            neg.push_back(i);
        else
            throw DataError("balance_training_set: sample " + std::to_string(i) +
                            " is unlabeled");
    }
    if (pos.empty() || neg.empty())
        throw DataError("balance_training_set: both classes must be present (got " +
                        std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
                        " negative)");
    const size_t keep = std::min(pos.size(), neg.size());
    Rng rng(seed);
    auto& majority = pos.size() > neg.size() ? pos : neg;
    rng.shuffle(majority);
    majority.resize(keep);
    std::vector<size_t> kept;
    kept.reserve(2 * keep);
    kept.insert(kept.end(), pos.begin(), pos.end());
    kept.insert(kept.end(), neg.begin(), neg.end());
    std::sort(kept.begin(), kept.end());
    std::vector<CropPairSample> out;
    out.reserve(kept.size());
    for (size_t i : kept) out.push_back(train[i]);
    return out;
}

// Gathers the samples belonging to a manifest split.
inline std::vector<CropPairSample> gather(const std::vector<CropPairSample>& samples,
                                          const std::vector<uint32_t>& ids) {
    std::vector<CropPairSample> out;
    out.reserve(ids.size());
    for (uint32_t id : ids) out.push_back(samples[id]);
    return out;
}

// ---------------------------------------------------------------------------
// Manifest serialization (structured text)
// ---------------------------------------------------------------------------

inline std::string manifest_to_text(const DatasetManifest& m) {
    KvWriter w;
    w.section("dataset");
    w.put("criterion", label_kind_name(m.criterion.kind));
    w.put("area_threshold", m.criterion.area_threshold);
    w.put("crop_size", m.crop_size);
    w.put("dt", m.dt);
    w.put("seed", m.seed);
    w.section("splits");
    w.put("train_count", m.train_ids.size());
    w.put("val_count", m.val_ids.size());
    w.put("test_count", m.test_ids.size());
    w.put("train_pos", m.train_pos);
    w.put("val_pos", m.val_pos);
    w.put("test_pos", m.test_pos);
    auto join = [](const std::vector<uint32_t>& v) {
        std::string s;
        s.reserve(v.size() * 7);
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) s.push_back(' ');
            s += std::to_string(v[i]);
        }
        return s;
    };
    w.section("ids");
    w.put("train", join(m.train_ids));
    w.put("val", join(m.val_ids));
    w.put("test", join(m.test_ids));
    return w.str();
}

// Parses the text written by manifest_to_text. Extra sections (a wrapping
// file manifest records source shape and checksums alongside) are ignored;
// malformed or internally inconsistent split data is a data error.
inline DatasetManifest manifest_from_text(const std::string& text) {
    const KvFile file = parse_kv(text);
    if (!file.syntax_errors.empty())
        throw DataError("dataset manifest: " + file.syntax_errors.front());
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = file.values.find(key);
        if (it == file.values.end()) throw DataError("dataset manifest: missing key " + key);
        return it->second;
    };
    auto to_int = [&](const std::string& key) {
        const std::string& s = need(key);
        try {
            size_t used = 0;
            const long long v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError("dataset manifest: " + key + ": '" + s + "' is not an integer");
        }
    };
    auto to_ids = [&](const std::string& key) {
        std::vector<uint32_t> out;
        auto it = file.values.find(key);
        if (it == file.values.end()) throw DataError("dataset manifest: missing key " + key);
        std::istringstream in(it->second);
        long long v = 0;
        while (in >> v) {
            if (v < 0 || v > std::numeric_limits<uint32_t>::max())
                throw DataError("dataset manifest: " + key + ": id " + std::to_string(v) +
                                " out of range");
            out.push_back(static_cast<uint32_t>(v));
        }
        if (!in.eof()) throw DataError("dataset manifest: " + key + ": malformed id list");
        return out;
    };

    DatasetManifest m;
    m.criterion.kind = label_kind_from_name(need("dataset.criterion"));
    try {
        m.criterion.area_threshold = std::stod(need("dataset.area_threshold"));
    } catch (const std::exception&) {
        throw DataError("dataset manifest: dataset.area_threshold is not a number");
    }
    m.crop_size = static_cast<int>(to_int("dataset.crop_size"));
    m.dt = static_cast<int>(to_int("dataset.dt"));
    m.seed = static_cast<uint64_t>(to_int("dataset.seed"));
    m.train_ids = to_ids("ids.train");
    m.val_ids = to_ids("ids.val");
    m.test_ids = to_ids("ids.test");
    m.train_pos = static_cast<int>(to_int("splits.train_pos"));
    m.val_pos = static_cast<int>(to_int("splits.val_pos"));
    m.test_pos = static_cast<int>(to_int("splits.test_pos"));
    const struct {
        const char* key;
        size_t actual;
    } counts[] = {{"splits.train_count", m.train_ids.size()},
                  {"splits.val_count", m.val_ids.size()},
                  {"splits.test_count", m.test_ids.size()}};
    for (const auto& c : counts)
        if (to_int(c.key) != static_cast<long long>(c.actual))
            throw DataError(std::string("dataset manifest: ") + c.key +
                            " disagrees with the id list length");
    return m;
}

}  // namespace taprec
