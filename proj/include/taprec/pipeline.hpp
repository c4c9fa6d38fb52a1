#pragma once

// ============================================================================
// Pipeline stages
// ============================================================================
// Library-level implementations of the CLI subcommands, so the orchestrator
// and the tests drive exactly the same code. Each stage takes validated
// inputs, writes its artifacts under an output directory, and returns the
// list of files it produced together with their SHA-256 checksums. Stage
// manifests are plain structured text; the same parser that reads user
// configs reads them back.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/sha256.hpp"
#include "taprec/datapipe.hpp"
#include "taprec/io/fsio.hpp"
#include "taprec/io/kvconfig.hpp"
#include "taprec/io/sample_store.hpp"
#include "taprec/io/tiff.hpp"
#include "taprec/synthmovie.hpp"

namespace taprec {

// Relative path -> SHA-256 hex of every file a stage wrote.
using FileManifest = std::vector<std::pair<std::string, std::string>>;

namespace pipedetail {

inline std::string checksum_of(const std::string& path) {
    return Sha256::hash_hex(read_file(path));
}

inline void record_file(FileManifest& manifest, const std::string& out_dir,
                        const std::string& rel) {
    manifest.emplace_back(rel, checksum_of(out_dir + "/" + rel));
}

inline std::string indexed_name(const char* stem, int idx) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d.tiff", stem, idx);
    return buf;
}

inline void put_files_section(KvWriter& w, const FileManifest& manifest) {
    w.section("files");
    for (const auto& [rel, digest] : manifest) w.put(rel, digest);
}

}  // namespace pipedetail

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

// Reads the [synth] section; missing keys keep their defaults. Violations
// accumulate in the reader and surface via reader.finish().
inline SynthConfig synth_config_from_kv(KvReader& r) {
    SynthConfig c;
    c.n_frames = static_cast<int>(r.get_int("synth.n_frames", c.n_frames, 2, 100000));
    c.height = static_cast<int>(r.get_int("synth.height", c.height, 8, 65536));
    c.width = static_cast<int>(r.get_int("synth.width", c.width, 8, 65536));
    c.n_cells_init = static_cast<int>(r.get_int("synth.n_cells_init", c.n_cells_init, 0, 1000000));
    c.division_rate = r.get_double("synth.division_rate", c.division_rate, 0.0, 1.0);
    c.death_rate = r.get_double("synth.death_rate", c.death_rate, 0.0, 1.0);
    c.drift_px = r.get_double("synth.drift_px", c.drift_px, 0.0, 1e6);
    c.noise_sigma = r.get_double("synth.noise_sigma", c.noise_sigma, 0.0, 255.0);
    c.seed = static_cast<uint64_t>(r.get_int("synth.seed", static_cast<int64_t>(c.seed), 0,
                                             std::numeric_limits<int64_t>::max()));
    return c;
}

// ---------------------------------------------------------------------------
// synth stage
// ---------------------------------------------------------------------------

struct SynthStageResult {
    SynthResult data;
    FileManifest files;
};

// Renders the movie and writes frames/NNNNN.tiff, masks/NNNNN.tiff and a
// manifest recording the config and every file checksum.
inline SynthStageResult run_synth_stage(const SynthConfig& cfg, const std::string& out_dir) {
    SynthStageResult out;
    out.data = generate_movie(cfg);

    ensure_dir(out_dir + "/frames");
    ensure_dir(out_dir + "/masks");
    for (int t = 0; t < cfg.n_frames; ++t) {
        const std::string frame_rel = "frames/" + pipedetail::indexed_name("frame", t);
        write_tiff(out_dir + "/" + frame_rel, out.data.movie.frame(t));

        ImageU8 m;
        m.height = cfg.height;
        m.width = cfg.width;
        m.channels = 1;
        m.pixels.assign(out.data.mask.data.begin() + out.data.mask.index(t, 0, 0),
                        out.data.mask.data.begin() + out.data.mask.index(t, 0, 0) +
                            static_cast<size_t>(cfg.height) * cfg.width);
        const std::string mask_rel = "masks/" + pipedetail::indexed_name("mask", t);
        write_tiff(out_dir + "/" + mask_rel, m);

        pipedetail::record_file(out.files, out_dir, frame_rel);
        pipedetail::record_file(out.files, out_dir, mask_rel);
    }

    KvWriter w;
    w.comment("synthetic movie manifest");
    w.section("synth");
    w.put("n_frames", cfg.n_frames);
    w.put("height", cfg.height);
    w.put("width", cfg.width);
    w.put("n_cells_init", cfg.n_cells_init);
    w.put("division_rate", cfg.division_rate);
    w.put("death_rate", cfg.death_rate);
    w.put("drift_px", cfg.drift_px);
    w.put("noise_sigma", cfg.noise_sigma);
    w.put("seed", static_cast<int64_t>(cfg.seed));
    w.section("movie");
    w.put("frame_interval_minutes", out.data.movie.frame_interval_minutes);
    w.put("n_events", static_cast<int64_t>(out.data.events.size()));
    pipedetail::put_files_section(w, out.files);
    write_file(out_dir + "/manifest.txt", w.str());
    pipedetail::record_file(out.files, out_dir, "manifest.txt");
    return out;
}

// ---------------------------------------------------------------------------
// movie reload
// ---------------------------------------------------------------------------

namespace pipedetail {

inline std::vector<std::string> sorted_tiffs(const std::string& dir) {
    std::vector<std::string> names;
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".tiff" || ext == ".tif") names.push_back(e.path().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("no TIFF files in " + dir);
    return names;
}

}  // namespace pipedetail

// Rebuilds a movie (or mask volume) from a directory of single-channel TIFF
// frames, ordered by filename.
inline Movie load_movie_dir(const std::string& dir) {
    const std::vector<std::string> names = pipedetail::sorted_tiffs(dir);
    Movie m;
    m.n_frames = static_cast<int>(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
        ImageU8 img = read_tiff(names[i]);
        if (img.channels != 1)
            throw IoError(names[i] + ": expected single-channel frame");
        if (i == 0) {
            m.height = img.height;
            m.width = img.width;
            m.data.reserve(names.size() * img.pixels.size());
        } else if (img.height != m.height || img.width != m.width) {
            throw DimensionError(names[i] + ": frame shape differs from first frame");
        }
        m.data.insert(m.data.end(), img.pixels.begin(), img.pixels.end());
    }
    return m;
}

inline EventMask load_mask_dir(const std::string& dir, const Movie& like) {
    Movie raw = load_movie_dir(dir);
    if (raw.n_frames != like.n_frames || raw.height != like.height || raw.width != like.width)
        throw DimensionError("mask volume shape differs from movie shape");
    EventMask mask;
    mask.n_frames = raw.n_frames;
    mask.height = raw.height;
    mask.width = raw.width;
    mask.data = std::move(raw.data);
    for (uint8_t& v : mask.data) v = v ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// build-dataset stage
// ---------------------------------------------------------------------------

struct BuildDatasetOptions {
    int crop_size = 48;                // square crop side, pixels
    int pairs_per_frame_pair = 1000;   // random crop pairs per consecutive frame pair
    LabelCriterion criterion;          // labeling rule (defaults to size filter)
    double r_train = 0.6, r_val = 0.2, r_test = 0.2;
    uint64_t seed = 1;
    bool spatial_holdout = false;      // band-split by crop origin instead of shuffling
};

struct BuildDatasetResult {
    std::vector<CropPairSample> samples;
    DatasetManifest manifest;
    FileManifest files;
};

// Extracts, labels and splits crop pairs, then writes samples.bin (indexed
// binary container) and manifest.txt (split assignment + counts).
inline BuildDatasetResult run_build_dataset_stage(const Movie& movie, const EventMask& mask,
                                                  const BuildDatasetOptions& opt,
                                                  const std::string& out_dir) {
    opt.criterion.validate();
    BuildDatasetResult out;
    Rng root(opt.seed);
    const uint64_t extract_seed = root.fork(0xE0).seed();
    const uint64_t split_seed = root.fork(0x51).seed();

    out.samples = extract_crop_pairs(movie, mask, opt.crop_size, opt.pairs_per_frame_pair,
                                     extract_seed);
    label_samples(out.samples, opt.criterion);
    out.manifest = opt.spatial_holdout
                       ? split_dataset_spatial(out.samples, opt.r_train, opt.r_val, opt.r_test,
                                               movie.width, opt.crop_size, split_seed)
                       : split_dataset(out.samples, opt.r_train, opt.r_val, opt.r_test,
                                       split_seed);
    out.manifest.criterion = opt.criterion;
    out.manifest.crop_size = opt.crop_size;
    out.manifest.seed = opt.seed;

    ensure_dir(out_dir);
    write_sample_store(out_dir + "/samples.bin", out.samples, opt.crop_size);
    pipedetail::record_file(out.files, out_dir, "samples.bin");

    std::string text = "# crop-pair dataset manifest\n" + manifest_to_text(out.manifest);
    KvWriter files_w;
    files_w.section("source");
    files_w.put("n_frames", movie.n_frames);
    files_w.put("height", movie.height);
    files_w.put("width", movie.width);
    files_w.put("pairs_per_frame_pair", opt.pairs_per_frame_pair);
    files_w.put("spatial_holdout", opt.spatial_holdout);
    pipedetail::put_files_section(files_w, out.files);
    text += files_w.str();
    write_file(out_dir + "/manifest.txt", text);
    pipedetail::record_file(out.files, out_dir, "manifest.txt");
    return out;
}

// ---------------------------------------------------------------------------
// dataset directory loading
// ---------------------------------------------------------------------------

struct LoadedDataset {
    std::vector<CropPairSample> samples;
    DatasetManifest manifest;
};

// Reloads a directory written by run_build_dataset_stage and cross-checks the
// manifest against the sample store (crop size, id ranges, recorded counts).
inline LoadedDataset load_dataset_dir(const std::string& dir) {
    LoadedDataset out;
    out.samples = read_sample_store(dir + "/samples.bin");
    out.manifest = manifest_from_text(read_text_file(dir + "/manifest.txt"));
    const auto n = static_cast<uint32_t>(out.samples.size());
    if (!out.samples.empty() && out.samples.front().crop_t.height != out.manifest.crop_size)
        throw DataError(dir + ": manifest crop_size disagrees with samples.bin");
    for (const std::vector<uint32_t>* ids :
         {&out.manifest.train_ids, &out.manifest.val_ids, &out.manifest.test_ids})
        for (uint32_t id : *ids)
            if (id >= n)
                throw DataError(dir + ": manifest id " + std::to_string(id) +
                                " out of range (store holds " + std::to_string(n) + " samples)");
    return out;
}

}  // namespace taprec
