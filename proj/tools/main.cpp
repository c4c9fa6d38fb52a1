// ============================================================================
// taprec — command-line front end
// ============================================================================
// Thin argument-parsing shell over the pipeline stage functions; every
// subcommand maps onto one library call so tests and the orchestrator share
// the exact code paths. Exit codes: 0 success, 1 stage error (message names
// the stage), 2 usage error.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taprec/io/checkpoint.hpp"
#include "taprec/io/svgplot.hpp"
#include "taprec/pipeline.hpp"
#include "taprec/taptrain.hpp"

namespace {

using namespace taprec;

// Joins accumulated violations into one multi-line error message.
std::string join_violations(const std::string& header, const std::vector<std::string>& items) {
    std::string msg = header;
    for (const std::string& v : items) msg += "\n  - " + v;
    return msg;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config_path;
    std::string out_dir;
    int64_t seed_override = -1;
    bool deterministic = true;
};

SynthConfig load_synth_config(const SynthArgs& a) {
    KvFile file;
    if (!a.config_path.empty()) file = parse_kv(read_text_file(a.config_path));
    KvReader reader(std::move(file));
    SynthConfig cfg = synth_config_from_kv(reader);
    const std::vector<std::string> violations = reader.finish();
    if (!violations.empty())
        throw ConfigError(join_violations("invalid configuration:", violations));
    if (a.seed_override >= 0) cfg.seed = static_cast<uint64_t>(a.seed_override);
    cfg.validate();
    return cfg;
}

void run_synth(const SynthArgs& a) {
    const SynthConfig cfg = load_synth_config(a);
    const SynthStageResult result = run_synth_stage(cfg, a.out_dir);
    std::printf("synth: wrote %d frames (%dx%d), %zu events -> %s\n", cfg.n_frames, cfg.height,
                cfg.width, result.data.events.size(), a.out_dir.c_str());
}

// ---------------------------------------------------------------------------
// build-dataset
// ---------------------------------------------------------------------------

struct BuildDatasetArgs {
    std::string frames_dir;
    std::string masks_dir;
    std::string out_dir;
    std::string criterion = "size-filter-either";
    BuildDatasetOptions opt;
};

void run_build_dataset(const BuildDatasetArgs& a) {
    BuildDatasetOptions opt = a.opt;
    opt.criterion.kind = label_kind_from_name(a.criterion);
    const Movie movie = load_movie_dir(a.frames_dir);
    const EventMask mask = load_mask_dir(a.masks_dir, movie);
    const BuildDatasetResult result = run_build_dataset_stage(movie, mask, opt, a.out_dir);
    std::printf(
        "build-dataset: %zu samples (train %zu/%d+, val %zu/%d+, test %zu/%d+) -> %s\n",
        result.samples.size(), result.manifest.train_ids.size(), result.manifest.train_pos,
        result.manifest.val_ids.size(), result.manifest.val_pos, result.manifest.test_ids.size(),
        result.manifest.test_pos, a.out_dir.c_str());
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainArgs {
    std::string frames_dir;
    std::string val_frames_dir;
    std::string out_path;
    std::string metrics_path;  // default: <out>.metrics.csv
    bool plot = false;
    bool no_augment = false;
    TapTrainConfig train;
    BackboneConfig backbone;
};

void run_pretrain(const PretrainArgs& a) {
    PretrainArgs args = a;
    if (args.no_augment) {
        const double flip = args.train.aug.flip_pair_prob;
        args.train.aug = AugmentationConfig::disabled();
        args.train.aug.flip_pair_prob = flip;  // flips define the labels
    }
    const Movie movie = load_movie_dir(args.frames_dir);
    Movie val_movie;
    const Movie* val = nullptr;
    if (!args.val_frames_dir.empty()) {
        val_movie = load_movie_dir(args.val_frames_dir);
        val = &val_movie;
    }

    const PretrainResult result = pretrain_tap(movie, val, args.backbone, args.train);
    save_checkpoint(result.bundle, args.out_path);

    const std::string metrics_path =
        args.metrics_path.empty() ? args.out_path + ".metrics.csv" : args.metrics_path;
    write_file(metrics_path, tap_metrics_csv(result.history));

    if (args.plot) {
        std::vector<double> tl, vl, ta, va;
        for (const TapEpochMetrics& m : result.history) {
            tl.push_back(m.train_total);
            vl.push_back(m.val_total);
            ta.push_back(m.train_acc);
            va.push_back(m.val_acc);
        }
        write_file(args.out_path + ".loss.svg",
                   line_chart_svg("TAP total loss", "epoch", "loss",
                                  {{"train", tl}, {"val", vl}}));
        write_file(args.out_path + ".accuracy.svg",
                   line_chart_svg("TAP accuracy", "epoch", "accuracy",
                                  {{"train", ta}, {"val", va}}));
    }

    const TapEpochMetrics* last = result.history.empty() ? nullptr : &result.history.back();
    std::printf("pretrain: %d epochs, final val loss %.4f, val accuracy %.3f -> %s\n",
                args.train.epochs, last ? last->val_total : 0.0, last ? last->val_acc : 0.0,
                args.out_path.c_str());
}

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"taprec: time-arrow-prediction pretraining and cell-event recognition"};
    app.require_subcommand(1);

    std::string active_stage = "cli";

    // -- synth ---------------------------------------------------------------
    auto synth_args = std::make_shared<SynthArgs>();
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic movie with event masks");
    synth->add_option("--config", synth_args->config_path,
                      "Config file ([synth] section; missing keys keep defaults)");
    synth->add_option("--out", synth_args->out_dir, "Output directory")->required();
    synth->add_option("--seed", synth_args->seed_override, "Override the config seed");
    synth->add_flag("--deterministic,!--no-deterministic", synth_args->deterministic,
                    "Bit-reproducible mode (default on)");
    synth->callback([&, synth_args] {
        active_stage = "synth";
        run_synth(*synth_args);
    });

    // -- build-dataset ---------------------------------------------------------
    auto bd_args = std::make_shared<BuildDatasetArgs>();
    CLI::App* bd = app.add_subcommand("build-dataset",
                                      "Extract, label and split crop pairs from a movie");
    bd->add_option("--frames", bd_args->frames_dir, "Directory of frame TIFFs")->required();
    bd->add_option("--masks", bd_args->masks_dir, "Directory of mask TIFFs")->required();
    bd->add_option("--out", bd_args->out_dir, "Output directory")->required();
    bd->add_option("--crop-size", bd_args->opt.crop_size, "Square crop side in pixels")
        ->capture_default_str();
    bd->add_option("--pairs-per-frame-pair", bd_args->opt.pairs_per_frame_pair,
                   "Random crop pairs per consecutive frame pair")
        ->capture_default_str();
    bd->add_option("--criterion", bd_args->criterion,
                   "Labeling rule: any-size-both | any-size-either | size-filter-either")
        ->capture_default_str();
    bd->add_option("--threshold", bd_args->opt.criterion.area_threshold,
                   "Mask-area threshold for the size filter")
        ->capture_default_str();
    bd->add_option("--train-ratio", bd_args->opt.r_train, "Train split ratio")
        ->capture_default_str();
    bd->add_option("--val-ratio", bd_args->opt.r_val, "Validation split ratio")
        ->capture_default_str();
    bd->add_option("--test-ratio", bd_args->opt.r_test, "Test split ratio")
        ->capture_default_str();
    bd->add_option("--seed", bd_args->opt.seed, "Sampling and split seed")->capture_default_str();
    bd->add_flag("--spatial-holdout", bd_args->opt.spatial_holdout,
                 "Split by crop origin bands instead of random shuffle");
    bd->callback([&, bd_args] {
        active_stage = "build-dataset";
        run_build_dataset(*bd_args);
    });

    // -- pretrain --------------------------------------------------------------
    auto pt_args = std::make_shared<PretrainArgs>();
    CLI::App* pt = app.add_subcommand(
        "pretrain", "Self-supervised time-arrow pretraining of the feature backbone");
    pt->add_option("--frames", pt_args->frames_dir, "Directory of training frame TIFFs")
        ->required();
    pt->add_option("--val-frames", pt_args->val_frames_dir,
                   "Directory of validation frame TIFFs (default: held-out frame range)");
    pt->add_option("--out", pt_args->out_path, "Checkpoint output path")->required();
    pt->add_option("--epochs", pt_args->train.epochs, "Training epochs")->capture_default_str();
    pt->add_option("--patch", pt_args->train.patch, "Square training patch side")
        ->capture_default_str();
    pt->add_option("--batch-size", pt_args->train.batch_size, "Pairs per optimizer step")
        ->capture_default_str();
    pt->add_option("--steps-per-epoch", pt_args->train.steps_per_epoch, "Batches per epoch")
        ->capture_default_str();
    pt->add_option("--val-batches", pt_args->train.val_batches,
                   "Validation batches evaluated per epoch")
        ->capture_default_str();
    pt->add_option("--lr-start", pt_args->train.lr_start, "Initial learning rate")
        ->capture_default_str();
    pt->add_option("--lr-end", pt_args->train.lr_end, "Final learning rate (cosine decay)")
        ->capture_default_str();
    pt->add_option("--lambda", pt_args->train.loss.lambda, "Decorrelation loss weight")
        ->capture_default_str();
    pt->add_option("--tau", pt_args->train.loss.tau, "Decorrelation softmax temperature")
        ->capture_default_str();
    pt->add_option("--blocks", pt_args->backbone.n_blocks, "Encoder/decoder block count")
        ->capture_default_str();
    pt->add_option("--base-channels", pt_args->backbone.base_channels,
                   "Channels of the first encoder level")
        ->capture_default_str();
    pt->add_option("--feature-channels", pt_args->backbone.feature_channels,
                   "Channels of the dense output feature map")
        ->capture_default_str();
    pt->add_option("--output-downsample", pt_args->backbone.output_downsample,
                   "Spatial downsample factor of the feature map")
        ->capture_default_str();
    pt->add_option("--seed", pt_args->train.seed, "Training seed")->capture_default_str();
    pt->add_option("--metrics", pt_args->metrics_path,
                   "Metrics CSV path (default: <out>.metrics.csv)");
    pt->add_flag("--plot", pt_args->plot, "Also write loss/accuracy curve SVGs next to --out");
    pt->add_flag("--no-augment", pt_args->no_augment,
                 "Disable all augmentations except the temporal order flip");
    pt->add_option("--flip-prob", pt_args->train.aug.flip_pair_prob,
                   "Temporal order flip probability")
        ->capture_default_str();
    pt->add_option("--rotation-max", pt_args->train.aug.rotation_max_deg,
                   "Joint rotation range in degrees")
        ->capture_default_str();
    pt->add_option("--elastic-amp", pt_args->train.aug.elastic_amp_px,
                   "Joint elastic displacement amplitude in pixels")
        ->capture_default_str();
    pt->add_option("--elastic-grid", pt_args->train.aug.elastic_grid,
                   "Elastic control points per side (0 disables)")
        ->capture_default_str();
    pt->add_option("--scale-min", pt_args->train.aug.scale_min, "Joint spatial scale lower bound")
        ->capture_default_str();
    pt->add_option("--scale-max", pt_args->train.aug.scale_max, "Joint spatial scale upper bound")
        ->capture_default_str();
    pt->add_option("--translate-max", pt_args->train.aug.translate_max_px,
                   "Per-crop translation range in pixels")
        ->capture_default_str();
    pt->add_option("--noise-aug", pt_args->train.aug.noise_sigma,
                   "Per-crop additive Gaussian noise sigma")
        ->capture_default_str();
    pt->add_option("--intensity-scale-min", pt_args->train.aug.intensity_scale_min,
                   "Per-crop intensity gain lower bound")
        ->capture_default_str();
    pt->add_option("--intensity-scale-max", pt_args->train.aug.intensity_scale_max,
                   "Per-crop intensity gain upper bound")
        ->capture_default_str();
    pt->add_option("--intensity-shift-max", pt_args->train.aug.intensity_shift_max,
                   "Per-crop additive intensity range")
        ->capture_default_str();
    pt->callback([&, pt_args] {
        active_stage = "pretrain";
        run_pretrain(*pt_args);
    });

    // -- stages arriving with the training/evaluation modules -----------------
    for (const char* name : {"train-head", "eval", "compare", "tap-eval",
                             "calibrate", "explain", "run"}) {
        CLI::App* stub = app.add_subcommand(name, "(not wired up yet)");
        std::string stage = name;
        stub->callback([&active_stage, stage] {
            active_stage = stage;
            throw ConfigError("subcommand not wired up yet");
        });
        stub->allow_extras();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // CLI11 prints usage; nonzero for real errors
    } catch (const Error& e) {
        std::fprintf(stderr, "taprec %s: error: %s\n", active_stage.c_str(), e.what());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
