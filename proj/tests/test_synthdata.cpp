// Synthetic movie generator and dataset construction tests. The statistical
// checks use analytic expectations derived from the generator's population
// dynamics; the bookkeeping checks pin exact split/balance arithmetic.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <vector>

#include "taprec/core/rng.hpp"
#include "taprec/datapipe.hpp"
#include "taprec/synthmovie.hpp"

using namespace taprec;
using Catch::Approx;

// ============================================================================
// synthmovie
// ============================================================================

TEST_CASE("synth: identical configs produce byte-identical output") {
    SynthConfig cfg;
    cfg.n_frames = 12;
    cfg.height = 48;
    cfg.width = 48;
    cfg.n_cells_init = 8;
    cfg.seed = 7;
    SynthResult a = generate_movie(cfg);
    SynthResult b = generate_movie(cfg);
    REQUIRE(a.movie.data == b.movie.data);
    REQUIRE(a.mask.data == b.mask.data);
    REQUIRE(a.events.size() == b.events.size());

    cfg.seed = 8;
    SynthResult c = generate_movie(cfg);
    REQUIRE(a.movie.data != c.movie.data);
}

TEST_CASE("synth: zero event rates produce an all-zero mask") {
    SynthConfig cfg;
    cfg.n_frames = 10;
    cfg.height = 40;
    cfg.width = 40;
    cfg.n_cells_init = 10;
    cfg.division_rate = 0.0;
    cfg.death_rate = 0.0;
    cfg.seed = 3;
    SynthResult r = generate_movie(cfg);
    for (uint8_t v : r.mask.data) REQUIRE(v == 0);
    REQUIRE(r.events.empty());
}

TEST_CASE("synth: movie and mask shapes agree for assorted configs") {
    for (auto [t, h, w] : {std::tuple{2, 8, 8}, {5, 17, 33}, {12, 64, 32}}) {
        SynthConfig cfg;
        cfg.n_frames = t;
        cfg.height = h;
        cfg.width = w;
        cfg.n_cells_init = 3;
        cfg.seed = 2;
        SynthResult r = generate_movie(cfg);
        REQUIRE(r.movie.n_frames == t);
        REQUIRE(r.mask.n_frames == t);
        REQUIRE(r.movie.data.size() == static_cast<size_t>(t) * h * w);
        REQUIRE(r.mask.data.size() == r.movie.data.size());
        for (uint8_t v : r.mask.data) REQUIRE(v <= 1);
    }
}

TEST_CASE("synth: invalid configs name the offending field") {
    SynthConfig cfg;
    cfg.division_rate = 1.5;
    REQUIRE_THROWS_WITH(generate_movie(cfg), Catch::Matchers::ContainsSubstring("division_rate"));
    cfg = SynthConfig{};
    cfg.n_frames = 1;
    REQUIRE_THROWS_WITH(generate_movie(cfg), Catch::Matchers::ContainsSubstring("n_frames"));
    cfg = SynthConfig{};
    cfg.noise_sigma = -1;
    REQUIRE_THROWS_WITH(generate_movie(cfg), Catch::Matchers::ContainsSubstring("noise_sigma"));
}

namespace {

// Expected per-frame alive population and event starts, mirroring the
// generator's state machine: a division started at frame t renders through
// t..t+2 and contributes two alive daughters from frame t+3.
struct PopulationForecast {
    double expected_events = 0.0;
    double expected_incidences = 0.0;  // event-frame marks, window clipped at movie end
    double expected_trials = 0.0;      // alive cell-frame decision draws
};

PopulationForecast forecast(const SynthConfig& cfg) {
    const double p_div = cfg.division_rate;
    const double p_die = (1.0 - cfg.division_rate) * cfg.death_rate;
    std::vector<double> div_start(cfg.n_frames, 0.0);
    double alive = cfg.n_cells_init;
    PopulationForecast f;
    for (int t = 0; t < cfg.n_frames; ++t) {
        f.expected_trials += alive;
        const double d = alive * p_div;
        const double e = alive * p_die;
        div_start[t] = d;
        f.expected_events += d + e;
        f.expected_incidences += (d + e) * std::min(3, cfg.n_frames - t);
        alive -= d + e;
        if (t >= 2) alive += 2.0 * div_start[t - 2];
    }
    return f;
}

// Count 4-connected components of the mask frame by frame; the sum over
// frames equals the number of (event window x frame) incidences as long as
// simultaneous events do not overlap spatially.
int count_mask_components(const EventMask& mask) {
    const int H = mask.height, W = mask.width;
    int total = 0;
    std::vector<uint8_t> seen(static_cast<size_t>(H) * W);
    for (int t = 0; t < mask.n_frames; ++t) {
        std::fill(seen.begin(), seen.end(), 0);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                if (!mask.px(t, r, c) || seen[static_cast<size_t>(r) * W + c]) continue;
                ++total;
                std::queue<std::pair<int, int>> q;
                q.push({r, c});
                seen[static_cast<size_t>(r) * W + c] = 1;
                while (!q.empty()) {
                    auto [y, x] = q.front();
                    q.pop();
                    const int dy[4] = {1, -1, 0, 0}, dx[4] = {0, 0, 1, -1};
                    for (int k = 0; k < 4; ++k) {
                        const int ny = y + dy[k], nx = x + dx[k];
                        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                        if (!mask.px(t, ny, nx) || seen[static_cast<size_t>(ny) * W + nx])
                            continue;
                        seen[static_cast<size_t>(ny) * W + nx] = 1;
                        q.push({ny, nx});
                    }
                }
            }
    }
    return total;
}

}  // namespace

TEST_CASE("synth: event volume lands inside the analytic binomial band") {
    SynthConfig cfg;
    cfg.n_frames = 96;
    cfg.height = 256;
    cfg.width = 256;
    cfg.n_cells_init = 50;
    cfg.division_rate = 0.012;
    cfg.death_rate = 0.012;
    cfg.drift_px = 0.8;
    cfg.noise_sigma = 4.0;
    cfg.seed = 20260816;

    SynthResult r = generate_movie(cfg);
    const PopulationForecast f = forecast(cfg);
    const double p_event = cfg.division_rate + (1.0 - cfg.division_rate) * cfg.death_rate;
    const double sigma_events = std::sqrt(f.expected_trials * p_event * (1.0 - p_event));

    // the event log is the direct binomial draw
    const double n_events = static_cast<double>(r.events.size());
    REQUIRE(std::abs(n_events - f.expected_events) <= 3.0 * sigma_events);

    // mask connected components recover the same incidences geometrically
    const double incidences = count_mask_components(r.mask);
    REQUIRE(std::abs(incidences - f.expected_incidences) <= 3.0 * 3.0 * sigma_events);
}

TEST_CASE("synth: higher division rate never reduces mean event volume") {
    double mean_px_low = 0.0, mean_px_high = 0.0;
    double mean_frames_low = 0.0, mean_frames_high = 0.0;
    const int n_seeds = 20;
    for (int s = 0; s < n_seeds; ++s) {
        SynthConfig cfg;
        cfg.n_frames = 48;
        cfg.height = 128;
        cfg.width = 128;
        cfg.n_cells_init = 30;
        cfg.death_rate = 0.005;
        cfg.drift_px = 0.8;
        cfg.seed = 1000 + static_cast<uint64_t>(s);

        cfg.division_rate = 0.004;
        SynthResult lo = generate_movie(cfg);
        cfg.division_rate = 0.04;
        SynthResult hi = generate_movie(cfg);

        auto positives = [](const EventMask& m) {
            return std::accumulate(m.data.begin(), m.data.end(), 0.0);
        };
        auto positive_frames = [](const EventMask& m) {
            int n = 0;
            for (int t = 0; t < m.n_frames; ++t) {
                bool any = false;
                for (int r = 0; r < m.height && !any; ++r)
                    for (int c = 0; c < m.width && !any; ++c) any = m.px(t, r, c) != 0;
                n += any;
            }
            return static_cast<double>(n);
        };
        mean_px_low += positives(lo.mask);
        mean_px_high += positives(hi.mask);
        mean_frames_low += positive_frames(lo.mask);
        mean_frames_high += positive_frames(hi.mask);
    }
    REQUIRE(mean_px_high / n_seeds > mean_px_low / n_seeds);
    REQUIRE(mean_frames_high / n_seeds >= mean_frames_low / n_seeds);
}

TEST_CASE("synth: division events visibly split one blob into two") {
    // find a division with no other event nearby and check the intensity
    // pattern: one bright blob before, two separated maxima at window end
    SynthConfig cfg;
    cfg.n_frames = 40;
    cfg.height = 96;
    cfg.width = 96;
    cfg.n_cells_init = 4;
    cfg.division_rate = 0.02;
    cfg.death_rate = 0.0;
    cfg.noise_sigma = 0.0;
    cfg.drift_px = 0.5;
    cfg.seed = 5;
    SynthResult r = generate_movie(cfg);
    REQUIRE_FALSE(r.events.empty());
    const SynthEvent& ev = r.events.front();
    REQUIRE(ev.kind == SynthEvent::Division);
    // mask is positive at the event site during the window
    const int cy = static_cast<int>(ev.y), cx = static_cast<int>(ev.x);
    bool any_marked = false;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const int y = cy + dy, x = cx + dx;
            if (y >= 0 && y < 96 && x >= 0 && x < 96 && r.mask.px(ev.t0, y, x)) any_marked = true;
        }
    REQUIRE(any_marked);
}

// ============================================================================
// datapipe: crop extraction
// ============================================================================

namespace {

SynthResult tiny_movie(int frames, int hw, uint64_t seed, double div = 0.05, double death = 0.02) {
    SynthConfig cfg;
    cfg.n_frames = frames;
    cfg.height = hw;
    cfg.width = hw;
    cfg.n_cells_init = std::max(2, hw / 12);
    cfg.division_rate = div;
    cfg.death_rate = death;
    cfg.seed = seed;
    return generate_movie(cfg);
}

}  // namespace

TEST_CASE("datapipe: a 96-frame movie at 1000 pairs per frame pair yields 95000 samples") {
    SynthResult r = tiny_movie(96, 16, 11, 0.0, 0.0);
    std::vector<CropPairSample> samples = extract_crop_pairs(r.movie, r.mask, 8, 1000, 42);
    REQUIRE(samples.size() == 95000);
}

TEST_CASE("datapipe: 2-frame movie with one pair per frame pair yields one sample at t=0") {
    SynthResult r = tiny_movie(2, 24, 12);
    std::vector<CropPairSample> samples = extract_crop_pairs(r.movie, r.mask, 12, 1, 1);
    REQUIRE(samples.size() == 1);
    REQUIRE(samples[0].t == 0);
    REQUIRE(samples[0].crop_t.height == 12);
    REQUIRE(samples[0].crop_t.width == 12);
}

TEST_CASE("datapipe: all-zero mask propagates into every sample") {
    SynthResult r = tiny_movie(6, 32, 13, 0.0, 0.0);
    std::vector<CropPairSample> samples = extract_crop_pairs(r.movie, r.mask, 16, 20, 3);
    for (const CropPairSample& s : samples) {
        for (uint8_t v : s.mask_t.pixels) REQUIRE(v == 0);
        for (uint8_t v : s.mask_t1.pixels) REQUIRE(v == 0);
    }
}

TEST_CASE("datapipe: crops are exact windows of the source frames") {
    SynthResult r = tiny_movie(4, 40, 14);
    std::vector<CropPairSample> samples = extract_crop_pairs(r.movie, r.mask, 9, 10, 4);
    for (const CropPairSample& s : samples) {
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 9; ++x) {
                REQUIRE(s.crop_t.at(y, x) == r.movie.px(s.t, s.origin_row + y, s.origin_col + x));
                REQUIRE(s.crop_t1.at(y, x) ==
                        r.movie.px(s.t + 1, s.origin_row + y, s.origin_col + x));
                REQUIRE(s.mask_t.at(y, x) == r.mask.px(s.t, s.origin_row + y, s.origin_col + x));
                REQUIRE(s.mask_t1.at(y, x) ==
                        r.mask.px(s.t + 1, s.origin_row + y, s.origin_col + x));
            }
    }
}

TEST_CASE("datapipe: oversized crop is rejected") {
    SynthResult r = tiny_movie(3, 16, 15);
    REQUIRE_THROWS_AS(extract_crop_pairs(r.movie, r.mask, 17, 1, 0), DimensionError);
}

TEST_CASE("datapipe: extraction is deterministic in the seed") {
    SynthResult r = tiny_movie(5, 32, 16);
    auto a = extract_crop_pairs(r.movie, r.mask, 8, 25, 99);
    auto b = extract_crop_pairs(r.movie, r.mask, 8, 25, 99);
    auto c = extract_crop_pairs(r.movie, r.mask, 8, 25, 100);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs = false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].origin_row != b[i].origin_row || a[i].origin_col != b[i].origin_col ||
            a[i].crop_t.pixels != b[i].crop_t.pixels)
            identical = false;
        if (a[i].origin_row != c[i].origin_row || a[i].origin_col != c[i].origin_col)
            differs = true;
    }
    REQUIRE(identical);
    REQUIRE(differs);
}

// ============================================================================
// datapipe: labeling criteria
// ============================================================================

namespace {

CropPairSample sample_with_mask_areas(int area_t, int area_t1, int crop = 48) {
    CropPairSample s;
    for (ImageU8* img : {&s.crop_t, &s.crop_t1, &s.mask_t, &s.mask_t1}) {
        img->height = crop;
        img->width = crop;
        img->channels = 1;
        img->pixels.assign(static_cast<size_t>(crop) * crop, 0);
    }
    for (int i = 0; i < area_t; ++i) s.mask_t.pixels[i] = 1;       // fill from the edge
    for (int i = 0; i < area_t1; ++i) s.mask_t1.pixels[i] = 1;
    return s;
}

int label_with(const CropPairSample& s, LabelKind kind, int threshold = 40) {
    return apply_label_criterion(s, LabelCriterion{kind, threshold});
}

}  // namespace

TEST_CASE("datapipe: the four labeling-criteria illustration rows") {
    // row 1: annotation at the edge of both crops, below the size threshold
    CropPairSample row1 = sample_with_mask_areas(12, 9);
    REQUIRE(label_with(row1, LabelKind::AnySizeBoth) == 1);
    REQUIRE(label_with(row1, LabelKind::AnySizeEither) == 1);
    REQUIRE(label_with(row1, LabelKind::SizeFilterEither) == 0);

    // row 2: annotation away from the edge in the first crop only, above threshold
    CropPairSample row2 = sample_with_mask_areas(55, 0);
    REQUIRE(label_with(row2, LabelKind::AnySizeBoth) == 0);
    REQUIRE(label_with(row2, LabelKind::AnySizeEither) == 1);
    REQUIRE(label_with(row2, LabelKind::SizeFilterEither) == 1);

    // row 3: annotation in the first crop only, at the edge, below threshold
    CropPairSample row3 = sample_with_mask_areas(7, 0);
    REQUIRE(label_with(row3, LabelKind::AnySizeBoth) == 0);
    REQUIRE(label_with(row3, LabelKind::AnySizeEither) == 1);
    REQUIRE(label_with(row3, LabelKind::SizeFilterEither) == 0);

    // row 4: central annotations in both crops, above threshold
    CropPairSample row4 = sample_with_mask_areas(70, 64);
    REQUIRE(label_with(row4, LabelKind::AnySizeBoth) == 1);
    REQUIRE(label_with(row4, LabelKind::AnySizeEither) == 1);
    REQUIRE(label_with(row4, LabelKind::SizeFilterEither) == 1);
}

TEST_CASE("datapipe: threshold boundary is inclusive") {
    CropPairSample at = sample_with_mask_areas(40, 0);
    REQUIRE(label_with(at, LabelKind::SizeFilterEither) == 1);
    CropPairSample below = sample_with_mask_areas(39, 0);
    REQUIRE(label_with(below, LabelKind::SizeFilterEither) == 0);
}

TEST_CASE("datapipe: criterion monotonicity holds on 10000 random samples") {
    Rng rng(77);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const int a = static_cast<int>(rng.uniform_int(0, 80));
        const int b = static_cast<int>(rng.uniform_int(0, 80));
        CropPairSample s = sample_with_mask_areas(a, b, 16);
        const int both = label_with(s, LabelKind::AnySizeBoth);
        const int either = label_with(s, LabelKind::AnySizeEither);
        const int filtered = label_with(s, LabelKind::SizeFilterEither);
        if (both > either) ++violations;
        if (filtered > either) ++violations;
    }
    REQUIRE(violations == 0);
}

TEST_CASE("datapipe: labels are symmetric under crop-order swap") {
    Rng rng(78);
    for (int i = 0; i < 500; ++i) {
        const int a = static_cast<int>(rng.uniform_int(0, 80));
        const int b = static_cast<int>(rng.uniform_int(0, 80));
        CropPairSample s = sample_with_mask_areas(a, b, 16);
        CropPairSample swapped = s;
        std::swap(swapped.crop_t, swapped.crop_t1);
        std::swap(swapped.mask_t, swapped.mask_t1);
        for (LabelKind kind :
             {LabelKind::AnySizeBoth, LabelKind::AnySizeEither, LabelKind::SizeFilterEither}) {
            REQUIRE(label_with(s, kind) == label_with(swapped, kind));
        }
    }
}

TEST_CASE("datapipe: size-filter criterion requires a positive threshold") {
    CropPairSample s = sample_with_mask_areas(10, 10, 8);
    REQUIRE_THROWS_AS(label_with(s, LabelKind::SizeFilterEither, 0), ConfigError);
}

// ============================================================================
// datapipe: splitting and balancing
// ============================================================================

namespace {

std::vector<CropPairSample> light_samples(int n, int n_pos, uint64_t shuffle_seed = 0) {
    std::vector<CropPairSample> out(n);
    for (int i = 0; i < n; ++i) {
        out[i].t = i;
        out[i].label = (i < n_pos) ? 1 : 0;
    }
    if (shuffle_seed) {
        Rng rng(shuffle_seed);
        rng.shuffle(out);
    }
    return out;
}

}  // namespace

TEST_CASE("datapipe: 95000 samples split 0.6/0.2/0.2 into 57000/19000/19000") {
    std::vector<CropPairSample> samples = light_samples(95000, 10000, 5);
    DatasetManifest m = split_dataset(samples, 0.6, 0.2, 0.2, 17);
    REQUIRE(m.train_ids.size() == 57000);
    REQUIRE(m.val_ids.size() == 19000);
    REQUIRE(m.test_ids.size() == 19000);
}

TEST_CASE("datapipe: N=10 splits into 6/2/2") {
    std::vector<CropPairSample> samples = light_samples(10, 4);
    DatasetManifest m = split_dataset(samples, 0.6, 0.2, 0.2, 1);
    REQUIRE(m.train_ids.size() == 6);
    REQUIRE(m.val_ids.size() == 2);
    REQUIRE(m.test_ids.size() == 2);
}

TEST_CASE("datapipe: splits partition the sample set exactly") {
    std::vector<CropPairSample> samples = light_samples(997, 100);
    DatasetManifest m = split_dataset(samples, 0.6, 0.2, 0.2, 23);
    std::vector<uint32_t> all;
    all.insert(all.end(), m.train_ids.begin(), m.train_ids.end());
    all.insert(all.end(), m.val_ids.begin(), m.val_ids.end());
    all.insert(all.end(), m.test_ids.begin(), m.test_ids.end());
    REQUIRE(all.size() == 997);
    std::sort(all.begin(), all.end());
    for (size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
    // positive counts recorded accurately
    REQUIRE(m.train_pos + m.val_pos + m.test_pos == 100);
}

TEST_CASE("datapipe: split assignment is deterministic in the seed") {
    std::vector<CropPairSample> samples = light_samples(300, 50);
    DatasetManifest a = split_dataset(samples, 0.6, 0.2, 0.2, 7);
    DatasetManifest b = split_dataset(samples, 0.6, 0.2, 0.2, 7);
    DatasetManifest c = split_dataset(samples, 0.6, 0.2, 0.2, 8);
    REQUIRE(a.train_ids == b.train_ids);
    REQUIRE(a.val_ids == b.val_ids);
    REQUIRE(a.test_ids == b.test_ids);
    REQUIRE(a.train_ids != c.train_ids);
}

TEST_CASE("datapipe: bad ratios are rejected with a sum violation") {
    std::vector<CropPairSample> samples = light_samples(10, 2);
    REQUIRE_THROWS_WITH(split_dataset(samples, 0.5, 0.2, 0.2, 1),
                        Catch::Matchers::ContainsSubstring("sum to 1"));
    REQUIRE_THROWS_AS(split_dataset(samples, 1.0, 0.0, 0.0, 1), ConfigError);
}

TEST_CASE("datapipe: balancing 7467 positives in a 57000 split yields 14934 samples") {
    std::vector<CropPairSample> train = light_samples(57000, 7467, 9);
    std::vector<CropPairSample> balanced = balance_training_set(train, 31);
    REQUIRE(balanced.size() == 14934);
    int pos = 0;
    for (const CropPairSample& s : balanced) pos += (s.label == 1);
    REQUIRE(pos == 7467);
}

TEST_CASE("datapipe: balancing 3 positives against 10 negatives keeps 3 of each") {
    std::vector<CropPairSample> train = light_samples(13, 3, 4);
    std::vector<CropPairSample> balanced = balance_training_set(train, 5);
    REQUIRE(balanced.size() == 6);
    int pos = 0;
    for (const CropPairSample& s : balanced) pos += (s.label == 1);
    REQUIRE(pos == 3);
}

TEST_CASE("datapipe: an already balanced set passes through unchanged") {
    std::vector<CropPairSample> train = light_samples(20, 10, 6);
    std::vector<CropPairSample> balanced = balance_training_set(train, 7);
    REQUIRE(balanced.size() == 20);
    for (size_t i = 0; i < 20; ++i) {
        REQUIRE(balanced[i].t == train[i].t);
        REQUIRE(balanced[i].label == train[i].label);
    }
}

TEST_CASE("datapipe: balancing requires both classes") {
    std::vector<CropPairSample> all_neg = light_samples(10, 0);
    REQUIRE_THROWS_AS(balance_training_set(all_neg, 1), DataError);
    std::vector<CropPairSample> all_pos = light_samples(10, 10);
    REQUIRE_THROWS_AS(balance_training_set(all_pos, 1), DataError);
}

TEST_CASE("datapipe: balancing is deterministic in the seed") {
    std::vector<CropPairSample> train = light_samples(400, 120, 8);
    auto a = balance_training_set(train, 55);
    auto b = balance_training_set(train, 55);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].t == b[i].t);
}

TEST_CASE("datapipe: spatial holdout separates origin bands") {
    SynthResult r = tiny_movie(4, 64, 19);
    std::vector<CropPairSample> samples = extract_crop_pairs(r.movie, r.mask, 16, 200, 3);
    label_samples(samples, LabelCriterion{LabelKind::AnySizeEither, 40});
    DatasetManifest m = split_dataset_spatial(samples, 0.6, 0.2, 0.2, 64, 16, 0);
    REQUIRE(m.train_ids.size() + m.val_ids.size() + m.test_ids.size() == samples.size());
    int max_train_col = -1, min_test_col = 1 << 20;
    for (uint32_t id : m.train_ids) max_train_col = std::max(max_train_col, samples[id].origin_col);
    for (uint32_t id : m.test_ids) min_test_col = std::min(min_test_col, samples[id].origin_col);
    REQUIRE(max_train_col < min_test_col);
}

TEST_CASE("datapipe: manifest text roundtrips through the kv parser") {
    std::vector<CropPairSample> samples = light_samples(50, 20, 3);
    DatasetManifest m = split_dataset(samples, 0.6, 0.2, 0.2, 2);
    m.crop_size = 48;
    m.criterion = LabelCriterion{LabelKind::SizeFilterEither, 40};
    const std::string text = manifest_to_text(m);
    KvFile f = parse_kv(text);
    REQUIRE(f.syntax_errors.empty());
    REQUIRE(f.values.at("dataset.criterion") == "size-filter-either");
    REQUIRE(f.values.at("splits.train_count") == "30");
    REQUIRE(f.values.at("splits.val_count") == "10");
}
