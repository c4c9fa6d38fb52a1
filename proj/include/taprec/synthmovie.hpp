#pragma once

// ============================================================================
// Synthetic live-cell movie generator
// ============================================================================
// Renders drifting anisotropic Gaussian blobs on a dark noisy background.
// A dividing cell is replaced by two separating daughters over a three-frame
// window; a dying cell fades out in place over three frames. Pixels belonging
// to a cell during its event window are marked 1 in the event mask, giving
// ground truth for downstream crop labeling. Output is a pure function of
// the config, including its seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/image.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/io/tiff.hpp"

namespace taprec {

struct SynthConfig {
    int n_frames = 96;
    int height = 256;
    int width = 256;
    int n_cells_init = 50;
    double division_rate = 0.02;   // per cell per frame
    double death_rate = 0.01;      // per cell per frame
    double drift_px = 1.0;         // mean displacement per frame
    double noise_sigma = 4.0;      // additive Gaussian noise, 8-bit units
    uint64_t seed = 1;

    void validate() const {
        auto bad = [](const std::string& field, const std::string& why) {
            throw ConfigError("synth config: " + field + " " + why);
        };
        if (n_frames < 2) bad("n_frames", "must be >= 2");
        if (height < 8) bad("height", "must be >= 8");
        if (width < 8) bad("width", "must be >= 8");
        if (n_cells_init < 0) bad("n_cells_init", "must be >= 0");
        if (division_rate < 0.0 || division_rate > 1.0) bad("division_rate", "must be in [0,1]");
        if (death_rate < 0.0 || death_rate > 1.0) bad("death_rate", "must be in [0,1]");
        if (drift_px < 0.0) bad("drift_px", "must be >= 0");
        if (noise_sigma < 0.0) bad("noise_sigma", "must be >= 0");
    }
};

struct Movie {
    int n_frames = 0;
    int height = 0;
    int width = 0;
    double frame_interval_minutes = 15.0;
    std::vector<uint8_t> data;  // n_frames * height * width

    size_t index(int t, int r, int c) const {
        return (static_cast<size_t>(t) * height + r) * width + c;
    }
    uint8_t px(int t, int r, int c) const { return data[index(t, r, c)]; }
    uint8_t& px(int t, int r, int c) { return data[index(t, r, c)]; }

    ImageU8 frame(int t) const {
        ImageU8 img;
        img.height = height;
        img.width = width;
        img.channels = 1;
        img.pixels.assign(data.begin() + index(t, 0, 0),
                          data.begin() + index(t, 0, 0) + static_cast<size_t>(height) * width);
        return img;
    }
};

struct EventMask {
    int n_frames = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // values in {0,1}

    size_t index(int t, int r, int c) const {
        return (static_cast<size_t>(t) * height + r) * width + c;
    }
    uint8_t px(int t, int r, int c) const { return data[index(t, r, c)]; }
    uint8_t& px(int t, int r, int c) { return data[index(t, r, c)]; }

    ImageU8 frame(int t) const {
        ImageU8 img;
        img.height = height;
        img.width = width;
        img.channels = 1;
        img.pixels.assign(data.begin() + index(t, 0, 0),
                          data.begin() + index(t, 0, 0) + static_cast<size_t>(height) * width);
        return img;
    }
};

// Introspection record for one division/death event; used by tests and the
// attribution sanity harness to locate single-event frames.
struct SynthEvent {
    enum Kind { Division = 0, Death = 1 };
    Kind kind;
    int t0;        // first frame of the 3-frame event window
    double y, x;   // event centre at t0
    int cell_id;
};

struct SynthResult {
    Movie movie;
    EventMask mask;
    std::vector<SynthEvent> events;
};

namespace synthdetail {

constexpr int kEventFrames = 3;          // event window length
constexpr double kBackground = 16.0;     // dark background intensity
constexpr double kMaskFootprint = 0.135; // blob mask threshold, ~2 sigma
constexpr double kRegrowRate = 0.12;     // per-frame relaxation toward mature size

struct Cell {
    int id;
    double y, x;
    double ry, rx;        // ellipse radii (sigma, pixels)
    double mature_ry, mature_rx;  // regrowth targets; daughters start small
    double theta;         // orientation
    double amp;           // peak intensity above background
    double spin;          // orientation drift per frame

    enum State { Alive, Dividing, Dying } state = Alive;
    int stage = 0;        // frames elapsed inside an event window
    double div_y0 = 0, div_x0 = 0;  // division centre at window start
};

// Additive render of one anisotropic Gaussian blob; optionally marks the
// footprint in the mask for the same frame.
inline void render_blob(std::vector<double>& acc, EventMask* mask, int t, int H, int W, double cy,
                        double cx, double ry, double rx, double theta, double amp, bool mark) {
    if (amp <= 0.0 || ry <= 0.05 || rx <= 0.05) return;
    const double reach = 3.0 * std::max(ry, rx);
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int r1 = std::min(H - 1, static_cast<int>(std::ceil(cy + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int c1 = std::min(W - 1, static_cast<int>(std::ceil(cx + reach)));
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double dy = r - cy, dx = c - cx;
            const double u = (ct * dy + st * dx) / ry;
            const double v = (-st * dy + ct * dx) / rx;
            const double g = std::exp(-0.5 * (u * u + v * v));
            acc[static_cast<size_t>(r) * W + c] += amp * g;
            if (mark && g > kMaskFootprint) mask->px(t, r, c) = 1;
        }
}

// Mask-only ellipse marking (no intensity contribution); keeps a division's
// separating daughters connected to the original site in the event mask.
inline void mark_ellipse(EventMask& mask, int t, int H, int W, double cy, double cx, double ry,
                         double rx, double theta) {
    const double reach = 3.0 * std::max(ry, rx);
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int r1 = std::min(H - 1, static_cast<int>(std::ceil(cy + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int c1 = std::min(W - 1, static_cast<int>(std::ceil(cx + reach)));
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double dy = r - cy, dx = c - cx;
            const double u = (ct * dy + st * dx) / ry;
            const double v = (-st * dy + ct * dx) / rx;
            if (std::exp(-0.5 * (u * u + v * v)) > kMaskFootprint) mask.px(t, r, c) = 1;
        }
}

inline void reflect_position(double& p, double lo, double hi) {
    // reflect into [lo, hi]
    if (hi <= lo) {
        p = lo;
        return;
    }
    const double span = hi - lo;
    double q = std::fmod(p - lo, 2.0 * span);
    if (q < 0) q += 2.0 * span;
    p = lo + (q <= span ? q : 2.0 * span - q);
}

}  // namespace synthdetail

inline SynthResult generate_movie(const SynthConfig& cfg) {
    using namespace synthdetail;
    cfg.validate();

    const int T = cfg.n_frames, H = cfg.height, W = cfg.width;
    SynthResult out;
    out.movie.n_frames = T;
    out.movie.height = H;
    out.movie.width = W;
    out.movie.data.assign(static_cast<size_t>(T) * H * W, 0);
    out.mask.n_frames = T;
    out.mask.height = H;
    out.mask.width = W;
    out.mask.data.assign(static_cast<size_t>(T) * H * W, 0);

    Rng root(cfg.seed);
    Rng init_rng = root.fork(0xC0FFEE);
    Rng noise_rng = root.fork(0x9015E);

    std::vector<Cell> cells;
    int next_id = 0;
    // Mature sizes are always drawn from the global distribution, never
    // inherited: daughters spawn small and relax toward their own target, so
    // sizes do not shrink generation over generation. The regrowth itself is
    // the movie's pervasive time-directional cue (cells only ever grow
    // between events, mirroring interphase growth).
    auto spawn = [&](double y, double x, double parent_r, Rng& r) {
        Cell c;
        c.id = next_id++;
        c.y = y;
        c.x = x;
        const double base = r.uniform(2.2, 3.4);
        c.mature_ry = base * r.uniform(0.95, 1.15);
        c.mature_rx = base * r.uniform(0.72, 0.92);  // anisotropic: rx < ry
        if (parent_r > 0) {
            c.ry = std::min(parent_r, c.mature_ry);
            c.rx = c.mature_rx * (c.ry / c.mature_ry);
        } else {
            c.ry = c.mature_ry;
            c.rx = c.mature_rx;
        }
        c.theta = r.uniform(0.0, 2.0 * 3.14159265358979323846);
        c.amp = r.uniform(130.0, 200.0);
        c.spin = r.normal(0.0, 0.05);
        return c;
    };
    const double margin = 4.0;
    for (int i = 0; i < cfg.n_cells_init; ++i) {
        Rng r = init_rng.fork(static_cast<uint64_t>(i));
        Cell c = spawn(r.uniform(margin, H - 1 - margin), r.uniform(margin, W - 1 - margin), 0.0,
                       r);
        cells.push_back(c);
    }

    // soft population cap: runaway growth is clamped rather than allowed to
    // exhaust memory; normal configs never reach it
    const size_t max_cells = static_cast<size_t>(cfg.n_cells_init) * 10 + 1000;

    std::vector<double> acc(static_cast<size_t>(H) * W);
    for (int t = 0; t < T; ++t) {
        // -- advance state and decide new events ----------------------------
        std::vector<Cell> next_cells;
        next_cells.reserve(cells.size() + 4);
        for (Cell& c : cells) {
            if (c.state == Cell::Alive) {
                // per-(cell, frame) decision stream: decisions for a given
                // cell id and frame are stable regardless of the rest of the
                // population, which couples runs across rate settings
                Rng ev = root.fork(0xD1CEull).fork(static_cast<uint64_t>(c.id)).fork(
                    static_cast<uint64_t>(t));
                const double u_div = ev.uniform();
                const double u_die = ev.uniform();
                if (u_div < cfg.division_rate && cells.size() < max_cells) {
                    c.state = Cell::Dividing;
                    c.stage = 0;
                    c.div_y0 = c.y;
                    c.div_x0 = c.x;
                    out.events.push_back({SynthEvent::Division, t, c.y, c.x, c.id});
                } else if (u_die < cfg.death_rate) {
                    c.state = Cell::Dying;
                    c.stage = 0;
                    out.events.push_back({SynthEvent::Death, t, c.y, c.x, c.id});
                }
            }
            next_cells.push_back(c);
        }
        cells.swap(next_cells);

        // -- drift (alive cells move; event cells stay put for the window) --
        for (Cell& c : cells) {
            if (c.state != Cell::Alive) continue;
            Rng dr = root.fork(0xD81F7ull).fork(static_cast<uint64_t>(c.id)).fork(
                static_cast<uint64_t>(t));
            const double ang = dr.uniform(0.0, 2.0 * 3.14159265358979323846);
            c.y += cfg.drift_px * std::sin(ang);
            c.x += cfg.drift_px * std::cos(ang);
            reflect_position(c.y, margin, H - 1 - margin);
            reflect_position(c.x, margin, W - 1 - margin);
            c.theta += c.spin;
            c.ry += (c.mature_ry - c.ry) * kRegrowRate;
            c.rx += (c.mature_rx - c.rx) * kRegrowRate;
        }

        // -- render ----------------------------------------------------------
        std::fill(acc.begin(), acc.end(), kBackground);
        for (const Cell& c : cells) {
            switch (c.state) {
                case Cell::Alive:
                    render_blob(acc, &out.mask, t, H, W, c.y, c.x, c.ry, c.rx, c.theta, c.amp,
                                false);
                    break;
                case Cell::Dividing: {
                    // two daughters separating along the orientation axis
                    const double frac = (c.stage + 1.0) / kEventFrames;  // 1/3, 2/3, 1
                    const double sep = (0.6 + 1.3 * frac) * c.ry;
                    const double dy = std::cos(c.theta) * sep, dx = std::sin(c.theta) * sep;
                    const double dr = c.ry * (1.0 - 0.25 * frac);
                    render_blob(acc, &out.mask, t, H, W, c.div_y0 + dy, c.div_x0 + dx, dr,
                                c.rx * (1.0 - 0.15 * frac), c.theta, c.amp, true);
                    render_blob(acc, &out.mask, t, H, W, c.div_y0 - dy, c.div_x0 - dx, dr,
                                c.rx * (1.0 - 0.15 * frac), c.theta, c.amp, true);
                    // bridge the separating daughters through the division site
                    mark_ellipse(out.mask, t, H, W, c.div_y0, c.div_x0, c.ry, c.rx, c.theta);
                    break;
                }
                case Cell::Dying: {
                    // fade in place at constant size: dimming is the death
                    // signature, growth the interphase one, so the two cues
                    // stay distinguishable when the movie is reversed
                    const double frac = (c.stage + 1.0) / kEventFrames;
                    render_blob(acc, &out.mask, t, H, W, c.y, c.x, c.ry, c.rx, c.theta,
                                c.amp * (1.0 - frac), true);
                    break;
                }
            }
        }

        // -- noise + quantise -------------------------------------------------
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                double v = acc[static_cast<size_t>(r) * W + c];
                if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise_rng.normal();
                out.movie.px(t, r, c) = clamp_u8(v);
            }

        // -- finish event windows ---------------------------------------------
        std::vector<Cell> survivors;
        survivors.reserve(cells.size() + 8);
        for (Cell& c : cells) {
            if (c.state == Cell::Alive) {
                survivors.push_back(c);
                continue;
            }
            ++c.stage;
            if (c.stage < kEventFrames) {
                survivors.push_back(c);
                continue;
            }
            if (c.state == Cell::Dividing) {
                // window complete: replace by two daughters at the final
                // separation, slightly smaller than the parent
                Rng dgt = root.fork(0xDA07ull).fork(static_cast<uint64_t>(c.id));
                const double sep = 1.9 * c.ry;
                const double dy = std::cos(c.theta) * sep, dx = std::sin(c.theta) * sep;
                for (int k = 0; k < 2; ++k) {
                    Rng dr = dgt.fork(static_cast<uint64_t>(k));
                    Cell d = spawn(c.div_y0 + (k == 0 ? dy : -dy), c.div_x0 + (k == 0 ? dx : -dx),
                                   c.ry * 0.82, dr);
                    d.amp = c.amp;
                    reflect_position(d.y, margin, H - 1 - margin);
                    reflect_position(d.x, margin, W - 1 - margin);
                    survivors.push_back(d);
                }
            }
            // dying cells simply disappear after the window
        }
        cells.swap(survivors);
    }
    return out;
}

}  // namespace taprec
