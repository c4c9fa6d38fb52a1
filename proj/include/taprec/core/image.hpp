#pragma once

// 2-D image utilities: bilinear sampling with reflected borders, a single
// combined geometric warp (rotation / scale / elastic / translation), an
// antialiased separable resize, and small drawing helpers for overlays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/io/tiff.hpp"

namespace taprec {

struct ImageF {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    ImageF() = default;
    ImageF(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0.0) {
        if (h < 0 || w < 0) throw DimensionError("ImageF: negative dims");
    }

    double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
    size_t numel() const { return pixels.size(); }
};

// Reflect index into [0, n-1] (border mode "reflect101"-less variant: simple
// mirror without repeating the edge twice is fine at this scale; we use the
// symmetric reflect that repeats the border pixel, matching a clamped mirror).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return (i < n) ? i : period - 1 - i;
}

inline double bilinear_sample(const ImageF& img, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    const int r0 = reflect_index(y0, img.height), r1 = reflect_index(y0 + 1, img.height);
    const int c0 = reflect_index(x0, img.width), c1 = reflect_index(x0 + 1, img.width);
    const double v00 = img.at(r0, c0), v01 = img.at(r0, c1);
    const double v10 = img.at(r1, c0), v11 = img.at(r1, c1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

// Dense displacement field built by bilinearly upsampling a coarse grid of
// control-point offsets. grid_dy/grid_dx are gh*gw row-major.
struct ElasticField {
    int gh = 0, gw = 0;
    std::vector<double> dy, dx;

    bool empty() const { return gh == 0; }

    void sample(double v, double u, int h, int w, double& out_dy, double& out_dx) const {
        // map pixel coords to control-grid coords (corners pinned to image corners)
        const double gy = (h > 1) ? v / (h - 1) * (gh - 1) : 0.0;
        const double gx = (w > 1) ? u / (w - 1) * (gw - 1) : 0.0;
        const int y0 = std::min(static_cast<int>(gy), gh - 2 < 0 ? 0 : gh - 2);
        const int x0 = std::min(static_cast<int>(gx), gw - 2 < 0 ? 0 : gw - 2);
        const double fy = std::clamp(gy - y0, 0.0, 1.0);
        const double fx = std::clamp(gx - x0, 0.0, 1.0);
        const int y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
        auto lerp2 = [&](const std::vector<double>& f) {
            const double a = (1 - fx) * f[y0 * gw + x0] + fx * f[y0 * gw + x1];
            const double b = (1 - fx) * f[y1 * gw + x0] + fx * f[y1 * gw + x1];
            return (1 - fy) * a + fy * b;
        };
        out_dy = lerp2(dy);
        out_dx = lerp2(dx);
    }
};

// One-pass inverse-map warp: for each output pixel, rotate by -angle and
// divide by scale about the image centre, add the elastic displacement and a
// translation, then sample the source bilinearly with reflected borders.
inline ImageF warp_image(const ImageF& src, double angle_rad, double scale,
                         const ElasticField& elastic, double t_dy = 0.0, double t_dx = 0.0) {
    if (scale <= 0.0) throw ConfigError("warp_image: scale must be positive");
    ImageF out(src.height, src.width);
    const double cy = (src.height - 1) / 2.0, cx = (src.width - 1) / 2.0;
    const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
            double ey = 0.0, ex = 0.0;
            if (!elastic.empty()) elastic.sample(r, c, src.height, src.width, ey, ex);
            const double vy = r - cy, vx = c - cx;
            // inverse rotation+scale of the centred coordinate
            const double sy = (ca * vy - sa * vx) / scale + cy + ey + t_dy;
            const double sx = (sa * vy + ca * vx) / scale + cx + ex + t_dx;
            out.at(r, c) = bilinear_sample(src, sy, sx);
        }
    return out;
}

// Separable resize with a triangle kernel whose support widens by the
// downscale factor (the standard antialiased bilinear resampler).
inline ImageF resize_bilinear(const ImageF& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw DimensionError("resize_bilinear: non-positive target");

    auto resample_axis = [](const std::vector<double>& in, int n_in, int stride_in, int count,
                            int stride_count, std::vector<double>& out, int n_out,
                            int stride_out, int out_stride_count) {
        const double scale = static_cast<double>(n_in) / n_out;
        const double support = std::max(1.0, scale);
        for (int o = 0; o < n_out; ++o) {
            const double center = (o + 0.5) * scale - 0.5;
            const int lo = static_cast<int>(std::floor(center - support));
            const int hi = static_cast<int>(std::ceil(center + support));
            double wsum = 0.0;
            std::vector<std::pair<int, double>> taps;
            for (int i = lo; i <= hi; ++i) {
                const double d = std::abs((i - center) / support);
                if (d >= 1.0) continue;
                const double w = 1.0 - d;
                taps.emplace_back(reflect_index(i, n_in), w);
                wsum += w;
            }
            for (int k = 0; k < count; ++k) {
                double acc = 0.0;
                for (const auto& [idx, w] : taps)
                    acc += w * in[static_cast<size_t>(idx) * stride_in + k * stride_count];
                out[static_cast<size_t>(o) * stride_out + k * out_stride_count] = acc / wsum;
            }
        }
    };

    // vertical pass: height -> out_h
    std::vector<double> tmp(static_cast<size_t>(out_h) * src.width);
    resample_axis(src.pixels, src.height, src.width, src.width, 1, tmp, out_h, src.width, 1);
    // horizontal pass: width -> out_w
    ImageF out(out_h, out_w);
    resample_axis(tmp, src.width, 1, out_h, src.width, out.pixels, out_w, 1, out_w);
    return out;
}

// ---------------------------------------------------------------------------
// 8-bit conversions
// ---------------------------------------------------------------------------

inline ImageF to_float(const ImageU8& img, int channel = 0) {
    ImageF out(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(r, c, channel);
    return out;
}

inline uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

inline ImageU8 to_u8(const ImageF& img) {
    ImageU8 out;
    out.height = img.height;
    out.width = img.width;
    out.channels = 1;
    out.pixels.resize(img.numel());
    for (size_t i = 0; i < img.numel(); ++i) out.pixels[i] = clamp_u8(img.pixels[i]);
    return out;
}

inline ImageU8 gray_to_rgb(const ImageU8& g) {
    ImageU8 out;
    out.height = g.height;
    out.width = g.width;
    out.channels = 3;
    out.pixels.resize(static_cast<size_t>(g.height) * g.width * 3);
    for (size_t i = 0; i < g.pixels.size(); ++i) {
        out.pixels[3 * i] = g.pixels[i];
        out.pixels[3 * i + 1] = g.pixels[i];
        out.pixels[3 * i + 2] = g.pixels[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Heatmap rendering and overlay drawing
// ---------------------------------------------------------------------------

// Blue -> cyan -> green -> yellow -> red ramp over t in [0,1].
inline void heat_color(double t, uint8_t& r, uint8_t& g, uint8_t& b) {
    t = std::clamp(t, 0.0, 1.0);
    const double r4 = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
    const double g4 = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
    const double b4 = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
    r = clamp_u8(255.0 * r4);
    g = clamp_u8(255.0 * g4);
    b = clamp_u8(255.0 * b4);
}

// Alpha-blend a [0,1]-normalised heatmap over a grayscale frame.
inline ImageU8 overlay_heatmap(const ImageU8& gray, const ImageF& heat, double alpha = 0.45) {
    if (gray.height != heat.height || gray.width != heat.width)
        throw DimensionError("overlay_heatmap: shape mismatch");
    double mx = 0.0;
    for (double v : heat.pixels) mx = std::max(mx, v);
    ImageU8 out = gray_to_rgb(gray);
    if (mx <= 0.0) return out;  // all-zero map leaves the frame untouched
    for (int r = 0; r < gray.height; ++r)
        for (int c = 0; c < gray.width; ++c) {
            uint8_t hr, hg, hb;
            heat_color(heat.at(r, c) / mx, hr, hg, hb);
            const double a = alpha * (heat.at(r, c) / mx);
            out.at(r, c, 0) = clamp_u8((1 - a) * out.at(r, c, 0) + a * hr);
            out.at(r, c, 1) = clamp_u8((1 - a) * out.at(r, c, 1) + a * hg);
            out.at(r, c, 2) = clamp_u8((1 - a) * out.at(r, c, 2) + a * hb);
        }
    return out;
}

inline void draw_rect(ImageU8& img, int top, int left, int size_h, int size_w, uint8_t r,
                      uint8_t g, uint8_t b) {
    if (img.channels != 3) throw DimensionError("draw_rect: RGB image required");
    auto set = [&](int y, int x) {
        if (y >= 0 && y < img.height && x >= 0 && x < img.width) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    };
    for (int x = left; x < left + size_w; ++x) {
        set(top, x);
        set(top + size_h - 1, x);
    }
    for (int y = top; y < top + size_h; ++y) {
        set(y, left);
        set(y, left + size_w - 1);
    }
}

// 5x7 bitmap digits for annotating region ranks on overlays.
inline const uint8_t* digit_bitmap(int d) {
    static const uint8_t font[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    };
    return font[d];
}

inline void draw_number(ImageU8& img, int top, int left, int value, uint8_t r, uint8_t g,
                        uint8_t b, int scale = 1) {
    const std::string s = std::to_string(value);
    int x = left;
    for (char ch : s) {
        if (ch < '0' || ch > '9') continue;
        const uint8_t* rows = digit_bitmap(ch - '0');
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 5; ++j)
                if (rows[i] & (1 << (4 - j)))
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx) {
                            const int y = top + i * scale + sy, xx = x + j * scale + sx;
                            if (y >= 0 && y < img.height && xx >= 0 && xx < img.width) {
                                img.at(y, xx, 0) = r;
                                img.at(y, xx, 1) = g;
                                img.at(y, xx, 2) = b;
                            }
                        }
        x += 6 * scale;
    }
}

// Paste src into dst at (top,left), clipping to bounds; both RGB or both gray.
inline void paste(ImageU8& dst, const ImageU8& src, int top, int left) {
    if (dst.channels != src.channels) throw DimensionError("paste: channel mismatch");
    for (int r = 0; r < src.height; ++r) {
        const int y = top + r;
        if (y < 0 || y >= dst.height) continue;
        for (int c = 0; c < src.width; ++c) {
            const int x = left + c;
            if (x < 0 || x >= dst.width) continue;
            for (int ch = 0; ch < src.channels; ++ch) dst.at(y, x, ch) = src.at(r, c, ch);
        }
    }
}

}  // namespace taprec
