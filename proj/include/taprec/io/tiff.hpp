#pragma once

// Minimal baseline TIFF codec: uncompressed 8-bit grayscale and RGB,
// little-endian, single image per file. Covers exactly the movie-frame and
// overlay formats this project produces and consumes.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/io/fsio.hpp"

namespace taprec {

struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 = gray, 3 = RGB
    std::vector<uint8_t> pixels;  // row-major, interleaved channels

    uint8_t& at(int r, int c, int ch = 0) {
        return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
    uint8_t at(int r, int c, int ch = 0) const {
        return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
};

namespace tiffdetail {

inline void put16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v));
    b.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put32(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v));
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v >> 16));
    b.push_back(static_cast<uint8_t>(v >> 24));
}

inline uint16_t get16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

inline uint32_t get32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

// One 12-byte IFD entry with an inline (≤4 byte) value.
inline void put_entry(std::vector<uint8_t>& b, uint16_t tag, uint16_t type, uint32_t count,
                      uint32_t value) {
    put16(b, tag);
    put16(b, type);
    put32(b, count);
    put32(b, value);
}

}  // namespace tiffdetail

inline std::vector<uint8_t> encode_tiff(const ImageU8& img) {
    using namespace tiffdetail;
    if (img.height <= 0 || img.width <= 0 || (img.channels != 1 && img.channels != 3))
        throw IoError("encode_tiff: expected gray or RGB image, got channels=" +
                      std::to_string(img.channels));
    const size_t data_len =
        static_cast<size_t>(img.height) * img.width * img.channels;
    if (img.pixels.size() != data_len) throw IoError("encode_tiff: pixel buffer size mismatch");

    std::vector<uint8_t> out;
    out.reserve(data_len + 256);
    // header: little-endian magic, IFD offset right after pixel data
    out.push_back('I');
    out.push_back('I');
    put16(out, 42);
    const uint32_t data_off = 8;
    const uint32_t ifd_off = static_cast<uint32_t>(data_off + data_len);
    put32(out, ifd_off);
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());

    const bool rgb = img.channels == 3;
    const uint16_t n_entries = 9;
    const uint32_t bits_array_off = ifd_off + 2 + n_entries * 12 + 4;
    const uint16_t kShort = 3, kLong = 4;
    put16(out, n_entries);
    put_entry(out, 256, kLong, 1, static_cast<uint32_t>(img.width));    // ImageWidth
    put_entry(out, 257, kLong, 1, static_cast<uint32_t>(img.height));   // ImageLength
    if (rgb)
        put_entry(out, 258, kShort, 3, bits_array_off);                 // BitsPerSample -> array
    else
        put_entry(out, 258, kShort, 1, 8);
    put_entry(out, 259, kShort, 1, 1);                                  // Compression: none
    put_entry(out, 262, kShort, 1, rgb ? 2 : 1);                        // Photometric
    put_entry(out, 273, kLong, 1, data_off);                            // StripOffsets
    put_entry(out, 277, kShort, 1, rgb ? 3 : 1);                        // SamplesPerPixel
    put_entry(out, 278, kLong, 1, static_cast<uint32_t>(img.height));   // RowsPerStrip
    put_entry(out, 279, kLong, 1, static_cast<uint32_t>(data_len));     // StripByteCounts
    put32(out, 0);                                                      // next IFD: none
    if (rgb) {
        put16(out, 8);
        put16(out, 8);
        put16(out, 8);
    }
    return out;
}

inline ImageU8 decode_tiff(const std::vector<uint8_t>& buf) {
    using namespace tiffdetail;
    if (buf.size() < 8 || buf[0] != 'I' || buf[1] != 'I' || get16(buf.data() + 2) != 42)
        throw IoError("decode_tiff: not a little-endian TIFF");
    const uint32_t ifd = get32(buf.data() + 4);
    if (ifd + 2 > buf.size()) throw IoError("decode_tiff: truncated IFD offset");
    const uint16_t n = get16(buf.data() + ifd);
    if (ifd + 2 + n * 12u + 4 > buf.size()) throw IoError("decode_tiff: truncated IFD");

    uint32_t width = 0, height = 0, compression = 1, samples = 1, bits_ok = 1;
    std::vector<uint32_t> strip_offsets, strip_counts;

    auto read_values = [&](const uint8_t* e) -> std::vector<uint32_t> {
        const uint16_t type = get16(e + 2);
        const uint32_t count = get32(e + 4);
        const uint32_t vsize = (type == 3) ? 2u : (type == 4 ? 4u : 0u);
        if (vsize == 0) throw IoError("decode_tiff: unsupported IFD value type");
        std::vector<uint32_t> vals(count);
        const uint8_t* src;
        if (vsize * count <= 4) {
            src = e + 8;
        } else {
            const uint32_t off = get32(e + 8);
            if (off + vsize * count > buf.size()) throw IoError("decode_tiff: value out of range");
            src = buf.data() + off;
        }
        for (uint32_t i = 0; i < count; ++i)
            vals[i] = (vsize == 2) ? get16(src + 2 * i) : get32(src + 4 * i);
        return vals;
    };

    for (uint16_t i = 0; i < n; ++i) {
        const uint8_t* e = buf.data() + ifd + 2 + i * 12u;
        const uint16_t tag = get16(e);
        switch (tag) {
            case 256: width = read_values(e)[0]; break;
            case 257: height = read_values(e)[0]; break;
            case 258:
                for (uint32_t b : read_values(e))
                    if (b != 8) bits_ok = 0;
                break;
            case 259: compression = read_values(e)[0]; break;
            case 273: strip_offsets = read_values(e); break;
            case 277: samples = read_values(e)[0]; break;
            case 279: strip_counts = read_values(e); break;
            default: break;  // resolution, photometric etc. are informational
        }
    }
    if (compression != 1) throw IoError("decode_tiff: only uncompressed TIFF supported");
    if (!bits_ok) throw IoError("decode_tiff: only 8-bit samples supported");
    if (samples != 1 && samples != 3)
        throw IoError("decode_tiff: expected 1 or 3 samples per pixel");
    if (width == 0 || height == 0 || strip_offsets.empty() ||
        strip_offsets.size() != strip_counts.size())
        throw IoError("decode_tiff: missing required tags");

    ImageU8 img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.channels = static_cast<int>(samples);
    const size_t expect = static_cast<size_t>(width) * height * samples;
    img.pixels.reserve(expect);
    for (size_t s = 0; s < strip_offsets.size(); ++s) {
        const uint32_t off = strip_offsets[s], cnt = strip_counts[s];
        if (static_cast<size_t>(off) + cnt > buf.size())
            throw IoError("decode_tiff: strip out of range");
        img.pixels.insert(img.pixels.end(), buf.begin() + off, buf.begin() + off + cnt);
    }
    if (img.pixels.size() != expect)
        throw IoError("decode_tiff: pixel data size " + std::to_string(img.pixels.size()) +
                      " != expected " + std::to_string(expect));
    return img;
}

inline void write_tiff(const std::string& path, const ImageU8& img) {
    write_file(path, encode_tiff(img));
}

inline ImageU8 read_tiff(const std::string& path) { return decode_tiff(read_file(path)); }

}  // namespace taprec
