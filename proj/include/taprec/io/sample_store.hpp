#pragma once

// Indexed binary container for crop-pair samples.
//
// Layout (all integers little-endian):
//   bytes 0..7    magic "TAPDSET\0"
//   u32           format version (1)
//   u32           crop_size
//   u64           record count
//   u64[count]    absolute byte offset of each record
//   records       count times:
//     u32 t, u32 origin_row, u32 origin_col, i32 label,
//     4 * crop_size^2 bytes: crop_t, crop_t1, mask_t, mask_t1

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/datapipe.hpp"

namespace taprec {

namespace storedetail {

constexpr char kMagic[8] = {'T', 'A', 'P', 'D', 'S', 'E', 'T', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::vector<uint8_t>& b, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

template <typename T>
T get(const uint8_t* p) {
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

}  // namespace storedetail

inline void write_sample_store(const std::string& path,
                               const std::vector<CropPairSample>& samples, int crop_size) {
    using namespace storedetail;
    for (const CropPairSample& s : samples) {
        if (s.crop_t.height != crop_size || s.crop_t.width != crop_size)
            throw DataError("write_sample_store: sample crop size " +
                            std::to_string(s.crop_t.height) + " != declared " +
                            std::to_string(crop_size));
    }
    const size_t plane = static_cast<size_t>(crop_size) * crop_size;
    const size_t rec_len = 16 + 4 * plane;
    const size_t header_len = 8 + 4 + 4 + 8 + 8 * samples.size();
    std::vector<uint8_t> buf;
    buf.reserve(header_len + rec_len * samples.size());
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put<uint32_t>(buf, kVersion);
    put<uint32_t>(buf, static_cast<uint32_t>(crop_size));
    put<uint64_t>(buf, samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        put<uint64_t>(buf, header_len + i * rec_len);
    for (const CropPairSample& s : samples) {
        put<uint32_t>(buf, static_cast<uint32_t>(s.t));
        put<uint32_t>(buf, static_cast<uint32_t>(s.origin_row));
        put<uint32_t>(buf, static_cast<uint32_t>(s.origin_col));
        put<uint32_t>(buf, static_cast<uint32_t>(s.label));
        for (const ImageU8* img : {&s.crop_t, &s.crop_t1, &s.mask_t, &s.mask_t1})
            buf.insert(buf.end(), img->pixels.begin(), img->pixels.end());
    }
    write_file(path, buf);
}

struct SampleStoreInfo {
    uint32_t version = 0;
    int crop_size = 0;
    size_t count = 0;
};

inline SampleStoreInfo read_sample_store_info(const std::vector<uint8_t>& buf,
                                              const std::string& path) {
    using namespace storedetail;
    if (buf.size() < 24 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw IoError("sample store " + path + ": bad magic (not a TAPDSET file)");
    SampleStoreInfo info;
    info.version = get<uint32_t>(buf.data() + 8);
    if (info.version != kVersion)
        throw IoError("sample store " + path + ": unsupported version " +
                      std::to_string(info.version) + " (expected " + std::to_string(kVersion) +
                      ")");
    info.crop_size = static_cast<int>(get<uint32_t>(buf.data() + 12));
    info.count = get<uint64_t>(buf.data() + 16);
    return info;
}

inline std::vector<CropPairSample> read_sample_store(const std::string& path) {
    using namespace storedetail;
    const std::vector<uint8_t> buf = read_file(path);
    const SampleStoreInfo info = read_sample_store_info(buf, path);
    const size_t plane = static_cast<size_t>(info.crop_size) * info.crop_size;
    const size_t rec_len = 16 + 4 * plane;
    if (buf.size() < 24 + 8 * info.count)
        throw IoError("sample store " + path + ": truncated offset table");
    std::vector<CropPairSample> out;
    out.reserve(info.count);
    for (size_t i = 0; i < info.count; ++i) {
        const uint64_t off = get<uint64_t>(buf.data() + 24 + 8 * i);
        if (off + rec_len > buf.size())
            throw IoError("sample store " + path + ": record " + std::to_string(i) +
                          " out of range");
        const uint8_t* r = buf.data() + off;
        CropPairSample s;
        s.t = static_cast<int>(get<uint32_t>(r));
        s.origin_row = static_cast<int>(get<uint32_t>(r + 4));
        s.origin_col = static_cast<int>(get<uint32_t>(r + 8));
        s.label = static_cast<int32_t>(get<uint32_t>(r + 12));
        const uint8_t* p = r + 16;
        for (ImageU8* img : {&s.crop_t, &s.crop_t1, &s.mask_t, &s.mask_t1}) {
            img->height = info.crop_size;
            img->width = info.crop_size;
            img->channels = 1;
            img->pixels.assign(p, p + plane);
            p += plane;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace taprec
