#pragma once

// Small binary-file helpers shared by the IO layer.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"

namespace taprec {

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff n = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<uint8_t> buf(static_cast<size_t>(n));
    if (n > 0) f.read(reinterpret_cast<char*>(buf.data()), n);
    if (!f) throw IoError("short read: " + path);
    return buf;
}

inline void write_file(const std::string& path, const void* data, size_t len) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw IoError("short write: " + path);
}

inline void write_file(const std::string& path, const std::vector<uint8_t>& buf) {
    write_file(path, buf.data(), buf.size());
}

inline void write_file(const std::string& path, const std::string& text) {
    write_file(path, text.data(), text.size());
}

inline std::string read_text_file(const std::string& path) {
    const std::vector<uint8_t> buf = read_file(path);
    return std::string(buf.begin(), buf.end());
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace taprec
