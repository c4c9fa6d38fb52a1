// IO layer tests: SHA-256 against published vectors, TIFF codec roundtrips,
// config parsing with full violation collection, image warps/resampling, and
// the binary sample container.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "taprec/core/image.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/core/sha256.hpp"
#include "taprec/io/fsio.hpp"
#include "taprec/io/kvconfig.hpp"
#include "taprec/io/sample_store.hpp"
#include "taprec/io/svg.hpp"
#include "taprec/io/tiff.hpp"

using namespace taprec;
using Catch::Approx;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("taprec_test_" + name)).string();
}

}  // namespace

// ============================================================================
// SHA-256
// ============================================================================

TEST_CASE("sha256: published test vectors") {
    REQUIRE(Sha256::hash_hex(std::string{}) ==
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    REQUIRE(Sha256::hash_hex(std::string{"abc"}) ==
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    REQUIRE(Sha256::hash_hex(std::string{"The quick brown fox jumps over the lazy dog"}) ==
            "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
    std::string a_million(1000000, 'a');
    REQUIRE(Sha256::hash_hex(a_million) ==
            "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256: chunked updates match one-shot") {
    const std::string msg = "chunking should not change the digest 0123456789";
    Sha256 h;
    for (char c : msg) h.update(&c, 1);
    REQUIRE(Sha256::hex(h.finish()) == Sha256::hash_hex(msg));
}

// ============================================================================
// TIFF codec
// ============================================================================

TEST_CASE("tiff: grayscale roundtrip preserves every byte") {
    Rng rng(21);
    ImageU8 img;
    img.height = 37;
    img.width = 53;
    img.channels = 1;
    img.pixels.resize(static_cast<size_t>(37) * 53);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));

    const std::string path = temp_path("gray.tif");
    write_tiff(path, img);
    ImageU8 back = read_tiff(path);
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    REQUIRE(back.channels == 1);
    REQUIRE(back.pixels == img.pixels);
    std::filesystem::remove(path);
}

TEST_CASE("tiff: RGB roundtrip preserves every byte") {
    Rng rng(22);
    ImageU8 img;
    img.height = 19;
    img.width = 23;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(19) * 23 * 3);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));

    const std::string path = temp_path("rgb.tif");
    write_tiff(path, img);
    ImageU8 back = read_tiff(path);
    REQUIRE(back.channels == 3);
    REQUIRE(back.pixels == img.pixels);
    std::filesystem::remove(path);
}

TEST_CASE("tiff: malformed input is rejected") {
    REQUIRE_THROWS_AS(decode_tiff({1, 2, 3}), IoError);
    std::vector<uint8_t> not_tiff(64, 0);
    REQUIRE_THROWS_AS(decode_tiff(not_tiff), IoError);
    // valid file truncated mid-IFD
    ImageU8 img;
    img.height = 4;
    img.width = 4;
    img.channels = 1;
    img.pixels.assign(16, 7);
    std::vector<uint8_t> buf = encode_tiff(img);
    buf.resize(buf.size() / 2);
    REQUIRE_THROWS_AS(decode_tiff(buf), IoError);
}

// ============================================================================
// kv config
// ============================================================================

TEST_CASE("kvconfig: sections, comments, and whitespace") {
    KvFile f = parse_kv(
        "top = 1\n"
        "# a comment\n"
        "[synth]\n"
        "  n_frames = 96   # trailing comment\n"
        "division_rate = 0.02\n"
        "\n"
        "[tap]\n"
        "lambda = 0.01\n");
    REQUIRE(f.syntax_errors.empty());
    REQUIRE(f.values.at("top") == "1");
    REQUIRE(f.values.at("synth.n_frames") == "96");
    REQUIRE(f.values.at("synth.division_rate") == "0.02");
    REQUIRE(f.values.at("tap.lambda") == "0.01");
}

TEST_CASE("kvconfig: every syntax problem is collected, not just the first") {
    KvFile f = parse_kv(
        "[broken\n"
        "novalue\n"
        "= orphan\n"
        "a = 1\n"
        "a = 2\n");
    REQUIRE(f.syntax_errors.size() == 4);
}

TEST_CASE("kvconfig: typed reads with range checks accumulate violations") {
    KvReader r(parse_kv(
        "[tap]\n"
        "lambda = -1\n"
        "tau = 0.2\n"
        "[synth]\n"
        "n_frames = oops\n"
        "mystery_key = 3\n"));
    const double lambda = r.get_double("tap.lambda", 0.01, 0.0);
    const double tau = r.get_double("tap.tau", 0.2, 1e-12);
    const int64_t frames = r.get_int("synth.n_frames", 96, 2);
    const auto violations = r.finish();

    REQUIRE(lambda == 0.01);  // falls back to default on violation
    REQUIRE(tau == 0.2);
    REQUIRE(frames == 96);
    REQUIRE(violations.size() == 3);
    // the lambda violation names the key and the permitted range
    bool lambda_named = false, unknown_named = false;
    for (const auto& v : violations) {
        if (v.find("tap.lambda") != std::string::npos && v.find("[0, inf)") != std::string::npos)
            lambda_named = true;
        if (v.find("mystery_key") != std::string::npos) unknown_named = true;
    }
    REQUIRE(lambda_named);
    REQUIRE(unknown_named);
}

TEST_CASE("kvconfig: empty file yields defaults and no violations") {
    KvReader r(parse_kv(""));
    REQUIRE(r.get_double("tap.lambda", 0.01, 0.0) == 0.01);
    REQUIRE(r.get_bool("run.deterministic", true));
    REQUIRE(r.finish().empty());
}

TEST_CASE("kvconfig: writer output parses back") {
    KvWriter w;
    w.section("a");
    w.put("x", 3);
    w.put("y", 2.5);
    w.put("flag", true);
    KvFile f = parse_kv(w.str());
    REQUIRE(f.syntax_errors.empty());
    REQUIRE(f.values.at("a.x") == "3");
    REQUIRE(f.values.at("a.flag") == "true");
}

// ============================================================================
// image utilities
// ============================================================================

TEST_CASE("image: 360-degree rotation is the identity within tolerance") {
    Rng rng(31);
    ImageF img(24, 24);
    for (auto& p : img.pixels) p = rng.uniform(0.0, 255.0);
    ImageF out = warp_image(img, 2.0 * 3.14159265358979323846, 1.0, ElasticField{});
    for (size_t i = 0; i < img.numel(); ++i)
        REQUIRE(out.pixels[i] == Approx(img.pixels[i]).margin(1e-3));
}

TEST_CASE("image: zero warp is exactly the identity") {
    Rng rng(32);
    ImageF img(16, 16);
    for (auto& p : img.pixels) p = rng.uniform(0.0, 255.0);
    ImageF out = warp_image(img, 0.0, 1.0, ElasticField{});
    REQUIRE(out.pixels == img.pixels);
}

TEST_CASE("image: 90-degree rotation permutes pixels") {
    // a centred cross survives 90-degree rotation; an off-axis dot moves
    ImageF img(9, 9);
    img.at(4, 6) = 100.0;
    ImageF out = warp_image(img, 3.14159265358979323846 / 2.0, 1.0, ElasticField{});
    // inverse map: output(r,c) samples source at rotation of (r,c); the dot
    // should land on the column axis
    double best = 0;
    int br = -1, bc = -1;
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c)
            if (out.at(r, c) > best) {
                best = out.at(r, c);
                br = r;
                bc = c;
            }
    REQUIRE(best == Approx(100.0).margin(1e-6));
    REQUIRE(((br == 6 && bc == 4) || (br == 2 && bc == 4)));  // rotated onto row axis
}

TEST_CASE("image: resize to same size is near-identity") {
    Rng rng(33);
    ImageF img(20, 20);
    for (auto& p : img.pixels) p = rng.uniform(0.0, 255.0);
    ImageF out = resize_bilinear(img, 20, 20);
    for (size_t i = 0; i < img.numel(); ++i)
        REQUIRE(out.pixels[i] == Approx(img.pixels[i]).margin(1e-9));
}

TEST_CASE("image: downsampling a constant image stays constant") {
    ImageF img(32, 32);
    for (auto& p : img.pixels) p = 42.0;
    ImageF half = resize_bilinear(img, 16, 16);
    for (double v : half.pixels) REQUIRE(v == Approx(42.0).margin(1e-9));
    ImageF twice = resize_bilinear(img, 64, 64);
    for (double v : twice.pixels) REQUIRE(v == Approx(42.0).margin(1e-9));
}

TEST_CASE("image: antialiased downsample averages energy, not samples") {
    // checkerboard at pixel scale: plain bilinear subsampling would alias to
    // one of the colors; the antialiased kernel must average toward the mean
    ImageF img(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) img.at(r, c) = ((r + c) % 2 == 0) ? 0.0 : 200.0;
    ImageF q = resize_bilinear(img, 8, 8);
    for (double v : q.pixels) REQUIRE(v == Approx(100.0).margin(8.0));
}

TEST_CASE("image: elastic field interpolates control displacements") {
    ElasticField f;
    f.gh = 2;
    f.gw = 2;
    f.dy = {1.0, 1.0, 3.0, 3.0};  // varies along rows only
    f.dx = {0.0, 2.0, 0.0, 2.0};  // varies along cols only
    double dy, dx;
    f.sample(0.0, 0.0, 11, 11, dy, dx);
    REQUIRE(dy == Approx(1.0));
    REQUIRE(dx == Approx(0.0));
    f.sample(10.0, 10.0, 11, 11, dy, dx);
    REQUIRE(dy == Approx(3.0));
    REQUIRE(dx == Approx(2.0));
    f.sample(5.0, 5.0, 11, 11, dy, dx);
    REQUIRE(dy == Approx(2.0));
    REQUIRE(dx == Approx(1.0));
}

TEST_CASE("image: reflect indexing mirrors out-of-range coordinates") {
    REQUIRE(reflect_index(0, 5) == 0);
    REQUIRE(reflect_index(4, 5) == 4);
    REQUIRE(reflect_index(5, 5) == 4);
    REQUIRE(reflect_index(-1, 5) == 0);
    REQUIRE(reflect_index(-2, 5) == 1);
    REQUIRE(reflect_index(9, 5) == 0);
}

TEST_CASE("image: overlay utilities stay in bounds") {
    ImageU8 gray;
    gray.height = 12;
    gray.width = 12;
    gray.channels = 1;
    gray.pixels.assign(144, 50);
    ImageF heat(12, 12);
    heat.at(6, 6) = 1.0;
    ImageU8 over = overlay_heatmap(gray, heat);
    REQUIRE(over.channels == 3);
    REQUIRE(over.at(6, 6, 0) > over.at(0, 0, 0));  // hotspot tinted red

    draw_rect(over, -2, -2, 30, 30, 255, 255, 0);  // clipped, must not crash
    draw_number(over, 1, 1, 42, 255, 0, 0);
    REQUIRE(over.pixels.size() == 144 * 3);
}

TEST_CASE("image: all-zero heatmap leaves frame untouched") {
    ImageU8 gray;
    gray.height = 8;
    gray.width = 8;
    gray.channels = 1;
    gray.pixels.assign(64, 99);
    ImageU8 over = overlay_heatmap(gray, ImageF(8, 8));
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            REQUIRE(over.at(r, c, 0) == 99);
            REQUIRE(over.at(r, c, 1) == 99);
            REQUIRE(over.at(r, c, 2) == 99);
        }
}

// ============================================================================
// SVG plots
// ============================================================================

TEST_CASE("svg: renders well-formed markup with series data") {
    SvgPlot plot("Loss", "epoch", "value");
    plot.add_line("train", {0, 1, 2, 3}, {1.0, 0.6, 0.4, 0.35});
    plot.add_line("val", {0, 1, 2, 3}, {1.1, 0.7, 0.5, 0.45});
    const std::string svg = plot.render();
    REQUIRE(svg.find("<svg") == 0);
    REQUIRE(svg.find("</svg>") != std::string::npos);
    REQUIRE(svg.find("polyline") != std::string::npos);
    REQUIRE(svg.find("train") != std::string::npos);
    REQUIRE(svg.find("val") != std::string::npos);
}

TEST_CASE("svg: bar series and diagonal render") {
    SvgPlot plot("Reliability", "confidence", "accuracy");
    plot.set_ylim(0.0, 1.0);
    plot.add_bars("acc", {0.05, 0.15, 0.25}, {0.04, 0.17, 0.22}, 0.1);
    plot.add_diagonal();
    const std::string svg = plot.render();
    REQUIRE(svg.find("<rect") != std::string::npos);
    REQUIRE(svg.find("stroke-dasharray") != std::string::npos);
}

// ============================================================================
// sample store
// ============================================================================

namespace {

CropPairSample make_sample(Rng& rng, int crop_size, int t) {
    CropPairSample s;
    s.t = t;
    s.origin_row = static_cast<int>(rng.uniform_int(0, 100));
    s.origin_col = static_cast<int>(rng.uniform_int(0, 100));
    s.label = static_cast<int>(rng.uniform_int(0, 1));
    for (ImageU8* img : {&s.crop_t, &s.crop_t1, &s.mask_t, &s.mask_t1}) {
        img->height = crop_size;
        img->width = crop_size;
        img->channels = 1;
        img->pixels.resize(static_cast<size_t>(crop_size) * crop_size);
        for (auto& p : img->pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
    }
    return s;
}

}  // namespace

TEST_CASE("sample store: roundtrip preserves records exactly") {
    Rng rng(41);
    std::vector<CropPairSample> samples;
    for (int i = 0; i < 17; ++i) samples.push_back(make_sample(rng, 12, i));

    const std::string path = temp_path("store.bin");
    write_sample_store(path, samples, 12);
    std::vector<CropPairSample> back = read_sample_store(path);
    REQUIRE(back.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        REQUIRE(back[i].t == samples[i].t);
        REQUIRE(back[i].origin_row == samples[i].origin_row);
        REQUIRE(back[i].origin_col == samples[i].origin_col);
        REQUIRE(back[i].label == samples[i].label);
        REQUIRE(back[i].crop_t.pixels == samples[i].crop_t.pixels);
        REQUIRE(back[i].crop_t1.pixels == samples[i].crop_t1.pixels);
        REQUIRE(back[i].mask_t.pixels == samples[i].mask_t.pixels);
        REQUIRE(back[i].mask_t1.pixels == samples[i].mask_t1.pixels);
    }
    std::filesystem::remove(path);
}

TEST_CASE("sample store: unlabeled samples keep label -1") {
    Rng rng(42);
    std::vector<CropPairSample> samples = {make_sample(rng, 4, 0)};
    samples[0].label = -1;
    const std::string path = temp_path("store_unlabeled.bin");
    write_sample_store(path, samples, 4);
    REQUIRE(read_sample_store(path)[0].label == -1);
    std::filesystem::remove(path);
}

TEST_CASE("sample store: corrupted containers are refused with diagnostics") {
    Rng rng(43);
    std::vector<CropPairSample> samples = {make_sample(rng, 6, 0), make_sample(rng, 6, 1)};
    const std::string path = temp_path("store_bad.bin");
    write_sample_store(path, samples, 6);

    std::vector<uint8_t> buf = read_file(path);
    SECTION("bad magic") {
        buf[0] = 'X';
        write_file(path, buf);
        REQUIRE_THROWS_WITH(read_sample_store(path), Catch::Matchers::ContainsSubstring("magic"));
    }
    SECTION("wrong version") {
        buf[8] = 99;
        write_file(path, buf);
        REQUIRE_THROWS_WITH(read_sample_store(path),
                            Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("truncated record area") {
        buf.resize(buf.size() - 10);
        write_file(path, buf);
        REQUIRE_THROWS_AS(read_sample_store(path), IoError);
    }
    std::filesystem::remove(path);
}
