#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "srr/config.hpp"
#include "srr/dataset.hpp"
#include "srr/error.hpp"
#include "srr/image.hpp"
#include "srr/ops.hpp"
#include "srr/synth.hpp"
#include "support.hpp"

using namespace srr;
using srr::test::bit_identical;
using srr::test::TempDir;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Balanced accuracy of thresholding pixels projected onto the difference of
/// class colour means.
double separability(const Sequence& seq) {
    double correct_fg = 0, correct_bg = 0, n_fg = 0, n_bg = 0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto f = seq.frames[t].values();
        const auto m = seq.masks[t].values();
        const std::size_t plane = m.size();
        double mf[3] = {0, 0, 0}, mb[3] = {0, 0, 0}, cf = 0, cb = 0;
        for (std::size_t i = 0; i < plane; ++i)
            for (std::size_t c = 0; c < 3; ++c) (m[i] > 0 ? mf : mb)[c] += f[c * plane + i] / 1.0;
        for (std::size_t i = 0; i < plane; ++i) (m[i] > 0 ? cf : cb) += 1;
        if (cf == 0) continue;
        double dir[3], mid = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            mf[c] /= cf;
            mb[c] /= cb;
            dir[c] = mf[c] - mb[c];
            mid += dir[c] * 0.5 * (mf[c] + mb[c]);
        }
        for (std::size_t i = 0; i < plane; ++i) {
            double proj = 0;
            for (std::size_t c = 0; c < 3; ++c) proj += dir[c] * f[c * plane + i];
            if (m[i] > 0) correct_fg += proj > mid, n_fg += 1;
            else correct_bg += proj <= mid, n_bg += 1;
        }
    }
    return 0.5 * (correct_fg / n_fg + correct_bg / n_bg);
}

}  // namespace

TEST_CASE("pnm: header layout and byte-exact round trip") {
    Image img{3, 2, 3, {}};
    for (std::size_t i = 0; i < 18; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 14));
    const auto bytes = encode_pnm(img);
    const std::string head(bytes.begin(), bytes.begin() + 11);
    CHECK(head == "P6\n3 2\n255\n");
    CHECK(bytes.size() == 11 + 18);
    const Image back = decode_pnm(bytes);
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.channels == 3);
    CHECK(back.pixels == img.pixels);

    Image gray{2, 2, 1, {0, 255, 7, 128}};
    const auto gb = encode_pnm(gray);
    CHECK(std::string(gb.begin(), gb.begin() + 3) == "P5\n");
    CHECK(decode_pnm(gb).pixels == gray.pixels);
}

TEST_CASE("pnm: header comments and arbitrary whitespace are accepted") {
    const Image img = decode_pnm(bytes_of("P5 # gray\n2\t1 # size\n255\n\x01\x02"));
    CHECK(img.width == 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{1, 2});
}

TEST_CASE("pnm: malformed input raises ParseError with the byte offset") {
    try {
        decode_pnm(bytes_of("P3\n1 1\n255\n\x01\x02\x03"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
    }
    try {
        decode_pnm(bytes_of("P6\n2 2\n255\n\x01\x02\x03"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 14);  // payload starts at 11, three bytes present
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
    CHECK_THROWS_AS(decode_pnm(bytes_of("P5\n2 x\n255\n")), ParseError);
    CHECK_THROWS_AS(decode_pnm(bytes_of("P5\n1 1\n65535\n\x01\x01")), ParseError);
    CHECK_THROWS_AS(decode_pnm(bytes_of("P5\n0 1\n255\n")), ParseError);
    CHECK_THROWS_AS(decode_pnm({}), ParseError);

    TempDir dir("pnm_bad");
    write_text(dir / "x.pgm", "P5\n4 4\n255\nabc");
    CHECK_THROWS_AS(read_mask(dir / "x.pgm"), ParseError);
    CHECK_THROWS_AS(read_frame(dir / "missing.ppm"), IoError);
}

TEST_CASE("masks round-trip exactly; error maps round half up") {
    TempDir dir("masks");
    Rng rng(3);
    const Tensor m = srr::test::random_mask({1, 1, 16, 24}, rng);
    write_mask(dir / "m.pgm", m);
    CHECK(bit_identical(read_mask(dir / "m.pgm"), m));
    const auto raw = srr::test::read_bytes(dir / "m.pgm");
    CHECK(std::string(raw.begin(), raw.begin() + 10) == "P5\n24 16\n2");
    for (std::size_t i = 13; i < raw.size(); ++i) CHECK((raw[i] == 0 || raw[i] == 255));

    CHECK(quantize_unit(0.5) == 128);
    CHECK(quantize_unit(0.0) == 0);
    CHECK(quantize_unit(1.0) == 255);
    CHECK(quantize_unit(1.7) == 255);
    CHECK(quantize_unit(-0.2) == 0);
    CHECK(quantize_unit(2.5 / 255.0) == 3);
    write_error_map(dir / "e.pgm", Tensor::full({1, 1, 2, 2}, 0.5));
    for (auto v : read_pnm(dir / "e.pgm").pixels) CHECK(v == 128);

    write_pnm(dir / "rgb.ppm", Image{2, 1, 3, {1, 2, 3, 4, 5, 6}});
    CHECK_THROWS_AS(read_mask(dir / "rgb.ppm"), ConfigError);
}

TEST_CASE("frames are [1,3,H,W] in planar order") {
    TempDir dir("frames");
    write_pnm(dir / "f.ppm", Image{2, 1, 3, {255, 0, 0, 0, 0, 255}});
    const Tensor f = read_frame(dir / "f.ppm");
    CHECK(f.shape() == Shape{1, 3, 1, 2});
    CHECK(f.values()[0] == 1.0);  // R at (0,0)
    CHECK(f.values()[1] == 0.0);  // R at (0,1)
    CHECK(f.values()[5] == 1.0);  // B at (0,1)
    CHECK(bit_identical(image_to_tensor(tensor_to_image(f)), f));
}

TEST_CASE("synth: same seed gives identical bytes, other seeds differ") {
    TempDir dir("synth");
    SynthParams p;
    p.frames = 4;
    save_sequence(dir / "a", synth_generate(p));
    save_sequence(dir / "b", synth_generate(p));
    p.seed = 2;
    save_sequence(dir / "c", synth_generate(p));
    for (std::size_t t = 0; t < 4; ++t) {
        for (const char* ext : {".ppm", ".pgm"}) {
            const std::string f = frame_stem(t) + ext;
            CHECK(srr::test::read_bytes(dir / "a" / f) == srr::test::read_bytes(dir / "b" / f));
            CHECK(srr::test::read_bytes(dir / "a" / f) != srr::test::read_bytes(dir / "c" / f));
        }
    }
    const Sequence back = load_sequence(dir / "a");
    const Sequence orig = synth_generate(SynthParams{});
    REQUIRE(back.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(bit_identical(back.frames[t], orig.frames[t]));
        CHECK(bit_identical(back.masks[t], orig.masks[t]));
    }
}

TEST_CASE("synth: unoccluded mask areas stay inside the configured bounds") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        SynthParams p;
        p.seed = seed;
        p.frames = 24;
        p.occlusion_prob = 0.0;
        p.min_radius = 5 + static_cast<double>(seed);
        p.max_radius = p.min_radius + 4;
        const auto [lo, hi] = synth_area_bounds(p);
        for (const Tensor& m : synth_generate(p).masks) {
            const double area = sum(m).item();
            CHECK(area >= lo);
            CHECK(area <= hi);
        }
    }
}

TEST_CASE("synth: contrast 1 is separable by colour, contrast 0 is not") {
    SynthParams p;
    p.frames = 6;
    p.contrast = 1.0;
    CHECK(separability(synth_generate(p)) > 0.95);
    p.contrast = 0.0;
    CHECK(separability(synth_generate(p)) < 0.75);
}

TEST_CASE("synth: appearance seed fixes palette independently of motion") {
    SynthParams a;
    a.appearance_seed = 5;
    a.seed = 1;
    SynthParams b = a;
    b.seed = 2;
    const Sequence sa = synth_generate(a), sb = synth_generate(b);
    CHECK_FALSE(bit_identical(sa.masks[0], sb.masks[0]));
    // far-from-object background pixels share their texture up to sensor noise
    const auto fa = sa.frames[0].values(), fb = sb.frames[0].values();
    const auto ma = sa.masks[0].values(), mb = sb.masks[0].values();
    double diff = 0, n = 0;
    for (std::size_t i = 0; i < ma.size(); ++i)
        if (ma[i] == 0 && mb[i] == 0) diff += std::abs(fa[i] - fb[i]), n += 1;
    CHECK(diff / n < 0.03);
}

TEST_CASE("synth: parameter validation") {
    SynthParams p;
    p.size = 48;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.contrast = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.frames = 0;
    CHECK_THROWS_AS(synth_generate(p), ConfigError);
    p = {};
    p.max_radius = 40;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("dataset: load/save, layout errors and static pool") {
    TempDir dir("dataset");
    SynthParams p;
    p.frames = 3;
    p.size = 32;
    p.max_radius = 8;
    save_sequence(dir / "root" / "b_seq", synth_generate(p, "b_seq"));
    p.seed = 9;
    save_sequence(dir / "root" / "a_seq", synth_generate(p, "a_seq"));
    std::filesystem::create_directories(dir / "root" / "not_a_seq");
    const auto all = load_dataset(dir / "root");
    REQUIRE(all.size() == 2);
    CHECK(all[0].name == "a_seq");
    CHECK(all[1].labeled());

    std::filesystem::remove(dir / "root" / "a_seq" / "00001.pgm");
    CHECK_THROWS_AS(load_sequence(dir / "root" / "a_seq"), ConfigError);
    CHECK_THROWS_AS(load_sequence(dir / "root" / "a_seq", false), ConfigError);
    for (const char* m : {"00000.pgm", "00002.pgm"}) std::filesystem::remove(dir / "root" / "a_seq" / m);
    CHECK(load_sequence(dir / "root" / "a_seq", false).masks.empty());
    CHECK_THROWS_AS(load_dataset(dir / "root" / "not_a_seq"), ConfigError);
    CHECK_THROWS_AS(load_sequence(dir / "nowhere"), IoError);

    const StaticPool pool = synth_static_pool(p, 5, 2);
    CHECK(pool.categories == std::vector<std::string>{"cat0", "cat1", "cat0", "cat1", "cat0"});
    save_static_pool(dir / "pool", pool);
    const StaticPool back = load_static_pool(dir / "pool");
    REQUIRE(back.size() == 5);
    CHECK(back.names == pool.names);
    CHECK(back.categories == pool.categories);
    for (std::size_t i = 0; i < 5; ++i) CHECK(bit_identical(back.images[i], pool.images[i]));
    write_text(dir / "pool" / "categories.txt", "img00000\n");
    CHECK_THROWS_AS(load_static_pool(dir / "pool"), ConfigError);
    CHECK(frame_stem(7) == "00007");
}

TEST_CASE("config: key=value parsing") {
    const auto kv = parse_key_values("# run\n preset = desk \n\ngamma=2.5 # weight\nout = a b\n");
    CHECK(kv.size() == 3);
    CHECK(kv.at("preset") == "desk");
    CHECK(kv.at("gamma") == "2.5");
    CHECK(kv.at("out") == "a b");
    CHECK_THROWS_AS(parse_key_values("gamma = 1\ngamma = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("just words\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values(" = 3\n"), ConfigError);
}

TEST_CASE("config: typed keys, validation and model mapping") {
    RunConfig cfg;
    cfg.apply({{"attention_mode", "motion_only"}, {"reference_mode", "off"}, {"seed", "42"}, {"gamma", "0.5"},
               {"share_cross_qkv", "false"}, {"frames", "8"}});
    CHECK(cfg.attention_mode == AttentionMode::MotionOnly);
    CHECK(cfg.reference_mode == ReferenceMode::Off);
    CHECK(cfg.seed == 42);
    CHECK(cfg.schedule.seed == 42);
    CHECK(cfg.synth.seed == 42);
    CHECK(cfg.synth.frames == 8);
    CHECK_FALSE(cfg.model_config().stages[0].attention.share_cross_qkv);
    CHECK(cfg.model_config().attention_mode() == AttentionMode::MotionOnly);

    CHECK_THROWS_AS(cfg.set("nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("seed", "-1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("gamma", "abc"), ConfigError);
    CHECK_THROWS_AS(cfg.set("gamma", "nan"), ConfigError);
    CHECK_THROWS_AS(cfg.set("attention_mode", "cross"), ConfigError);
    CHECK_THROWS_AS(cfg.set("preset", "huge"), ConfigError);
    CHECK_THROWS_AS(cfg.set("hflip", "maybe"), ConfigError);

    TempDir dir("config");
    write_text(dir / "run.cfg", "preset = full\nfinetune_iters = 7\n");
    const RunConfig f = RunConfig::from_file(dir / "run.cfg");
    CHECK(f.preset == "full");
    CHECK(f.schedule.finetune_iters == 7);
    CHECK_THROWS_AS(RunConfig::from_file(dir / "none.cfg"), IoError);
    for (const auto& k : RunConfig::keys()) CHECK_NOTHROW(parse_key_values(k + " = x"));
}
