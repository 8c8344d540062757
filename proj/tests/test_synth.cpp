#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "uvsg/imageops.hpp"
#include "uvsg/synth.hpp"

using namespace uvsg;

TEST_CASE("label map value set and determinism") {
    Rng a(42), b(42);
    Tensor m1 = gen_label_map(a, 16, 64);
    Tensor m2 = gen_label_map(b, 16, 64);
    CHECK(m1.data == m2.data);
    std::set<float> values(m1.data.begin(), m1.data.end());
    for (float v : values) {
        CHECK(v == std::floor(v));
        CHECK(v >= 0.f);
        CHECK(v <= 16.f);
    }
    // retry rule: every shape id keeps at least one pixel
    for (int k = 1; k <= 16; ++k)
        CHECK(std::count(m1.data.begin(), m1.data.end(), static_cast<float>(k)) >= 1);
}

TEST_CASE("deformation field basics") {
    Rng rng(7);
    Tensor zero = gen_deformation(rng, 0.0, 6.0, 32);
    for (float v : zero.data) CHECK(v == 0.f);

    Rng a(9), b(9);
    Tensor f1 = gen_deformation(a, 3.0, 6.0, 32);
    Tensor f2 = gen_deformation(b, 3.0, 6.0, 32);
    CHECK(f1.data == f2.data);
}

TEST_CASE("deformation magnitude stays within the regression bound") {
    // empirical: max |d| over many seeds stays well under 10 * alpha
    const double alpha = 2.5;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        Tensor f = gen_deformation(rng, alpha, 6.0, 32);
        for (float v : f.data) CHECK(std::abs(v) <= 10.0 * alpha);
    }
}

TEST_CASE("warp semantics") {
    Rng rng(3);
    Tensor img(Shape{1, 8, 8});
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    Tensor zero(Shape{2, 8, 8});
    CHECK(warp(img, zero, Interp::nearest).data == img.data);
    CHECK(warp(img, zero, Interp::bilinear).data == img.data);

    Tensor labels = gen_label_map(rng, 5, 8);
    Tensor field = gen_deformation(rng, 2.0, 3.0, 8);
    Tensor warped = warp(labels, field, Interp::nearest);
    std::set<float> orig(labels.data.begin(), labels.data.end());
    for (float v : warped.data) CHECK(orig.count(v) == 1);

    Tensor constant(Shape{1, 8, 8});
    std::fill(constant.data.begin(), constant.data.end(), 0.7f);
    Tensor cw = warp(constant, field, Interp::bilinear);
    for (float v : cw.data) CHECK(v == doctest::Approx(0.7f));

    CHECK_THROWS_AS(warp(img, Tensor(Shape{2, 4, 4}), Interp::nearest), ShapeError);
}

TEST_CASE("lattice noise range, determinism, and smoothness") {
    Rng a(11), b(11);
    Tensor p1 = perlin(a, 64, 8);
    CHECK(p1.data == perlin(b, 64, 8).data);
    for (float v : p1.data) {
        CHECK(v >= -1.f);
        CHECK(v <= 1.f);
    }

    // lag-1 autocorrelation well above that of an i.i.d. field
    auto lag1 = [](const Tensor& t) {
        const int s = t.shape[1];
        double num = 0, den = 0, mean = 0;
        for (float v : t.data) mean += v;
        mean /= static_cast<double>(t.data.size());
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s - 1; ++x)
                num += (t.at(0, y, x) - mean) * (t.at(0, y, x + 1) - mean);
        for (float v : t.data) den += (v - mean) * (v - mean);
        return num / den;
    };
    Rng w(12);
    Tensor white(Shape{1, 64, 64});
    for (auto& v : white.data) v = static_cast<float>(w.normal());
    CHECK(lag1(p1) > lag1(white) + 0.3);
    CHECK(lag1(p1) > 0.5);
}

TEST_CASE("lattice noise is near zero mean across seeds") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        Rng rng(seed);
        Tensor p = perlin(rng, 128, 16);
        double m = 0;
        for (float v : p.data) m += v;
        total += m / static_cast<double>(p.data.size());
    }
    CHECK(std::abs(total / 64.0) < 0.05);
}

TEST_CASE("render with zero noise is piecewise constant") {
    SynthConfig cfg;
    cfg.fill_jitter = 0;
    cfg.gauss_noise = 0;
    cfg.perlin_noise = 0;
    Rng rng(5);

    Tensor one(Shape{1, 16, 16});  // single region, id 0
    Tensor img = render_with_means(one, {0.37f}, rng, cfg);
    for (float v : img.data) CHECK(v == 0.37f);

    Tensor two(Shape{1, 16, 16});
    for (int x = 8; x < 16; ++x)
        for (int y = 0; y < 16; ++y) two.at(0, y, x) = 1.f;
    Tensor bi = render_with_means(two, {0.2f, 0.8f}, rng, cfg);
    std::set<float> values(bi.data.begin(), bi.data.end());
    CHECK(values == std::set<float>{0.2f, 0.8f});
}

TEST_CASE("render output range is clamped") {
    SynthConfig cfg;
    Rng rng(6);
    Tensor labels = gen_label_map(rng, 4, 32);
    Tensor img = render_intensity(labels, rng, cfg);
    for (float v : img.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("task generation invariants") {
    SynthConfig cfg;
    cfg.image_size = 64;
    cfg.num_subjects = 20;
    cfg.seed = 77;
    SyntheticTask task = gen_task(cfg, 0);
    CHECK(task.subjects.size() == 20);
    CHECK(task.id == "synth_0");

    int nonempty = 0;
    std::vector<int> counts;
    for (const auto& [img, lbl] : task.subjects) {
        CHECK(img.shape == Shape{1, 64, 64});
        CHECK(lbl.shape == Shape{1, 64, 64});
        for (float v : img.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
        int fg = 0;
        for (float v : lbl.data) {
            CHECK((v == 0.f || v == 1.f));
            fg += v == 1.f;
        }
        if (fg > 0) ++nonempty;
        counts.push_back(fg);
    }
    CHECK(nonempty > 0);
    // all subjects are mild warps of one base topology
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*lo > 0) CHECK(static_cast<double>(*hi) / *lo < 3.0);
}

TEST_CASE("tasks are deterministic and stream-independent") {
    SynthConfig cfg;
    cfg.image_size = 32;
    cfg.num_subjects = 4;
    cfg.seed = 123;
    SyntheticTask a = gen_task(cfg, 3);
    SyntheticTask b = gen_task(cfg, 3);
    REQUIRE(a.subjects.size() == b.subjects.size());
    for (std::size_t i = 0; i < a.subjects.size(); ++i) {
        CHECK(a.subjects[i].first.data == b.subjects[i].first.data);
        CHECK(a.subjects[i].second.data == b.subjects[i].second.data);
    }
    // a different index gives a different task
    SyntheticTask c = gen_task(cfg, 4);
    CHECK(a.subjects[0].first.data != c.subjects[0].first.data);
}

TEST_CASE("config validation") {
    SynthConfig cfg;
    cfg.image_size = 8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.num_shapes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.perlin_scale = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
