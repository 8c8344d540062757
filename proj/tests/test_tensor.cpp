#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "uvsg/rng.hpp"
#include "uvsg/tensor.hpp"
#include "uvsg/tensor_io.hpp"

using namespace uvsg;

TEST_CASE("shape invariants") {
    Tensor t(Shape{2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK_THROWS_AS(Tensor(Shape{0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1.f, 2.f, 3.f}), ShapeError);
}

TEST_CASE("finite check flags NaN and Inf") {
    Tensor t(Shape{2, 2});
    CHECK(t.all_finite());
    t.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    t.data[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("grad slot matches data shape") {
    Tensor t(Shape{3, 3});
    CHECK_FALSE(t.has_grad());
    t.ensure_grad();
    CHECK(t.grad.size() == t.data.size());
}

static Tensor random_tensor(Shape s, Rng& rng) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
    return t;
}

TEST_CASE("uvsg round trip is bit exact") {
    Rng rng(7);
    Tensor t = random_tensor({3, 5, 4}, rng);
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t, Dtype::f32);
    std::istringstream is(os.str(), std::ios::binary);
    Tensor back = read_tensor<float>(is);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
}

TEST_CASE("uvsg header layout") {
    Tensor t(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t, Dtype::f32);
    const std::string s = os.str();
    CHECK(s.substr(0, 4) == "UVSG");
    CHECK(s[4] == 1);            // version
    CHECK(s[5] == 0);            // f32
    CHECK(s[6] == 2);            // rank
    // little-endian extents
    CHECK(static_cast<unsigned char>(s[7]) == 2);
    CHECK(static_cast<unsigned char>(s[8]) == 0);
    CHECK(static_cast<unsigned char>(s[11]) == 3);
    CHECK(s.size() == 7 + 8 + 24);
}

TEST_CASE("u8 and f64 payloads") {
    Tensor t(Shape{1, 2, 2}, {0, 1, 1, 0});
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t, Dtype::u8);
    std::istringstream is(os.str(), std::ios::binary);
    Tensor back = read_tensor<float>(is);
    CHECK(back.data == t.data);

    TensorD td(Shape{2}, {0.25, -0.75});
    std::ostringstream os2(std::ios::binary);
    write_tensor(os2, td, Dtype::f64);
    std::istringstream is2(os2.str(), std::ios::binary);
    TensorD back2 = read_tensor<double>(is2);
    CHECK(back2.data == td.data);
}

TEST_CASE("corrupt magic rejected") {
    std::istringstream is(std::string("XXXX\x01\x00\x01", 7), std::ios::binary);
    CHECK_THROWS_AS(read_tensor<float>(is), IoError);
}

TEST_CASE("rng determinism and splitting") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c = a.split(1), d = a.split(2);
    CHECK(c.next_u64() != d.next_u64());
    // serializable state
    Rng e(9);
    e.next_u64();
    auto st = e.state();
    const auto x = e.next_u64();
    e.set_state(st);
    CHECK(e.next_u64() == x);
}

TEST_CASE("rng uniform range and normal moments") {
    Rng rng(3);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = rng.normal();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}
