#include "mhm/checkpoint.hpp"
#include "mhm/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

using namespace mhm;

TEST_SUITE("rng") {

TEST_CASE("raw stream is the standard mt19937_64 sequence") {
    Rng rng(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next();
    CHECK(v == 9981545732273789042ull);
}

TEST_CASE("same seed, same draws") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
        CHECK(a.below(7) == b.below(7));
    }
}

TEST_CASE("uniform and below stay in range") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.below(5) < 5);
        const double r = rng.uniform(-2.0, 3.0);
        CHECK(r >= -2.0);
        CHECK(r < 3.0);
    }
    CHECK(rng.below(1) == 0);
}

TEST_CASE("normal draws have unit moments") {
    Rng rng(11);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("derived streams differ and are reproducible") {
    CHECK(Rng::derive(1, 0).seed() == Rng::derive(1, 0).seed());
    CHECK(Rng::derive(1, 0).seed() != Rng::derive(1, 1).seed());
    CHECK(Rng::derive(1, 0).seed() != Rng::derive(2, 0).seed());
}

}  // TEST_SUITE

TEST_SUITE("checkpoint") {

TEST_CASE("encode/decode round trip is bit exact") {
    NamedTensors src{{"a", Tensor(Shape{2, 2}, std::vector<double>{1.0, -0.0, std::numeric_limits<double>::denorm_min(),
                                                                    1.0 / 3.0})},
                     {"b.bias", Tensor(Shape{1}, std::vector<double>{-7.25})}};
    const std::string bytes = encode_checkpoint(src);
    CHECK(bytes.substr(0, 4) == "MHM1");
    const NamedTensors back = decode_checkpoint(bytes);
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "a");
    CHECK(back[0].second.shape() == Shape{2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::memcmp(&back[0].second.data()[i], &src[0].second.data()[i], sizeof(double)) == 0);
    }
    CHECK(encode_checkpoint(back) == bytes);
}

TEST_CASE("layout is little-endian with u32 name length and rank") {
    NamedTensors src{{"w", Tensor(Shape{1}, std::vector<double>{1.0})}};
    const std::string b = encode_checkpoint(src);
    // magic(4) + len(4) + "w"(1) + rank(4) + extent(8) + value(8)
    REQUIRE(b.size() == 29);
    CHECK(static_cast<unsigned char>(b[4]) == 1);
    CHECK(b[8] == 'w');
    CHECK(static_cast<unsigned char>(b[9]) == 1);
    CHECK(static_cast<unsigned char>(b[13]) == 1);
    // 1.0 = 0x3FF0000000000000
    CHECK(static_cast<unsigned char>(b[27]) == 0xF0);
    CHECK(static_cast<unsigned char>(b[28]) == 0x3F);
}

TEST_CASE("corrupt input is rejected") {
    NamedTensors src{{"w", Tensor(Shape{3}, std::vector<double>{1.0, 2.0, 3.0})}};
    std::string b = encode_checkpoint(src);
    CHECK_THROWS_AS(decode_checkpoint("XXXX"), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(b.substr(0, b.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);
}

TEST_CASE("assign_from checks names and shapes") {
    Tensor dst(Shape{2});
    const NamedTensors d{{"w", dst}};
    assign_from({{"w", Tensor(Shape{2}, std::vector<double>{4.0, 5.0})}}, d);
    CHECK(dst[1] == 5.0);
    CHECK_THROWS_AS(assign_from({{"v", Tensor(Shape{2})}}, d), CheckpointError);
    CHECK_THROWS_AS(assign_from({{"w", Tensor(Shape{3})}}, d), CheckpointError);
    CHECK_THROWS_AS(assign_from({}, d), CheckpointError);
}

TEST_CASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "mhm_ckpt_test.bin";
    NamedTensors src{{"x", Tensor(Shape{2}, std::vector<double>{0.5, 0.25})}};
    save_checkpoint(path, src);
    const auto back = load_checkpoint(path);
    CHECK(back[0].second[1] == 0.25);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
