#include "mhm/coattention.hpp"
#include "mhm/grad_check.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace mhm;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

// Row-wise softmax of an explicit score matrix.
std::vector<double> softmax_oracle(const std::vector<double>& s, std::size_t n) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY, z = 0.0;
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, s[i * n + j]);
        for (std::size_t j = 0; j < n; ++j) z += std::exp(s[i * n + j] - mx);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = std::exp(s[i * n + j] - mx) / z;
    }
    return out;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("coattention") {

TEST_CASE("affinities match the explicit bilinear scores") {
    Rng rng(1);
    const std::size_t c = 6, r = 3;
    auto params = CoAttentionParams::make(r, 0.4, rng);
    const Tensor dx = random_tensor({c, r}, rng), dy = random_tensor({r, c}, rng);
    const auto [w_xy, w_yx] = affinities(dx, dy, params);
    std::vector<double> s_xy(c * c), s_yx(c * c);
    const double norm = 1.0 / std::sqrt(3.0);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double a = 0.0, b = 0.0;
            for (std::size_t u = 0; u < r; ++u)
                for (std::size_t v = 0; v < r; ++v) {
                    a += dy[u * c + i] * params.P[u * r + v] * dx[j * r + v];
                    b += dx[i * r + u] * params.Q[u * r + v] * dy[v * c + j];
                }
            s_xy[i * c + j] = a * norm;
            s_yx[i * c + j] = b * norm;
        }
    const auto o_xy = softmax_oracle(s_xy, c), o_yx = softmax_oracle(s_yx, c);
    for (std::size_t i = 0; i < c * c; ++i) {
        CHECK(w_xy[i] == doctest::Approx(o_xy[i]).epsilon(1e-12));
        CHECK(w_yx[i] == doctest::Approx(o_yx[i]).epsilon(1e-12));
    }
}

TEST_CASE("affinity rows sum to one") {
    Rng rng(2);
    auto params = CoAttentionParams::make(4, 0.4, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor dx = random_tensor({16, 4}, rng), dy = random_tensor({4, 16}, rng);
        const auto [w_xy, w_yx] = affinities(scale(dx, 5.0), dy, params);
        for (const Tensor* w : {&w_xy, &w_yx})
            for (std::size_t i = 0; i < 16; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < 16; ++j) row += (*w)[i * 16 + j];
                CHECK(std::abs(row - 1.0) <= 1e-12);
            }
    }
}

TEST_CASE("fusion adds the attended features of the other axis") {
    Rng rng(3);
    auto params = CoAttentionParams::make(2, 0.4, rng);
    const Tensor dx = random_tensor({5, 2}, rng), dy = random_tensor({2, 5}, rng);
    const auto [w_xy, w_yx] = affinities(dx, dy, params);
    const auto [fx, fy] = fuse(dx, dy, w_xy, w_yx, 0.4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            double ax = 0.0, ay = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                ax += w_yx[i * 5 + j] * dy[k * 5 + j];
                ay += w_xy[i * 5 + j] * dx[j * 2 + k];
            }
            CHECK(fx[i * 2 + k] == doctest::Approx(dx[i * 2 + k] + 0.4 * ax).epsilon(1e-13));
            CHECK(fy[k * 5 + i] == doctest::Approx(dy[k * 5 + i] + 0.4 * ay).epsilon(1e-13));
        }
}

TEST_CASE("two positions, one row, identity P and Q") {
    Rng rng(7);
    auto params = CoAttentionParams::make(1, 0.4, rng);
    params.P[0] = 1.0;
    params.Q[0] = 1.0;
    const double a1 = 1.0, a2 = 2.0, b1 = 0.5, b2 = -1.0;
    Tensor dx(Shape{2, 1}), dy(Shape{1, 2});
    dx[0] = a1;
    dx[1] = a2;
    dy[0] = b1;
    dy[1] = b2;
    auto sig = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
    // W_yx[i] = softmax(a_i * b), W_xy[i] = softmax(b_i * a).
    const double yx0 = sig(a1 * (b1 - b2)), yx1 = sig(a2 * (b1 - b2));
    const double xy0 = sig(b1 * (a1 - a2)), xy1 = sig(b2 * (a1 - a2));
    AxisFeatures in;
    in.dx = {dx};
    in.dy = {dy};
    const AxisFeatures out = coattention_forward(in, params);
    CHECK(out.dx[0][0] == doctest::Approx(a1 + 0.4 * (yx0 * b1 + (1 - yx0) * b2)).epsilon(1e-14));
    CHECK(out.dx[0][1] == doctest::Approx(a2 + 0.4 * (yx1 * b1 + (1 - yx1) * b2)).epsilon(1e-14));
    CHECK(out.dy[0][0] == doctest::Approx(b1 + 0.4 * (xy0 * a1 + (1 - xy0) * a2)).epsilon(1e-14));
    CHECK(out.dy[0][1] == doctest::Approx(b2 + 0.4 * (xy1 * a1 + (1 - xy1) * a2)).epsilon(1e-14));
}

TEST_CASE("four-channel forward matches a direct loop") {
    Rng rng(8);
    const std::size_t c = 8, r = 4;
    const double gamma = 0.4, norm = 1.0 / std::sqrt(static_cast<double>(r));
    auto params = CoAttentionParams::make(r, gamma, rng);
    AxisFeatures in;
    for (int k = 0; k < 4; ++k) {
        in.dx.push_back(random_tensor({c, r}, rng));
        in.dy.push_back(random_tensor({r, c}, rng));
    }
    const AxisFeatures out = coattention_forward(in, params);
    REQUIRE(out.channels() == 4);
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const Tensor &dx = in.dx[k], &dy = in.dy[k];
        std::vector<double> s_xy(c * c), s_yx(c * c);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j)
                for (std::size_t u = 0; u < r; ++u)
                    for (std::size_t v = 0; v < r; ++v) {
                        s_xy[i * c + j] += dy[u * c + i] * params.P[u * r + v] * dx[j * r + v] * norm;
                        s_yx[i * c + j] += dx[i * r + u] * params.Q[u * r + v] * dy[v * c + j] * norm;
                    }
        const auto w_xy = softmax_oracle(s_xy, c), w_yx = softmax_oracle(s_yx, c);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t u = 0; u < r; ++u) {
                double ax = 0.0, ay = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    ax += w_yx[i * c + j] * dy[u * c + j];
                    ay += w_xy[i * c + j] * dx[j * r + u];
                }
                worst = std::max(worst, std::abs(out.dx[k][i * r + u] - (dx[i * r + u] + gamma * ax)));
                worst = std::max(worst, std::abs(out.dy[k][u * c + i] - (dy[u * c + i] + gamma * ay)));
            }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("gamma zero is a bitwise identity and nonzero gamma is not") {
    Rng rng(4);
    AxisFeatures f;
    for (int k = 0; k < 3; ++k) {
        f.dx.push_back(random_tensor({8, 4}, rng));
        f.dy.push_back(random_tensor({4, 8}, rng));
    }
    auto params = CoAttentionParams::make(4, 0.0, rng);
    const AxisFeatures same = coattention_forward(f, params);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(bitwise_equal(same.dx[k], f.dx[k]));
        CHECK(bitwise_equal(same.dy[k], f.dy[k]));
    }
    params.gamma = 0.4;
    const AxisFeatures moved = coattention_forward(f, params);
    CHECK_FALSE(bitwise_equal(moved.dx[0], f.dx[0]));
    CHECK_FALSE(bitwise_equal(moved.dy[0], f.dy[0]));
}

TEST_CASE("shape mismatches are rejected") {
    Rng rng(5);
    auto params = CoAttentionParams::make(4, 0.4, rng);
    CHECK_THROWS_AS(affinities(Tensor(Shape{8, 4}), Tensor(Shape{4, 7}), params), ShapeError);
    CHECK_THROWS_AS(affinities(Tensor(Shape{8, 3}), Tensor(Shape{3, 8}), params), ShapeError);
    AxisFeatures f;
    f.dx.push_back(Tensor(Shape{8, 4}));
    CHECK_THROWS_AS(coattention_forward(f, params), ShapeError);
    params.gamma = 0.0;
    f.dy.push_back(Tensor(Shape{8, 4}));
    CHECK_THROWS_AS(coattention_forward(f, params), ShapeError);
}

TEST_CASE("gradients through the module") {
    Rng rng(6);
    auto params = CoAttentionParams::make(3, 0.4, rng);
    Tensor dx = random_tensor({6, 3}, rng), dy = random_tensor({3, 6}, rng);
    const Tensor wx = random_tensor({6, 3}, rng), wy = random_tensor({3, 6}, rng);
    auto f = [&] {
        AxisFeatures in;
        in.dx = {dx};
        in.dy = {dy};
        const AxisFeatures out = coattention_forward(in, params);
        return add(sum(mul(out.dx[0], wx)), sum(mul(out.dy[0], wy)));
    };
    CHECK(grad_check(f, {dx, dy, params.P, params.Q}, 1e-6) <= 1e-5);
}

}  // TEST_SUITE
