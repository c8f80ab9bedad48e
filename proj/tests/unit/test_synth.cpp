#include "mhm/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace mhm;

TEST_SUITE("synth") {

TEST_CASE("same seed renders the same sample") {
    const Sample a = generate_scene(7, 64, 5), b = generate_scene(7, 64, 5);
    CHECK(a.image == b.image);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.landmarks[i].x == b.landmarks[i].x);
        CHECK(a.landmarks[i].y == b.landmarks[i].y);
    }
    CHECK_FALSE(generate_scene(8, 64, 5).image == a.image);
}

TEST_CASE("landmarks lie inside the image and in face order") {
    for (std::size_t F : {32, 64, 128}) {
        for (const auto& s : generate_samples(3, 50, F, 5)) {
            REQUIRE(s.landmarks.size() == 5);
            for (const auto& p : s.landmarks.coords) {
                CHECK(p.x >= 0.0);
                CHECK(p.x < static_cast<double>(F));
                CHECK(p.y >= 0.0);
                CHECK(p.y < static_cast<double>(F));
            }
            CHECK(s.landmarks[0].x < s.landmarks[1].x);  // left eye left of right eye
            CHECK(s.landmarks[2].y > s.landmarks[0].y);  // nose below eyes
            CHECK(s.landmarks[3].y > s.landmarks[2].y);  // mouth below nose
        }
    }
}

TEST_CASE("68-point layout") {
    const Sample s = generate_scene(5, 64, 68);
    REQUIRE(s.landmarks.size() == 68);
    for (const auto& p : s.landmarks.coords) {
        CHECK(p.x >= 0.0);
        CHECK(p.x < 64.0);
    }
    CHECK(s.landmarks[36].x < s.landmarks[45].x);
    CHECK(s.landmarks[48].x == s.landmarks[60].x);
    CHECK_THROWS_AS(generate_scene(5, 64, 7), std::invalid_argument);
}

TEST_CASE("eye landmarks sit on dark pixels") {
    for (const auto& s : generate_samples(4, 20, 64, 5)) {
        const auto& eye = s.landmarks[0];
        const auto x = static_cast<std::size_t>(eye.x), y = static_cast<std::size_t>(eye.y);
        const auto cheek = s.image.at(x, std::min<std::size_t>(63, y + 8));
        CHECK(s.image.at(x, y) + 40 < cheek);
    }
}

TEST_CASE("eye landmark is the center of the rendered eye") {
    // A center error above 0.5 px would push a pixel from one of the two test rings across the rim.
    for (std::uint64_t seed = 30; seed < 50; ++seed) {
        const Sample s = generate_scene(seed, 256, 5);
        const Sample dense = generate_scene(seed, 256, 68);
        const Point eye = s.landmarks[0];
        double r = 0.0;
        for (std::size_t i = 36; i < 42; ++i) r += std::hypot(dense.landmarks[i].x - eye.x, dense.landmarks[i].y - eye.y) / 6.0;
        const auto cx = static_cast<std::size_t>(eye.x), cy = static_cast<std::size_t>(eye.y);
        const double thr = 0.5 * (s.image.at(cx, cy) + s.image.at(cx, cy + static_cast<std::size_t>(2.0 * r)));
        const double margin = 0.5 + std::sqrt(0.5);
        std::size_t inside = 0, outside = 0;
        for (std::size_t y = cy - 2 * static_cast<std::size_t>(r); y <= cy + 2 * static_cast<std::size_t>(r); ++y)
            for (std::size_t x = cx - 2 * static_cast<std::size_t>(r); x <= cx + 2 * static_cast<std::size_t>(r); ++x) {
                const double dx = x + 0.5 - eye.x, dy = y + 0.5 - eye.y, d = std::hypot(dx, dy);
                if (d <= r - margin) {
                    CHECK(s.image.at(x, y) < thr);
                    ++inside;
                } else if (d >= r + margin && d <= 1.3 * r && dy > 0.5 * d) {
                    CHECK(s.image.at(x, y) > thr);
                    ++outside;
                }
            }
        CHECK(inside > 100);
        CHECK(outside > 20);
    }
}

TEST_CASE("landmarks stay inside the image for many seeds") {
    std::size_t bad = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const Sample s = generate_scene(seed, 32, 5);
        for (const auto& p : s.landmarks.coords)
            if (!(p.x >= 0.0 && p.x < 32.0 && p.y >= 0.0 && p.y < 32.0)) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("motion bound over many clips") {
    const double scale = 2.0;
    double worst = 0.0;
    for (const auto& c : generate_clips(12, 1000, 32, 5, 4, scale, 0.0))
        for (std::size_t t = 1; t < 4; ++t)
            for (std::size_t n = 0; n < 5; ++n)
                worst = std::max(worst, std::hypot(c.tracks[t][n].x - c.tracks[t - 1][n].x, c.tracks[t][n].y - c.tracks[t - 1][n].y));
    CHECK(worst <= motion_bound(scale) + 1e-9);
    CHECK(worst > 0.0);
}

TEST_CASE("clips respect the motion bound") {
    const double scale = 1.5;
    for (const auto& c : generate_clips(11, 20, 64, 5, 8, scale, 0.0)) {
        REQUIRE(c.frames.size() == 8);
        for (std::size_t t = 1; t < 8; ++t) {
            for (std::size_t n = 0; n < 5; ++n) {
                const double d = std::hypot(c.tracks[t][n].x - c.tracks[t - 1][n].x, c.tracks[t][n].y - c.tracks[t - 1][n].y);
                CHECK(d <= motion_bound(scale) + 1e-9);
            }
            CHECK_FALSE(c.occluded[t]);
        }
    }
}

TEST_CASE("static clip without occlusion repeats the first frame") {
    const Clip c = generate_clip(12, 64, 5, 5, 0.0, 0.0);
    for (std::size_t t = 1; t < 5; ++t) {
        CHECK(c.frames[t] == c.frames[0]);
        CHECK(c.tracks[t][2].x == c.tracks[0][2].x);
    }
}

TEST_CASE("occlusion changes pixels but not the motion") {
    const Clip plain = generate_clip(13, 64, 5, 8, 1.0, 0.0);
    const Clip occ = generate_clip(13, 64, 5, 8, 1.0, 1.0);
    for (std::size_t t = 0; t < 8; ++t) {
        CHECK(occ.occluded[t]);
        CHECK(occ.tracks[t][0].x == plain.tracks[t][0].x);
        CHECK_FALSE(occ.frames[t] == plain.frames[t]);
    }
}

TEST_CASE("dataset round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mhm_synth_test";
    std::filesystem::remove_all(dir);
    DatasetManifest m;
    m.seed = 21;
    m.samples = 3;
    m.clips = 2;
    m.clip_length = 3;
    m.motion_scale = 1.0;
    m.occlusion_prob = 0.5;
    const auto samples = generate_samples(m.seed, m.samples, m.F, m.N);
    const auto clips = generate_clips(m.seed, m.clips, m.F, m.N, m.clip_length, m.motion_scale, m.occlusion_prob);
    write_dataset(dir, m, samples, clips);

    const DatasetManifest back = read_manifest(dir);
    CHECK(back.seed == 21);
    CHECK(back.samples == 3);
    CHECK(back.occlusion_prob == 0.5);
    const auto rs = read_samples(dir);
    REQUIRE(rs.size() == 3);
    CHECK(rs[1].image == samples[1].image);
    CHECK(rs[1].landmarks[3].x == doctest::Approx(samples[1].landmarks[3].x).epsilon(1e-6));
    const auto rc = read_clips(dir);
    REQUIRE(rc.size() == 2);
    CHECK(rc[1].frames[2] == clips[1].frames[2]);
    CHECK(rc[1].occluded == clips[1].occluded);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
