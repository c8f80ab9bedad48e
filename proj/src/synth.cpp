#include "mhm/synth.hpp"

#include "mhm/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mhm {

namespace {

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double norm(Point a) { return std::hypot(a.x, a.y); }

Point rotate(Point p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

Point to_image(const SceneParams& s, Point local) { return s.center + rotate(local, s.rotation); }

struct MouthFrame {
    Point origin, along, across;
    double width;
};

MouthFrame mouth_frame(const SceneParams& s) {
    const Point d = s.mouth_right - s.mouth_left;
    const double w = norm(d);
    const Point e = (1.0 / w) * d;
    return {s.mouth_left, e, {-e.y, e.x}, w};
}

double bulge(double t) { return 4.0 * t * (1.0 - t); }

Point lip_point(const SceneParams&, const MouthFrame& m, double t, double offset) {
    return m.origin + (t * m.width) * m.along + offset * m.across;
}

double brow_y(const SceneParams& s, const Point& eye, double dx) {
    return eye.y - s.eye_radius - s.brow_lift + 0.25 * dx * dx / s.eye_radius;
}

// Intensity of the face at a face-local point, or a negative value if the
// point lies outside the face ellipse.
double face_value(const SceneParams& s, Point local) {
    const double ex = local.x / s.axis_x, ey = local.y / s.axis_y;
    if (ex * ex + ey * ey > 1.0) return -1.0;
    const double r = s.eye_radius;
    for (const Point& eye : {s.eye_left, s.eye_right}) {
        if (norm(local - eye) <= r) return s.feature_level;
        const double dx = local.x - eye.x;
        if (std::abs(dx) <= 1.3 * r && std::abs(local.y - brow_y(s, eye, dx)) <= 0.18 * r) return s.feature_level;
    }
    if (norm(local - s.nose) <= 0.4 * r) return s.feature_level;
    if (std::abs(local.y - (s.nose.y + 0.6 * r)) <= 0.12 * r && std::abs(local.x - s.nose.x) <= 0.8 * r) {
        return s.feature_level;
    }
    const MouthFrame m = mouth_frame(s);
    const Point rel = local - m.origin;
    const double t = dot(rel, m.along) / m.width;
    if (t >= 0.0 && t <= 1.0) {
        const double across = dot(rel, m.across);
        const double half = 0.5 * s.lip_thickness;
        if (across >= -(s.lip_upper * bulge(t) + half) && across <= s.lip_lower * bulge(t) + half) {
            return s.feature_level;
        }
    }
    return s.face_level;
}

}  // namespace

SceneParams sample_scene(Rng& rng, std::size_t F) {
    const double f = static_cast<double>(F);
    SceneParams s;
    s.center = {f * (0.5 + rng.uniform(-0.05, 0.05)), f * (0.5 + rng.uniform(-0.05, 0.05))};
    s.axis_x = f * rng.uniform(0.28, 0.34);
    s.axis_y = f * rng.uniform(0.34, 0.40);
    s.rotation = rng.uniform(-0.2, 0.2);
    s.eye_radius = f * rng.uniform(0.045, 0.06);
    s.eye_left = {-f * rng.uniform(0.12, 0.16), -f * rng.uniform(0.07, 0.11)};
    s.eye_right = {f * rng.uniform(0.12, 0.16), -f * rng.uniform(0.07, 0.11)};
    s.nose = {f * rng.uniform(-0.02, 0.02), f * rng.uniform(0.05, 0.09)};
    s.mouth_left = {-f * rng.uniform(0.10, 0.14), f * rng.uniform(0.19, 0.23)};
    s.mouth_right = {f * rng.uniform(0.10, 0.14), f * rng.uniform(0.19, 0.23)};
    s.lip_upper = f * rng.uniform(0.01, 0.025);
    s.lip_lower = f * rng.uniform(0.015, 0.04);
    s.lip_thickness = f * rng.uniform(0.015, 0.025);
    s.brow_lift = f * rng.uniform(0.03, 0.05);
    s.background = rng.uniform(0.05, 0.35);
    s.face_level = rng.uniform(0.55, 0.85);
    s.feature_level = rng.uniform(0.0, 0.2);
    s.gradient = {rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15)};
    s.noise_std = rng.uniform(0.01, 0.03);
    return s;
}

LandmarkSet scene_landmarks(const SceneParams& s, std::size_t N) {
    LandmarkSet out;
    auto put = [&](Point local) { out.coords.push_back(to_image(s, local)); };
    const MouthFrame m = mouth_frame(s);
    if (N == 5) {
        put(s.eye_left);
        put(s.eye_right);
        put(s.nose);
        put(s.mouth_left);
        put(s.mouth_right);
        return out;
    }
    if (N != 68) throw std::invalid_argument("unsupported landmark count " + std::to_string(N) + " (use 5 or 68)");

    const double r = s.eye_radius;
    for (int i = 0; i <= 16; ++i) {  // jaw 0-16
        const double phi = std::numbers::pi * i / 16.0;
        put({-s.axis_x * std::cos(phi), s.axis_y * std::sin(phi)});
    }
    for (const Point& eye : {s.eye_left, s.eye_right}) {  // brows 17-26
        for (int j = 0; j < 5; ++j) {
            const double dx = -1.3 * r + j * (2.6 * r / 4.0);
            put({eye.x + dx, brow_y(s, eye, dx)});
        }
    }
    const Point mid = 0.5 * (s.eye_left + s.eye_right);
    for (int j = 0; j < 4; ++j) put(mid + (j / 3.0) * (s.nose - mid));  // bridge 27-30
    for (int j = 0; j < 5; ++j) put({s.nose.x - 0.8 * r + j * 0.4 * r, s.nose.y + 0.6 * r});  // nostrils 31-35
    for (const Point& eye : {s.eye_left, s.eye_right}) {  // eyes 36-47
        for (double deg : {180.0, 120.0, 60.0, 0.0, -60.0, -120.0}) {
            const double a = deg * std::numbers::pi / 180.0;
            put({eye.x + r * std::cos(a), eye.y - r * std::sin(a)});
        }
    }
    const double half = 0.5 * s.lip_thickness;
    out.coords.push_back(to_image(s, lip_point(s, m, 0.0, 0.0)));  // 48
    for (int j = 1; j <= 5; ++j) {                                   // 49-53
        const double t = j / 6.0;
        out.coords.push_back(to_image(s, lip_point(s, m, t, -(s.lip_upper * bulge(t) + half))));
    }
    out.coords.push_back(to_image(s, lip_point(s, m, 1.0, 0.0)));  // 54
    for (int j = 5; j >= 1; --j) {                                   // 55-59
        const double t = j / 6.0;
        out.coords.push_back(to_image(s, lip_point(s, m, t, s.lip_lower * bulge(t) + half)));
    }
    out.coords.push_back(to_image(s, lip_point(s, m, 0.0, 0.0)));  // 60
    for (int j = 1; j <= 3; ++j) {                                   // 61-63
        const double t = j / 4.0;
        out.coords.push_back(to_image(s, lip_point(s, m, t, -0.3 * s.lip_upper * bulge(t))));
    }
    out.coords.push_back(to_image(s, lip_point(s, m, 1.0, 0.0)));  // 64
    for (int j = 3; j >= 1; --j) {                                   // 65-67
        const double t = j / 4.0;
        out.coords.push_back(to_image(s, lip_point(s, m, t, 0.3 * s.lip_lower * bulge(t))));
    }
    return out;
}

std::vector<double> noise_field(Rng& rng, std::size_t F, double stddev) {
    std::vector<double> n(F * F);
    for (auto& v : n) v = stddev * rng.normal();
    return n;
}

GrayImage render_scene(const SceneParams& s, std::size_t F, const std::vector<double>& noise,
                       const std::vector<Occluder>& occluders) {
    constexpr int kSub = 4;
    const double f = static_cast<double>(F);
    GrayImage img{F, F, std::vector<std::uint8_t>(F * F)};
    for (std::size_t y = 0; y < F; ++y) {
        for (std::size_t x = 0; x < F; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < kSub; ++sy) {
                for (int sx = 0; sx < kSub; ++sx) {
                    const Point p{x + (sx + 0.5) / kSub, y + (sy + 0.5) / kSub};
                    double v = -1.0;
                    for (const auto& o : occluders) {
                        if (p.x >= o.x0 && p.x < o.x1 && p.y >= o.y0 && p.y < o.y1) v = o.level;
                    }
                    if (v < 0.0) {
                        v = face_value(s, rotate(p - s.center, -s.rotation));
                        if (v < 0.0) v = s.background;
                        v += s.gradient.x * (p.x / f - 0.5) + s.gradient.y * (p.y / f - 0.5);
                    }
                    acc += v;
                }
            }
            double v = acc / (kSub * kSub);
            if (!noise.empty()) v += noise[y * F + x];
            v = std::clamp(v, 0.0, 1.0);
            img.pixels[y * F + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return img;
}

Sample generate_scene(std::uint64_t seed, std::size_t F, std::size_t N) {
    if (N != 5 && N != 68) throw std::invalid_argument("unsupported landmark count " + std::to_string(N) + " (use 5 or 68)");
    Rng rng(seed);
    const SceneParams scene = sample_scene(rng, F);
    const auto noise = noise_field(rng, F, scene.noise_std);
    return {render_scene(scene, F, noise), scene_landmarks(scene, N)};
}

std::vector<Sample> generate_samples(std::uint64_t seed, std::size_t count, std::size_t F, std::size_t N) {
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(Rng::derive(seed, i).seed(), F, N));
    return out;
}

double motion_bound(double motion_scale) {
    // translation step <= sqrt(2) s; rotation step <= s / F on landmarks at
    // most 0.4 F from the face center.
    return (std::numbers::sqrt2 + 0.4) * motion_scale;
}

Clip generate_clip(std::uint64_t seed, std::size_t F, std::size_t N, std::size_t T, double motion_scale,
                   double occlusion_prob) {
    if (T < 1) throw std::invalid_argument("clip length must be >= 1");
    const double f = static_cast<double>(F);
    Rng rng(seed);
    SceneParams scene = sample_scene(rng, F);
    const auto noise = noise_field(rng, F, scene.noise_std);
    const double lo = 0.43 * f, hi = 0.57 * f;

    Clip clip;
    clip.seed = seed;
    for (std::size_t t = 0; t < T; ++t) {
        const double dx = rng.uniform(-1.0, 1.0), dy = rng.uniform(-1.0, 1.0), dr = rng.uniform(-1.0, 1.0);
        if (t > 0) {
            scene.center.x = std::clamp(scene.center.x + motion_scale * dx, lo, hi);
            scene.center.y = std::clamp(scene.center.y + motion_scale * dy, lo, hi);
            scene.rotation = std::clamp(scene.rotation + motion_scale / f * dr, -0.3, 0.3);
        }
        const LandmarkSet lm = scene_landmarks(scene, N);

        // Occluder parameters are always drawn so the motion stream does not
        // depend on occlusion_prob.
        const double u = rng.uniform();
        const auto target = static_cast<std::size_t>(rng.below(lm.size()));
        const double w = f * rng.uniform(0.15, 0.25), h = f * rng.uniform(0.15, 0.25);
        const double ox = rng.uniform(-0.25, 0.25) * w, oy = rng.uniform(-0.25, 0.25) * h;
        const double level = rng.uniform();
        std::vector<Occluder> occ;
        if (u < occlusion_prob) {
            const Point c = lm[target];
            occ.push_back({c.x + ox - 0.5 * w, c.y + oy - 0.5 * h, c.x + ox + 0.5 * w, c.y + oy + 0.5 * h, level});
        }
        clip.frames.push_back(render_scene(scene, F, noise, occ));
        clip.tracks.push_back(lm);
        clip.occluded.push_back(!occ.empty());
    }
    return clip;
}

std::vector<Clip> generate_clips(std::uint64_t seed, std::size_t count, std::size_t F, std::size_t N, std::size_t T,
                                 double motion_scale, double occlusion_prob) {
    std::vector<Clip> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_clip(Rng::derive(seed, 1'000'000 + i).seed(), F, N, T, motion_scale, occlusion_prob));
    }
    return out;
}

namespace {

std::string numbered(const char* fmt, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, i);
    return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& m, const std::vector<Sample>& samples,
                   const std::vector<Clip>& clips) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "annots");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        write_pgm(dir / "images" / numbered("%06zu.pgm", i), samples[i].image);
        write_pts(dir / "annots" / numbered("%06zu.pts", i), samples[i].landmarks);
    }
    for (std::size_t c = 0; c < clips.size(); ++c) {
        const auto cdir = dir / "clips" / numbered("%04zu", c);
        fs::create_directories(cdir);
        for (std::size_t t = 0; t < clips[c].frames.size(); ++t) {
            write_pgm(cdir / numbered("frame_%03zu.pgm", t), clips[c].frames[t]);
            write_pts(cdir / numbered("frame_%03zu.pts", t), clips[c].tracks[t]);
        }
        std::ofstream occ(cdir / "occluded.txt");
        for (bool o : clips[c].occluded) occ << (o ? 1 : 0) << '\n';
    }
    std::ofstream os(dir / "manifest.txt");
    os << "generator = " << Rng::algorithm << '\n'
       << "seed = " << m.seed << '\n'
       << "F = " << m.F << '\n'
       << "N = " << m.N << '\n'
       << "samples = " << m.samples << '\n'
       << "clips = " << m.clips << '\n'
       << "clip_length = " << m.clip_length << '\n'
       << "motion_scale = " << exact(m.motion_scale) << '\n'
       << "occlusion_prob = " << exact(m.occlusion_prob) << '\n';
    for (std::size_t i = 0; i < m.samples; ++i) os << "sample_seed " << i << ' ' << Rng::derive(m.seed, i).seed() << '\n';
    for (std::size_t c = 0; c < m.clips; ++c) {
        os << "clip_seed " << c << ' ' << Rng::derive(m.seed, 1'000'000 + c).seed() << '\n';
    }
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.txt");
    if (!is) throw FormatError("missing manifest.txt in " + dir.string());
    DatasetManifest m;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        if (key == "seed") m.seed = std::stoull(value);
        else if (key == "F") m.F = std::stoul(value);
        else if (key == "N") m.N = std::stoul(value);
        else if (key == "samples") m.samples = std::stoul(value);
        else if (key == "clips") m.clips = std::stoul(value);
        else if (key == "clip_length") m.clip_length = std::stoul(value);
        else if (key == "motion_scale") m.motion_scale = std::stod(value);
        else if (key == "occlusion_prob") m.occlusion_prob = std::stod(value);
    }
    return m;
}

std::vector<Sample> read_samples(const std::filesystem::path& dir) {
    const auto m = read_manifest(dir);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < m.samples; ++i) {
        out.push_back({read_pgm(dir / "images" / numbered("%06zu.pgm", i)),
                       read_pts(dir / "annots" / numbered("%06zu.pts", i))});
    }
    return out;
}

std::vector<Clip> read_clips(const std::filesystem::path& dir) {
    const auto m = read_manifest(dir);
    std::vector<Clip> out;
    for (std::size_t c = 0; c < m.clips; ++c) {
        const auto cdir = dir / "clips" / numbered("%04zu", c);
        Clip clip;
        clip.seed = Rng::derive(m.seed, 1'000'000 + c).seed();
        std::ifstream occ(cdir / "occluded.txt");
        if (!occ) throw FormatError("missing occluded.txt in " + cdir.string());
        for (std::size_t t = 0; t < m.clip_length; ++t) {
            clip.frames.push_back(read_pgm(cdir / numbered("frame_%03zu.pgm", t)));
            clip.tracks.push_back(read_pts(cdir / numbered("frame_%03zu.pts", t)));
            int flag = 0;
            if (!(occ >> flag)) throw FormatError(cdir.string() + "/occluded.txt: expected one flag per frame");
            clip.occluded.push_back(flag != 0);
        }
        out.push_back(std::move(clip));
    }
    return out;
}

}  // namespace mhm
