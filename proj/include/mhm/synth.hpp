#pragma once

#include "mhm/heatmap.hpp"
#include "mhm/image_io.hpp"
#include "mhm/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mhm {

/// Parametric face. Feature positions are face-local offsets (pixels) that are
/// rotated by `rotation` about the face center.
struct SceneParams {
    Point center;
    double axis_x = 0.0;  // face ellipse semi-axes
    double axis_y = 0.0;
    double rotation = 0.0;

    Point eye_left, eye_right;
    double eye_radius = 0.0;
    Point nose;
    // Mouth: corners plus upper/lower lip bulge and lip thickness.
    Point mouth_left, mouth_right;
    double lip_upper = 0.0, lip_lower = 0.0, lip_thickness = 0.0;
    double brow_lift = 0.0;

    double background = 0.2;
    double face_level = 0.7;
    double feature_level = 0.1;
    Point gradient;  // brightness change across the image
    double noise_std = 0.02;
};

/// Opaque rectangle drawn over the rendered face.
struct Occluder {
    double x0, y0, x1, y1;
    double level;
};

struct Sample {
    GrayImage image;
    LandmarkSet landmarks;
};

struct Clip {
    std::vector<GrayImage> frames;
    std::vector<LandmarkSet> tracks;
    std::vector<bool> occluded;
    std::uint64_t seed = 0;
};

SceneParams sample_scene(Rng& rng, std::size_t F);

/// Landmarks for N = 5 (eye centers, nose tip, mouth corners) or N = 68
/// (300W index layout). Throws for other N.
LandmarkSet scene_landmarks(const SceneParams& scene, std::size_t N);

/// Anti-aliased render (4x4 supersampling) plus the given per-pixel noise.
GrayImage render_scene(const SceneParams& scene, std::size_t F, const std::vector<double>& noise,
                       const std::vector<Occluder>& occluders = {});

std::vector<double> noise_field(Rng& rng, std::size_t F, double stddev);

Sample generate_scene(std::uint64_t seed, std::size_t F, std::size_t N);
std::vector<Sample> generate_samples(std::uint64_t seed, std::size_t count, std::size_t F, std::size_t N);

/// Largest per-frame landmark displacement a clip with this motion scale can show.
double motion_bound(double motion_scale);

/// Bounded random walk of the rigid face pose (translation steps in
/// [-motion_scale, motion_scale] px, rotation steps in [-motion_scale/F, motion_scale/F]).
/// Sensor noise is a fixed pattern per clip, so motion_scale = 0 without
/// occlusion yields identical frames.
Clip generate_clip(std::uint64_t seed, std::size_t F, std::size_t N, std::size_t T, double motion_scale,
                   double occlusion_prob);
std::vector<Clip> generate_clips(std::uint64_t seed, std::size_t count, std::size_t F, std::size_t N, std::size_t T,
                                 double motion_scale, double occlusion_prob);

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t F = 64;
    std::size_t N = 5;
    std::size_t samples = 0;
    std::size_t clips = 0;
    std::size_t clip_length = 0;
    double motion_scale = 0.0;
    double occlusion_prob = 0.0;
};

/// Writes images/%06d.pgm, annots/%06d.pts, clips/%04d/frame_%03d.{pgm,pts},
/// clips/%04d/occluded.txt and manifest.txt.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest, const std::vector<Sample>& samples,
                   const std::vector<Clip>& clips);
std::vector<Sample> read_samples(const std::filesystem::path& dir);
std::vector<Clip> read_clips(const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);

}  // namespace mhm
