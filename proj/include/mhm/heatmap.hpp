#pragma once

#include "mhm/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace mhm {

/// Continuous pixel coordinate: x is the column (p), y is the row (q).
struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct GridPoint {
    std::int64_t x = 0;
    std::int64_t y = 0;
    bool operator==(const GridPoint&) const = default;
};

struct LandmarkSet {
    std::vector<Point> coords;

    std::size_t size() const { return coords.size(); }
    const Point& operator[](std::size_t i) const { return coords[i]; }
    Point& operator[](std::size_t i) { return coords[i]; }
};

enum class Axis { X, Y };
char axis_char(Axis a);

/// Face resolution F (pixels), heatmap resolution L (grid points) and the
/// Gaussian standard deviation sigma in grid units.
struct HeatmapSpec {
    std::size_t F = 256;
    std::size_t L = 768;
    double sigma = 2.5;

    void validate() const;
    /// Grid coordinate of a pixel coordinate, c * L / F (not floored).
    double to_grid(double c) const { return c * static_cast<double>(L) / static_cast<double>(F); }
    double from_grid(double g) const { return g * static_cast<double>(F) / static_cast<double>(L); }
    /// Pixel size of one grid step, F / L.
    double step() const { return static_cast<double>(F) / static_cast<double>(L); }
};

struct Heatmap1D {
    HeatmapSpec spec;
    Axis axis = Axis::X;
    std::vector<double> values;
};

/// L x L map stored row-major, values[y * L + x].
struct Heatmap2D {
    HeatmapSpec spec;
    std::vector<double> values;

    double at(std::size_t x, std::size_t y) const { return values[y * spec.L + x]; }
};

Heatmap2D encode2d(Point center, const HeatmapSpec& spec);
std::pair<Heatmap1D, Heatmap1D> marginalize(const Heatmap2D& h);
Heatmap1D encode1d(double coord, const HeatmapSpec& spec, Axis axis = Axis::X);

GridPoint quantize(Point p, const HeatmapSpec& spec);
Point recover(GridPoint g, const HeatmapSpec& spec);
double quantization_error(Point p, const HeatmapSpec& spec);

/// Index of the maximum, lowest index on ties.
std::size_t argmax_index(std::span<const double> values);
/// argmax index scaled by F / L.
double decode_argmax(const Heatmap1D& h);
double decode_argmax(std::span<const double> values, const HeatmapSpec& spec);

enum class HeatmapKind { OneD, TwoD };
/// 2NL points for 1D heatmaps, NL^2 for 2D.
std::uint64_t output_size(std::uint64_t N, std::uint64_t L, HeatmapKind kind);

/// Stacked 1D targets for every landmark, N x L per axis.
std::pair<Tensor, Tensor> encode_targets(const LandmarkSet& landmarks, const HeatmapSpec& spec);
/// Decodes N x L heatmap tensors back to landmark coordinates.
LandmarkSet decode_landmarks(const Tensor& hx, const Tensor& hy, const HeatmapSpec& spec);

/// Text dump: "L sigma axis" then L values, one per line, 17 significant digits.
void write_heatmap(std::ostream& os, const Heatmap1D& h);
Heatmap1D read_heatmap(std::istream& is, std::size_t F);

}  // namespace mhm
