#pragma once

#include "mhm/heatmap.hpp"
#include "mhm/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mhm {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit grayscale image, row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
    bool operator==(const GrayImage&) const = default;
};

/// Replicates the gray channel to a 3 x H x W tensor scaled to [0, 1].
Tensor to_tensor(const GrayImage& image);

/// Binary PGM (P5), maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// 300W-style annotation: "version: 1", "n_points: N", "{", N lines "x y", "}".
void write_pts(const std::filesystem::path& path, const LandmarkSet& landmarks);
LandmarkSet read_pts(const std::filesystem::path& path);
LandmarkSet parse_pts(const std::string& text);

}  // namespace mhm
