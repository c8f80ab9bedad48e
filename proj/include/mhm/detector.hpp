#pragma once

#include "mhm/coattention.hpp"
#include "mhm/config.hpp"
#include "mhm/heatmap.hpp"
#include "mhm/metrics.hpp"
#include "mhm/nn.hpp"
#include "mhm/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mhm {

/// Detector hyper-parameters. Field names double as config-file keys.
struct DetectorConfig {
    std::size_t F = 64;
    std::size_t L = 192;
    std::size_t N = 5;
    std::size_t hourglass_depth = 2;
    std::size_t base_channels = 16;
    /// Deconvolution kernel = stride. 0 derives it as L / (F / 4).
    std::size_t M = 0;
    double gamma = 0.4;
    double sigma = 2.5;
    double learning_rate = 1e-4;
    std::size_t batch_size = 10;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    /// Compressed extent r of the head features (also the co-attention width d).
    std::size_t coattention_dim = 4;
    /// Feature maps per landmark entering the shared deconvolution.
    std::size_t deconv_groups = 8;
    /// false removes the co-attention module from the head entirely.
    bool coattention = true;

    /// Spatial extent of the backbone output, F / 4.
    std::size_t feature_extent() const { return F / 4; }
    std::size_t deconv_factor() const;
    HeatmapSpec heatmap_spec() const { return {F, L, sigma}; }

    /// Throws ConfigError when the shape laws cannot be met.
    void validate() const;
    /// Returns false if `key` is not a detector field.
    bool set(const ConfigEntry& entry);
    void write(std::ostream& os) const;
};

DetectorConfig detector_config_from(const std::vector<ConfigEntry>& entries);

struct HourglassLevel {
    Conv skip, down, up;
};

struct DetectorParams {
    Conv stem1, stem2;
    std::vector<HourglassLevel> levels;
    Conv bottom;
    std::vector<Conv> compress_x, compress_y;  // CNN1 stages
    Conv finish_x, finish_y, emit_x, emit_y;   // CNN2 stages
    Deconv deconv_x, deconv_y;
    CoAttentionParams coattention;

    static DetectorParams init(const DetectorConfig& config);
    NamedTensors named() const;
};

struct HeadOutput {
    Tensor hx;  // N x L
    Tensor hy;  // N x L
};

class Detector {
public:
    explicit Detector(DetectorConfig config);

    const DetectorConfig& config() const { return config_; }
    DetectorParams& params() { return params_; }
    const DetectorParams& params() const { return params_; }
    NamedTensors named_parameters() const { return params_.named(); }

    /// image[3, F, F] in [0, 1] -> feature map [C, F/4, F/4].
    Tensor backbone(const Tensor& image) const;
    /// Per-axis heatmaps from a backbone feature map.
    HeadOutput heads(const Tensor& features) const;
    HeadOutput forward(const Tensor& image) const { return heads(backbone(image)); }
    LandmarkSet detect(const Tensor& image) const;

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    Tensor hourglass(const Tensor& x, std::size_t level) const;

    DetectorConfig config_;
    DetectorParams params_;
};

/// Sum over landmarks and bins of squared errors on both axes.
Tensor detector_loss(const Tensor& hx, const Tensor& hy, const Tensor& gx, const Tensor& gy);
/// Mean of detector_loss over a batch.
Tensor detector_loss(const std::vector<HeadOutput>& predictions, const std::vector<std::pair<Tensor, Tensor>>& targets);

struct MetricRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_nrmse = 0.0;
};

void write_metric_log(std::ostream& os, const std::vector<MetricRow>& rows);

struct TrainResult {
    std::vector<MetricRow> log;
    double initial_val_nrmse = 0.0;
    bool diverged = false;
    std::string message;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Image tensor plus encoded per-axis targets, prepared once per run.
struct PreparedSample {
    Tensor image;
    Tensor target_x, target_y;
    LandmarkSet landmarks;
};

std::vector<PreparedSample> prepare(const std::vector<Sample>& samples, const HeatmapSpec& spec);

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with seeded shuffling. On a
/// non-finite loss the parameters are restored to the last completed epoch
/// and the result is flagged as diverged.
TrainResult train_detector(Detector& detector, const std::vector<PreparedSample>& train,
                           const std::vector<PreparedSample>& val,
                           const std::function<void(const MetricRow&)>& on_epoch = {});

std::vector<LandmarkSet> detect_all(const Detector& detector, const std::vector<PreparedSample>& samples);
double mean_nrmse(const Detector& detector, const std::vector<PreparedSample>& samples);

}  // namespace mhm
