#pragma once

#include "mhm/tracker.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mhm {

/// Shared data settings of the experiment drivers.
struct DataConfig {
    std::uint64_t data_seed = 1;
    std::size_t train_size = 500;
    std::size_t test_size = 100;
    /// Clip settings (tracking experiments only).
    std::size_t train_clips = 100;
    std::size_t test_clips = 30;
    double motion_scale = 1.0;
    double occlusion_prob = 0.3;

    /// Keys data_seed, train_size, test_size, train_clips, test_clips,
    /// motion_scale, occlusion_prob.
    bool set(const ConfigEntry& entry);
    void write(std::ostream& os) const;
};

struct SweepConfig {
    DetectorConfig detector;
    DataConfig data;
    std::vector<double> ratios{0.25, 1.0, 3.0};  // L / F
    std::vector<std::uint64_t> seeds{0, 1, 2};

    /// Keys ratios, seeds, then data and detector keys.
    bool set(const ConfigEntry& entry);
    void write(std::ostream& os) const;
};

/// Heatmap resolution for a ratio L / F; throws ConfigError when it is not a
/// whole multiple of the feature extent F / 4.
std::size_t resolution_for(const DetectorConfig& detector, double ratio);

struct SweepRow {
    std::size_t L = 0;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    double nrmse = 0.0;
    std::uint64_t points_1d = 0;
    std::uint64_t points_2d = 0;
};

std::vector<SweepRow> resolution_sweep(const SweepConfig& config,
                                       const std::function<void(const SweepRow&)>& on_row = {});
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
/// Mean NRMSE per ratio, in the order of first appearance.
std::vector<std::pair<double, double>> sweep_means(const std::vector<SweepRow>& rows);

struct AblationConfig {
    TrackerConfig tracker;
    DataConfig data;
    /// "gamma" trains detectors on still images, "lambda" trains trackers on clips.
    std::string param = "gamma";
    std::vector<double> values{0.0, 0.4};
    std::vector<std::uint64_t> seeds{0, 1, 2};

    /// Keys param, values, seeds, then data and tracker keys.
    bool set(const ConfigEntry& entry);
    void write(std::ostream& os) const;
};

struct AblationRow {
    std::string param;
    double value = 0.0;
    std::uint64_t seed = 0;
    double nrmse = 0.0;
};

/// The lambda ablation trains one detector per seed and reuses it for every value.
std::vector<AblationRow> ablation(const AblationConfig& config,
                                  const std::function<void(const AblationRow&)>& on_row = {});
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);
std::vector<std::pair<double, double>> ablation_means(const std::vector<AblationRow>& rows);

struct QuantRow {
    double ratio = 0.0;  // L / F
    std::size_t L = 0;
    GridPoint grid;
    Point recovered;
    double error = 0.0;  // pixels
};

/// Quantization error of `point` for each ratio L / F; L must be integral.
std::vector<QuantRow> analyze_quant(Point point, std::size_t F, const std::vector<double>& ratios);
void write_quant_csv(std::ostream& os, const std::vector<QuantRow>& rows);

enum class AllocStatus { Ok, OutOfMemory, Skipped };

struct MemoryRow {
    std::size_t N = 0;
    std::size_t L = 0;
    std::uint64_t points_1d = 0;  // per sample
    std::uint64_t points_2d = 0;
    std::uint64_t bytes_1d = 0;  // whole batch
    std::uint64_t bytes_2d = 0;
    AllocStatus status_1d = AllocStatus::Skipped;
    AllocStatus status_2d = AllocStatus::Skipped;
};

struct MemoryBenchOptions {
    std::size_t batch = 10;
    /// Buffers larger than this are reported as out of memory without trying (0 = no limit).
    std::uint64_t budget_bytes = 0;
    bool measure_1d = true;
    bool measure_2d = true;
};

/// Allocates and touches the output buffers (doubles) a batch would need for
/// 1D and 2D heatmaps. Allocation failures become OutOfMemory rows. Rows are
/// sorted by N, then L.
std::vector<MemoryRow> bench_memory(std::vector<std::size_t> Ns, std::vector<std::size_t> Ls,
                                    const MemoryBenchOptions& options = {});
void write_memory_csv(std::ostream& os, const std::vector<MemoryRow>& rows);

}  // namespace mhm
