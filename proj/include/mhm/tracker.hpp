#pragma once

#include "mhm/detector.hpp"

#include <iosfwd>
#include <vector>

namespace mhm {

struct TrackerConfig {
    DetectorConfig detector;
    double lambda = 0.3;
    std::size_t clip_length = 8;
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    /// Feature channels of the heatmap encoder/decoder.
    std::size_t channels = 16;
    std::size_t batch_size = 2;
    /// Train the detector jointly in phase 2 instead of freezing it.
    bool finetune_detector = false;

    void validate() const;
    /// Tracker keys are lambda, clip_length, track_learning_rate, track_epochs,
    /// track_channels, track_batch_size, finetune_detector; `seed` sets both
    /// seeds and every other key goes to the detector.
    bool set(const ConfigEntry& entry);
    void write(std::ostream& os) const;
};

/// Encoder (CNN3) and decoder (CNN4) for one axis.
struct TrackerHead {
    Conv enc_a, enc_b;
    Conv dec_a;
    Deconv dec_b;

    static TrackerHead make(const TrackerConfig& config, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct TrackerParams {
    TrackerHead x, y;

    static TrackerParams init(const TrackerConfig& config);
    NamedTensors named() const;
};

/// Decayed sums of past encoder features. Undefined accumulators are zero.
struct TrackerState {
    Tensor acc_x, acc_y;
    std::size_t frame = 0;  // frames consumed so far
};

/// Stacked heatmaps E [N x L] -> features U [channels x 1 x F/4].
Tensor encode_heatmaps(const Tensor& heatmaps, const TrackerHead& head, std::size_t N, std::size_t L);
/// Features V -> refinement E' [N x L].
Tensor decode_refinement(const Tensor& features, const TrackerHead& head, std::size_t N, std::size_t L);

struct FuseOutput {
    Tensor v_x, v_y;
    TrackerState state;
};

/// V_t = U_t + A_t with A_{t+1} = lambda (A_t + U_t); `frame` is the 1-based
/// index of U_t and must directly follow state.frame.
FuseOutput temporal_fuse(const Tensor& u_x, const Tensor& u_y, const TrackerState& state, double lambda,
                         std::size_t frame);

struct TrackStep {
    LandmarkSet landmarks;
    HeadOutput heatmaps;  // detected + refinement
    TrackerState state;
};

class Tracker {
public:
    explicit Tracker(TrackerConfig config);

    const TrackerConfig& config() const { return config_; }
    Detector& detector() { return detector_; }
    const Detector& detector() const { return detector_; }
    TrackerParams& params() { return params_; }
    const TrackerParams& params() const { return params_; }

    /// Detector parameters followed by the encoder/decoder parameters.
    NamedTensors named_parameters() const;
    NamedTensors head_parameters() const { return params_.named(); }

    TrackStep step(const Tensor& image, const TrackerState& state) const;
    /// Same as step() with the detector output supplied by the caller.
    TrackStep refine(const HeadOutput& detected, const TrackerState& state) const;
    std::vector<LandmarkSet> track(const std::vector<Tensor>& frames) const;

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    TrackerConfig config_;
    Detector detector_;
    TrackerParams params_;
};

/// Sum over frames and landmarks of squared heatmap errors on both axes.
Tensor tracker_loss(const std::vector<HeadOutput>& predictions, const std::vector<std::pair<Tensor, Tensor>>& targets);

struct PreparedClip {
    std::vector<PreparedSample> frames;
    std::vector<bool> occluded;
};

std::vector<PreparedClip> prepare_clips(const std::vector<Clip>& clips, const HeatmapSpec& spec);
/// Every frame of every clip as an independent detector sample.
std::vector<PreparedSample> flatten_frames(const std::vector<PreparedClip>& clips);

std::vector<std::vector<LandmarkSet>> track_all(const Tracker& tracker, const std::vector<PreparedClip>& clips);
double tracker_nrmse(const Tracker& tracker, const std::vector<PreparedClip>& clips);

struct TrackerTrainResult {
    TrainResult detector_phase;
    TrainResult tracker_phase;
};

/// Phase 2 only: trains the encoder/decoder (and the detector when
/// finetune_detector is set) with backpropagation through the unrolled clip.
TrainResult train_tracker_heads(Tracker& tracker, const std::vector<PreparedClip>& train,
                                const std::vector<PreparedClip>& val,
                                const std::function<void(const MetricRow&)>& on_epoch = {});

/// Phase 1 trains the detector on individual frames, phase 2 the tracker layers.
TrackerTrainResult train_tracker(Tracker& tracker, const std::vector<PreparedClip>& train,
                                 const std::vector<PreparedClip>& val,
                                 const std::function<void(const MetricRow&)>& on_epoch = {});

/// CSV `frame,landmark,x,y` with 0-based frame and landmark indices.
void write_tracking_csv(std::ostream& os, const std::vector<LandmarkSet>& tracks);

}  // namespace mhm
