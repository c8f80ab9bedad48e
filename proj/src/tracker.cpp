#include "mhm/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mhm {

// ---------------------------------------------------------------------------
// Config

void TrackerConfig::validate() const {
    detector.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("tracker config: lambda must lie in [0, 1]");
    if (clip_length < 1) throw ConfigError("tracker config: clip_length must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("tracker config: track_learning_rate must be >= 0");
    if (channels < 1) throw ConfigError("tracker config: track_channels must be >= 1");
    if (batch_size < 1) throw ConfigError("tracker config: track_batch_size must be >= 1");
}

bool TrackerConfig::set(const ConfigEntry& e) {
    const auto& k = e.key;
    if (k == "lambda") lambda = parse_double(e);
    else if (k == "clip_length") clip_length = parse_size(e);
    else if (k == "track_learning_rate") learning_rate = parse_double(e);
    else if (k == "track_epochs") epochs = parse_size(e);
    else if (k == "track_channels") channels = parse_size(e);
    else if (k == "track_batch_size") batch_size = parse_size(e);
    else if (k == "finetune_detector") finetune_detector = parse_bool(e);
    else if (k == "seed") seed = detector.seed = parse_u64(e);
    else return detector.set(e);
    return true;
}

void TrackerConfig::write(std::ostream& os) const {
    detector.write(os);
    os << "lambda = " << exact(lambda) << '\n'
       << "clip_length = " << clip_length << '\n'
       << "track_learning_rate = " << exact(learning_rate) << '\n'
       << "track_epochs = " << epochs << '\n'
       << "track_channels = " << channels << '\n'
       << "track_batch_size = " << batch_size << '\n'
       << "finetune_detector = " << (finetune_detector ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------
// Layers

TrackerHead TrackerHead::make(const TrackerConfig& cfg, Rng& rng) {
    const std::size_t N = cfg.detector.N, Ct = cfg.channels, m = cfg.detector.deconv_factor();
    TrackerHead h;
    h.enc_a = Conv::make(N, Ct, {1, m}, {1, m}, {0, 0}, rng);
    h.enc_b = Conv::make(Ct, Ct, {1, 3}, {1, 1}, {0, 1}, rng);
    h.dec_a = Conv::make(Ct, Ct, {1, 3}, {1, 1}, {0, 1}, rng);
    // Zero output weights: an untrained tracker reproduces the detector.
    h.dec_b = Deconv::make(Ct, N, {1, m}, rng, 0.0);
    return h;
}

void TrackerHead::collect(const std::string& prefix, NamedTensors& out) const {
    enc_a.collect(prefix + ".cnn3.a", out);
    enc_b.collect(prefix + ".cnn3.b", out);
    dec_a.collect(prefix + ".cnn4.a", out);
    dec_b.collect(prefix + ".cnn4.b", out);
}

TrackerParams TrackerParams::init(const TrackerConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::derive(cfg.seed, 0x7AC4E5);
    TrackerParams p;
    p.x = TrackerHead::make(cfg, rng);
    p.y = TrackerHead::make(cfg, rng);
    return p;
}

NamedTensors TrackerParams::named() const {
    NamedTensors out;
    x.collect("tracker.x", out);
    y.collect("tracker.y", out);
    return out;
}

Tensor encode_heatmaps(const Tensor& heatmaps, const TrackerHead& head, std::size_t N, std::size_t L) {
    if (heatmaps.rank() != 2 || heatmaps.dim(0) != N || heatmaps.dim(1) != L) {
        throw ShapeError("encode_heatmaps: expected [" + std::to_string(N) + " x " + std::to_string(L) + "], got " +
                         shape_str(heatmaps.shape()));
    }
    return head.enc_b(elu(head.enc_a(reshape(heatmaps, {N, 1, L}))));
}

Tensor decode_refinement(const Tensor& features, const TrackerHead& head, std::size_t N, std::size_t L) {
    Tensor out = head.dec_b(elu(head.dec_a(features)));
    if (out.size() != N * L) {
        throw ShapeError("decode_refinement: features " + shape_str(features.shape()) + " decode to " +
                         shape_str(out.shape()) + ", expected " + std::to_string(N) + " x " + std::to_string(L));
    }
    return reshape(out, {N, L});
}

// ---------------------------------------------------------------------------
// Temporal fusion

namespace {

std::pair<Tensor, Tensor> fuse_axis(const Tensor& u, const Tensor& acc, double lambda) {
    if (acc.defined() && acc.shape() != u.shape()) {
        throw ShapeError("temporal_fuse: accumulator " + shape_str(acc.shape()) + " vs features " +
                         shape_str(u.shape()));
    }
    Tensor v = acc.defined() ? add(u, acc) : u;
    Tensor next;
    if (lambda != 0.0) next = scale(v, lambda);
    return {v, next};
}

}  // namespace

FuseOutput temporal_fuse(const Tensor& u_x, const Tensor& u_y, const TrackerState& state, double lambda,
                         std::size_t frame) {
    if (frame != state.frame + 1) {
        throw std::logic_error("temporal_fuse: frame " + std::to_string(frame) + " submitted after frame " +
                               std::to_string(state.frame) + "; frames must be processed in order");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("temporal_fuse: lambda must lie in [0, 1]");
    auto [vx, ax] = fuse_axis(u_x, state.acc_x, lambda);
    auto [vy, ay] = fuse_axis(u_y, state.acc_y, lambda);
    return {vx, vy, TrackerState{ax, ay, frame}};
}

// ---------------------------------------------------------------------------
// Tracker

Tracker::Tracker(TrackerConfig config)
    : config_(std::move(config)), detector_(config_.detector), params_(TrackerParams::init(config_)) {}

NamedTensors Tracker::named_parameters() const {
    NamedTensors out = detector_.named_parameters();
    for (auto& p : params_.named()) out.push_back(std::move(p));
    return out;
}

TrackStep Tracker::refine(const HeadOutput& e, const TrackerState& state) const {
    const std::size_t N = config_.detector.N, L = config_.detector.L;
    const Tensor ux = encode_heatmaps(e.hx, params_.x, N, L);
    const Tensor uy = encode_heatmaps(e.hy, params_.y, N, L);
    FuseOutput fused = temporal_fuse(ux, uy, state, config_.lambda, state.frame + 1);
    HeadOutput out{add(e.hx, decode_refinement(fused.v_x, params_.x, N, L)),
                   add(e.hy, decode_refinement(fused.v_y, params_.y, N, L))};
    LandmarkSet lm = decode_landmarks(out.hx, out.hy, config_.detector.heatmap_spec());
    return {std::move(lm), std::move(out), std::move(fused.state)};
}

TrackStep Tracker::step(const Tensor& image, const TrackerState& state) const {
    return refine(detector_.forward(image), state);
}

std::vector<LandmarkSet> Tracker::track(const std::vector<Tensor>& frames) const {
    NoGradGuard no_grad;
    std::vector<LandmarkSet> out;
    out.reserve(frames.size());
    TrackerState state;
    for (const auto& f : frames) {
        TrackStep s = step(f, state);
        out.push_back(std::move(s.landmarks));
        state = std::move(s.state);
    }
    return out;
}

void Tracker::save(const std::filesystem::path& path) const { save_checkpoint(path, named_parameters()); }

void Tracker::load(const std::filesystem::path& path) { assign_from(load_checkpoint(path), named_parameters()); }

Tensor tracker_loss(const std::vector<HeadOutput>& predictions, const std::vector<std::pair<Tensor, Tensor>>& targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw ShapeError("tracker_loss: " + std::to_string(predictions.size()) + " predicted frames vs " +
                         std::to_string(targets.size()) + " targets");
    }
    Tensor total = detector_loss(predictions[0].hx, predictions[0].hy, targets[0].first, targets[0].second);
    for (std::size_t t = 1; t < predictions.size(); ++t) {
        total = add(total, detector_loss(predictions[t].hx, predictions[t].hy, targets[t].first, targets[t].second));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Data

std::vector<PreparedClip> prepare_clips(const std::vector<Clip>& clips, const HeatmapSpec& spec) {
    std::vector<PreparedClip> out;
    out.reserve(clips.size());
    for (const auto& c : clips) {
        PreparedClip p;
        for (std::size_t t = 0; t < c.frames.size(); ++t) {
            auto [tx, ty] = encode_targets(c.tracks[t], spec);
            p.frames.push_back({to_tensor(c.frames[t]), tx, ty, c.tracks[t]});
        }
        p.occluded = c.occluded;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PreparedSample> flatten_frames(const std::vector<PreparedClip>& clips) {
    std::vector<PreparedSample> out;
    for (const auto& c : clips) out.insert(out.end(), c.frames.begin(), c.frames.end());
    return out;
}

std::vector<std::vector<LandmarkSet>> track_all(const Tracker& tracker, const std::vector<PreparedClip>& clips) {
    std::vector<std::vector<LandmarkSet>> out;
    out.reserve(clips.size());
    for (const auto& c : clips) {
        std::vector<Tensor> frames;
        for (const auto& f : c.frames) frames.push_back(f.image);
        out.push_back(tracker.track(frames));
    }
    return out;
}

namespace {

double clip_nrmse(const std::vector<std::vector<LandmarkSet>>& preds, const std::vector<PreparedClip>& clips,
                  std::size_t N) {
    std::vector<LandmarkSet> p, g;
    for (std::size_t c = 0; c < clips.size(); ++c) {
        for (std::size_t t = 0; t < clips[c].frames.size(); ++t) {
            p.push_back(preds[c][t]);
            g.push_back(clips[c].frames[t].landmarks);
        }
    }
    return evaluate(p, g, default_norm(N)).mean;
}

// Frozen-detector outputs for every frame.
std::vector<std::vector<HeadOutput>> detect_frames(const Detector& det, const std::vector<PreparedClip>& clips) {
    NoGradGuard no_grad;
    std::vector<std::vector<HeadOutput>> out(clips.size());
    for (std::size_t c = 0; c < clips.size(); ++c) {
        for (const auto& f : clips[c].frames) out[c].push_back(det.forward(f.image));
    }
    return out;
}

double cached_nrmse(const Tracker& tracker, const std::vector<std::vector<HeadOutput>>& detected,
                    const std::vector<PreparedClip>& clips) {
    NoGradGuard no_grad;
    std::vector<std::vector<LandmarkSet>> preds(clips.size());
    for (std::size_t c = 0; c < clips.size(); ++c) {
        TrackerState state;
        for (const auto& e : detected[c]) {
            TrackStep s = tracker.refine(e, state);
            preds[c].push_back(std::move(s.landmarks));
            state = std::move(s.state);
        }
    }
    return clip_nrmse(preds, clips, tracker.config().detector.N);
}

}  // namespace

double tracker_nrmse(const Tracker& tracker, const std::vector<PreparedClip>& clips) {
    return clip_nrmse(track_all(tracker, clips), clips, tracker.config().detector.N);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train_tracker_heads(Tracker& tracker, const std::vector<PreparedClip>& train,
                                const std::vector<PreparedClip>& val,
                                const std::function<void(const MetricRow&)>& on_epoch) {
    if (train.empty()) throw TrainingError("train_tracker: empty training set");
    const TrackerConfig& cfg = tracker.config();
    const bool joint = cfg.finetune_detector;
    std::vector<Tensor> params = tensors_of(joint ? tracker.named_parameters() : tracker.head_parameters());
    Adam opt(params, {cfg.learning_rate});
    Rng shuffle = Rng::derive(cfg.seed, 0x7AC5EED);

    std::vector<std::vector<HeadOutput>> train_e, val_e;
    if (!joint) {
        train_e = detect_frames(tracker.detector(), train);
        val_e = detect_frames(tracker.detector(), val);
    }
    auto val_metric = [&] {
        if (val.empty()) return 0.0;
        return joint ? tracker_nrmse(tracker, val) : cached_nrmse(tracker, val_e, val);
    };

    TrainResult result;
    result.initial_val_nrmse = val_metric();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::vector<double>> snapshot(params.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t k = 0; k < params.size(); ++k) snapshot[k].assign(params[k].data().begin(), params[k].data().end());
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - b);
            opt.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t i = b; i < end; ++i) {
                const auto& clip = train[order[i]];
                clear_tape();
                TrackerState state;
                std::vector<HeadOutput> preds;
                std::vector<std::pair<Tensor, Tensor>> targets;
                for (std::size_t t = 0; t < clip.frames.size(); ++t) {
                    const auto& f = clip.frames[t];
                    TrackStep s = joint ? tracker.step(f.image, state) : tracker.refine(train_e[order[i]][t], state);
                    preds.push_back(std::move(s.heatmaps));
                    targets.emplace_back(f.target_x, f.target_y);
                    state = std::move(s.state);
                }
                const Tensor loss = tracker_loss(preds, targets);
                batch_loss += loss.item();
                backward(scale(loss, inv));
            }
            if (!std::isfinite(batch_loss)) {
                for (std::size_t k = 0; k < params.size(); ++k) {
                    std::copy(snapshot[k].begin(), snapshot[k].end(), params[k].data().begin());
                }
                result.diverged = true;
                result.message = "non-finite loss in epoch " + std::to_string(epoch) +
                                 "; parameters restored to the end of epoch " + std::to_string(epoch - 1);
                return result;
            }
            loss_sum += batch_loss;
            opt.step();
        }
        MetricRow row{epoch, loss_sum / static_cast<double>(train.size()), val_metric()};
        result.log.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return result;
}

TrackerTrainResult train_tracker(Tracker& tracker, const std::vector<PreparedClip>& train,
                                 const std::vector<PreparedClip>& val,
                                 const std::function<void(const MetricRow&)>& on_epoch) {
    TrackerTrainResult r;
    r.detector_phase = train_detector(tracker.detector(), flatten_frames(train), flatten_frames(val), on_epoch);
    if (r.detector_phase.diverged) return r;
    r.tracker_phase = train_tracker_heads(tracker, train, val, on_epoch);
    return r;
}

void write_tracking_csv(std::ostream& os, const std::vector<LandmarkSet>& tracks) {
    os << "frame,landmark,x,y\n";
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        for (std::size_t n = 0; n < tracks[t].size(); ++n) {
            os << t << ',' << n << ',' << fmt6(tracks[t][n].x) << ',' << fmt6(tracks[t][n].y) << '\n';
        }
    }
}

}  // namespace mhm
