#include "mhm/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mhm {

namespace {

bool is_pow2_multiple(std::size_t big, std::size_t small) {
    if (small == 0 || big % small != 0) return false;
    const std::size_t q = big / small;
    return (q & (q - 1)) == 0;
}

std::size_t compress_stages(std::size_t extent, std::size_t r) {
    std::size_t n = 0;
    while (extent > r) {
        extent /= 2;
        ++n;
    }
    return n;
}

Tensor act(const Tensor& x) { return elu(x); }

constexpr double kOutputGain = 0.1;

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::size_t DetectorConfig::deconv_factor() const {
    const std::size_t c = feature_extent();
    if (M != 0) return M;
    return c == 0 ? 0 : L / c;
}

void DetectorConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("detector config: " + msg); };
    if (F < 4 || F % 4 != 0) fail("F must be a positive multiple of 4, got " + std::to_string(F));
    if (N < 1) fail("N must be >= 1");
    if (L < 2) fail("L must be >= 2");
    if (hourglass_depth < 1) fail("hourglass_depth must be >= 1");
    if (base_channels < 1 || deconv_groups < 1) fail("channel counts must be positive");
    if (!(sigma > 0.0)) fail("sigma must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
    if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    const std::size_t c = feature_extent();
    if (c % (std::size_t{1} << hourglass_depth) != 0) {
        fail("backbone: feature extent " + std::to_string(c) + " (F/4) not divisible by 2^hourglass_depth = " +
             std::to_string(std::size_t{1} << hourglass_depth));
    }
    if (coattention_dim < 1 || coattention_dim > c) {
        fail("head compression: extent underflow, cannot compress " + std::to_string(c) + " to r = " +
             std::to_string(coattention_dim));
    }
    if (!is_pow2_multiple(c, coattention_dim)) {
        fail("head compression: feature extent " + std::to_string(c) + " is not r * 2^k for r = " +
             std::to_string(coattention_dim));
    }
    const std::size_t m = deconv_factor();
    if (m < 1 || m * c != L) {
        fail("deconvolution: L = " + std::to_string(L) + " must equal M x " + std::to_string(c) + " (M = " +
             std::to_string(m) + ")");
    }
}

bool DetectorConfig::set(const ConfigEntry& e) {
    const auto& k = e.key;
    if (k == "F") F = parse_size(e);
    else if (k == "L") L = parse_size(e);
    else if (k == "N") N = parse_size(e);
    else if (k == "hourglass_depth") hourglass_depth = parse_size(e);
    else if (k == "base_channels") base_channels = parse_size(e);
    else if (k == "M") M = parse_size(e);
    else if (k == "gamma") gamma = parse_double(e);
    else if (k == "sigma") sigma = parse_double(e);
    else if (k == "learning_rate") learning_rate = parse_double(e);
    else if (k == "batch_size") batch_size = parse_size(e);
    else if (k == "epochs") epochs = parse_size(e);
    else if (k == "seed") seed = parse_u64(e);
    else if (k == "coattention_dim") coattention_dim = parse_size(e);
    else if (k == "deconv_groups") deconv_groups = parse_size(e);
    else if (k == "coattention") coattention = parse_bool(e);
    else return false;
    return true;
}

void DetectorConfig::write(std::ostream& os) const {
    os << "F = " << F << '\n'
       << "L = " << L << '\n'
       << "N = " << N << '\n'
       << "hourglass_depth = " << hourglass_depth << '\n'
       << "base_channels = " << base_channels << '\n'
       << "M = " << deconv_factor() << '\n'
       << "gamma = " << exact(gamma) << '\n'
       << "sigma = " << exact(sigma) << '\n'
       << "learning_rate = " << exact(learning_rate) << '\n'
       << "batch_size = " << batch_size << '\n'
       << "epochs = " << epochs << '\n'
       << "seed = " << seed << '\n'
       << "coattention_dim = " << coattention_dim << '\n'
       << "deconv_groups = " << deconv_groups << '\n'
       << "coattention = " << (coattention ? "true" : "false") << '\n';
}

DetectorConfig detector_config_from(const std::vector<ConfigEntry>& entries) {
    DetectorConfig c;
    for (const auto& e : entries) {
        if (!c.set(e)) throw ConfigError(where(e) + ": unknown key '" + e.key + "'");
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Parameters

DetectorParams DetectorParams::init(const DetectorConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::derive(cfg.seed, 0xDE7EC7);
    const std::size_t C = cfg.base_channels, r = cfg.coattention_dim, c = cfg.feature_extent();
    const std::size_t out = cfg.N * cfg.deconv_groups, m = cfg.deconv_factor();
    DetectorParams p;
    p.stem1 = Conv::make(3, C, {3, 3}, {2, 2}, {1, 1}, rng);
    p.stem2 = Conv::make(C, C, {3, 3}, {2, 2}, {1, 1}, rng);
    for (std::size_t i = 0; i < cfg.hourglass_depth; ++i) {
        HourglassLevel lv;
        lv.skip = Conv::make(C, C, {3, 3}, {1, 1}, {1, 1}, rng);
        lv.down = Conv::make(C, C, {3, 3}, {2, 2}, {1, 1}, rng);
        lv.up = Conv::make(C, C, {3, 3}, {1, 1}, {1, 1}, rng);
        p.levels.push_back(std::move(lv));
    }
    p.bottom = Conv::make(C, C, {3, 3}, {1, 1}, {1, 1}, rng);
    const std::size_t stages = compress_stages(c, r);
    for (std::size_t i = 0; i < stages; ++i) {
        p.compress_x.push_back(Conv::make(C, C, {3, 3}, {2, 1}, {1, 1}, rng));
        p.compress_y.push_back(Conv::make(C, C, {3, 3}, {1, 2}, {1, 1}, rng));
    }
    p.finish_x = Conv::make(C, C, {r, 3}, {1, 1}, {0, 1}, rng);
    p.finish_y = Conv::make(C, C, {3, r}, {1, 1}, {1, 0}, rng);
    p.emit_x = Conv::make(C, out, {1, 3}, {1, 1}, {0, 1}, rng);
    p.emit_y = Conv::make(C, out, {3, 1}, {1, 1}, {1, 0}, rng);
    p.deconv_x = Deconv::make(cfg.deconv_groups, 1, {1, m}, rng, kOutputGain);
    p.deconv_y = Deconv::make(cfg.deconv_groups, 1, {1, m}, rng, kOutputGain);
    p.coattention = CoAttentionParams::make(r, cfg.gamma, rng);
    return p;
}

NamedTensors DetectorParams::named() const {
    NamedTensors out;
    stem1.collect("stem1", out);
    stem2.collect("stem2", out);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto pre = "hourglass" + std::to_string(i);
        levels[i].skip.collect(pre + ".skip", out);
        levels[i].down.collect(pre + ".down", out);
        levels[i].up.collect(pre + ".up", out);
    }
    bottom.collect("hourglass.bottom", out);
    for (std::size_t i = 0; i < compress_x.size(); ++i) {
        compress_x[i].collect("cnn1x." + std::to_string(i), out);
        compress_y[i].collect("cnn1y." + std::to_string(i), out);
    }
    finish_x.collect("cnn2x.finish", out);
    emit_x.collect("cnn2x.emit", out);
    finish_y.collect("cnn2y.finish", out);
    emit_y.collect("cnn2y.emit", out);
    deconv_x.collect("deconvx", out);
    deconv_y.collect("deconvy", out);
    coattention.collect("coattention", out);
    return out;
}

// ---------------------------------------------------------------------------
// Forward

Detector::Detector(DetectorConfig config) : config_(std::move(config)), params_(DetectorParams::init(config_)) {}

Tensor Detector::hourglass(const Tensor& x, std::size_t level) const {
    const auto& lv = params_.levels[level];
    Tensor skip = act(lv.skip(x));
    Tensor down = act(lv.down(x));
    Tensor inner = level + 1 < params_.levels.size() ? hourglass(down, level + 1) : act(params_.bottom(down));
    Tensor up = act(lv.up(upsample_nearest(inner, 2)));
    return add(skip, up);
}

Tensor Detector::backbone(const Tensor& image) const {
    const std::size_t F = config_.F;
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != F || image.dim(2) != F) {
        throw ShapeError("backbone: expected image [3x" + std::to_string(F) + "x" + std::to_string(F) + "], got " +
                         shape_str(image.shape()));
    }
    Tensor h = act(params_.stem1(image));
    h = act(params_.stem2(h));
    return hourglass(h, 0);
}

HeadOutput Detector::heads(const Tensor& features) const {
    const std::size_t c = config_.feature_extent(), r = config_.coattention_dim;
    const std::size_t N = config_.N, G = config_.deconv_groups;
    if (features.rank() != 3 || features.dim(1) != features.dim(2)) {
        throw ShapeError("heads: feature map must be square [C x c x c], got " + shape_str(features.shape()));
    }
    if (features.dim(1) != c) {
        throw ShapeError("heads: feature extent " + std::to_string(features.dim(1)) + " does not match F/4 = " +
                         std::to_string(c));
    }

    // CNN1: compress y for the x head (rows), x for the y head (columns).
    Tensor fx = features, fy = features;
    for (std::size_t i = 0; i < params_.compress_x.size(); ++i) {
        fx = act(params_.compress_x[i](fx));
        fy = act(params_.compress_y[i](fy));
    }
    if (fx.dim(1) != r || fy.dim(2) != r) {
        throw ShapeError("heads: CNN1 compression produced extents " + shape_str(fx.shape()) + " / " +
                         shape_str(fy.shape()) + ", expected r = " + std::to_string(r));
    }

    if (config_.coattention) {
        // fx[k] is r x c, so dx_k = fx[k]^T is (x positions) x r; fy[k] is c x r, so dy_k = fy[k]^T.
        AxisFeatures feats;
        for (std::size_t k = 0; k < fx.dim(0); ++k) {
            feats.dx.push_back(transpose(channel(fx, k)));
            feats.dy.push_back(transpose(channel(fy, k)));
        }
        const AxisFeatures fused = coattention_forward(feats, params_.coattention);
        std::vector<Tensor> xs, ys;
        for (std::size_t k = 0; k < fused.channels(); ++k) {
            xs.push_back(transpose(fused.dx[k]));
            ys.push_back(transpose(fused.dy[k]));
        }
        fx = stack(xs);
        fy = stack(ys);
    }

    // CNN2: finish compression to a single row/column and emit N*G maps.
    Tensor gx = params_.emit_x(act(params_.finish_x(fx)));  // (N*G) x 1 x c
    Tensor gy = params_.emit_y(act(params_.finish_y(fy)));  // (N*G) x c x 1
    gx = reshape(gx, {G, N, c});
    gy = reshape(gy, {G, N, c});

    const std::size_t L = config_.L;
    Tensor hx = reshape(params_.deconv_x(gx), {N, L});
    Tensor hy = reshape(params_.deconv_y(gy), {N, L});
    return {hx, hy};
}

LandmarkSet Detector::detect(const Tensor& image) const {
    NoGradGuard no_grad;
    const HeadOutput out = forward(image);
    return decode_landmarks(out.hx, out.hy, config_.heatmap_spec());
}

void Detector::save(const std::filesystem::path& path) const { save_checkpoint(path, named_parameters()); }

void Detector::load(const std::filesystem::path& path) { assign_from(load_checkpoint(path), named_parameters()); }

// ---------------------------------------------------------------------------
// Loss and training

Tensor detector_loss(const Tensor& hx, const Tensor& hy, const Tensor& gx, const Tensor& gy) {
    if (hx.shape() != gx.shape() || hy.shape() != gy.shape() || hx.rank() != 2) {
        throw ShapeError("detector_loss: prediction " + shape_str(hx.shape()) + "/" + shape_str(hy.shape()) +
                         " vs target " + shape_str(gx.shape()) + "/" + shape_str(gy.shape()));
    }
    return add(sse(hx, gx), sse(hy, gy));
}

Tensor detector_loss(const std::vector<HeadOutput>& predictions, const std::vector<std::pair<Tensor, Tensor>>& targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw ShapeError("detector_loss: batch of " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
    }
    Tensor total = detector_loss(predictions[0].hx, predictions[0].hy, targets[0].first, targets[0].second);
    for (std::size_t i = 1; i < predictions.size(); ++i) {
        total = add(total, detector_loss(predictions[i].hx, predictions[i].hy, targets[i].first, targets[i].second));
    }
    return scale(total, 1.0 / static_cast<double>(predictions.size()));
}

void write_metric_log(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << "epoch,train_loss,val_nrmse\n";
    for (const auto& r : rows) os << r.epoch << ',' << fmt6(r.train_loss) << ',' << fmt6(r.val_nrmse) << '\n';
}

std::vector<PreparedSample> prepare(const std::vector<Sample>& samples, const HeatmapSpec& spec) {
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        auto [tx, ty] = encode_targets(s.landmarks, spec);
        out.push_back({to_tensor(s.image), tx, ty, s.landmarks});
    }
    return out;
}

std::vector<LandmarkSet> detect_all(const Detector& detector, const std::vector<PreparedSample>& samples) {
    std::vector<LandmarkSet> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(detector.detect(s.image));
    return out;
}

double mean_nrmse(const Detector& detector, const std::vector<PreparedSample>& samples) {
    std::vector<LandmarkSet> gts;
    for (const auto& s : samples) gts.push_back(s.landmarks);
    return evaluate(detect_all(detector, samples), gts, default_norm(detector.config().N)).mean;
}

TrainResult train_detector(Detector& detector, const std::vector<PreparedSample>& train,
                           const std::vector<PreparedSample>& val,
                           const std::function<void(const MetricRow&)>& on_epoch) {
    if (train.empty()) throw TrainingError("train_detector: empty training set");
    const DetectorConfig& cfg = detector.config();
    std::vector<Tensor> params = tensors_of(detector.named_parameters());
    Adam opt(params, {cfg.learning_rate});
    Rng shuffle = Rng::derive(cfg.seed, 0x5EED);

    TrainResult result;
    result.initial_val_nrmse = val.empty() ? 0.0 : mean_nrmse(detector, val);

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
                const auto& s = train[order[i]];
                clear_tape();
                const HeadOutput out = detector.forward(s.image);
                const Tensor loss = detector_loss(out.hx, out.hy, s.target_x, s.target_y);
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
        MetricRow row{epoch, loss_sum / static_cast<double>(train.size()), val.empty() ? 0.0 : mean_nrmse(detector, val)};
        result.log.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return result;
}

}  // namespace mhm
