// Acceptance checks. Prints one PASS/FAIL line per criterion; pass criterion
// ids (c01 ... c12) as arguments to run a subset.

#include "mhm/experiments.hpp"
#include "mhm/grad_check.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace mhm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = scale * rng.normal();
    return t;
}

// Settings shared by the training experiments.
DetectorConfig experiment_detector() {
    DetectorConfig d;
    d.F = 64;
    d.N = 5;
    d.base_channels = 16;
    d.epochs = 30;
    d.batch_size = 10;
    d.learning_rate = 1e-3;
    return d;
}

// ---------------------------------------------------------------------------

Outcome c01() {
    const auto rows = analyze_quant({142.84, 188.72}, 256, {0.5, 3.0});
    const bool ok = std::abs(rows[0].error - 1.11) <= 0.005 && std::abs(rows[1].error - 0.18) <= 0.005;
    return {ok, "E(0.5)=" + num(rows[0].error) + " E(3)=" + num(rows[1].error)};
}

Outcome c02() {
    bool ok = true;
    std::string worst;
    for (std::uint64_t N : {5, 68})
        for (std::uint64_t L : {64, 256, 768}) {
            const auto a = output_size(N, L, HeatmapKind::OneD), b = output_size(N, L, HeatmapKind::TwoD);
            if (b * 2 != a * L) {
                ok = false;
                worst += " output_size N=" + std::to_string(N) + " L=" + std::to_string(L);
            }
        }
    MemoryBenchOptions opt;
    opt.budget_bytes = std::uint64_t{1} << 30;
    for (const auto& r : bench_memory({5, 68}, {64, 256, 768}, opt)) {
        if (r.points_2d * 2 != r.points_1d * r.L || r.bytes_2d * 2 != r.bytes_1d * r.L) {
            ok = false;
            worst += " bench N=" + std::to_string(r.N) + " L=" + std::to_string(r.L);
        }
    }
    return {ok, ok ? "2D/1D = L/2 exactly for all 6 (N, L) pairs" : "mismatch:" + worst};
}

Outcome c03() {
    Rng rng(3);
    double worst = 0.0;
    for (double sigma : {1.0, 2.5, 5.0}) {
        const HeatmapSpec spec{64, 128, sigma};
        for (int i = 0; i < 100; ++i) {
            const Point c{rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0)};
            const auto [mx, my] = marginalize(encode2d(c, spec));
            const auto ex = encode1d(c.x, spec, Axis::X), ey = encode1d(c.y, spec, Axis::Y);
            for (std::size_t k = 0; k < spec.L; ++k) {
                worst = std::max(worst, std::abs(mx.values[k] - ex.values[k]));
                worst = std::max(worst, std::abs(my.values[k] - ey.values[k]));
            }
        }
    }
    return {worst <= 1e-9, "max |diff| = " + num(worst)};
}

Outcome c04() {
    Rng rng(4);
    bool ok = true;
    std::string detail;
    for (std::size_t L : {16, 64, 128, 192, 768}) {
        const HeatmapSpec spec{64, L, 2.5};
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double c = rng.uniform(0.0, 64.0);
            worst = std::max(worst, std::abs(decode_argmax(encode1d(c, spec)) - c));
        }
        ok = ok && worst <= spec.step();
        detail += " L=" + std::to_string(L) + ":" + num(worst / spec.step());
    }
    return {ok, "max error / (F/L):" + detail};
}

Outcome c05() {
    double worst = 0.0;
    std::string where;
    auto track = [&](const std::string& name, double e) {
        if (e > worst || std::isnan(e)) {
            worst = std::isnan(e) ? INFINITY : e;
            where = name;
        }
    };
    Rng rng(5);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), w = random_tensor({3, 4}, rng);
    Tensor m = random_tensor({4, 5}, rng), w35 = random_tensor({3, 5}, rng);
    Tensor kinked = random_tensor({3, 4}, rng);
    for (auto& v : kinked.data()) v = std::abs(v) < 0.05 ? 0.3 : v;
    auto wsum = [&](const Tensor& t) { return sum(mul(t, w)); };
    track("add", grad_check([&] { return wsum(add(a, b)); }, {a, b}, 1e-6));
    track("sub", grad_check([&] { return wsum(sub(a, b)); }, {a, b}, 1e-6));
    track("mul", grad_check([&] { return wsum(mul(a, b)); }, {a, b}, 1e-6));
    track("scale", grad_check([&] { return wsum(scale(a, 0.7)); }, {a}, 1e-6));
    track("relu", grad_check([&] { return wsum(relu(kinked)); }, {kinked}, 1e-6));
    track("elu", grad_check([&] { return wsum(elu(kinked)); }, {kinked}, 1e-6));
    track("sum", grad_check([&] { return sum(a); }, {a}, 1e-6));
    track("sse", grad_check([&] { return sse(a, b); }, {a, b}, 1e-6));
    track("mse", grad_check([&] { return mse(a, b); }, {a, b}, 1e-6));
    track("reshape", grad_check([&] { return sum(mul(reshape(a, {4, 3}), transpose(w))); }, {a}, 1e-6));
    track("transpose", grad_check([&] { return sum(mul(transpose(a), transpose(w))); }, {a}, 1e-6));
    track("matmul", grad_check([&] { return sum(mul(matmul(a, m), w35)); }, {a, m}, 1e-6));
    track("softmax", grad_check([&] { return wsum(softmax_rows(scale(a, 2.0))); }, {a}, 1e-6));
    Tensor x = random_tensor({2, 6, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng), wy = random_tensor({3, 3, 3}, rng);
    track("conv2d", grad_check([&] { return sum(mul(conv2d(x, k, {2, 2}, {1, 1}), wy)); }, {x, k}, 1e-6));
    Tensor y = random_tensor({2, 2, 3}, rng), kt = random_tensor({2, 3, 1, 4}, rng), wt = random_tensor({3, 2, 12}, rng);
    track("conv_transpose2d", grad_check([&] { return sum(mul(conv_transpose2d(y, kt, {1, 4}), wt)); }, {y, kt}, 1e-6));
    Tensor bias = random_tensor({2}, rng), wx = random_tensor({2, 6, 6}, rng);
    track("add_channel_bias", grad_check([&] { return sum(mul(add_channel_bias(x, bias), wx)); }, {x, bias}, 1e-6));
    Tensor wu = random_tensor({2, 12, 12}, rng);
    track("upsample_nearest", grad_check([&] { return sum(mul(upsample_nearest(x, 2), wu)); }, {x}, 1e-6));
    Tensor w66 = random_tensor({6, 6}, rng);
    track("channel", grad_check([&] { return sum(mul(channel(x, 1), w66)); }, {x}, 1e-6));
    track("stack", grad_check([&] { return sum(mul(stack({channel(x, 1), channel(x, 0)}), wx)); }, {x}, 1e-6));

    auto cp = CoAttentionParams::make(3, 0.4, rng);
    Tensor dx = random_tensor({6, 3}, rng), dy = random_tensor({3, 6}, rng);
    Tensor gx = random_tensor({6, 3}, rng), gy = random_tensor({3, 6}, rng);
    track("coattention", grad_check(
                             [&] {
                                 AxisFeatures f;
                                 f.dx = {dx};
                                 f.dy = {dy};
                                 const auto o = coattention_forward(f, cp);
                                 return add(sum(mul(o.dx[0], gx)), sum(mul(o.dy[0], gy)));
                             },
                             {dx, dy, cp.P, cp.Q}, 1e-6));

    GradCheckOptions opt;
    opt.max_elements_per_input = 8;

    DetectorConfig dc;
    dc.F = 32;
    dc.L = 32;
    dc.base_channels = 4;
    dc.deconv_groups = 2;
    Detector det(dc);
    const Sample s = generate_scene(5, 32, 5);
    const Tensor img = to_tensor(s.image);
    const auto [tx, ty] = encode_targets(s.landmarks, dc.heatmap_spec());
    const auto rd = grad_check(
        [&] {
            const auto o = det.forward(img);
            return detector_loss(o.hx, o.hy, tx, ty);
        },
        tensors_of(det.named_parameters()), opt);
    track("detector loss (F=32)", rd.max_rel_error);

    TrackerConfig tc;
    tc.detector = dc;
    tc.channels = 4;
    tc.lambda = 0.3;
    Tracker tr(tc);
    for (auto* t : {&tr.params().x.dec_b.weight, &tr.params().y.dec_b.weight})
        for (auto& v : t->data()) v = 0.3 * rng.normal();
    const auto clip = prepare_clips({generate_clip(6, 32, 5, 3, 1.0, 0.3)}, dc.heatmap_spec());
    const auto rt = grad_check(
        [&] {
            TrackerState state;
            std::vector<HeadOutput> preds;
            std::vector<std::pair<Tensor, Tensor>> targets;
            for (const auto& f : clip[0].frames) {
                TrackStep st = tr.step(f.image, state);
                preds.push_back(st.heatmaps);
                targets.emplace_back(f.target_x, f.target_y);
                state = st.state;
            }
            return tracker_loss(preds, targets);
        },
        tensors_of(tr.named_parameters()), opt);
    track("tracker loss (T=3)", rt.max_rel_error);

    return {worst <= 1e-4, "max rel err " + num(worst) + " (" + where + "), " + std::to_string(rd.checked) +
                               " detector + " + std::to_string(rt.checked) + " tracker elements"};
}

Outcome c06() {
    Rng rng(6);
    AxisFeatures f;
    for (int k = 0; k < 4; ++k) {
        f.dx.push_back(random_tensor({16, 4}, rng));
        f.dy.push_back(random_tensor({4, 16}, rng));
    }
    auto p = CoAttentionParams::make(4, 0.0, rng);
    const auto id = coattention_forward(f, p);
    bool identity = true;
    for (std::size_t k = 0; k < 4; ++k) identity = identity && same_bits(id.dx[k], f.dx[k]) && same_bits(id.dy[k], f.dy[k]);
    p.gamma = 0.4;
    const auto moved = coattention_forward(f, p);
    bool differs = true;
    for (std::size_t k = 0; k < 4; ++k) differs = differs && !same_bits(moved.dx[k], f.dx[k]) && !same_bits(moved.dy[k], f.dy[k]);
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto [wxy, wyx] = affinities(f.dx[k], f.dy[k], p);
        for (const Tensor* w : {&wxy, &wyx})
            for (std::size_t i = 0; i < 16; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < 16; ++j) row += (*w)[i * 16 + j];
                worst = std::max(worst, std::abs(row - 1.0));
            }
    }
    return {identity && differs && worst <= 1e-12, std::string("identity=") + (identity ? "yes" : "no") +
                                                       " differs=" + (differs ? "yes" : "no") +
                                                       " max|row-1|=" + num(worst)};
}

Outcome c07() {
    Rng rng(7);
    double worst = 0.0;
    for (double lambda : {0.0, 0.3, 1.0}) {
        for (std::size_t T : {1, 4, 16}) {
            std::vector<Tensor> us;
            for (std::size_t t = 0; t < T; ++t) us.push_back(random_tensor({8, 1, 16}, rng));
            TrackerState st;
            for (std::size_t t = 0; t < T; ++t) {
                const FuseOutput o = temporal_fuse(us[t], us[t], st, lambda, t + 1);
                for (std::size_t i = 0; i < us[t].size(); ++i) {
                    double direct = 0.0;
                    for (std::size_t k = 0; k <= t; ++k) direct += std::pow(lambda, static_cast<double>(t - k)) * us[k][i];
                    worst = std::max(worst, std::abs(o.v_x[i] - direct));
                }
                st = o.state;
            }
        }
    }

    // Prefix swap: different histories, same final frame.
    TrackerConfig tc;
    tc.detector.F = 32;
    tc.detector.L = 32;
    tc.detector.base_channels = 4;
    tc.channels = 4;
    tc.lambda = 0.0;
    Tracker tr(tc);
    for (auto& [name, t] : tr.head_parameters())
        for (auto& v : t.data()) v = 0.3 * rng.normal();
    const Clip a = generate_clip(70, 32, 5, 6, 1.0, 0.3), b = generate_clip(71, 32, 5, 6, 1.0, 0.3);
    NoGradGuard ng;
    TrackerState sa, sb;
    TrackStep ra, rb;
    for (std::size_t t = 0; t < 6; ++t) {
        ra = tr.step(to_tensor(a.frames[t]), sa);
        rb = tr.step(to_tensor(t + 1 < 6 ? b.frames[t] : a.frames[t]), sb);
        sa = ra.state;
        sb = rb.state;
    }
    const bool independent = same_bits(ra.heatmaps.hx, rb.heatmaps.hx) && same_bits(ra.heatmaps.hy, rb.heatmaps.hy);
    return {worst <= 1e-12 && independent,
            "max |acc - direct| = " + num(worst) + ", lambda=0 prefix swap " + (independent ? "bit-identical" : "differs")};
}

Outcome c08() {
    SweepConfig cfg;
    cfg.detector = experiment_detector();
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = resolution_sweep(cfg, [](const SweepRow& r) {
        std::cerr << "  sweep L=" << r.L << " seed=" << r.seed << " nrmse=" << num(r.nrmse) << std::endl;
    });
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    const auto means = sweep_means(rows);
    bool ok = minutes < 60.0;
    std::string detail;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (i > 0 && !(means[i].second < means[i - 1].second)) ok = false;
        detail += (i ? " > " : "") + ("L/F=" + num(means[i].first) + ":" + num(means[i].second));
    }
    return {ok, detail + " in " + num(minutes) + " min"};
}

Outcome c09() {
    AblationConfig cfg;
    cfg.tracker.detector = experiment_detector();
    cfg.tracker.detector.epochs = 10;
    cfg.tracker.clip_length = 8;
    cfg.tracker.epochs = 10;
    cfg.data.occlusion_prob = 0.3;
    cfg.param = "lambda";
    cfg.values = {0.0, 0.3};
    const auto rows = ablation(cfg, [](const AblationRow& r) {
        std::cerr << "  lambda=" << r.value << " seed=" << r.seed << " nrmse=" << num(r.nrmse) << std::endl;
    });
    const auto means = ablation_means(rows);
    return {means[1].second < means[0].second,
            "mean NRMSE lambda=0.3: " + num(means[1].second) + ", lambda=0: " + num(means[0].second)};
}

Outcome c10() {
    AblationConfig cfg;
    cfg.tracker.detector = experiment_detector();
    cfg.param = "gamma";
    cfg.values = {0.0, 0.4};
    const auto rows = ablation(cfg, [](const AblationRow& r) {
        std::cerr << "  gamma=" << r.value << " seed=" << r.seed << " nrmse=" << num(r.nrmse) << std::endl;
    });
    const auto means = ablation_means(rows);
    return {means[1].second <= means[0].second,
            "mean NRMSE gamma=0.4: " + num(means[1].second) + ", gamma=0: " + num(means[0].second)};
}

Outcome c11() {
    TrackerConfig tc;
    tc.detector.F = 32;
    tc.detector.L = 32;
    tc.detector.base_channels = 4;
    tc.detector.epochs = 2;
    tc.detector.learning_rate = 1e-3;
    tc.channels = 4;
    tc.epochs = 2;
    tc.seed = tc.detector.seed = 11;
    const auto clips = prepare_clips(generate_clips(11, 6, 32, 5, 4, 1.0, 0.3), tc.detector.heatmap_spec());
    auto run = [&] {
        Tracker tr(tc);
        const auto r = train_tracker(tr, clips, clips);
        std::ostringstream log;
        write_metric_log(log, r.detector_phase.log);
        write_metric_log(log, r.tracker_phase.log);
        return std::make_pair(encode_checkpoint(tr.named_parameters()), log.str());
    };
    const auto [ck1, log1] = run();
    const auto [ck2, log2] = run();
    const bool ok = ck1 == ck2 && log1 == log2;
    return {ok, "checkpoint " + std::to_string(ck1.size()) + " bytes " + (ck1 == ck2 ? "identical" : "differ") +
                    ", logs " + (log1 == log2 ? "identical" : "differ")};
}

Outcome c12() {
    // Wider than the experiment network: at 16 channels Adam with lr 1e-4
    // only reaches the all-zero baseline in 200 steps.
    DetectorConfig d;
    d.F = 64;
    d.L = 64;
    d.base_channels = 64;
    d.learning_rate = 1e-4;
    Detector det(d);
    const auto data = prepare({generate_scene(12, d.F, d.N)}, d.heatmap_spec());
    const auto& s = data[0];
    Adam opt(tensors_of(det.named_parameters()), {d.learning_rate});
    double first = 0.0, last = 0.0;
    for (int step = 0; step <= 200; ++step) {
        opt.zero_grad();
        clear_tape();
        const auto out = det.forward(s.image);
        const Tensor loss = detector_loss(out.hx, out.hy, s.target_x, s.target_y);
        if (step == 0) first = loss.item();
        last = loss.item();
        if (step == 200) break;
        backward(loss);
        opt.step();
    }
    clear_tape();
    return {first / last >= 100.0, "loss " + num(first) + " -> " + num(last) + " (x" + num(first / last) +
                                       "), F=64 L=64 base_channels=64"};
}

struct Criterion {
    const char* id;
    const char* text;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"c01", "quantization error of (142.84, 188.72) at L/F 0.5 and 3", c01},
        {"c02", "2D/1D output ratio is L/2", c02},
        {"c03", "1D encoding equals the normalized marginal of the 2D encoding", c03},
        {"c04", "argmax decoding within F/L", c04},
        {"c05", "finite-difference gradient checks", c05},
        {"c06", "co-attention identity at gamma 0 and stochastic affinities", c06},
        {"c07", "streaming accumulator equals the direct sum", c07},
        {"c08", "NRMSE decreases with L/F", c08},
        {"c09", "temporal fusion helps on occluded clips", c09},
        {"c10", "co-attention does not hurt NRMSE", c10},
        {"c11", "same seed gives identical checkpoints and logs", c11},
        {"c12", "single-sample loss drops 100x in 200 steps", c12},
    };
    std::set<std::string> wanted(argv + 1, argv + argc);
    for (const auto& w : wanted) {
        bool known = false;
        for (const auto& c : all) known = known || w == c.id;
        if (!known) {
            std::cerr << "unknown criterion '" << w << "'\n";
            return 2;
        }
    }
    int failed = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << "  " << c.text << "  [" << o.detail << "]" << std::endl;
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
