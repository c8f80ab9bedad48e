#include "mhm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <type_traits>

namespace mhm {

namespace {

std::vector<std::uint64_t> parse_seeds(const ConfigEntry& e) {
    std::vector<std::uint64_t> out;
    for (auto v : parse_size_list(e)) out.push_back(v);
    return out;
}

template <class T>
void write_list(std::ostream& os, const char* key, const std::vector<T>& v) {
    os << key << " =";
    for (std::size_t i = 0; i < v.size(); ++i) {
        os << (i ? ", " : " ");
        if constexpr (std::is_floating_point_v<T>) os << exact(v[i]);
        else os << v[i];
    }
    os << '\n';
}

template <class Row>
std::vector<std::pair<double, double>> means_by(const std::vector<Row>& rows, double Row::*key) {
    std::vector<std::pair<double, double>> out;
    std::vector<std::size_t> count;
    for (const auto& r : rows) {
        std::size_t i = 0;
        while (i < out.size() && out[i].first != r.*key) ++i;
        if (i == out.size()) {
            out.emplace_back(r.*key, 0.0);
            count.push_back(0);
        }
        out[i].second += r.nrmse;
        ++count[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].second /= static_cast<double>(count[i]);
    return out;
}

void require_ok(const TrainResult& r, const std::string& what) {
    if (r.diverged) throw TrainingError(what + ": " + r.message);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

bool DataConfig::set(const ConfigEntry& e) {
    const auto& k = e.key;
    if (k == "data_seed") data_seed = parse_u64(e);
    else if (k == "train_size") train_size = parse_size(e);
    else if (k == "test_size") test_size = parse_size(e);
    else if (k == "train_clips") train_clips = parse_size(e);
    else if (k == "test_clips") test_clips = parse_size(e);
    else if (k == "motion_scale") motion_scale = parse_double(e);
    else if (k == "occlusion_prob") occlusion_prob = parse_double(e);
    else return false;
    return true;
}

void DataConfig::write(std::ostream& os) const {
    os << "data_seed = " << data_seed << '\n'
       << "train_size = " << train_size << '\n'
       << "test_size = " << test_size << '\n'
       << "train_clips = " << train_clips << '\n'
       << "test_clips = " << test_clips << '\n'
       << "motion_scale = " << exact(motion_scale) << '\n'
       << "occlusion_prob = " << exact(occlusion_prob) << '\n';
}

bool SweepConfig::set(const ConfigEntry& e) {
    if (e.key == "ratios") ratios = parse_double_list(e);
    else if (e.key == "seeds") seeds = parse_seeds(e);
    else return data.set(e) || detector.set(e);
    return true;
}

void SweepConfig::write(std::ostream& os) const {
    detector.write(os);
    data.write(os);
    write_list(os, "ratios", ratios);
    write_list(os, "seeds", seeds);
}

bool AblationConfig::set(const ConfigEntry& e) {
    if (e.key == "param") {
        if (e.value != "gamma" && e.value != "lambda") {
            throw ConfigError(where(e) + ": 'param' expects gamma or lambda, got '" + e.value + "'");
        }
        param = e.value;
    } else if (e.key == "values") {
        values = parse_double_list(e);
    } else if (e.key == "seeds") {
        seeds = parse_seeds(e);
    } else {
        return data.set(e) || tracker.set(e);
    }
    return true;
}

void AblationConfig::write(std::ostream& os) const {
    tracker.write(os);
    data.write(os);
    os << "param = " << param << '\n';
    write_list(os, "values", values);
    write_list(os, "seeds", seeds);
}

// ---------------------------------------------------------------------------
// Resolution sweep

std::size_t resolution_for(const DetectorConfig& d, double ratio) {
    const double exact = ratio * static_cast<double>(d.F);
    const auto L = static_cast<std::size_t>(std::llround(exact));
    const std::size_t c = d.feature_extent();
    if (!(ratio > 0.0) || std::abs(exact - static_cast<double>(L)) > 1e-9 || L == 0 || L % c != 0) {
        throw ConfigError("L/F = " + fmt6(ratio) + " gives L = " + fmt6(exact) + ", which is not a multiple of F/4 = " +
                          std::to_string(c));
    }
    return L;
}

std::vector<SweepRow> resolution_sweep(const SweepConfig& cfg, const std::function<void(const SweepRow&)>& on_row) {
    if (cfg.ratios.empty() || cfg.seeds.empty()) throw ConfigError("sweep: ratios and seeds must be nonempty");
    std::vector<std::size_t> Ls;
    for (double r : cfg.ratios) Ls.push_back(resolution_for(cfg.detector, r));

    const std::size_t F = cfg.detector.F, N = cfg.detector.N;
    const auto train_raw = generate_samples(Rng::derive(cfg.data.data_seed, 1).seed(), cfg.data.train_size, F, N);
    const auto test_raw = generate_samples(Rng::derive(cfg.data.data_seed, 2).seed(), cfg.data.test_size, F, N);

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < Ls.size(); ++i) {
        DetectorConfig d = cfg.detector;
        d.L = Ls[i];
        d.M = 0;
        d.validate();
        const auto train = prepare(train_raw, d.heatmap_spec());
        const auto test = prepare(test_raw, d.heatmap_spec());
        for (auto seed : cfg.seeds) {
            d.seed = seed;
            Detector det(d);
            require_ok(train_detector(det, train, {}), "sweep L=" + std::to_string(d.L));
            SweepRow row{d.L, cfg.ratios[i], seed, mean_nrmse(det, test), output_size(N, d.L, HeatmapKind::OneD),
                         output_size(N, d.L, HeatmapKind::TwoD)};
            rows.push_back(row);
            if (on_row) on_row(row);
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "L,L_over_F,seed,nrmse,output_points_1d,output_points_2d\n";
    for (const auto& r : rows) {
        os << r.L << ',' << fmt6(r.ratio) << ',' << r.seed << ',' << fmt6(r.nrmse) << ',' << r.points_1d << ','
           << r.points_2d << '\n';
    }
}

std::vector<std::pair<double, double>> sweep_means(const std::vector<SweepRow>& rows) {
    return means_by(rows, &SweepRow::ratio);
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> ablation(const AblationConfig& cfg, const std::function<void(const AblationRow&)>& on_row) {
    if (cfg.values.empty() || cfg.seeds.empty()) throw ConfigError("ablate: values and seeds must be nonempty");
    const DetectorConfig& base = cfg.tracker.detector;
    const HeatmapSpec spec = base.heatmap_spec();
    std::vector<AblationRow> rows;
    auto emit = [&](double value, std::uint64_t seed, double nrmse) {
        rows.push_back({cfg.param, value, seed, nrmse});
        if (on_row) on_row(rows.back());
    };

    if (cfg.param == "gamma") {
        const auto train = prepare(
            generate_samples(Rng::derive(cfg.data.data_seed, 1).seed(), cfg.data.train_size, base.F, base.N), spec);
        const auto test = prepare(
            generate_samples(Rng::derive(cfg.data.data_seed, 2).seed(), cfg.data.test_size, base.F, base.N), spec);
        for (auto seed : cfg.seeds) {
            for (double g : cfg.values) {
                DetectorConfig d = base;
                d.gamma = g;
                d.seed = seed;
                d.validate();
                Detector det(d);
                require_ok(train_detector(det, train, {}), "ablate gamma=" + fmt6(g));
                emit(g, seed, mean_nrmse(det, test));
            }
        }
        return rows;
    }

    if (cfg.param != "lambda") throw ConfigError("ablate: unknown parameter '" + cfg.param + "'");
    const std::size_t T = cfg.tracker.clip_length;
    const auto train = prepare_clips(generate_clips(Rng::derive(cfg.data.data_seed, 3).seed(), cfg.data.train_clips,
                                                    base.F, base.N, T, cfg.data.motion_scale, cfg.data.occlusion_prob),
                                     spec);
    const auto test = prepare_clips(generate_clips(Rng::derive(cfg.data.data_seed, 4).seed(), cfg.data.test_clips,
                                                   base.F, base.N, T, cfg.data.motion_scale, cfg.data.occlusion_prob),
                                    spec);
    for (auto seed : cfg.seeds) {
        TrackerConfig tc = cfg.tracker;
        tc.seed = tc.detector.seed = seed;
        tc.validate();
        Detector shared(tc.detector);
        require_ok(train_detector(shared, flatten_frames(train), {}), "ablate detector phase");
        for (double lam : cfg.values) {
            TrackerConfig t = tc;
            t.lambda = lam;
            Tracker tracker(t);
            assign_from(shared.named_parameters(), tracker.detector().named_parameters());
            require_ok(train_tracker_heads(tracker, train, {}), "ablate lambda=" + fmt6(lam));
            emit(lam, seed, tracker_nrmse(tracker, test));
        }
    }
    return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "param,value,seed,nrmse\n";
    for (const auto& r : rows) os << r.param << ',' << fmt6(r.value) << ',' << r.seed << ',' << fmt6(r.nrmse) << '\n';
}

std::vector<std::pair<double, double>> ablation_means(const std::vector<AblationRow>& rows) {
    return means_by(rows, &AblationRow::value);
}

// ---------------------------------------------------------------------------
// Quantization

std::vector<QuantRow> analyze_quant(Point point, std::size_t F, const std::vector<double>& ratios) {
    std::vector<QuantRow> rows;
    for (double r : ratios) {
        const double exact = r * static_cast<double>(F);
        const auto L = static_cast<std::size_t>(std::llround(exact));
        if (!(r > 0.0) || L < 2 || std::abs(exact - static_cast<double>(L)) > 1e-9) {
            throw ConfigError("L/F = " + fmt6(r) + " with F = " + std::to_string(F) + " does not give an integer L >= 2");
        }
        const HeatmapSpec spec{F, L, 1.0};
        const GridPoint g = quantize(point, spec);
        rows.push_back({r, L, g, recover(g, spec), quantization_error(point, spec)});
    }
    return rows;
}

void write_quant_csv(std::ostream& os, const std::vector<QuantRow>& rows) {
    os << "L_over_F,L,x,y,p_rec,q_rec,error_px\n";
    for (const auto& r : rows) {
        os << fmt6(r.ratio) << ',' << r.L << ',' << r.grid.x << ',' << r.grid.y << ',' << fmt6(r.recovered.x) << ','
           << fmt6(r.recovered.y) << ',' << fmt6(r.error) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Memory

std::vector<MemoryRow> bench_memory(std::vector<std::size_t> Ns, std::vector<std::size_t> Ls,
                                    const MemoryBenchOptions& options) {
    std::sort(Ns.begin(), Ns.end());
    std::sort(Ls.begin(), Ls.end());
    auto measure = [&](bool wanted, std::uint64_t bytes) {
        if (!wanted) return AllocStatus::Skipped;
        if (options.budget_bytes != 0 && bytes > options.budget_bytes) return AllocStatus::OutOfMemory;
        try {
            const std::uint64_t count = bytes / sizeof(double);
            auto buf = std::make_unique<double[]>(count);
            for (std::uint64_t i = 0; i < count; i += 512) buf[i] = 1.0;
            return buf[0] == 1.0 ? AllocStatus::Ok : AllocStatus::OutOfMemory;
        } catch (const std::bad_alloc&) {
            return AllocStatus::OutOfMemory;
        }
    };
    std::vector<MemoryRow> rows;
    for (auto N : Ns) {
        for (auto L : Ls) {
            MemoryRow r;
            r.N = N;
            r.L = L;
            r.points_1d = output_size(N, L, HeatmapKind::OneD);
            r.points_2d = output_size(N, L, HeatmapKind::TwoD);
            r.bytes_1d = r.points_1d * options.batch * sizeof(double);
            r.bytes_2d = r.points_2d * options.batch * sizeof(double);
            r.status_1d = measure(options.measure_1d, r.bytes_1d);
            r.status_2d = measure(options.measure_2d, r.bytes_2d);
            rows.push_back(r);
        }
    }
    return rows;
}

namespace {

const char* status_name(AllocStatus s) {
    switch (s) {
    case AllocStatus::Ok: return "ok";
    case AllocStatus::OutOfMemory: return "oom";
    case AllocStatus::Skipped: return "skipped";
    }
    return "?";
}

}  // namespace

void write_memory_csv(std::ostream& os, const std::vector<MemoryRow>& rows) {
    os << "N,L,points_1d,points_2d,bytes_1d,bytes_2d,status_1d,status_2d,ratio\n";
    for (const auto& r : rows) {
        os << r.N << ',' << r.L << ',' << r.points_1d << ',' << r.points_2d << ',' << r.bytes_1d << ',' << r.bytes_2d
           << ',' << status_name(r.status_1d) << ',' << status_name(r.status_2d) << ','
           << fmt6(static_cast<double>(r.points_2d) / static_cast<double>(r.points_1d)) << '\n';
    }
}

}  // namespace mhm
