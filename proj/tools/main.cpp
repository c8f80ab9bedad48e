// mhm: command-line driver. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include "mhm/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace mhm;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Per-command settings. Every struct accepts `key = value` entries and writes
// itself back in the same format, so run.txt can be passed as --config.

void write_sizes(std::ostream& os, const char* key, const std::vector<std::size_t>& v) {
    os << key << " =";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : " ") << v[i];
    os << '\n';
}

std::string path_value(const fs::path& p) { return p.empty() ? "" : fs::absolute(p).lexically_normal().string(); }

struct QuantSettings {
    double p = 142.84;
    double q = 188.72;
    std::size_t F = 256;
    std::vector<std::size_t> L{128, 768};

    bool set(const ConfigEntry& e) {
        if (e.key == "p") p = parse_double(e);
        else if (e.key == "q") q = parse_double(e);
        else if (e.key == "F") F = parse_size(e);
        else if (e.key == "L") L = parse_size_list(e);
        else return false;
        return true;
    }
    void write(std::ostream& os) const {
        os << "p = " << exact(p) << "\nq = " << exact(q) << "\nF = " << F << '\n';
        write_sizes(os, "L", L);
    }
};

struct BenchSettings {
    std::vector<std::size_t> N{5, 68};
    std::vector<std::size_t> L{64, 256, 768};
    std::string kind = "both";
    std::size_t batch = 10;
    std::size_t budget_mib = 2048;

    bool set(const ConfigEntry& e) {
        if (e.key == "N") N = parse_size_list(e);
        else if (e.key == "L") L = parse_size_list(e);
        else if (e.key == "kind") {
            if (e.value != "1d" && e.value != "2d" && e.value != "both") {
                throw ConfigError(where(e) + ": 'kind' expects 1d, 2d or both, got '" + e.value + "'");
            }
            kind = e.value;
        } else if (e.key == "batch") batch = parse_size(e);
        else if (e.key == "budget_mib") budget_mib = parse_size(e);
        else return false;
        return true;
    }
    void write(std::ostream& os) const {
        write_sizes(os, "N", N);
        write_sizes(os, "L", L);
        os << "kind = " << kind << "\nbatch = " << batch << "\nbudget_mib = " << budget_mib << '\n';
    }
};

struct GenSettings {
    DatasetManifest m{0, 64, 5, 500, 0, 8, 1.0, 0.3};

    bool set(const ConfigEntry& e) {
        if (e.key == "seed") m.seed = parse_u64(e);
        else if (e.key == "F") m.F = parse_size(e);
        else if (e.key == "N") m.N = parse_size(e);
        else if (e.key == "samples") m.samples = parse_size(e);
        else if (e.key == "clips") m.clips = parse_size(e);
        else if (e.key == "clip_length") m.clip_length = parse_size(e);
        else if (e.key == "motion_scale") m.motion_scale = parse_double(e);
        else if (e.key == "occlusion_prob") m.occlusion_prob = parse_double(e);
        else return false;
        return true;
    }
    void write(std::ostream& os) const {
        os << "seed = " << m.seed << "\nF = " << m.F << "\nN = " << m.N << "\nsamples = " << m.samples
           << "\nclips = " << m.clips << "\nclip_length = " << m.clip_length
           << "\nmotion_scale = " << exact(m.motion_scale) << "\nocclusion_prob = " << exact(m.occlusion_prob) << '\n';
    }
};

/// Training data locations shared by train-detect and train-track.
struct DataPaths {
    fs::path train_data;
    fs::path val_data;  // optional; no validation column when empty

    bool set(const ConfigEntry& e) {
        if (e.key == "train_data") train_data = e.value;
        else if (e.key == "val_data") val_data = e.value;
        else return false;
        return true;
    }
    void write(std::ostream& os) const {
        os << "train_data = " << path_value(train_data) << "\nval_data = " << path_value(val_data) << '\n';
    }
    void require() const {
        if (train_data.empty()) throw ConfigError("'train_data' is required");
    }
};

struct DetectSettings {
    DetectorConfig detector;
    DataPaths data;

    bool set(const ConfigEntry& e) { return data.set(e) || detector.set(e); }
    void write(std::ostream& os) const {
        detector.write(os);
        data.write(os);
    }
};

struct TrackSettings {
    TrackerConfig tracker;
    DataPaths data;

    bool set(const ConfigEntry& e) { return data.set(e) || tracker.set(e); }
    void write(std::ostream& os) const {
        tracker.write(os);
        data.write(os);
    }
};

struct EvalSettings {
    fs::path model_dir;
    fs::path data;
    std::string normalization = "inter_ocular";

    bool set(const ConfigEntry& e) {
        if (e.key == "model_dir") model_dir = e.value;
        else if (e.key == "data") data = e.value;
        else if (e.key == "normalization") {
            if (e.value != "inter_ocular" && e.value != "face_size") {
                throw ConfigError(where(e) + ": 'normalization' expects inter_ocular or face_size, got '" + e.value +
                                  "'");
            }
            normalization = e.value;
        } else return false;
        return true;
    }
    void write(std::ostream& os) const {
        os << "model_dir = " << path_value(model_dir) << "\ndata = " << path_value(data)
           << "\nnormalization = " << normalization << '\n';
    }
};

// ---------------------------------------------------------------------------
// Plumbing

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `--key value` and `--key=value` pairs left over after flag parsing.
std::vector<ConfigEntry> parse_overrides(const std::vector<std::string>& args) {
    std::vector<ConfigEntry> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.size() < 3 || a.compare(0, 2, "--") != 0) throw UsageError("unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            out.push_back({a.substr(2, eq - 2), a.substr(eq + 1), 0});
        } else {
            if (i + 1 >= args.size()) throw UsageError("override '" + a + "' needs a value");
            out.push_back({a.substr(2), args[++i], 0});
        }
    }
    return out;
}

struct Invocation {
    std::string command;
    std::string config;
    std::string out;
    std::vector<ConfigEntry> entries;  // config file first, then overrides
};

template <class Settings>
Settings resolve(const Invocation& inv) {
    Settings s;
    for (const auto& e : inv.entries) {
        if (!s.set(e)) throw ConfigError(where(e) + ": unknown key '" + e.key + "' for " + inv.command);
    }
    return s;
}

fs::path output_dir(const Invocation& inv) {
    if (inv.out.empty()) throw UsageError(inv.command + " needs --out");
    fs::create_directories(inv.out);
    return inv.out;
}

template <class Settings>
void write_run(const fs::path& dir, const std::string& command, const Settings& s) {
    std::ofstream os(dir / "run.txt");
    os << "# mhm " << command << '\n';
    s.write(os);
    if (!os) throw std::runtime_error("cannot write " + (dir / "run.txt").string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

void print_epoch(const char* phase, const MetricRow& r) {
    std::cerr << phase << " epoch " << r.epoch << "  loss " << fmt6(r.train_loss) << "  val_nrmse "
              << fmt6(r.val_nrmse) << std::endl;
}

void check_dataset(const DatasetManifest& m, std::size_t F, std::size_t N, const fs::path& dir) {
    if (m.F != F || m.N != N) {
        throw ConfigError("dataset " + dir.string() + " has F = " + std::to_string(m.F) + ", N = " +
                          std::to_string(m.N) + " but the model expects F = " + std::to_string(F) + ", N = " +
                          std::to_string(N));
    }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_analyze_quant(const Invocation& inv) {
    const auto s = resolve<QuantSettings>(inv);
    std::vector<double> ratios;
    for (auto L : s.L) ratios.push_back(static_cast<double>(L) / static_cast<double>(s.F));
    std::vector<QuantRow> rows;
    try {
        rows = analyze_quant({s.p, s.q}, s.F, ratios);
    } catch (const std::out_of_range& e) {
        throw ConfigError(e.what());
    }
    write_quant_csv(std::cout, rows);
    if (!inv.out.empty()) {
        const auto dir = output_dir(inv);
        auto os = open_out(dir / "quant.csv");
        write_quant_csv(os, rows);
        write_run(dir, inv.command, s);
    }
    return 0;
}

int cmd_bench_mem(const Invocation& inv) {
    const auto s = resolve<BenchSettings>(inv);
    MemoryBenchOptions opt;
    opt.batch = s.batch;
    opt.budget_bytes = static_cast<std::uint64_t>(s.budget_mib) << 20;
    opt.measure_1d = s.kind != "2d";
    opt.measure_2d = s.kind != "1d";
    const auto rows = bench_memory(s.N, s.L, opt);
    write_memory_csv(std::cout, rows);
    if (!inv.out.empty()) {
        const auto dir = output_dir(inv);
        auto os = open_out(dir / "bench_mem.csv");
        write_memory_csv(os, rows);
        write_run(dir, inv.command, s);
    }
    return 0;
}

int cmd_gen_data(const Invocation& inv) {
    const auto s = resolve<GenSettings>(inv);
    const auto dir = output_dir(inv);
    const auto& m = s.m;
    const auto samples = generate_samples(m.seed, m.samples, m.F, m.N);
    const auto clips = generate_clips(m.seed, m.clips, m.F, m.N, m.clip_length, m.motion_scale, m.occlusion_prob);
    write_dataset(dir, m, samples, clips);
    write_run(dir, inv.command, s);
    std::cerr << "wrote " << m.samples << " samples and " << m.clips << " clips to " << dir.string() << '\n';
    return 0;
}

int cmd_train_detect(const Invocation& inv) {
    const auto s = resolve<DetectSettings>(inv);
    s.data.require();
    s.detector.validate();
    const auto dir = output_dir(inv);
    const auto spec = s.detector.heatmap_spec();
    check_dataset(read_manifest(s.data.train_data), s.detector.F, s.detector.N, s.data.train_data);
    const auto train = prepare(read_samples(s.data.train_data), spec);
    std::vector<PreparedSample> val;
    if (!s.data.val_data.empty()) {
        check_dataset(read_manifest(s.data.val_data), s.detector.F, s.detector.N, s.data.val_data);
        val = prepare(read_samples(s.data.val_data), spec);
    }
    write_run(dir, inv.command, s);
    Detector det(s.detector);
    const auto r = train_detector(det, train, val, [](const MetricRow& row) { print_epoch("detector", row); });
    auto log = open_out(dir / "metrics.csv");
    write_metric_log(log, r.log);
    det.save(dir / "detector.ckpt");
    if (r.diverged) {
        std::cerr << "training diverged: " << r.message << '\n';
        return 1;
    }
    return 0;
}

int cmd_train_track(const Invocation& inv) {
    const auto s = resolve<TrackSettings>(inv);
    s.data.require();
    s.tracker.validate();
    const auto dir = output_dir(inv);
    const auto& d = s.tracker.detector;
    auto load = [&](const fs::path& p) {
        const auto m = read_manifest(p);
        check_dataset(m, d.F, d.N, p);
        if (m.clips == 0) throw ConfigError("dataset " + p.string() + " has no clips");
        if (m.clip_length != s.tracker.clip_length) {
            throw ConfigError("dataset " + p.string() + " has clip_length = " + std::to_string(m.clip_length) +
                              " but clip_length = " + std::to_string(s.tracker.clip_length));
        }
        return prepare_clips(read_clips(p), d.heatmap_spec());
    };
    const auto train = load(s.data.train_data);
    const auto val = s.data.val_data.empty() ? std::vector<PreparedClip>{} : load(s.data.val_data);
    write_run(dir, inv.command, s);
    Tracker tr(s.tracker);
    const auto r = train_tracker(tr, train, val, [](const MetricRow& row) { print_epoch("tracker", row); });
    auto dlog = open_out(dir / "detector_metrics.csv");
    write_metric_log(dlog, r.detector_phase.log);
    auto tlog = open_out(dir / "metrics.csv");
    write_metric_log(tlog, r.tracker_phase.log);
    tr.save(dir / "tracker.ckpt");
    for (const auto* phase : {&r.detector_phase, &r.tracker_phase}) {
        if (phase->diverged) {
            std::cerr << "training diverged: " << phase->message << '\n';
            return 1;
        }
    }
    return 0;
}

Invocation reload(const fs::path& model_dir) {
    Invocation inv;
    inv.entries = read_config(model_dir / "run.txt");
    return inv;
}

void write_report(const fs::path& dir, const EvalReport& report) {
    auto per = open_out(dir / "per_sample.csv");
    per << "sample,nrmse\n";
    for (std::size_t i = 0; i < report.per_sample.size(); ++i) per << i << ',' << fmt6(report.per_sample[i]) << '\n';
    auto sum = open_out(dir / "summary.csv");
    sum << "group,nrmse\nall," << fmt6(report.mean) << '\n';
    for (const auto& [name, v] : report.groups) sum << name << ',' << fmt6(v) << '\n';
    std::cout << "mean NRMSE " << fmt6(report.mean) << " %\n";
    for (const auto& [name, v] : report.groups) std::cout << "  " << name << ' ' << fmt6(v) << " %\n";
}

int cmd_eval(const Invocation& inv) {
    const auto s = resolve<EvalSettings>(inv);
    if (s.model_dir.empty()) throw ConfigError("'model_dir' is required");
    if (s.data.empty()) throw ConfigError("'data' is required");
    const auto dir = output_dir(inv);
    const auto m = read_manifest(s.data);
    NormSpec norm = default_norm(m.N);
    if (s.normalization == "face_size") norm.kind = NormKind::FaceSize;

    std::vector<LandmarkSet> preds, gts;
    const bool tracker = fs::exists(s.model_dir / "tracker.ckpt");
    if (tracker) {
        Invocation src = reload(s.model_dir);
        src.command = "train-track";
        const auto ts = resolve<TrackSettings>(src);
        check_dataset(m, ts.tracker.detector.F, ts.tracker.detector.N, s.data);
        Tracker tr(ts.tracker);
        tr.load(s.model_dir / "tracker.ckpt");
        const auto clips = prepare_clips(read_clips(s.data), ts.tracker.detector.heatmap_spec());
        const auto tracks = track_all(tr, clips);
        fs::create_directories(dir / "tracks");
        char name[32];
        for (std::size_t c = 0; c < clips.size(); ++c) {
            std::snprintf(name, sizeof(name), "%04zu.csv", c);
            auto os = open_out(dir / "tracks" / name);
            write_tracking_csv(os, tracks[c]);
            for (std::size_t t = 0; t < tracks[c].size(); ++t) {
                preds.push_back(tracks[c][t]);
                gts.push_back(clips[c].frames[t].landmarks);
            }
        }
    } else {
        if (!fs::exists(s.model_dir / "detector.ckpt")) {
            throw ConfigError("no detector.ckpt or tracker.ckpt in " + s.model_dir.string());
        }
        Invocation src = reload(s.model_dir);
        src.command = "train-detect";
        const auto ds = resolve<DetectSettings>(src);
        check_dataset(m, ds.detector.F, ds.detector.N, s.data);
        Detector det(ds.detector);
        det.load(s.model_dir / "detector.ckpt");
        const auto samples = prepare(read_samples(s.data), ds.detector.heatmap_spec());
        preds = detect_all(det, samples);
        for (const auto& x : samples) gts.push_back(x.landmarks);
    }
    write_run(dir, inv.command, s);
    write_report(dir, evaluate(preds, gts, norm, default_groups(m.N)));
    return 0;
}

int cmd_sweep(const Invocation& inv) {
    const auto s = resolve<SweepConfig>(inv);
    for (double r : s.ratios) resolution_for(s.detector, r);
    const auto dir = output_dir(inv);
    write_run(dir, inv.command, s);
    const auto rows = resolution_sweep(s, [](const SweepRow& r) {
        std::cerr << "L " << r.L << "  seed " << r.seed << "  nrmse " << fmt6(r.nrmse) << std::endl;
    });
    auto os = open_out(dir / "sweep.csv");
    write_sweep_csv(os, rows);
    std::cout << "L_over_F,mean_nrmse\n";
    for (const auto& [ratio, mean] : sweep_means(rows)) std::cout << fmt6(ratio) << ',' << fmt6(mean) << '\n';
    return 0;
}

int cmd_ablate(const Invocation& inv) {
    const auto s = resolve<AblationConfig>(inv);
    const auto dir = output_dir(inv);
    write_run(dir, inv.command, s);
    const auto rows = ablation(s, [](const AblationRow& r) {
        std::cerr << r.param << ' ' << fmt6(r.value) << "  seed " << r.seed << "  nrmse " << fmt6(r.nrmse)
                  << std::endl;
    });
    auto os = open_out(dir / "ablation.csv");
    write_ablation_csv(os, rows);
    std::cout << s.param << ",mean_nrmse\n";
    for (const auto& [value, mean] : ablation_means(rows)) std::cout << fmt6(value) << ',' << fmt6(mean) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attentive one-dimensional heatmap regression: data, training, evaluation and analysis"};
    app.require_subcommand(1);
    Invocation inv;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Invocation&);
    };
    const std::vector<Command> commands{
        {"analyze-quant", "Quantization error table (keys p, q, F, L)", cmd_analyze_quant},
        {"bench-mem", "Allocate 1D/2D output buffers (keys N, L, kind, batch, budget_mib)", cmd_bench_mem},
        {"gen-data", "Write a synthetic dataset", cmd_gen_data},
        {"train-detect", "Train a detector on still images", cmd_train_detect},
        {"train-track", "Train a tracker on clips", cmd_train_track},
        {"eval", "Evaluate a trained detector or tracker", cmd_eval},
        {"sweep", "Resolution sweep over L / F", cmd_sweep},
        {"ablate", "Gamma or lambda ablation", cmd_ablate},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", inv.config, "key = value settings file");
        sub->add_option("--out", inv.out, "Output directory");
        sub->allow_extras();
        sub->footer("Any other --key value pair overrides the config file.");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    const Command* chosen = nullptr;
    CLI::App* sub = nullptr;
    for (const auto& c : commands) {
        if (app.got_subcommand(c.name)) {
            chosen = &c;
            sub = app.get_subcommand(c.name);
        }
    }
    inv.command = chosen->name;

    try {
        if (!inv.config.empty()) inv.entries = read_config(inv.config);
        for (auto& e : parse_overrides(sub->remaining())) inv.entries.push_back(std::move(e));
        return chosen->run(inv);
    } catch (const UsageError& e) {
        std::cerr << "mhm " << inv.command << ": " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "mhm " << inv.command << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mhm " << inv.command << ": " << e.what() << '\n';
        return 1;
    }
}
