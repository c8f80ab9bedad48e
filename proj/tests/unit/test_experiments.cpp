#include "mhm/experiments.hpp"

#include <doctest.h>

#include <sstream>

using namespace mhm;

namespace {

DetectorConfig tiny_detector() {
    DetectorConfig d;
    d.F = 32;
    d.base_channels = 4;
    d.deconv_groups = 2;
    d.epochs = 1;
    d.batch_size = 4;
    d.learning_rate = 1e-3;
    return d;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("resolution for a ratio") {
    DetectorConfig d;
    CHECK(resolution_for(d, 0.25) == 16);
    CHECK(resolution_for(d, 1.0) == 64);
    CHECK(resolution_for(d, 3.0) == 192);
    CHECK_THROWS_AS(resolution_for(d, 0.3), ConfigError);
    CHECK_THROWS_AS(resolution_for(d, 0.0), ConfigError);
}

TEST_CASE("sweep rows and CSV") {
    SweepConfig c;
    c.detector = tiny_detector();
    c.data.train_size = 4;
    c.data.test_size = 3;
    c.ratios = {0.25, 1.0};
    c.seeds = {0, 1};
    std::size_t seen = 0;
    const auto rows = resolution_sweep(c, [&](const SweepRow&) { ++seen; });
    REQUIRE(rows.size() == 4);
    CHECK(seen == 4);
    CHECK(rows[0].L == 8);
    CHECK(rows[3].L == 32);
    CHECK(rows[3].points_2d * 2 == rows[3].points_1d * 32);
    const auto means = sweep_means(rows);
    REQUIRE(means.size() == 2);
    CHECK(means[1].second == doctest::Approx((rows[2].nrmse + rows[3].nrmse) / 2));
    std::ostringstream os;
    write_sweep_csv(os, rows);
    CHECK(os.str().rfind("L,L_over_F,seed,nrmse,output_points_1d,output_points_2d\n8,0.25,0,", 0) == 0);
}

TEST_CASE("ablation over gamma and lambda") {
    AblationConfig c;
    c.tracker.detector = tiny_detector();
    c.tracker.detector.L = 16;
    c.tracker.channels = 2;
    c.tracker.epochs = 1;
    c.tracker.clip_length = 2;
    c.data.train_size = 3;
    c.data.test_size = 2;
    c.data.train_clips = 2;
    c.data.test_clips = 1;
    c.seeds = {3};
    c.values = {0.0, 0.4};
    auto rows = ablation(c);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].param == "gamma");
    CHECK(rows[1].value == 0.4);
    c.param = "lambda";
    c.values = {0.0, 0.3};
    rows = ablation(c);
    REQUIRE(rows.size() == 2);
    std::ostringstream os;
    write_ablation_csv(os, rows);
    CHECK(os.str().rfind("param,value,seed,nrmse\nlambda,0,3,", 0) == 0);
    CHECK_THROWS_AS(c.set({"param", "sigma", 1}), ConfigError);
}

TEST_CASE("config keys route to the right section") {
    SweepConfig s;
    REQUIRE(s.set({"ratios", "0.5, 2", 1}));
    REQUIRE(s.set({"train_size", "10", 2}));
    REQUIRE(s.set({"gamma", "0", 3}));
    CHECK(s.ratios == std::vector<double>{0.5, 2.0});
    CHECK(s.data.train_size == 10);
    CHECK(s.detector.gamma == 0.0);
    CHECK_FALSE(s.set({"lambda", "0.3", 4}));
    AblationConfig a;
    REQUIRE(a.set({"lambda", "0.3", 1}));
    CHECK(a.tracker.lambda == 0.3);
}

TEST_CASE("memory bench honors the budget") {
    MemoryBenchOptions opt;
    opt.budget_bytes = 4 << 20;
    const auto rows = bench_memory({68, 5}, {256, 64}, opt);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].N == 5);
    CHECK(rows[0].L == 64);
    for (const auto& r : rows) {
        CHECK(r.points_2d * 2 == r.points_1d * r.L);
        CHECK(r.bytes_1d == r.points_1d * 80);
        CHECK(r.status_1d == AllocStatus::Ok);
    }
    CHECK(rows[0].status_2d == AllocStatus::Ok);           // 10 * 5 * 64^2 * 8 = 1.6 MiB
    CHECK(rows[3].status_2d == AllocStatus::OutOfMemory);  // 10 * 68 * 256^2 * 8 = 340 MiB
    std::ostringstream os;
    write_memory_csv(os, rows);
    CHECK(os.str().find("68,256,34816,4456448,2785280,356515840,ok,oom,128") != std::string::npos);
}

TEST_CASE("memory bench batch arithmetic and skipped kinds") {
    MemoryBenchOptions opt;
    opt.measure_2d = false;
    const auto rows = bench_memory({68}, {768}, opt);
    CHECK(rows[0].bytes_1d == 10ull * 2 * 68 * 768 * 8);
    CHECK(rows[0].bytes_1d == 8355840);
    CHECK(rows[0].status_2d == AllocStatus::Skipped);
}

}  // TEST_SUITE

TEST_SUITE("experiments") {

TEST_CASE("quantization table") {
    const auto rows = analyze_quant({142.84, 188.72}, 256, {0.5, 3.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].L == 128);
    CHECK(rows[0].error == doctest::Approx(1.1063).epsilon(1e-3));
    CHECK(rows[1].error == doctest::Approx(0.1813).epsilon(1e-3));
    CHECK_THROWS_AS(analyze_quant({1.0, 1.0}, 256, {0.001}), ConfigError);
    std::ostringstream os;
    write_quant_csv(os, rows);
    CHECK(os.str() == "L_over_F,L,x,y,p_rec,q_rec,error_px\n0.5,128,71,94,142,188,1.10635\n"
                     "3,768,428,566,142.667,188.667,0.181353\n");
}

}  // TEST_SUITE
