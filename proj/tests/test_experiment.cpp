#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "otm/errors.hpp"
#include "otm/experiment.hpp"

#ifndef OTM_DATA_DIR
#define OTM_DATA_DIR "data"
#endif

using namespace otm;

namespace {

const Dataset& iris() {
    static const Dataset ds = load_dataset(OTM_DATA_DIR "/iris.txt");
    return ds;
}

ExperimentSpec quick_spec(UseCase uc, std::uint64_t orderings = 6) {
    auto spec = default_spec(iris());
    apply_use_case(spec, uc);
    spec.orderings = orderings;
    spec.schedule.online_iterations = std::min<std::size_t>(spec.schedule.online_iterations, 8);
    return spec;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("use-case presets") {
    auto spec = default_spec(iris());
    CHECK(spec.alloc.offline_len == 30);
    CHECK(spec.alloc.validation_len == 60);
    CHECK(spec.alloc.online_len == 60);
    CHECK(spec.alloc.common_block_len() == 30);
    CHECK(spec.tm.num_clauses_active == 16);
    CHECK(spec.tm.threshold == 15);
    CHECK(spec.tm.s_offline == 1.375);
    CHECK(spec.tm.s_online == 1.0);

    apply_use_case(spec, UseCase::new_class);
    CHECK(spec.schedule.filter_class == 0U);
    CHECK_FALSE(spec.tm.class_active_mask[0]);
    REQUIRE(spec.schedule.events.size() == 1);
    CHECK(describe(spec.schedule.events[0]) == "5:enable_class:0");

    apply_use_case(spec, UseCase::faults);
    REQUIRE(spec.schedule.events.size() == 1);
    CHECK(std::get<InjectFaultPlan>(spec.schedule.events[0].action).plan.fault_count() == 307);
    CHECK(spec.offline_limit == 20U);

    UseCaseOptions opt;
    opt.withheld_class = 9;
    CHECK_THROWS_AS(apply_use_case(spec, UseCase::new_class, opt), ConfigError);
    CHECK(parse_use_case("limited_data") == UseCase::limited_data);
    CHECK_THROWS_AS(parse_use_case("nope"), ConfigError);
}

TEST_CASE("single ordering equals the underlying history") {
    auto spec = quick_spec(UseCase::limited_data, 1);
    const auto res = run_experiment(spec, iris());
    REQUIRE(res.runs.size() == 1);
    const auto store = partition_blocks(iris().points, 30);
    const auto direct = run_ordering(spec, store, {0, 1, 2, 3, 4}, 0);
    CHECK(res.runs[0] == direct);
    for (const auto& p : res.curve) CHECK(p.mean_accuracy == direct.accuracy(p.checkpoint, p.set));
}

TEST_CASE("aggregate is the arithmetic mean of raw values") {
    const auto res = run_experiment(quick_spec(UseCase::limited_data), iris());
    CHECK(res.runs.size() == 6);
    CHECK(res.checkpoints() == 9);
    for (const auto& p : res.curve) {
        double sum = 0;
        for (const auto& r : res.runs) sum += r.accuracy(p.checkpoint, p.set);
        CHECK(p.mean_accuracy == doctest::Approx(sum / 6).epsilon(1e-12));
        CHECK(p.orderings == 6);
    }
    CHECK_THROWS_AS(res.mean(99, SetId::offline), QueryError);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
    namespace fs = std::filesystem;
    const auto base = fs::temp_directory_path() / "otm_test_outputs";
    fs::remove_all(base);
    auto spec = quick_spec(UseCase::faults);
    write_experiment_outputs(spec, run_experiment(spec, iris()), base / "a");
    write_experiment_outputs(spec, run_experiment(spec, iris()), base / "b");
    spec.workers = 3;
    write_experiment_outputs(spec, run_experiment(spec, iris()), base / "c");
    for (const char* f : {"curves.csv", "runs.csv", "raw/ordering_3.json"}) {
        CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
        CHECK(slurp(base / "a" / f) == slurp(base / "c" / f));
    }
    CHECK(slurp(base / "a" / "curves.csv").rfind("checkpoint,set,orderings,mean_accuracy\n", 0) == 0);
    fs::remove_all(base);
}

TEST_CASE("errors carry the ordering id") {
    auto spec = quick_spec(UseCase::limited_data, 2);
    spec.schedule.events.push_back({1, SetActiveClauses{99}});
    try {
        run_experiment(spec, iris());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("ordering 0:", 0) == 0);
    }
    auto bad = quick_spec(UseCase::limited_data, 2);
    bad.tm.num_features = 8;
    CHECK_THROWS_AS(run_experiment(bad, iris()), ConfigError);
}

TEST_CASE("hyperparam_search") {
    auto spec = quick_spec(UseCase::limited_data, 4);
    SUBCASE("single point gives one row") {
        const auto r = hyperparam_search({{16, 15, 1.375}}, spec, iris());
        REQUIRE(r.size() == 1);
        std::stringstream ss;
        write_grid_csv(r, ss);
        CHECK(ss.str().rfind("rank,clauses,T,s,mean_validation,mean_offline\n1,16,15,1.375,", 0) == 0);
    }
    SUBCASE("identical points score identically") {
        const auto r = hyperparam_search({{8, 10, 2.0}, {8, 10, 2.0}}, spec, iris());
        CHECK(r[0].mean_validation == r[1].mean_validation);
        CHECK(r[0].mean_offline == r[1].mean_offline);
    }
    SUBCASE("ranking is by validation, then fewer clauses, then lower T") {
        const auto r = hyperparam_search(make_grid({4, 16}, {5, 15}, {1.375}), spec, iris());
        REQUIRE(r.size() == 4);
        for (std::size_t i = 1; i < r.size(); ++i) {
            CHECK(r[i - 1].mean_validation >= r[i].mean_validation);
            if (r[i - 1].mean_validation == r[i].mean_validation)
                CHECK(std::tie(r[i - 1].point.clauses, r[i - 1].point.threshold) <
                      std::tie(r[i].point.clauses, r[i].point.threshold));
        }
    }
    CHECK_THROWS_AS(hyperparam_search({}, spec, iris()), ConfigError);
}

TEST_CASE("bench") {
    const auto spec = default_spec(iris());
    const auto a = bench(spec.tm, iris().points, 2);
    const auto b = bench(spec.tm, iris().points, 2);
    CHECK(a.train_steps == 300);
    CHECK(a.classifications == 300);
    CHECK(a.correct == b.correct);
    CHECK(a.correct > 150);
    CHECK_THROWS_AS(bench(spec.tm, {}, 1), InputError);
}
