#include "otm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "otm/errors.hpp"

namespace otm {

namespace {

// Offline points kept by the limited-data presets (of the 30-point set).
constexpr std::size_t kLimitedOfflinePoints = 20;

}  // namespace

std::string to_string(UseCase use_case) {
    switch (use_case) {
        case UseCase::baseline: return "baseline";
        case UseCase::limited_data: return "limited_data";
        case UseCase::new_class: return "new_class";
        case UseCase::faults: return "faults";
        case UseCase::custom: return "custom";
    }
    return "?";
}

UseCase parse_use_case(const std::string& text) {
    for (auto uc : {UseCase::baseline, UseCase::limited_data, UseCase::new_class, UseCase::faults,
                    UseCase::custom})
        if (text == to_string(uc)) return uc;
    throw ConfigError("unknown use case '" + text + "'");
}

ExperimentSpec default_spec(const Dataset& dataset) {
    ExperimentSpec spec;
    spec.tm.num_features = dataset.num_features;
    spec.tm.num_classes_max = dataset.num_classes;
    spec.tm.class_active_mask.assign(dataset.num_classes, true);
    const std::size_t n = dataset.points.size();
    spec.alloc = {n / 5, 2 * n / 5, n - n / 5 - 2 * n / 5};
    return spec;
}

void apply_use_case(ExperimentSpec& spec, UseCase use_case, const UseCaseOptions& opt) {
    spec.use_case = use_case;
    Schedule& sched = spec.schedule;
    const MachineDims dims = spec.tm.dims();
    auto limit_offline = [&] { spec.offline_limit = std::min(kLimitedOfflinePoints, spec.alloc.offline_len); };

    switch (use_case) {
        case UseCase::baseline:
            limit_offline();
            sched.online_iterations = 0;
            sched.online_learning = false;
            sched.events.clear();
            break;
        case UseCase::limited_data:
            limit_offline();
            sched.online_learning = opt.online_learning;
            sched.events.clear();
            break;
        case UseCase::new_class:
            if (opt.withheld_class >= spec.tm.num_classes_max)
                throw ConfigError("withheld class out of range");
            spec.offline_limit.reset();
            sched.online_learning = opt.online_learning;
            sched.filter_class = opt.withheld_class;
            spec.tm.class_active_mask.assign(spec.tm.num_classes_max, true);
            spec.tm.class_active_mask[opt.withheld_class] = false;
            sched.events.clear();
            if (opt.introduce_class) sched.events.push_back({opt.event_at, EnableClass{*opt.introduce_class}});
            break;
        case UseCase::faults: {
            limit_offline();
            sched.online_learning = opt.online_learning;
            sched.events.clear();
            const std::uint64_t seed = opt.fault_seed.value_or(spec.master_seed);
            auto plan = generate_even_spread_plan(opt.fault_fraction, opt.fault_kind, dims, seed);
            sched.events.push_back(
                {opt.event_at,
                 InjectFaultPlan{std::move(plan), format_accuracy(opt.fault_fraction) + ":" +
                                                      to_string(opt.fault_kind) + ":" + std::to_string(seed)}});
            break;
        }
        case UseCase::custom:
            break;
    }
}

double ExperimentResult::mean(std::size_t checkpoint, SetId set) const {
    for (const auto& p : curve)
        if (p.checkpoint == checkpoint && p.set == set) return p.mean_accuracy;
    throw QueryError("no curve point for checkpoint " + std::to_string(checkpoint) + " set " +
                     to_string(set));
}

std::size_t ExperimentResult::checkpoints() const {
    return runs.empty() ? 0 : runs.front().checkpoints.size();
}

std::vector<CurvePoint> aggregate(const std::vector<RunHistory>& runs) {
    std::map<std::pair<std::size_t, SetId>, std::pair<double, std::size_t>> acc;
    for (const auto& run : runs)
        for (const auto& cp : run.checkpoints)
            for (const auto& r : cp.records) {
                auto& slot = acc[{cp.index, r.set}];
                slot.first += r.accuracy();
                ++slot.second;
            }
    std::vector<CurvePoint> out;
    out.reserve(acc.size());
    for (const auto& [key, sum] : acc)
        out.push_back({key.first, key.second, sum.second, sum.first / static_cast<double>(sum.second)});
    return out;
}

RunHistory run_ordering(const ExperimentSpec& spec, const BlockStore& store, const Ordering& ordering,
                        std::size_t ordering_id) {
    SetTriple sets = materialize_sets(store, ordering, spec.alloc);
    if (spec.offline_limit && *spec.offline_limit < sets.offline.size())
        sets.offline.resize(*spec.offline_limit);

    const std::uint64_t seed = derive_seed(spec.master_seed, ordering_id);
    TMConfig tm = spec.tm;
    tm.rng_seed = seed;
    Randomizer rng(seed);
    RunHistory history = run_schedule(spec.schedule, TsetlinMachine(tm), sets, {}, rng, spec.mitigation);
    history.ordering_id = ordering_id;
    return history;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& dataset) {
    if (dataset.num_features != spec.tm.num_features)
        throw ConfigError("dataset has F=" + std::to_string(dataset.num_features) + " but machine expects " +
                          std::to_string(spec.tm.num_features));
    spec.tm.validate();
    const std::size_t block_len = spec.block_len ? spec.block_len : spec.alloc.common_block_len();
    const BlockStore store = partition_blocks(dataset.points, block_len);
    spec.alloc.validate(store);
    const auto orderings = enumerate_orderings(store.num_blocks(), spec.orderings);

    ExperimentResult result;
    result.runs.resize(orderings.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_id = 0;

    auto worker = [&] {
        for (std::size_t i = next++; i < orderings.size(); i = next++) {
            try {
                result.runs[i] = run_ordering(spec, store, orderings[i], i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error || i < first_error_id) {
                    first_error = std::current_exception();
                    first_error_id = i;
                }
                next = orderings.size();
            }
        }
    };

    const std::size_t n_workers = std::clamp<std::size_t>(spec.workers, 1, std::max<std::size_t>(1, orderings.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }

    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
            throw Error("ordering " + std::to_string(first_error_id) + ": " + e.what());
        }
    }
    result.curve = aggregate(result.runs);
    return result;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out) {
    out << "checkpoint,set,orderings,mean_accuracy\n";
    for (const auto& p : curve)
        out << p.checkpoint << ',' << to_string(p.set) << ',' << p.orderings << ','
            << format_accuracy(p.mean_accuracy) << '\n';
}

void write_experiment_outputs(const ExperimentSpec& spec, const ExperimentResult& result,
                              const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "raw");
    auto open = [](const fs::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw InputError("cannot write '" + p.string() + "'");
        return f;
    };
    {
        auto f = open(out_dir / "curves.csv");
        write_curve_csv(result.curve, f);
    }
    {
        auto f = open(out_dir / "runs.csv");
        write_history_csv_header(f);
        for (const auto& run : result.runs) write_history_csv(run, f);
    }
    for (const auto& run : result.runs) {
        const std::string stem = "ordering_" + std::to_string(run.ordering_id);
        auto csv = open(out_dir / "raw" / (stem + ".csv"));
        write_history_csv_header(csv);
        write_history_csv(run, csv);
        auto json = open(out_dir / "raw" / (stem + ".json"));
        json << history_json(run);
    }
    nlohmann::ordered_json j;
    j["use_case"] = to_string(spec.use_case);
    j["orderings"] = spec.orderings;
    j["master_seed"] = spec.master_seed;
    j["seed_derivation"] = "xoshiro256** seeded with derive_seed(master, ordering) (SplitMix64 mix)";
    j["allocation"] = {spec.alloc.offline_len, spec.alloc.validation_len, spec.alloc.online_len};
    j["block_len"] = spec.block_len ? spec.block_len : spec.alloc.common_block_len();
    if (spec.offline_limit) j["offline_limit"] = *spec.offline_limit;
    j["classes_max"] = spec.tm.num_classes_max;
    j["clauses_max"] = spec.tm.num_clauses_max;
    j["clauses_active"] = spec.tm.num_clauses_active;
    j["features"] = spec.tm.num_features;
    j["half_states"] = spec.tm.ta_half_states;
    j["s_offline"] = spec.tm.s_offline;
    j["s_online"] = spec.tm.s_online;
    j["threshold"] = spec.tm.threshold;
    std::string mask;
    for (bool b : spec.tm.class_active_mask) mask.push_back(b ? '1' : '0');
    j["class_active_mask"] = mask;
    j["offline_epochs"] = spec.schedule.offline_epochs;
    j["online_iterations"] = spec.schedule.online_iterations;
    j["online_learning"] = spec.schedule.online_learning;
    j["analysis_view"] = "filtered";
    auto& evs = j["events"];
    evs = nlohmann::ordered_json::array();
    for (const auto& e : spec.schedule.events) evs.push_back(describe(e));
    auto f = open(out_dir / "experiment.json");
    f << j.dump(2) << '\n';
}

std::vector<GridPoint> make_grid(const std::vector<std::size_t>& clauses,
                                 const std::vector<std::int32_t>& thresholds,
                                 const std::vector<double>& s_values) {
    std::vector<GridPoint> grid;
    for (auto c : clauses)
        for (auto t : thresholds)
            for (auto s : s_values) grid.push_back({c, t, s});
    return grid;
}

std::vector<GridResult> hyperparam_search(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                                          const Dataset& dataset) {
    if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
    std::vector<GridResult> results;
    results.reserve(grid.size());
    for (const auto& point : grid) {
        ExperimentSpec spec = base;
        spec.tm.num_clauses_max = point.clauses;
        spec.tm.num_clauses_active = point.clauses;
        spec.tm.threshold = point.threshold;
        spec.tm.s_offline = point.s;
        spec.schedule.online_iterations = 0;
        spec.schedule.events.clear();
        spec.schedule.sets_to_analyze = {SetId::offline, SetId::validation};
        const auto res = run_experiment(spec, dataset);
        results.push_back({point, res.mean(0, SetId::validation), res.mean(0, SetId::offline)});
    }
    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.mean_validation != b.mean_validation) return a.mean_validation > b.mean_validation;
        if (a.point.clauses != b.point.clauses) return a.point.clauses < b.point.clauses;
        return a.point.threshold < b.point.threshold;
    });
    return results;
}

void write_grid_csv(const std::vector<GridResult>& results, std::ostream& out) {
    out << "rank,clauses,T,s,mean_validation,mean_offline\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        char s_buf[32];
        std::snprintf(s_buf, sizeof s_buf, "%g", r.point.s);
        out << i + 1 << ',' << r.point.clauses << ',' << r.point.threshold << ',' << s_buf << ','
            << format_accuracy(r.mean_validation) << ',' << format_accuracy(r.mean_offline) << '\n';
    }
}

BenchReport bench(const TMConfig& config, const DataSet& data, std::size_t passes) {
    if (data.empty()) throw InputError("bench needs a non-empty dataset");
    using clock = std::chrono::steady_clock;
    TsetlinMachine machine(config);
    Randomizer rng(config.rng_seed);
    BenchReport rep;
    rep.classes = config.num_classes_max;
    rep.clauses = config.num_clauses_active;
    rep.features = config.num_features;

    auto t0 = clock::now();
    for (std::size_t p = 0; p < passes; ++p)
        for (const auto& dp : data) {
            machine.train_step(dp.features, dp.label % config.num_classes_max, config.s_offline, rng);
            ++rep.train_steps;
        }
    auto t1 = clock::now();
    for (std::size_t p = 0; p < passes; ++p)
        for (const auto& dp : data) {
            if (machine.classify(dp.features) == dp.label) ++rep.correct;
            ++rep.classifications;
        }
    auto t2 = clock::now();
    rep.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    rep.classify_seconds = std::chrono::duration<double>(t2 - t1).count();
    return rep;
}

}  // namespace otm
