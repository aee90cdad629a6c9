// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "otm/errors.hpp"
#include "otm/experiment.hpp"

#ifndef OTM_DATA_DIR
#define OTM_DATA_DIR "data"
#endif

using namespace otm;

namespace {

// Tolerances, in accuracy fractions.
constexpr double kBaselineOffline = 0.83;
constexpr double kBaselineValidation = 0.795;
constexpr double kBaselineTol = 0.06;
constexpr double kMinValidationGain = 0.06;
constexpr double kIntroDrop = 0.05;
constexpr double kRecoveryTol = 0.05;
constexpr double kFaultGainTol = 0.05;
constexpr double kSingleThreadSeconds = 60.0;
constexpr double kEightWorkerSeconds = 10.0;
constexpr std::size_t kXorSeeds = 100;
constexpr std::size_t kXorMinSolved = 95;
constexpr std::size_t kXorEpochs = 200;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

double seconds_of(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const Dataset& iris() {
    static const Dataset ds = load_dataset(OTM_DATA_DIR "/iris.txt");
    return ds;
}

ExperimentSpec spec_for(UseCase uc, const UseCaseOptions& opt = {}) {
    auto spec = default_spec(iris());
    apply_use_case(spec, uc, opt);
    return spec;
}

constexpr SetId kSets[] = {SetId::offline, SetId::validation, SetId::online};

void criterion_1() {
    ExperimentResult res;
    const double secs = seconds_of([&] { res = run_experiment(spec_for(UseCase::baseline), iris()); });
    const double off = res.mean(0, SetId::offline);
    const double val = res.mean(0, SetId::validation);
    report("C1 baseline offline accuracy", std::abs(off - kBaselineOffline) <= kBaselineTol,
           pct(off) + "% (target " + pct(kBaselineOffline) + "+-" + pct(kBaselineTol) + ")");
    report("C1 baseline validation accuracy", std::abs(val - kBaselineValidation) <= kBaselineTol,
           pct(val) + "% (target " + pct(kBaselineValidation) + "+-" + pct(kBaselineTol) + ")");
    report("C1 baseline runtime", secs < kSingleThreadSeconds,
           std::to_string(secs) + " s for " + std::to_string(res.runs.size()) + " orderings");
}

ExperimentResult limited_data_result() {
    static const ExperimentResult res = run_experiment(spec_for(UseCase::limited_data), iris());
    return res;
}

double gain(const ExperimentResult& r, SetId set) {
    return r.mean(r.checkpoints() - 1, set) - r.mean(0, set);
}

void criterion_2() {
    const auto res = limited_data_result();
    const double vg = gain(res, SetId::validation);
    const double og = gain(res, SetId::offline);
    report("C2 validation gain over 16 online iterations", vg >= kMinValidationGain,
           "+" + pct(vg) + " points (need >= " + pct(kMinValidationGain) + ")");
    report("C2 offline gain below validation gain", og < vg, pct(og) + " < " + pct(vg));
}

void criterion_3() {
    UseCaseOptions filter_only;
    filter_only.introduce_class.reset();
    const auto base = run_experiment(spec_for(UseCase::new_class, filter_only), iris());
    const std::size_t last = base.checkpoints() - 1;
    {
        bool ok = true;
        std::string detail;
        for (SetId s : kSets) {
            const double a = base.mean(0, s), b = base.mean(last, s);
            ok = ok && b > a;
            detail += to_string(s) + " " + pct(a) + "->" + pct(b) + " ";
        }
        report("C3a filtered class, online on: all curves trend upward", ok, detail);
    }
    {
        UseCaseOptions off;
        off.online_learning = false;
        const auto res = run_experiment(spec_for(UseCase::new_class, off), iris());
        bool ok = true;
        std::string detail;
        for (SetId s : kSets) {
            const double before = res.mean(5, s);
            double worst_recovery = 0.0;
            for (std::size_t c = 6; c <= last; ++c) worst_recovery = std::max(worst_recovery, res.mean(c, s));
            const double drop = before - res.mean(6, s);
            ok = ok && drop >= kIntroDrop && before - worst_recovery >= kIntroDrop;
            detail += to_string(s) + " drop " + pct(drop) + " (max after " + pct(worst_recovery) + ") ";
        }
        report("C3b introduction, online off: persistent drop >= 5 points", ok, detail);
    }
    {
        const auto res = run_experiment(spec_for(UseCase::new_class), iris());
        bool ok = true;
        std::string detail;
        for (SetId s : kSets) {
            const double gap = base.mean(last, s) - res.mean(last, s);
            ok = ok && gap <= kRecoveryTol;
            detail += to_string(s) + " " + pct(res.mean(last, s)) + " vs " + pct(base.mean(last, s)) + " ";
        }
        report("C3c introduction, online on: recovers within 5 points", ok, detail);
    }
}

void criterion_4() {
    const std::size_t at = UseCaseOptions{}.event_at;
    {
        UseCaseOptions off;
        off.online_learning = false;
        const auto res = run_experiment(spec_for(UseCase::faults, off), iris());
        const std::size_t last = res.checkpoints() - 1;
        bool ok = true;
        std::string detail;
        for (SetId s : kSets) {
            const double before = res.mean(at, s);
            double best_after = 0.0;
            for (std::size_t c = at + 1; c <= last; ++c) best_after = std::max(best_after, res.mean(c, s));
            ok = ok && best_after < before;
            detail += to_string(s) + " " + pct(before) + "->" + pct(res.mean(at + 1, s)) + " (max after " +
                      pct(best_after) + ") ";
        }
        report("C4 faults, online off: persistent drop", ok, detail);
    }
    {
        const auto res = run_experiment(spec_for(UseCase::faults), iris());
        const double fg = gain(res, SetId::validation);
        const double cg = gain(limited_data_result(), SetId::validation);
        report("C4 faults, online on: final validation gain on par with fault-free",
               std::abs(fg - cg) <= kFaultGainTol, "+" + pct(fg) + " vs fault-free +" + pct(cg));
    }
}

void criterion_5() {
    {
        Randomizer rng(2024);
        bool ok = true;
        for (std::int32_t n : {1, 2, 100, 128}) {
            std::int32_t st = n - 1;
            for (std::size_t i = 0; i < 250000; ++i) {
                st = ta_transition(st, n, rng.bernoulli(0.5) ? TaEvent::reward : TaEvent::penalty);
                if (rng.bernoulli(0.3)) st = rng.bernoulli(0.5) ? step_toward_include(st, n) : step_toward_exclude(st);
                ok = ok && st >= 0 && st <= 2 * n - 1;
            }
        }
        report("C5 TA state bounds over 10^6 random events", ok, "N in {1,2,100,128}");
    }
    {
        bool ok = true;
        std::size_t cases = 0;
        for (std::size_t f = 1; f <= 5; ++f) {
            const std::uint32_t masks = 1U << f;
            for (std::uint32_t pos = 0; pos < masks; ++pos)
                for (std::uint32_t neg = 0; neg < masks; ++neg) {
                    std::vector<std::uint8_t> actions(2 * f);
                    for (std::size_t i = 0; i < f; ++i) {
                        actions[i] = (pos >> i) & 1U;
                        actions[f + i] = (neg >> i) & 1U;
                    }
                    for (std::uint32_t x = 0; x < masks; ++x) {
                        const auto lits = literals_of(oracle::unpack(x, f), f);
                        for (EvalMode mode : {EvalMode::learning, EvalMode::inference}) {
                            ++cases;
                            ok = ok && evaluate_clause(lits, actions, mode) ==
                                           oracle::clause_bitwise(x, pos, neg, mode == EvalMode::learning);
                        }
                    }
                }
        }
        report("C5 clause evaluation matches the bitwise AND oracle for F<=5", ok,
               std::to_string(cases) + " cases, all include patterns and inputs");
    }
    {
        const auto cfg = spec_for(UseCase::limited_data).tm;
        TsetlinMachine a(cfg), b(cfg);
        Randomizer ra(3), rb(3);
        FaultPlan plan(cfg.dims());
        plan.set_fault({1, 2, 3}, {false, true});
        plan.clear_all();
        bool ok = true;
        for (int e = 0; e < 3; ++e)
            for (const auto& dp : iris().points) {
                a.train_step(dp.features, dp.label, 1.375, ra);
                b.train_step(dp.features, dp.label, 1.375, rb, plan);
                ok = ok && a == b && a.classify(dp.features) == b.classify(dp.features, plan);
            }
        report("C5 fault-free plan is a pass-through", ok, "450 train steps, states and predictions equal");
    }
    {
        const auto store = partition_blocks(iris().points, 30);
        bool ok = true;
        for (const auto& ord : enumerate_orderings(5, 120)) {
            const auto s = materialize_sets(store, ord, {30, 60, 60});
            DataSet all = s.offline;
            all.insert(all.end(), s.validation.begin(), s.validation.end());
            all.insert(all.end(), s.online.begin(), s.online.end());
            std::multiset<std::pair<std::vector<std::uint8_t>, std::size_t>> got, want;
            for (const auto& dp : all) got.insert({dp.features, dp.label});
            for (const auto& dp : iris().points) want.insert({dp.features, dp.label});
            ok = ok && all.size() == 150 && got == want;
        }
        report("C5 materialize_sets partitions the data for all 120 orderings", ok, "");
    }
    {
        const auto spec = spec_for(UseCase::faults);
        const auto a = run_experiment(spec, iris());
        const auto b = run_experiment(spec, iris());
        bool ok = a.runs == b.runs;
        report("C5 repeated seeds give bit-identical histories", ok, "faults use case, 120 orderings");
    }
    {
        std::size_t solved = 0, solved4 = 0;
        for (std::uint64_t seed = 1; seed <= kXorSeeds; ++seed) {
            if (oracle::epochs_to_solve_xor(oracle::xor_config(seed, 10), kXorEpochs)) ++solved;
            if (oracle::epochs_to_solve_xor(oracle::xor_config(seed, 4), kXorEpochs)) ++solved4;
        }
        report("C5 XOR reaches 100% within 200 epochs", solved >= kXorMinSolved,
               std::to_string(solved) + "/" + std::to_string(kXorSeeds) +
                   " seeds with 10 clauses (4 clauses: " + std::to_string(solved4) + "/" +
                   std::to_string(kXorSeeds) + ")");
    }
}

void criterion_6() {
    const auto store = partition_blocks(iris().points, 30);
    const auto orderings = enumerate_orderings(store.num_blocks(), factorial_capped(store.num_blocks()));
    const std::set<Ordering> unique(orderings.begin(), orderings.end());
    report("C6 150 points / 30 gives 5 blocks and 120 orderings",
           iris().points.size() == 150 && store.num_blocks() == 5 && orderings.size() == 120 &&
               unique.size() == 120,
           std::to_string(store.num_blocks()) + " blocks, " + std::to_string(unique.size()) + " orderings");
}

void criterion_7() {
    auto spec = spec_for(UseCase::limited_data);
    const double single = seconds_of([&] { run_experiment(spec, iris()); });
    spec.workers = 8;
    const double eight = seconds_of([&] { run_experiment(spec, iris()); });
    const auto rep = bench(spec.tm, iris().points, 20);
    report("C7 full experiment, single thread", single < kSingleThreadSeconds, std::to_string(single) + " s");
    report("C7 full experiment, 8 workers", eight < kEightWorkerSeconds,
           std::to_string(eight) + " s on " + std::to_string(std::thread::hardware_concurrency()) +
               " hardware threads");
    std::printf("INFO bench: %.0f train steps/s, %.0f classifications/s (%zu classes x %zu clauses x %zu features)\n",
                rep.train_rate(), rep.classify_rate(), rep.classes, rep.clauses, rep.features);
}

}  // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
        criterion_6();
        criterion_7();
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 2;
    }
    std::printf("%d criterion line(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
