#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "otm/data.hpp"
#include "otm/manager.hpp"
#include "otm/tsetlin.hpp"

namespace otm {

enum class UseCase { baseline, limited_data, new_class, faults, custom };

std::string to_string(UseCase use_case);
UseCase parse_use_case(const std::string& text);

struct ExperimentSpec {
    UseCase use_case = UseCase::custom;
    TMConfig tm;
    Schedule schedule;
    SetAllocation alloc{30, 60, 60};
    std::size_t block_len = 0;                // 0 = gcd of the allocation
    std::optional<std::size_t> offline_limit;  // use only the first N offline points
    std::uint64_t orderings = 120;
    std::uint64_t master_seed = 1;
    std::optional<MitigationPolicy> mitigation;
    std::size_t workers = 1;
};

// Knobs the presets read; everything else comes from ExperimentSpec defaults.
struct UseCaseOptions {
    bool online_learning = true;
    std::size_t event_at = 5;          // class introduction / fault injection iteration
    std::optional<std::size_t> introduce_class = 0;  // new_class: nullopt keeps it filtered
    std::size_t withheld_class = 0;
    double fault_fraction = 0.2;
    FaultKind fault_kind = FaultKind::stuck_at_0;
    std::optional<std::uint64_t> fault_seed;  // defaults to the master seed
};

// Iris-scale defaults shared by every use case: 16 clauses, s 1.375 offline
// and 1 online, T 15, 10 offline epochs, 16 online iterations, 120 orderings.
ExperimentSpec default_spec(const Dataset& dataset);

// Rewrites `spec` for a use case. Requires spec.tm sized for the dataset.
void apply_use_case(ExperimentSpec& spec, UseCase use_case, const UseCaseOptions& options = {});

struct CurvePoint {
    std::size_t checkpoint = 0;
    SetId set = SetId::offline;
    std::size_t orderings = 0;
    double mean_accuracy = 0.0;
};

struct ExperimentResult {
    std::vector<RunHistory> runs;  // indexed by ordering id
    std::vector<CurvePoint> curve;

    double mean(std::size_t checkpoint, SetId set) const;
    std::size_t checkpoints() const;
};

// Arithmetic mean per (checkpoint, set) over runs.
std::vector<CurvePoint> aggregate(const std::vector<RunHistory>& runs);

// One schedule run for a single ordering; the building block of run_experiment.
RunHistory run_ordering(const ExperimentSpec& spec, const BlockStore& store, const Ordering& ordering,
                        std::size_t ordering_id);

// Fans the orderings over spec.workers threads. Errors are rethrown with the
// ordering id prepended.
ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& dataset);

// curves.csv, runs.csv, experiment.json and raw/ordering_<id>.{csv,json}.
void write_experiment_outputs(const ExperimentSpec& spec, const ExperimentResult& result,
                              const std::filesystem::path& out_dir);
void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out);

struct GridPoint {
    std::size_t clauses = 16;
    std::int32_t threshold = 15;
    double s = 1.375;
};

struct GridResult {
    GridPoint point;
    double mean_validation = 0.0;
    double mean_offline = 0.0;
};

std::vector<GridPoint> make_grid(const std::vector<std::size_t>& clauses,
                                 const std::vector<std::int32_t>& thresholds,
                                 const std::vector<double>& s_values);

// Runs `base` (offline training + initial analysis) at every grid point and
// ranks by mean validation accuracy, then fewer clauses, then lower T.
std::vector<GridResult> hyperparam_search(const std::vector<GridPoint>& grid, const ExperimentSpec& base,
                                          const Dataset& dataset);
void write_grid_csv(const std::vector<GridResult>& results, std::ostream& out);

struct BenchReport {
    std::size_t classes = 0;
    std::size_t clauses = 0;
    std::size_t features = 0;
    std::size_t train_steps = 0;
    std::size_t classifications = 0;
    double train_seconds = 0.0;
    double classify_seconds = 0.0;
    std::size_t correct = 0;  // deterministic for a fixed seed

    double train_rate() const { return train_seconds > 0 ? train_steps / train_seconds : 0.0; }
    double classify_rate() const { return classify_seconds > 0 ? classifications / classify_seconds : 0.0; }
};

// Trains for `passes` epochs over the dataset, then classifies it `passes` times.
BenchReport bench(const TMConfig& config, const DataSet& data, std::size_t passes);

}  // namespace otm
