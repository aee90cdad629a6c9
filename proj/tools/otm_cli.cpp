// otm: run online-learning Tsetlin Machine experiments from the command line.
//
//   otm booleanize --raw data/iris.csv --bins 4 --shuffle-seed 7 --out iris.txt
//   otm run --dataset iris.txt --use-case limited_data --out-dir out/
//   otm search --dataset iris.txt --grid-clauses 8,16 --grid-T 10,15 --grid-s 1.375,2
//   otm bench --dataset iris.txt

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "otm/data.hpp"
#include "otm/errors.hpp"
#include "otm/experiment.hpp"
#include "otm/manager.hpp"

namespace {

struct MachineFlags {
    std::optional<std::size_t> clauses;
    std::optional<std::size_t> clauses_max;
    std::optional<std::int32_t> ta_states;
    std::optional<double> s_offline;
    std::optional<double> s_online;
    std::optional<std::int32_t> threshold;
    std::uint64_t seed = 1;
    std::uint64_t orderings = 120;
    std::size_t workers = 1;
    std::string feedback_table = "canonical";

    void add_to(CLI::App& app) {
        app.add_option("--clauses", clauses, "Active clauses per class (even)");
        app.add_option("--clauses-max", clauses_max, "Provisioned clauses per class (even)");
        app.add_option("--ta-states", ta_states, "TA states per action (N)");
        app.add_option("--s-offline", s_offline, "Sensitivity s for offline training");
        app.add_option("--s-online", s_online, "Sensitivity s for online training");
        app.add_option("--threshold", threshold, "Feedback threshold T");
        app.add_option("--seed", seed, "Master seed");
        app.add_option("--orderings", orderings, "Number of block orderings to run");
        app.add_option("--workers", workers, "Worker threads for orderings");
        app.add_option("--feedback-table", feedback_table, "canonical | boost_true_positive");
    }

    void apply(otm::ExperimentSpec& spec) const {
        spec.master_seed = seed;
        spec.orderings = orderings;
        spec.workers = workers;
        if (clauses) spec.tm.num_clauses_active = *clauses;
        if (clauses_max) spec.tm.num_clauses_max = *clauses_max;
        else if (clauses) spec.tm.num_clauses_max = *clauses;
        if (ta_states) spec.tm.ta_half_states = *ta_states;
        if (s_offline) spec.tm.s_offline = *s_offline;
        if (s_online) spec.tm.s_online = *s_online;
        if (threshold) spec.tm.threshold = *threshold;
        if (feedback_table == "canonical") spec.tm.feedback_table = otm::FeedbackTable::canonical;
        else if (feedback_table == "boost_true_positive")
            spec.tm.feedback_table = otm::FeedbackTable::boost_true_positive;
        else throw otm::ConfigError("unknown feedback table '" + feedback_table + "'");
    }
};

std::vector<std::size_t> parse_alloc(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        out.push_back(std::stoul(text.substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.size() != 3) throw otm::ConfigError("--alloc expects OFFLINE,VALIDATION,ONLINE");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online-learning Tsetlin Machine experiment runner"};
    app.require_subcommand(1);

    // booleanize
    auto* bool_cmd = app.add_subcommand("booleanize", "Quantile-threshold a raw CSV into a dataset file");
    std::string raw_path, bool_out;
    std::size_t bins = 4;
    std::optional<std::uint64_t> shuffle_seed;
    bool_cmd->add_option("--raw", raw_path, "CSV of real features with the label last")->required();
    bool_cmd->add_option("--bins", bins, "Thresholds per feature");
    bool_cmd->add_option("--shuffle-seed", shuffle_seed, "Permute rows with this seed after encoding");
    bool_cmd->add_option("--out", bool_out, "Output dataset file (stdout if omitted)");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run an experiment over block orderings");
    std::string dataset_path, use_case = "limited_data", out_dir, schedule_path, alloc_text;
    MachineFlags mflags;
    std::optional<std::size_t> offline_epochs, online_iterations, filter_class, offline_limit, introduce_at,
        block_len, checkpoint_every;
    std::vector<std::string> event_specs;
    std::optional<double> fault_fraction;
    std::string fault_kind = "stuck_at_0", online_learning = "on";
    bool no_introduce = false;
    std::optional<double> mitigate_below;
    std::optional<std::size_t> mitigate_clauses, mitigate_retrain;
    run_cmd->add_option("--dataset", dataset_path, "Canonical dataset file")->required();
    run_cmd->add_option("--use-case", use_case, "baseline | limited_data | new_class | faults | custom");
    mflags.add_to(*run_cmd);
    run_cmd->add_option("--offline-epochs", offline_epochs, "Offline training epochs");
    run_cmd->add_option("--online-iterations", online_iterations, "Online passes over the online set");
    run_cmd->add_option("--checkpoint-every", checkpoint_every, "Checkpoint every K online datapoints (0 = per iteration)");
    run_cmd->add_option("--online-learning", online_learning, "on | off");
    run_cmd->add_option("--schedule", schedule_path, "Schedule config file (key = value, event = ...)");
    run_cmd->add_option("--event", event_specs, "Extra event ITER:ACTION[:ARG...] (repeatable)");
    run_cmd->add_option("--fault-fraction", fault_fraction, "faults use case: fraction of TAs");
    run_cmd->add_option("--fault-kind", fault_kind, "stuck_at_0 | stuck_at_1");
    run_cmd->add_option("--filter-class", filter_class, "Withhold this class from all sets");
    run_cmd->add_option("--introduce-at", introduce_at, "Iteration of the class introduction / fault event");
    run_cmd->add_flag("--no-introduce", no_introduce, "new_class: keep the class filtered for the whole run");
    run_cmd->add_option("--offline-limit", offline_limit, "Use only the first N offline points");
    run_cmd->add_option("--alloc", alloc_text, "OFFLINE,VALIDATION,ONLINE set sizes");
    run_cmd->add_option("--block-len", block_len, "Block length (default: gcd of the allocation)");
    run_cmd->add_option("--mitigate-below", mitigate_below, "Mitigation threshold on offline accuracy");
    run_cmd->add_option("--mitigate-clauses", mitigate_clauses, "Clauses to enable when mitigating");
    run_cmd->add_option("--mitigate-retrain", mitigate_retrain, "Offline epochs of a full retrain when mitigating");
    run_cmd->add_option("--out-dir", out_dir, "Directory for curves.csv, runs.csv and raw/");

    // search
    auto* search_cmd = app.add_subcommand("search", "Grid search over clauses, T and s");
    std::string search_dataset, grid_out;
    MachineFlags sflags;
    std::vector<std::size_t> grid_clauses{16};
    std::vector<std::int32_t> grid_t{15};
    std::vector<double> grid_s{1.375};
    search_cmd->add_option("--dataset", search_dataset, "Canonical dataset file")->required();
    sflags.add_to(*search_cmd);
    search_cmd->add_option("--grid-clauses", grid_clauses, "Clause counts")->delimiter(',');
    search_cmd->add_option("--grid-T", grid_t, "Thresholds")->delimiter(',');
    search_cmd->add_option("--grid-s", grid_s, "Offline s values")->delimiter(',');
    search_cmd->add_option("--out", grid_out, "Ranked table CSV (stdout if omitted)");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Report train-step and classification throughput");
    std::string bench_dataset;
    MachineFlags bflags;
    std::size_t passes = 200;
    bench_cmd->add_option("--dataset", bench_dataset, "Canonical dataset file")->required();
    bflags.add_to(*bench_cmd);
    bench_cmd->add_option("--passes", passes, "Passes over the dataset");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bool_cmd) {
            const auto table = otm::load_raw_csv(raw_path);
            const auto ds = otm::booleanize_table(table, bins, shuffle_seed);
            if (bool_out.empty()) {
                otm::write_dataset(ds, std::cout);
            } else {
                std::ofstream f(bool_out, std::ios::binary);
                if (!f) throw otm::InputError("cannot write '" + bool_out + "'");
                otm::write_dataset(ds, f);
            }
            return 0;
        }

        if (*run_cmd) {
            const auto dataset = otm::load_dataset(dataset_path);
            auto spec = otm::default_spec(dataset);
            mflags.apply(spec);
            if (!alloc_text.empty()) {
                const auto a = parse_alloc(alloc_text);
                spec.alloc = {a[0], a[1], a[2]};
            }
            if (block_len) spec.block_len = *block_len;
            if (!schedule_path.empty())
                spec.schedule = otm::load_schedule(schedule_path, spec.tm.dims(), spec.master_seed);
            if (offline_epochs) spec.schedule.offline_epochs = *offline_epochs;
            if (online_iterations) spec.schedule.online_iterations = *online_iterations;
            if (checkpoint_every) spec.schedule.checkpoint_every = *checkpoint_every;

            otm::UseCaseOptions opt;
            opt.online_learning = online_learning == "on" || online_learning == "true";
            if (introduce_at) opt.event_at = *introduce_at;
            if (no_introduce) opt.introduce_class.reset();
            if (filter_class) {
                opt.withheld_class = *filter_class;
                if (!no_introduce) opt.introduce_class = *filter_class;
            }
            if (fault_fraction) opt.fault_fraction = *fault_fraction;
            opt.fault_kind = otm::parse_fault_kind(fault_kind);
            const auto uc = otm::parse_use_case(use_case);
            otm::apply_use_case(spec, uc, opt);
            if (uc == otm::UseCase::custom) {
                spec.schedule.online_learning = opt.online_learning;
                if (filter_class) spec.schedule.filter_class = *filter_class;
            }
            if (offline_limit) spec.offline_limit = *offline_limit;
            for (const auto& e : event_specs)
                spec.schedule.events.push_back(otm::parse_event(e, spec.tm.dims(), spec.master_seed));
            if (mitigate_below) spec.mitigation = otm::MitigationPolicy{*mitigate_below, mitigate_clauses, mitigate_retrain};

            const auto t0 = std::chrono::steady_clock::now();
            const auto result = otm::run_experiment(spec, dataset);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            if (!out_dir.empty()) otm::write_experiment_outputs(spec, result, out_dir);
            otm::write_curve_csv(result.curve, std::cout);
            std::cerr << "ran " << result.runs.size() << " orderings in " << secs << " s\n";
            return 0;
        }

        if (*search_cmd) {
            const auto dataset = otm::load_dataset(search_dataset);
            auto spec = otm::default_spec(dataset);
            sflags.apply(spec);
            otm::apply_use_case(spec, otm::UseCase::baseline);
            const auto grid = otm::make_grid(grid_clauses, grid_t, grid_s);
            const auto results = otm::hyperparam_search(grid, spec, dataset);
            if (grid_out.empty()) {
                otm::write_grid_csv(results, std::cout);
            } else {
                std::ofstream f(grid_out, std::ios::binary);
                otm::write_grid_csv(results, f);
            }
            return 0;
        }

        if (*bench_cmd) {
            const auto dataset = otm::load_dataset(bench_dataset);
            auto spec = otm::default_spec(dataset);
            bflags.apply(spec);
            spec.tm.rng_seed = spec.master_seed;
            const auto rep = otm::bench(spec.tm, dataset.points, passes);
            std::cout << "machine: classes=" << rep.classes << " clauses=" << rep.clauses
                      << " features=" << rep.features << " ta_states=" << spec.tm.ta_half_states << "\n"
                      << "train_steps=" << rep.train_steps << " train_steps_per_s=" << rep.train_rate() << "\n"
                      << "classifications=" << rep.classifications
                      << " classifications_per_s=" << rep.classify_rate() << "\n"
                      << "correct=" << rep.correct << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "otm: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
