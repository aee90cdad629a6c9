#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "otm/data.hpp"
#include "otm/fault.hpp"
#include "otm/randomizer.hpp"
#include "otm/tsetlin.hpp"

namespace otm {

enum class SetId : std::uint8_t { offline, validation, online };

std::string to_string(SetId set);
SetId parse_set_id(std::string_view text);

// ---- runtime interventions -------------------------------------------------

// Activates the class bank and lifts the data filter if it targets this class.
struct EnableClass {
    std::size_t class_id = 0;
};
struct DisableClassFilter {};
struct InjectFaultPlan {
    FaultPlan plan;
    std::string origin;  // how the plan was produced, for the event log
};
struct SetActiveClauses {
    std::size_t count = 0;
};
// Sets the s used for online training.
struct SetSensitivity {
    double value = 1.0;
};
struct SetThreshold {
    std::int32_t value = 1;
};
struct EnableOnlineLearning {
    bool enabled = true;
};
// Resets every TA and re-runs offline training on the (filtered) offline set.
struct FullRetrain {
    std::size_t epochs = 0;
};

using EventAction = std::variant<EnableClass, DisableClassFilter, InjectFaultPlan, SetActiveClauses,
                                 SetSensitivity, SetThreshold, EnableOnlineLearning, FullRetrain>;

struct Event {
    // Fires before the training pass of this (0-based) online iteration, i.e.
    // after that many iterations have completed.
    std::size_t at_online_iteration = 0;
    EventAction action;
};

std::string describe(const Event& event);

// Event grammar: ITER:ACTION[:ARG...]
//   5:enable_class:0        5:disable_class_filter     5:clauses:16
//   5:s:1.5                 5:T:10                     5:online:on|off
//   5:retrain:10            5:faults:plan.csv
//   5:faults:0.2:stuck_at_0[:seed]
// Fault plans are sized for `dims`; `fault_seed` is used when none is given.
Event parse_event(std::string_view spec, const MachineDims& dims, std::uint64_t fault_seed = 1);

// ---- schedule --------------------------------------------------------------

struct Schedule {
    std::size_t offline_epochs = 10;
    std::size_t online_iterations = 16;
    // 0 = checkpoint after every online iteration; K > 0 = after every K
    // online datapoints consumed.
    std::size_t checkpoint_every = 0;
    std::vector<SetId> sets_to_analyze{SetId::offline, SetId::validation, SetId::online};
    bool online_learning = true;
    std::optional<std::size_t> filter_class;
    std::size_t buffer_capacity = 16;
    std::vector<Event> events;

    // Throws ScheduleError for anything the machine could not honor.
    void validate(const TsetlinMachine& machine) const;
};

// key = value lines, '#' comments, repeatable `event = <event grammar>`.
Schedule parse_schedule(std::istream& in, const MachineDims& dims, std::uint64_t fault_seed = 1,
                        const std::string& source = "<schedule>");
Schedule load_schedule(const std::string& path, const MachineDims& dims, std::uint64_t fault_seed = 1);

// ---- accuracy history ------------------------------------------------------

struct AccuracyRecord {
    SetId set = SetId::offline;
    std::size_t errors = 0;
    std::size_t total = 0;
    std::size_t online_iteration = 0;

    double accuracy() const noexcept {
        return total ? 1.0 - static_cast<double>(errors) / static_cast<double>(total) : 0.0;
    }
    friend bool operator==(const AccuracyRecord&, const AccuracyRecord&) = default;
};

struct Checkpoint {
    std::size_t index = 0;
    std::size_t online_iteration = 0;  // completed online iterations
    std::size_t datapoints_seen = 0;   // online datapoints consumed so far
    std::vector<AccuracyRecord> records;

    const AccuracyRecord* find(SetId set) const noexcept;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct LoggedEvent {
    std::size_t at_online_iteration = 0;
    std::size_t after_checkpoint = 0;
    std::string description;
    bool from_policy = false;
    friend bool operator==(const LoggedEvent&, const LoggedEvent&) = default;
};

struct RunHistory {
    std::size_t ordering_id = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<Checkpoint> checkpoints;
    std::vector<LoggedEvent> events;
    std::size_t train_steps = 0;
    std::size_t dropped = 0;

    double accuracy(std::size_t checkpoint, SetId set) const;
    friend bool operator==(const RunHistory&, const RunHistory&) = default;
};

// ---- execution -------------------------------------------------------------

// `epochs` passes over `set` in stored order. Returns train steps issued.
std::size_t run_offline_training(TsetlinMachine& machine, const DataSet& set, std::size_t epochs,
                                 double s, Randomizer& rng, const FaultPlan& plan = {});

// Pure: counts misclassifications with faults active.
AccuracyRecord analyze_accuracy(const TsetlinMachine& machine, const DataSet& set, SetId set_id,
                                const FaultPlan& plan = {}, std::size_t online_iteration = 0);

// Mutable state a schedule acts on between online iterations.
struct SystemState {
    TsetlinMachine machine;
    FaultPlan faults;
    bool online_learning = true;
    std::optional<std::size_t> filter_class;
};

// Applies one intervention. `offline` and `rng` are only consulted by
// FullRetrain. Returns the train steps issued.
std::size_t apply_event(const Event& event, SystemState& system, const DataSet& offline,
                        Randomizer& rng);

struct MitigationPolicy {
    double threshold = 0.0;  // offline-set accuracy below this triggers
    std::optional<std::size_t> enable_clauses;
    std::optional<std::size_t> retrain_epochs;
};

// Events to schedule when the latest checkpoint's offline-set accuracy is
// below the threshold; empty otherwise. Throws AnalysisError on an empty history.
std::vector<Event> mitigation_policy(const RunHistory& history, const MitigationPolicy& policy);

// Offline training, initial checkpoint, then online iterations with events,
// training through the cyclic buffer and checkpoints. A mitigation policy, if
// given, is consulted after each checkpoint and fires at most once.
RunHistory run_schedule(const Schedule& schedule, TsetlinMachine machine, const SetTriple& sets,
                        const FaultPlan& faults, Randomizer& rng,
                        const std::optional<MitigationPolicy>& policy = std::nullopt);

// ---- export ----------------------------------------------------------------

void write_history_csv_header(std::ostream& out);
// ordering,checkpoint,set,errors,total,accuracy
void write_history_csv(const RunHistory& history, std::ostream& out);
std::string history_json(const RunHistory& history);

std::string format_accuracy(double value);

}  // namespace otm
