#include "otm/manager.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "otm/errors.hpp"

namespace otm {

std::string to_string(SetId set) {
    switch (set) {
        case SetId::offline: return "offline";
        case SetId::validation: return "validation";
        case SetId::online: return "online";
    }
    return "?";
}

SetId parse_set_id(std::string_view text) {
    if (text == "offline") return SetId::offline;
    if (text == "validation") return SetId::validation;
    if (text == "online") return SetId::online;
    throw ConfigError("unknown set '" + std::string(text) + "'");
}

std::string format_accuracy(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

namespace {

std::string format_real(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string> split_colon(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(':', start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("bad " + what + " '" + text + "'");
    return value;
}

bool parse_flag(const std::string& text) {
    if (text == "on" || text == "true" || text == "1" || text == "yes") return true;
    if (text == "off" || text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("expected on/off, got '" + text + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string describe(const Event& event) {
    std::ostringstream out;
    out << event.at_online_iteration << ':';
    std::visit(overloaded{
                   [&](const EnableClass& a) { out << "enable_class:" << a.class_id; },
                   [&](const DisableClassFilter&) { out << "disable_class_filter"; },
                   [&](const InjectFaultPlan& a) {
                       out << "faults:" << a.origin << " (" << a.plan.fault_count() << " TAs)";
                   },
                   [&](const SetActiveClauses& a) { out << "clauses:" << a.count; },
                   [&](const SetSensitivity& a) { out << "s:" << format_real(a.value); },
                   [&](const SetThreshold& a) { out << "T:" << a.value; },
                   [&](const EnableOnlineLearning& a) { out << "online:" << (a.enabled ? "on" : "off"); },
                   [&](const FullRetrain& a) { out << "retrain:" << a.epochs; },
               },
               event.action);
    return out.str();
}

Event parse_event(std::string_view spec, const MachineDims& dims, std::uint64_t fault_seed) {
    const auto parts = split_colon(spec);
    if (parts.size() < 2) throw ConfigError("event '" + std::string(spec) + "' needs ITER:ACTION");
    Event ev;
    ev.at_online_iteration = parse_number<std::size_t>(parts[0], "event iteration");
    const std::string& action = parts[1];
    auto need = [&](std::size_t n) {
        if (parts.size() != n)
            throw ConfigError("event '" + std::string(spec) + "' has the wrong number of arguments");
    };

    if (action == "enable_class") {
        need(3);
        ev.action = EnableClass{parse_number<std::size_t>(parts[2], "class id")};
    } else if (action == "disable_class_filter") {
        need(2);
        ev.action = DisableClassFilter{};
    } else if (action == "clauses") {
        need(3);
        ev.action = SetActiveClauses{parse_number<std::size_t>(parts[2], "clause count")};
    } else if (action == "s") {
        need(3);
        ev.action = SetSensitivity{parse_number<double>(parts[2], "s value")};
    } else if (action == "T") {
        need(3);
        ev.action = SetThreshold{parse_number<std::int32_t>(parts[2], "threshold")};
    } else if (action == "online") {
        need(3);
        ev.action = EnableOnlineLearning{parse_flag(parts[2])};
    } else if (action == "retrain") {
        need(3);
        ev.action = FullRetrain{parse_number<std::size_t>(parts[2], "epoch count")};
    } else if (action == "faults") {
        if (parts.size() == 3) {
            ev.action = InjectFaultPlan{load_fault_plan_file(parts[2], dims), parts[2]};
        } else if (parts.size() == 4 || parts.size() == 5) {
            const double fraction = parse_number<double>(parts[2], "fault fraction");
            const FaultKind kind = parse_fault_kind(parts[3]);
            const std::uint64_t seed =
                parts.size() == 5 ? parse_number<std::uint64_t>(parts[4], "fault seed") : fault_seed;
            ev.action = InjectFaultPlan{generate_even_spread_plan(fraction, kind, dims, seed),
                                        parts[2] + ":" + to_string(kind) + ":" + std::to_string(seed)};
        } else {
            throw ConfigError("faults event takes a plan file or FRACTION:KIND[:SEED]");
        }
    } else {
        throw ConfigError("unknown event action '" + action + "'");
    }
    return ev;
}

void Schedule::validate(const TsetlinMachine& machine) const {
    const TMConfig& cfg = machine.config();
    if (sets_to_analyze.empty()) throw ScheduleError("no sets to analyze");
    if (buffer_capacity == 0) throw ScheduleError("buffer capacity must be at least 1");
    if (filter_class && *filter_class >= cfg.num_classes_max)
        throw ScheduleError("filter class " + std::to_string(*filter_class) + " out of range");
    for (const auto& ev : events) {
        const std::string where = "event '" + describe(ev) + "': ";
        if (ev.at_online_iteration >= online_iterations)
            throw ScheduleError(where + "fires after the last online iteration");
        std::visit(overloaded{
                       [&](const EnableClass& a) {
                           if (a.class_id >= cfg.num_classes_max)
                               throw ScheduleError(where + "class id out of range");
                       },
                       [&](const DisableClassFilter&) {},
                       [&](const InjectFaultPlan& a) {
                           if (!a.plan.compatible_with(cfg.dims()))
                               throw ScheduleError(where + "fault plan dimensions do not match");
                       },
                       [&](const SetActiveClauses& a) {
                           if (a.count == 0 || a.count % 2 || a.count > cfg.num_clauses_max)
                               throw ScheduleError(where + "invalid clause count");
                       },
                       [&](const SetSensitivity& a) {
                           if (!(a.value >= 1.0)) throw ScheduleError(where + "s must be >= 1");
                       },
                       [&](const SetThreshold& a) {
                           if (a.value < 1) throw ScheduleError(where + "T must be >= 1");
                       },
                       [&](const EnableOnlineLearning&) {},
                       [&](const FullRetrain&) {},
                   },
                   ev.action);
    }
}

Schedule parse_schedule(std::istream& in, const MachineDims& dims, std::uint64_t fault_seed,
                        const std::string& source) {
    Schedule sched;
    sched.events.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "offline_epochs") {
                sched.offline_epochs = parse_number<std::size_t>(value, key);
            } else if (key == "online_iterations") {
                sched.online_iterations = parse_number<std::size_t>(value, key);
            } else if (key == "checkpoint_every") {
                sched.checkpoint_every = parse_number<std::size_t>(value, key);
            } else if (key == "buffer_capacity") {
                sched.buffer_capacity = parse_number<std::size_t>(value, key);
            } else if (key == "online_learning") {
                sched.online_learning = parse_flag(value);
            } else if (key == "filter_class") {
                if (value == "none") sched.filter_class.reset();
                else sched.filter_class = parse_number<std::size_t>(value, key);
            } else if (key == "analyze") {
                sched.sets_to_analyze.clear();
                std::stringstream ss(value);
                for (std::string item; std::getline(ss, item, ',');)
                    sched.sets_to_analyze.push_back(parse_set_id(trim(item)));
            } else if (key == "event") {
                sched.events.push_back(parse_event(value, dims, fault_seed));
            } else {
                throw ConfigError("unknown key '" + key + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source, lineno, e.what());
        }
    }
    return sched;
}

Schedule load_schedule(const std::string& path, const MachineDims& dims, std::uint64_t fault_seed) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open schedule '" + path + "'");
    return parse_schedule(in, dims, fault_seed, path);
}

const AccuracyRecord* Checkpoint::find(SetId set) const noexcept {
    for (const auto& r : records)
        if (r.set == set) return &r;
    return nullptr;
}

double RunHistory::accuracy(std::size_t checkpoint, SetId set) const {
    const auto* rec = checkpoints.at(checkpoint).find(set);
    if (!rec) throw QueryError("set " + to_string(set) + " was not analyzed");
    return rec->accuracy();
}

std::size_t run_offline_training(TsetlinMachine& machine, const DataSet& set, std::size_t epochs,
                                 double s, Randomizer& rng, const FaultPlan& plan) {
    if (set.empty()) throw ScheduleError("offline training set is empty");
    for (std::size_t e = 0; e < epochs; ++e)
        for (const auto& dp : set) machine.train_step(dp.features, dp.label, s, rng, plan);
    return epochs * set.size();
}

AccuracyRecord analyze_accuracy(const TsetlinMachine& machine, const DataSet& set, SetId set_id,
                                const FaultPlan& plan, std::size_t online_iteration) {
    if (set.empty()) throw AnalysisError("cannot analyze empty " + to_string(set_id) + " set");
    AccuracyRecord rec{set_id, 0, set.size(), online_iteration};
    for (const auto& dp : set)
        if (machine.classify(dp.features, plan) != dp.label) ++rec.errors;
    return rec;
}

std::size_t apply_event(const Event& event, SystemState& sys, const DataSet& offline, Randomizer& rng) {
    std::size_t steps = 0;
    std::visit(overloaded{
                   [&](const EnableClass& a) {
                       auto mask = sys.machine.config().class_active_mask;
                       mask.at(a.class_id) = true;
                       sys.machine.set_active_classes(mask);
                       if (sys.filter_class == a.class_id) sys.filter_class.reset();
                   },
                   [&](const DisableClassFilter&) { sys.filter_class.reset(); },
                   [&](const InjectFaultPlan& a) {
                       if (!a.plan.compatible_with(sys.machine.config().dims()))
                           throw ScheduleError("fault plan dimensions do not match the machine");
                       sys.faults = a.plan;
                   },
                   [&](const SetActiveClauses& a) { sys.machine.set_active_clauses(a.count); },
                   [&](const SetSensitivity& a) {
                       sys.machine.set_s(sys.machine.config().s_offline, a.value);
                   },
                   [&](const SetThreshold& a) { sys.machine.set_threshold(a.value); },
                   [&](const EnableOnlineLearning& a) { sys.online_learning = a.enabled; },
                   [&](const FullRetrain& a) {
                       sys.machine.reset_states();
                       const DataSet view =
                           sys.filter_class ? filter_class(offline, *sys.filter_class, true) : offline;
                       steps = run_offline_training(sys.machine, view, a.epochs,
                                                    sys.machine.config().s_offline, rng, sys.faults);
                   },
               },
               event.action);
    return steps;
}

std::vector<Event> mitigation_policy(const RunHistory& history, const MitigationPolicy& policy) {
    if (history.checkpoints.empty()) throw AnalysisError("mitigation policy needs a checkpoint");
    const Checkpoint& last = history.checkpoints.back();
    const AccuracyRecord* rec = last.find(SetId::offline);
    if (!rec || !(rec->accuracy() < policy.threshold)) return {};

    std::vector<Event> out;
    const std::size_t at = last.online_iteration;
    if (policy.enable_clauses) out.push_back({at, SetActiveClauses{*policy.enable_clauses}});
    if (policy.retrain_epochs) out.push_back({at, FullRetrain{*policy.retrain_epochs}});
    return out;
}

RunHistory run_schedule(const Schedule& schedule, TsetlinMachine machine, const SetTriple& sets,
                        const FaultPlan& faults, Randomizer& rng,
                        const std::optional<MitigationPolicy>& policy) {
    schedule.validate(machine);
    if (!faults.compatible_with(machine.config().dims()))
        throw ScheduleError("fault plan dimensions do not match the machine");
    for (SetId id : schedule.sets_to_analyze) {
        const DataSet& s = id == SetId::offline ? sets.offline
                           : id == SetId::validation ? sets.validation : sets.online;
        if (s.empty()) throw ScheduleError(to_string(id) + " set is empty but scheduled for analysis");
    }

    SystemState sys{std::move(machine), faults, schedule.online_learning, schedule.filter_class};

    RunHistory history;
    history.seed = rng.seed();
    const TMConfig& cfg = sys.machine.config();
    history.config_echo = {
        {"classes_max", std::to_string(cfg.num_classes_max)},
        {"clauses_max", std::to_string(cfg.num_clauses_max)},
        {"clauses_active", std::to_string(cfg.num_clauses_active)},
        {"features", std::to_string(cfg.num_features)},
        {"half_states", std::to_string(cfg.ta_half_states)},
        {"s_offline", format_real(cfg.s_offline)},
        {"s_online", format_real(cfg.s_online)},
        {"threshold", std::to_string(cfg.threshold)},
        {"offline_epochs", std::to_string(schedule.offline_epochs)},
        {"online_iterations", std::to_string(schedule.online_iterations)},
        {"checkpoint_every", std::to_string(schedule.checkpoint_every)},
        {"online_learning", schedule.online_learning ? "on" : "off"},
        {"filter_class", schedule.filter_class ? std::to_string(*schedule.filter_class) : "none"},
        {"analysis_view", "filtered"},
        {"offline_size", std::to_string(sets.offline.size())},
        {"validation_size", std::to_string(sets.validation.size())},
        {"online_size", std::to_string(sets.online.size())},
    };

    SetTriple view;
    auto refresh_view = [&] {
        if (sys.filter_class) {
            view.offline = filter_class(sets.offline, *sys.filter_class, true);
            view.validation = filter_class(sets.validation, *sys.filter_class, true);
            view.online = filter_class(sets.online, *sys.filter_class, true);
        } else {
            view = sets;
        }
    };
    auto view_of = [&](SetId id) -> const DataSet& {
        return id == SetId::offline ? view.offline : id == SetId::validation ? view.validation : view.online;
    };

    std::size_t completed = 0;
    std::size_t seen = 0;
    auto checkpoint = [&] {
        Checkpoint cp{history.checkpoints.size(), completed, seen, {}};
        for (SetId id : schedule.sets_to_analyze)
            cp.records.push_back(analyze_accuracy(sys.machine, view_of(id), id, sys.faults, completed));
        history.checkpoints.push_back(std::move(cp));
    };

    refresh_view();
    history.train_steps += run_offline_training(sys.machine, view.offline, schedule.offline_epochs,
                                                cfg.s_offline, rng, sys.faults);
    checkpoint();

    std::vector<Event> pending = schedule.events;
    std::stable_sort(pending.begin(), pending.end(), [](const Event& a, const Event& b) {
        return a.at_online_iteration < b.at_online_iteration;
    });
    std::vector<Event> policy_events;
    bool policy_fired = false;
    auto consult_policy = [&] {
        if (!policy || policy_fired) return;
        auto evs = mitigation_policy(history, *policy);
        if (evs.empty()) return;
        policy_fired = true;
        for (auto& ev : evs) policy_events.push_back(std::move(ev));
    };
    consult_policy();

    CyclicBuffer<Datapoint> buffer(schedule.buffer_capacity);
    std::size_t next_event = 0;

    for (std::size_t it = 0; it < schedule.online_iterations; ++it) {
        bool changed = false;
        auto fire = [&](const Event& ev, bool from_policy) {
            history.train_steps += apply_event(ev, sys, sets.offline, rng);
            history.events.push_back({it, history.checkpoints.size() - 1, describe(ev), from_policy});
            changed = true;
        };
        while (next_event < pending.size() && pending[next_event].at_online_iteration == it)
            fire(pending[next_event++], false);
        for (const auto& ev : policy_events) fire(ev, true);
        policy_events.clear();
        if (changed) refresh_view();

        // Online source -> cyclic buffer -> manager.
        const DataSet& stream = view.online;
        std::size_t produced = 0;
        while (produced < stream.size()) {
            while (produced < stream.size() && !buffer.full()) buffer.push(stream[produced++]);
            while (auto dp = buffer.pop()) {
                if (sys.online_learning) {
                    sys.machine.train_step(dp->features, dp->label, sys.machine.config().s_online, rng,
                                           sys.faults);
                    ++history.train_steps;
                }
                ++seen;
                if (schedule.checkpoint_every && seen % schedule.checkpoint_every == 0) {
                    checkpoint();
                    consult_policy();
                }
            }
        }
        ++completed;
        if (!schedule.checkpoint_every) {
            checkpoint();
            consult_policy();
        }
    }
    history.dropped = buffer.dropped_count();
    return history;
}

void write_history_csv_header(std::ostream& out) {
    out << "ordering,checkpoint,set,errors,total,accuracy\n";
}

void write_history_csv(const RunHistory& history, std::ostream& out) {
    for (const auto& cp : history.checkpoints)
        for (const auto& r : cp.records)
            out << history.ordering_id << ',' << cp.index << ',' << to_string(r.set) << ',' << r.errors
                << ',' << r.total << ',' << format_accuracy(r.accuracy()) << '\n';
}

std::string history_json(const RunHistory& history) {
    nlohmann::ordered_json j;
    j["ordering"] = history.ordering_id;
    j["seed"] = history.seed;
    auto& cfg = j["config"];
    cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : history.config_echo) cfg[k] = v;
    auto& evs = j["events"];
    evs = nlohmann::ordered_json::array();
    for (const auto& e : history.events) {
        evs.push_back({{"online_iteration", e.at_online_iteration},
                       {"after_checkpoint", e.after_checkpoint},
                       {"action", e.description},
                       {"source", e.from_policy ? "policy" : "schedule"}});
    }
    j["train_steps"] = history.train_steps;
    j["dropped"] = history.dropped;
    j["checkpoints"] = history.checkpoints.size();
    return j.dump(2) + "\n";
}

}  // namespace otm
