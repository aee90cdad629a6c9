#include "otm/tsetlin.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "otm/errors.hpp"

namespace otm {

void TMConfig::validate() const {
    if (num_classes_max == 0) throw ConfigError("num_classes_max must be at least 1");
    if (num_features == 0) throw ConfigError("num_features must be at least 1");
    if (num_clauses_max == 0 || num_clauses_max % 2 != 0)
        throw ConfigError("num_clauses_max must be a positive even number");
    if (num_clauses_active == 0 || num_clauses_active % 2 != 0 ||
        num_clauses_active > num_clauses_max)
        throw ConfigError("num_clauses_active must be even and in (0, num_clauses_max]");
    if (ta_half_states < 1) throw ConfigError("ta_half_states must be at least 1");
    if (!(s_offline >= 1.0) || !(s_online >= 1.0)) throw ConfigError("s must be >= 1");
    if (threshold < 1) throw ConfigError("threshold T must be >= 1");
    if (class_active_mask.size() != num_classes_max)
        throw ConfigError("class_active_mask length must equal num_classes_max");
    bool any = false;
    for (bool b : class_active_mask) any = any || b;
    if (!any) throw ConfigError("class_active_mask must enable at least one class");
}

std::int32_t ta_transition(std::int32_t state, std::int32_t half_states, TaEvent event) noexcept {
    const bool include = ta_action(state, half_states) == TaAction::include;
    const bool deeper_include = (event == TaEvent::reward) == include;
    return deeper_include ? step_toward_include(state, half_states) : step_toward_exclude(state);
}

std::vector<std::uint8_t> literals_of(std::span<const std::uint8_t> features,
                                      std::size_t num_features) {
    if (features.size() != num_features) {
        throw InputError("datapoint has " + std::to_string(features.size()) +
                         " features, machine expects " + std::to_string(num_features));
    }
    std::vector<std::uint8_t> out(2 * num_features);
    for (std::size_t i = 0; i < num_features; ++i) {
        out[i] = features[i] ? 1 : 0;
        out[num_features + i] = features[i] ? 0 : 1;
    }
    return out;
}

bool evaluate_clause(std::span<const std::uint8_t> literals, std::span<const std::uint8_t> includes,
                     EvalMode mode) {
    if (literals.size() != includes.size()) throw InputError("literal/include width mismatch");
    bool any_included = false;
    for (std::size_t k = 0; k < literals.size(); ++k) {
        if (!includes[k]) continue;
        any_included = true;
        if (!literals[k]) return false;
    }
    return any_included || mode == EvalMode::learning;
}

double feedback_probability(ClassSum v, std::int32_t threshold, FeedbackRole role) noexcept {
    const double t = threshold;
    const double c = v.clamped(threshold);
    return role == FeedbackRole::target ? (t - c) / (2.0 * t) : (t + c) / (2.0 * t);
}

void apply_type1(ClauseTeam& clause, std::span<const std::uint8_t> literals, bool clause_output,
                 double s, std::int32_t half_states, Randomizer& rng, FeedbackTable table) {
    const double weaken = 1.0 / s;
    const double strengthen = table == FeedbackTable::boost_true_positive ? 1.0 : (s - 1.0) / s;
    auto& states = clause.ta_states;
    if (clause_output) {
        for (std::size_t k = 0; k < states.size(); ++k) {
            if (literals[k]) {
                if (rng.bernoulli(strengthen)) states[k] = step_toward_include(states[k], half_states);
            } else if (rng.bernoulli(weaken)) {
                states[k] = step_toward_exclude(states[k]);
            }
        }
    } else {
        for (auto& st : states)
            if (rng.bernoulli(weaken)) st = step_toward_exclude(st);
    }
}

void apply_type2(ClauseTeam& clause, std::span<const std::uint8_t> literals, bool clause_output,
                 std::int32_t half_states, const FaultMask* masks) {
    if (!clause_output) return;
    auto& states = clause.ta_states;
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (literals[k]) continue;
        bool action = ta_action(states[k], half_states) == TaAction::include;
        if (masks) action = apply_mask(action, masks[k]);
        if (!action) states[k] = step_toward_include(states[k], half_states);
    }
}

TsetlinMachine::TsetlinMachine(TMConfig config) : config_(std::move(config)) {
    config_.validate();
    banks_.resize(config_.num_classes_max);
    for (auto& bank : banks_) {
        bank.resize(config_.num_clauses_max);
        for (std::size_t j = 0; j < bank.size(); ++j) bank[j].polarity = polarity_of(j);
    }
    reset_states();
}

void TsetlinMachine::reset_states() {
    for (auto& bank : banks_)
        for (auto& clause : bank)
            clause.ta_states.assign(num_literals(), config_.ta_half_states - 1);
}

std::vector<std::size_t> TsetlinMachine::active_classes() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < config_.num_classes_max; ++c)
        if (config_.class_active_mask[c]) out.push_back(c);
    return out;
}

void TsetlinMachine::set_state(std::size_t class_id, std::size_t clause, std::size_t literal,
                               std::int32_t state) {
    if (state < 0 || state > 2 * config_.ta_half_states - 1)
        throw ConfigError("TA state " + std::to_string(state) + " outside [0, 2N-1]");
    banks_.at(class_id).at(clause).ta_states.at(literal) = state;
}

void TsetlinMachine::check_plan(const FaultPlan& plan) const {
    if (!plan.compatible_with(config_.dims()))
        throw ConfigError("fault plan dimensions do not match the machine");
}

std::vector<std::uint8_t> TsetlinMachine::observed_actions(std::size_t class_id, std::size_t clause,
                                                           const FaultPlan& plan) const {
    check_plan(plan);
    const auto& states = banks_.at(class_id).at(clause).ta_states;
    const FaultMask* masks = plan.clause_masks(class_id, clause);
    std::vector<std::uint8_t> out(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        bool a = ta_action(states[k], config_.ta_half_states) == TaAction::include;
        if (masks) a = apply_mask(a, masks[k]);
        out[k] = a ? 1 : 0;
    }
    return out;
}

bool TsetlinMachine::clause_output(std::size_t class_id, std::size_t clause,
                                   std::span<const std::uint8_t> literals, const FaultPlan& plan,
                                   EvalMode mode) const {
    const auto& states = banks_[class_id][clause].ta_states;
    const FaultMask* masks = plan.clause_masks(class_id, clause);
    const std::int32_t n = config_.ta_half_states;
    bool any_included = false;
    for (std::size_t k = 0; k < states.size(); ++k) {
        bool include = states[k] >= n;
        if (masks) include = apply_mask(include, masks[k]);
        if (!include) continue;
        any_included = true;
        if (!literals[k]) return false;
    }
    return any_included || mode == EvalMode::learning;
}

ClassSum TsetlinMachine::class_sum(std::size_t class_id, std::span<const std::uint8_t> literals,
                                   const FaultPlan& plan, EvalMode mode) const {
    if (!class_active(class_id))
        throw QueryError("class " + std::to_string(class_id) + " is not active");
    if (literals.size() != num_literals()) throw InputError("literal vector has the wrong width");
    check_plan(plan);
    std::int32_t v = 0;
    for (std::size_t j = 0; j < config_.num_clauses_active; ++j) {
        if (!clause_output(class_id, j, literals, plan, mode)) continue;
        v += polarity_of(j) == Polarity::positive ? 1 : -1;
    }
    return {v};
}

std::size_t TsetlinMachine::classify(std::span<const std::uint8_t> features,
                                     const FaultPlan& plan) const {
    const auto literals = literals_of(features, config_.num_features);
    std::size_t best = config_.num_classes_max;
    std::int32_t best_v = 0;
    for (std::size_t c = 0; c < config_.num_classes_max; ++c) {
        if (!config_.class_active_mask[c]) continue;
        const std::int32_t v = class_sum(c, literals, plan).value;
        if (best == config_.num_classes_max || v > best_v) {
            best = c;
            best_v = v;
        }
    }
    if (best == config_.num_classes_max) throw ConfigError("no active classes");
    return best;
}

void TsetlinMachine::train_step(std::span<const std::uint8_t> features, std::size_t label, double s,
                                Randomizer& rng, const FaultPlan& plan) {
    if (!class_active(label))
        throw TrainingError("label " + std::to_string(label) + " is not an active class");
    check_plan(plan);
    const auto literals = literals_of(features, config_.num_features);
    const std::size_t k = config_.num_clauses_active;
    const std::int32_t n = config_.ta_half_states;
    std::vector<std::uint8_t> outputs(k);

    auto update_bank = [&](std::size_t class_id, FeedbackRole role) {
        std::int32_t v = 0;
        for (std::size_t j = 0; j < k; ++j) {
            outputs[j] = clause_output(class_id, j, literals, plan, EvalMode::learning) ? 1 : 0;
            if (outputs[j]) v += polarity_of(j) == Polarity::positive ? 1 : -1;
        }
        const double p = feedback_probability({v}, config_.threshold, role);
        auto& bank = banks_[class_id];
        for (std::size_t j = 0; j < k; ++j) {
            if (!rng.bernoulli(p)) continue;
            const bool positive = bank[j].polarity == Polarity::positive;
            if ((role == FeedbackRole::target) == positive) {
                apply_type1(bank[j], literals, outputs[j] != 0, s, n, rng, config_.feedback_table);
            } else {
                apply_type2(bank[j], literals, outputs[j] != 0, n, plan.clause_masks(class_id, j));
            }
        }
    };

    update_bank(label, FeedbackRole::target);

    std::vector<std::size_t> others;
    for (std::size_t c = 0; c < config_.num_classes_max; ++c)
        if (c != label && config_.class_active_mask[c]) others.push_back(c);
    if (!others.empty()) update_bank(others[rng.below(others.size())], FeedbackRole::negative);
}

void TsetlinMachine::set_active_clauses(std::size_t k) {
    if (k == 0 || k % 2 != 0 || k > config_.num_clauses_max)
        throw ConfigError("active clause count must be even and in (0, " +
                          std::to_string(config_.num_clauses_max) + "]");
    config_.num_clauses_active = k;
}

void TsetlinMachine::set_active_classes(const std::vector<bool>& mask) {
    TMConfig next = config_;
    next.class_active_mask = mask;
    next.validate();
    config_ = std::move(next);
}

void TsetlinMachine::set_threshold(std::int32_t threshold) {
    if (threshold < 1) throw ConfigError("threshold T must be >= 1");
    config_.threshold = threshold;
}

void TsetlinMachine::set_s(double s_offline, double s_online) {
    if (!(s_offline >= 1.0) || !(s_online >= 1.0)) throw ConfigError("s must be >= 1");
    config_.s_offline = s_offline;
    config_.s_online = s_online;
}

namespace {

constexpr const char* kSnapshotMagic = "otm-snapshot";
constexpr int kSnapshotVersion = 1;

template <typename T>
T read_field(std::istream& in, const std::string& key) {
    std::string got;
    T value{};
    if (!(in >> got) || got != key || !(in >> value))
        throw InputError("snapshot: expected field '" + key + "'");
    return value;
}

}  // namespace

void save_snapshot(const TsetlinMachine& machine, std::ostream& out) {
    const TMConfig& c = machine.config();
    out << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
    out << "classes_max " << c.num_classes_max << '\n';
    out << "clauses_max " << c.num_clauses_max << '\n';
    out << "clauses_active " << c.num_clauses_active << '\n';
    out << "features " << c.num_features << '\n';
    out << "half_states " << c.ta_half_states << '\n';
    out << std::setprecision(17);
    out << "s_offline " << c.s_offline << '\n';
    out << "s_online " << c.s_online << '\n';
    out << "threshold " << c.threshold << '\n';
    out << "active_mask ";
    for (bool b : c.class_active_mask) out << (b ? '1' : '0');
    out << '\n';
    out << "seed " << c.rng_seed << '\n';
    out << "feedback_table " << static_cast<int>(c.feedback_table) << '\n';
    for (std::size_t cls = 0; cls < c.num_classes_max; ++cls) {
        for (const auto& clause : machine.bank(cls)) {
            for (std::size_t k = 0; k < clause.ta_states.size(); ++k)
                out << (k ? " " : "") << clause.ta_states[k];
            out << '\n';
        }
    }
}

TsetlinMachine load_snapshot(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kSnapshotMagic)
        throw InputError("snapshot: missing header");
    if (version != kSnapshotVersion)
        throw InputError("snapshot: unsupported version " + std::to_string(version));

    TMConfig c;
    c.num_classes_max = read_field<std::size_t>(in, "classes_max");
    c.num_clauses_max = read_field<std::size_t>(in, "clauses_max");
    c.num_clauses_active = read_field<std::size_t>(in, "clauses_active");
    c.num_features = read_field<std::size_t>(in, "features");
    c.ta_half_states = read_field<std::int32_t>(in, "half_states");
    c.s_offline = read_field<double>(in, "s_offline");
    c.s_online = read_field<double>(in, "s_online");
    c.threshold = read_field<std::int32_t>(in, "threshold");
    const auto mask = read_field<std::string>(in, "active_mask");
    c.class_active_mask.clear();
    for (char ch : mask) c.class_active_mask.push_back(ch == '1');
    c.rng_seed = read_field<std::uint64_t>(in, "seed");
    c.feedback_table = static_cast<FeedbackTable>(read_field<int>(in, "feedback_table"));

    TsetlinMachine machine(c);
    for (std::size_t cls = 0; cls < c.num_classes_max; ++cls)
        for (std::size_t j = 0; j < c.num_clauses_max; ++j)
            for (std::size_t k = 0; k < c.num_literals(); ++k) {
                std::int32_t st = 0;
                if (!(in >> st)) throw InputError("snapshot: truncated TA state table");
                machine.set_state(cls, j, k, st);
            }
    return machine;
}

}  // namespace otm
