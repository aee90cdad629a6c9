#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "otm/fault.hpp"
#include "otm/randomizer.hpp"

namespace otm {

enum class TaAction : std::uint8_t { exclude = 0, include = 1 };
enum class TaEvent : std::uint8_t { reward, penalty };
enum class Polarity : std::uint8_t { positive, negative };
enum class EvalMode : std::uint8_t { inference, learning };
enum class FeedbackRole : std::uint8_t { target, negative };

// How s maps to Type I step probabilities.
//   canonical:           strengthen (s-1)/s, weaken 1/s
//   boost_true_positive: strengthen 1,       weaken 1/s
enum class FeedbackTable : std::uint8_t { canonical, boost_true_positive };

struct TMConfig {
    std::size_t num_classes_max = 3;
    std::size_t num_clauses_max = 16;
    std::size_t num_clauses_active = 16;
    std::size_t num_features = 16;
    std::int32_t ta_half_states = 128;
    double s_offline = 1.375;
    double s_online = 1.0;
    std::int32_t threshold = 15;
    std::vector<bool> class_active_mask{true, true, true};
    std::uint64_t rng_seed = 1;
    FeedbackTable feedback_table = FeedbackTable::canonical;

    // Throws ConfigError describing the first violated invariant.
    void validate() const;

    std::size_t num_literals() const noexcept { return 2 * num_features; }
    MachineDims dims() const noexcept { return {num_classes_max, num_clauses_max, num_literals()}; }

    friend bool operator==(const TMConfig&, const TMConfig&) = default;
};

constexpr TaAction ta_action(std::int32_t state, std::int32_t half_states) noexcept {
    return state < half_states ? TaAction::exclude : TaAction::include;
}

// Reward deepens the current action, penalty moves toward (and across) the
// boundary. States saturate at 0 and 2N-1.
std::int32_t ta_transition(std::int32_t state, std::int32_t half_states, TaEvent event) noexcept;

constexpr std::int32_t step_toward_include(std::int32_t state, std::int32_t half_states) noexcept {
    return state < 2 * half_states - 1 ? state + 1 : state;
}
constexpr std::int32_t step_toward_exclude(std::int32_t state) noexcept {
    return state > 0 ? state - 1 : 0;
}

// Even clause index votes for its class, odd votes against.
constexpr Polarity polarity_of(std::size_t clause_index) noexcept {
    return clause_index % 2 == 0 ? Polarity::positive : Polarity::negative;
}

struct ClauseTeam {
    std::vector<std::int32_t> ta_states;  // 2F entries: F features, then F complements
    Polarity polarity = Polarity::positive;

    friend bool operator==(const ClauseTeam&, const ClauseTeam&) = default;
};

struct ClassSum {
    std::int32_t value = 0;

    std::int32_t clamped(std::int32_t threshold) const noexcept {
        return value < -threshold ? -threshold : (value > threshold ? threshold : value);
    }
};

// [x_0..x_{F-1}, !x_0..!x_{F-1}]. Throws InputError on a width mismatch.
std::vector<std::uint8_t> literals_of(std::span<const std::uint8_t> features,
                                      std::size_t num_features);

// AND over included literals. An empty clause fires only while learning.
bool evaluate_clause(std::span<const std::uint8_t> literals, std::span<const std::uint8_t> includes,
                     EvalMode mode);

double feedback_probability(ClassSum v, std::int32_t threshold, FeedbackRole role) noexcept;

// Type I: on a firing clause, true literals step toward include and false
// literals toward exclude; on a silent clause every TA steps toward exclude.
void apply_type1(ClauseTeam& clause, std::span<const std::uint8_t> literals, bool clause_output,
                 double s, std::int32_t half_states, Randomizer& rng,
                 FeedbackTable table = FeedbackTable::canonical);

// Type II: on a firing clause, false literals whose observed action is
// exclude step toward include. `masks` may be null (fault-free).
void apply_type2(ClauseTeam& clause, std::span<const std::uint8_t> literals, bool clause_output,
                 std::int32_t half_states, const FaultMask* masks = nullptr);

class TsetlinMachine {
public:
    explicit TsetlinMachine(TMConfig config);

    const TMConfig& config() const noexcept { return config_; }
    std::size_t num_literals() const noexcept { return config_.num_literals(); }
    std::int32_t half_states() const noexcept { return config_.ta_half_states; }
    bool class_active(std::size_t class_id) const noexcept {
        return class_id < config_.num_classes_max && config_.class_active_mask[class_id];
    }
    std::vector<std::size_t> active_classes() const;

    const std::vector<ClauseTeam>& bank(std::size_t class_id) const { return banks_.at(class_id); }
    const ClauseTeam& clause(std::size_t class_id, std::size_t index) const {
        return banks_.at(class_id).at(index);
    }
    // Throws ConfigError when state is outside [0, 2N-1].
    void set_state(std::size_t class_id, std::size_t clause, std::size_t literal, std::int32_t state);

    // Include bits of one clause as seen through the fault plan.
    std::vector<std::uint8_t> observed_actions(std::size_t class_id, std::size_t clause,
                                               const FaultPlan& plan = {}) const;

    bool clause_output(std::size_t class_id, std::size_t clause, std::span<const std::uint8_t> literals,
                       const FaultPlan& plan, EvalMode mode) const;

    // Throws QueryError for an inactive class.
    ClassSum class_sum(std::size_t class_id, std::span<const std::uint8_t> literals,
                       const FaultPlan& plan = {}, EvalMode mode = EvalMode::inference) const;

    // Argmax over active classes, lowest index wins ties.
    std::size_t classify(std::span<const std::uint8_t> features, const FaultPlan& plan = {}) const;

    // One supervised update. Throws TrainingError when label is not active.
    void train_step(std::span<const std::uint8_t> features, std::size_t label, double s,
                    Randomizer& rng, const FaultPlan& plan = {});

    // Runtime reconfiguration. Dormant TA states are left untouched.
    void set_active_clauses(std::size_t k);
    void set_active_classes(const std::vector<bool>& mask);
    void set_threshold(std::int32_t threshold);
    void set_s(double s_offline, double s_online);

    // Every TA back to its initial state (N-1); configuration is kept.
    void reset_states();

    friend bool operator==(const TsetlinMachine&, const TsetlinMachine&) = default;

private:
    void check_plan(const FaultPlan& plan) const;

    TMConfig config_;
    std::vector<std::vector<ClauseTeam>> banks_;
};

// Versioned text snapshot: config echo followed by one line of TA states per
// clause per class.
void save_snapshot(const TsetlinMachine& machine, std::ostream& out);
TsetlinMachine load_snapshot(std::istream& in);

}  // namespace otm
