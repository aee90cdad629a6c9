#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "otm/randomizer.hpp"

namespace otm {

// Forcing bits on one TA action output: out = (action & and_bit) | or_bit.
struct FaultMask {
    bool and_bit = true;
    bool or_bit = false;

    bool fault_free() const noexcept { return and_bit && !or_bit; }
    friend bool operator==(const FaultMask&, const FaultMask&) = default;
};

constexpr bool apply_mask(bool action, FaultMask mask) noexcept {
    return (action && mask.and_bit) || mask.or_bit;
}

struct TaAddress {
    std::size_t class_id = 0;
    std::size_t clause = 0;
    std::size_t literal = 0;
    friend bool operator==(const TaAddress&, const TaAddress&) = default;
};

// Dimensions of the TA array a plan addresses: classes x clauses x literals.
struct MachineDims {
    std::size_t classes = 0;
    std::size_t clauses = 0;
    std::size_t literals = 0;

    std::size_t total_tas() const noexcept { return classes * clauses * literals; }
    friend bool operator==(const MachineDims&, const MachineDims&) = default;
};

enum class FaultKind { stuck_at_0, stuck_at_1 };

std::string to_string(FaultKind kind);
FaultKind parse_fault_kind(const std::string& text);

// Per-TA fault register file. Every address defaults to fault-free; a plan
// with zero dimensions is the pass-through plan and accepts any machine.
class FaultPlan {
public:
    FaultPlan() = default;
    explicit FaultPlan(MachineDims dims);

    const MachineDims& dims() const noexcept { return dims_; }
    bool unbounded() const noexcept { return dims_.total_tas() == 0; }

    // Throws AddressError when the address falls outside dims().
    void set_fault(const TaAddress& address, FaultMask mask);
    FaultMask mask_at(const TaAddress& address) const;
    void clear_all() noexcept;

    std::size_t fault_count() const noexcept { return faulted_; }
    bool fault_free() const noexcept { return faulted_ == 0; }

    // Hot path for clause evaluation: masks of one clause's literals, or an
    // empty pointer when the plan holds no storage.
    const FaultMask* clause_masks(std::size_t class_id, std::size_t clause) const noexcept {
        if (unbounded()) return nullptr;
        return masks_.data() + (class_id * dims_.clauses + clause) * dims_.literals;
    }

    struct Entry {
        TaAddress address;
        FaultMask mask;
    };
    // Non-default masks in (class, clause, literal) order.
    std::vector<Entry> entries() const;

    // A plan is usable with a machine when it is unbounded or matches exactly.
    bool compatible_with(const MachineDims& machine) const noexcept {
        return unbounded() || dims_ == machine;
    }

    friend bool operator==(const FaultPlan&, const FaultPlan&) = default;

private:
    std::size_t index_of(const TaAddress& address) const;

    MachineDims dims_{};
    std::vector<FaultMask> masks_;
    std::size_t faulted_ = 0;
};

// Spreads round(fraction * total TAs) faults so that every clause (across all
// classes) receives floor or ceil of its share. Deterministic per seed.
FaultPlan generate_even_spread_plan(double fraction, FaultKind kind, const MachineDims& dims,
                                    std::uint64_t seed);

// Text table, one row per non-default mask: class,clause,literal,and_bit,or_bit
void save_fault_plan(const FaultPlan& plan, std::ostream& out);
FaultPlan load_fault_plan(std::istream& in, const MachineDims& dims,
                          const std::string& source = "<fault plan>");
FaultPlan load_fault_plan_file(const std::string& path, const MachineDims& dims);

}  // namespace otm
