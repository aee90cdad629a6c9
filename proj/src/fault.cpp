#include "otm/fault.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "otm/errors.hpp"

namespace otm {

std::string to_string(FaultKind kind) {
    return kind == FaultKind::stuck_at_0 ? "stuck_at_0" : "stuck_at_1";
}

FaultKind parse_fault_kind(const std::string& text) {
    if (text == "stuck_at_0" || text == "0") return FaultKind::stuck_at_0;
    if (text == "stuck_at_1" || text == "1") return FaultKind::stuck_at_1;
    throw ConfigError("unknown fault kind '" + text + "' (expected stuck_at_0 or stuck_at_1)");
}

FaultPlan::FaultPlan(MachineDims dims) : dims_(dims), masks_(dims.total_tas()) {}

std::size_t FaultPlan::index_of(const TaAddress& a) const {
    if (a.class_id >= dims_.classes || a.clause >= dims_.clauses || a.literal >= dims_.literals) {
        std::ostringstream msg;
        msg << "TA address (" << a.class_id << "," << a.clause << "," << a.literal
            << ") outside plan dimensions " << dims_.classes << "x" << dims_.clauses << "x"
            << dims_.literals;
        throw AddressError(msg.str());
    }
    return (a.class_id * dims_.clauses + a.clause) * dims_.literals + a.literal;
}

void FaultPlan::set_fault(const TaAddress& address, FaultMask mask) {
    FaultMask& slot = masks_[index_of(address)];
    if (!slot.fault_free()) --faulted_;
    slot = mask;
    if (!slot.fault_free()) ++faulted_;
}

FaultMask FaultPlan::mask_at(const TaAddress& address) const {
    if (unbounded()) return {};
    return masks_[index_of(address)];
}

void FaultPlan::clear_all() noexcept {
    std::fill(masks_.begin(), masks_.end(), FaultMask{});
    faulted_ = 0;
}

std::vector<FaultPlan::Entry> FaultPlan::entries() const {
    std::vector<Entry> out;
    out.reserve(faulted_);
    for (std::size_t c = 0; c < dims_.classes; ++c)
        for (std::size_t j = 0; j < dims_.clauses; ++j)
            for (std::size_t k = 0; k < dims_.literals; ++k) {
                const FaultMask m = masks_[(c * dims_.clauses + j) * dims_.literals + k];
                if (!m.fault_free()) out.push_back({{c, j, k}, m});
            }
    return out;
}

FaultPlan generate_even_spread_plan(double fraction, FaultKind kind, const MachineDims& dims,
                                    std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw ConfigError("fault fraction must lie in [0, 1]");
    FaultPlan plan(dims);
    const std::size_t total = dims.total_tas();
    const std::size_t clause_count = dims.classes * dims.clauses;
    if (total == 0) return plan;

    const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    const std::size_t base = wanted / clause_count;
    const std::size_t extra = wanted % clause_count;

    Randomizer rng(seed);
    // Clause slots are visited class-minor so that a contiguous run of
    // `extra` slots also spreads the remainder evenly over classes.
    const std::size_t start = static_cast<std::size_t>(rng.below(clause_count));
    const FaultMask mask = kind == FaultKind::stuck_at_0 ? FaultMask{false, false}
                                                         : FaultMask{true, true};

    std::vector<std::size_t> literal_order(dims.literals);
    for (std::size_t slot = 0; slot < clause_count; ++slot) {
        const std::size_t class_id = slot % dims.classes;
        const std::size_t clause = slot / dims.classes;
        const std::size_t rank = (slot + clause_count - start) % clause_count;
        const std::size_t count = base + (rank < extra ? 1 : 0);

        std::iota(literal_order.begin(), literal_order.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t pick = i + static_cast<std::size_t>(rng.below(dims.literals - i));
            std::swap(literal_order[i], literal_order[pick]);
            plan.set_fault({class_id, clause, literal_order[i]}, mask);
        }
    }
    return plan;
}

void save_fault_plan(const FaultPlan& plan, std::ostream& out) {
    out << "class,clause,literal,and_bit,or_bit\n";
    for (const auto& e : plan.entries()) {
        out << e.address.class_id << ',' << e.address.clause << ',' << e.address.literal << ','
            << (e.mask.and_bit ? 1 : 0) << ',' << (e.mask.or_bit ? 1 : 0) << '\n';
    }
}

namespace {

std::size_t parse_index(const std::string& field, const std::string& source, std::size_t line) {
    if (field.empty() || !std::all_of(field.begin(), field.end(), [](char ch) {
            return ch >= '0' && ch <= '9';
        }))
        throw ParseError(source, line, "expected a non-negative integer, got '" + field + "'");
    return static_cast<std::size_t>(std::stoull(field));
}

bool parse_bit(const std::string& field, const std::string& source, std::size_t line) {
    if (field == "0") return false;
    if (field == "1") return true;
    throw ParseError(source, line, "expected bit 0 or 1, got '" + field + "'");
}

}  // namespace

FaultPlan load_fault_plan(std::istream& in, const MachineDims& dims, const std::string& source) {
    FaultPlan plan(dims);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.empty() || text[0] == '#') continue;
        if (line == 1 && text.rfind("class", 0) == 0) continue;

        std::vector<std::string> fields;
        std::stringstream ss(text);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (fields.size() != 5) throw ParseError(source, line, "expected 5 comma-separated fields");

        const TaAddress addr{parse_index(fields[0], source, line), parse_index(fields[1], source, line),
                             parse_index(fields[2], source, line)};
        const FaultMask mask{parse_bit(fields[3], source, line), parse_bit(fields[4], source, line)};
        try {
            plan.set_fault(addr, mask);
        } catch (const AddressError& e) {
            throw ParseError(source, line, e.what());
        }
    }
    return plan;
}

FaultPlan load_fault_plan_file(const std::string& path, const MachineDims& dims) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open fault plan '" + path + "'");
    return load_fault_plan(in, dims, path);
}

}  // namespace otm
