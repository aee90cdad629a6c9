#include "otm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "otm/errors.hpp"
#include "otm/randomizer.hpp"

namespace otm {

namespace {

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_size(std::string_view text, std::size_t& out) {
    if (text.empty()) return false;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& source) {
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line)) throw ParseError(source, 1, "empty dataset file");
    ++lineno;
    strip_cr(line);
    {
        std::istringstream header(line);
        std::string f_tok, c_tok, extra;
        header >> f_tok >> c_tok;
        if (f_tok.rfind("F=", 0) != 0 || c_tok.rfind("C=", 0) != 0 || (header >> extra) ||
            !parse_size(std::string_view(f_tok).substr(2), ds.num_features) ||
            !parse_size(std::string_view(c_tok).substr(2), ds.num_classes))
            throw ParseError(source, lineno, "expected header 'F=<int> C=<int>'");
        if (ds.num_features == 0 || ds.num_classes == 0)
            throw ParseError(source, lineno, "F and C must be positive");
    }

    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(source, lineno, "missing ',' before label");
        if (comma != ds.num_features) {
            throw ParseError(source, lineno,
                             "row has " + std::to_string(comma) + " features, header says " +
                                 std::to_string(ds.num_features));
        }
        Datapoint dp;
        dp.features.resize(ds.num_features);
        for (std::size_t i = 0; i < comma; ++i) {
            if (line[i] != '0' && line[i] != '1')
                throw ParseError(source, lineno, "feature characters must be 0 or 1");
            dp.features[i] = line[i] == '1' ? 1 : 0;
        }
        if (!parse_size(std::string_view(line).substr(comma + 1), dp.label))
            throw ParseError(source, lineno, "label is not a non-negative integer");
        if (dp.label >= ds.num_classes) {
            throw ParseError(source, lineno,
                             "label " + std::to_string(dp.label) + " outside C=" +
                                 std::to_string(ds.num_classes));
        }
        ds.points.push_back(std::move(dp));
    }
    if (ds.points.empty()) throw ParseError(source, lineno, "dataset has no datapoints");
    return ds;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return parse_dataset(in, path);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    out << "F=" << dataset.num_features << " C=" << dataset.num_classes << '\n';
    std::string row;
    for (const auto& dp : dataset.points) {
        row.clear();
        for (auto b : dp.features) row.push_back(b ? '1' : '0');
        out << row << ',' << dp.label << '\n';
    }
}

RawTable parse_raw_csv(std::istream& in, const std::string& source) {
    RawTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() < 2) throw ParseError(source, lineno, "need at least one feature and a label");

        std::vector<double> row(fields.size() - 1);
        bool numeric = true;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            const auto& f = fields[i];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
            if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty()) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (table.rows.empty() && table.num_columns == 0) {
                table.num_columns = fields.size() - 1;  // header
                continue;
            }
            throw ParseError(source, lineno, "non-numeric feature value");
        }
        if (table.num_columns == 0) table.num_columns = row.size();
        if (row.size() != table.num_columns) {
            throw ParseError(source, lineno,
                             "row has " + std::to_string(row.size()) + " features, expected " +
                                 std::to_string(table.num_columns));
        }
        std::size_t label = 0;
        if (!parse_size(fields.back(), label))
            throw ParseError(source, lineno, "label is not a non-negative integer");
        table.rows.push_back(std::move(row));
        table.labels.push_back(label);
    }
    if (table.rows.empty()) throw ParseError(source, lineno, "raw table has no rows");
    return table;
}

RawTable load_raw_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open raw csv '" + path + "'");
    return parse_raw_csv(in, path);
}

Booleanizer Booleanizer::fit(const std::vector<std::vector<double>>& raw, std::size_t bins) {
    if (bins == 0) throw ConfigError("bins must be at least 1");
    if (raw.empty()) throw InputError("cannot fit thresholds on an empty table");
    const std::size_t features = raw.front().size();
    Booleanizer b;
    b.bins = bins;
    b.thresholds.assign(features, std::vector<double>(bins));
    std::vector<double> column(raw.size());
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t r = 0; r < raw.size(); ++r) {
            if (raw[r].size() != features) throw InputError("ragged raw table");
            column[r] = raw[r][f];
        }
        std::sort(column.begin(), column.end());
        for (std::size_t q = 1; q <= bins; ++q) {
            const double h = static_cast<double>(column.size() - 1) * static_cast<double>(q) /
                             static_cast<double>(bins + 1);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi = std::min(lo + 1, column.size() - 1);
            b.thresholds[f][q - 1] = column[lo] + (h - static_cast<double>(lo)) * (column[hi] - column[lo]);
        }
    }
    return b;
}

std::vector<std::uint8_t> Booleanizer::encode(const std::vector<double>& row) const {
    if (row.size() != thresholds.size()) throw InputError("row width does not match thresholds");
    std::vector<std::uint8_t> out;
    out.reserve(row.size() * bins);
    for (std::size_t f = 0; f < row.size(); ++f)
        for (double t : thresholds[f]) out.push_back(row[f] > t ? 1 : 0);
    return out;
}

std::vector<std::vector<std::uint8_t>> booleanize_quantile(const std::vector<std::vector<double>>& raw,
                                                           std::size_t bins) {
    const auto enc = Booleanizer::fit(raw, bins);
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(raw.size());
    for (const auto& row : raw) out.push_back(enc.encode(row));
    return out;
}

Dataset booleanize_table(const RawTable& table, std::size_t bins,
                         std::optional<std::uint64_t> shuffle_seed) {
    const auto bits = booleanize_quantile(table.rows, bins);
    Dataset ds;
    ds.num_features = table.num_columns * bins;
    ds.num_classes = *std::max_element(table.labels.begin(), table.labels.end()) + 1;
    ds.points.reserve(bits.size());
    for (std::size_t r = 0; r < bits.size(); ++r) ds.points.push_back({bits[r], table.labels[r]});
    if (shuffle_seed) {
        Randomizer rng(*shuffle_seed);
        for (std::size_t i = ds.points.size(); i > 1; --i)
            std::swap(ds.points[i - 1], ds.points[rng.below(i)]);
    }
    return ds;
}

BlockStore partition_blocks(const DataSet& points, std::size_t block_len) {
    if (block_len == 0 || points.empty() || points.size() % block_len != 0) {
        throw ConfigError("block length " + std::to_string(block_len) +
                          " does not divide dataset size " + std::to_string(points.size()));
    }
    BlockStore store;
    store.block_len = block_len;
    for (std::size_t start = 0; start < points.size(); start += block_len)
        store.blocks.emplace_back(points.begin() + static_cast<std::ptrdiff_t>(start),
                                  points.begin() + static_cast<std::ptrdiff_t>(start + block_len));
    return store;
}

std::size_t SetAllocation::common_block_len() const noexcept {
    return std::gcd(std::gcd(offline_len, validation_len), online_len);
}

void SetAllocation::validate(const BlockStore& store) const {
    const std::size_t bl = store.block_len;
    if (bl == 0) throw ConfigError("block store is empty");
    if (offline_len % bl || validation_len % bl || online_len % bl)
        throw ConfigError("block length " + std::to_string(bl) + " must divide every set size");
    if (offline_len == 0) throw ConfigError("offline set must not be empty");
    if (total() != bl * store.num_blocks())
        throw ConfigError("set allocation " + std::to_string(total()) +
                          " does not cover the dataset of " + std::to_string(bl * store.num_blocks()));
}

SetTriple materialize_sets(const BlockStore& store, const Ordering& ordering,
                           const SetAllocation& alloc) {
    alloc.validate(store);
    if (ordering.size() != store.num_blocks()) throw ConfigError("ordering length != block count");
    std::vector<bool> seen(store.num_blocks(), false);
    for (auto b : ordering) {
        if (b >= store.num_blocks() || seen[b]) throw ConfigError("ordering is not a permutation");
        seen[b] = true;
    }

    SetTriple sets;
    const std::size_t n_off = alloc.offline_len / store.block_len;
    const std::size_t n_val = alloc.validation_len / store.block_len;
    for (std::size_t i = 0; i < ordering.size(); ++i) {
        DataSet& dest = i < n_off ? sets.offline : (i < n_off + n_val ? sets.validation : sets.online);
        const DataSet& block = store.blocks[ordering[i]];
        dest.insert(dest.end(), block.begin(), block.end());
    }
    return sets;
}

std::uint64_t factorial_capped(std::size_t n) noexcept {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= n; ++i) {
        if (f > UINT64_MAX / i) return UINT64_MAX;
        f *= i;
    }
    return f;
}

std::vector<Ordering> enumerate_orderings(std::size_t num_blocks, std::uint64_t limit) {
    if (limit > factorial_capped(num_blocks)) {
        throw ConfigError("requested " + std::to_string(limit) + " orderings but only " +
                          std::to_string(factorial_capped(num_blocks)) + " exist");
    }
    std::vector<Ordering> out;
    Ordering perm(num_blocks);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::uint64_t i = 0; i < limit; ++i) {
        out.push_back(perm);
        std::next_permutation(perm.begin(), perm.end());
    }
    return out;
}

DataSet filter_class(const DataSet& set, std::size_t class_id, bool enabled) {
    if (!enabled) return set;
    DataSet out;
    out.reserve(set.size());
    std::copy_if(set.begin(), set.end(), std::back_inserter(out),
                 [&](const Datapoint& dp) { return dp.label != class_id; });
    return out;
}

}  // namespace otm
