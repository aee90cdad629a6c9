#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace otm {

struct Datapoint {
    std::vector<std::uint8_t> features;
    std::size_t label = 0;

    friend bool operator==(const Datapoint&, const Datapoint&) = default;
};

using DataSet = std::vector<Datapoint>;

struct Dataset {
    std::size_t num_features = 0;
    std::size_t num_classes = 0;
    DataSet points;
};

// Canonical dataset file:
//   F=<int> C=<int>
//   <F chars of 0/1>,<label>
// Throws ParseError carrying the offending line number.
Dataset parse_dataset(std::istream& in, const std::string& source = "<dataset>");
Dataset load_dataset(const std::string& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

// Real-valued features plus an integer label in the last column. A header
// row is skipped when its first field is not numeric.
struct RawTable {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    std::size_t num_columns = 0;
};
RawTable parse_raw_csv(std::istream& in, const std::string& source = "<raw csv>");
RawTable load_raw_csv(const std::string& path);

// Per-feature thermometer thresholds at the q/(bins+1) quantiles
// (q = 1..bins, linear interpolation between order statistics).
struct Booleanizer {
    std::size_t bins = 0;
    std::vector<std::vector<double>> thresholds;  // [feature][bin], nondecreasing

    static Booleanizer fit(const std::vector<std::vector<double>>& raw, std::size_t bins);
    // bit j of a feature group = value > thresholds[j]
    std::vector<std::uint8_t> encode(const std::vector<double>& row) const;
};

std::vector<std::vector<std::uint8_t>> booleanize_quantile(const std::vector<std::vector<double>>& raw,
                                                           std::size_t bins);

// Booleanizes a raw table into a canonical dataset. When shuffle_seed is
// set the row order is permuted (Fisher-Yates) after encoding.
Dataset booleanize_table(const RawTable& table, std::size_t bins,
                         std::optional<std::uint64_t> shuffle_seed = std::nullopt);

struct BlockStore {
    std::vector<DataSet> blocks;
    std::size_t block_len = 0;

    std::size_t num_blocks() const noexcept { return blocks.size(); }
};

// Contiguous, order-preserving blocks. Throws ConfigError unless block_len
// divides the dataset size.
BlockStore partition_blocks(const DataSet& points, std::size_t block_len);

struct SetAllocation {
    std::size_t offline_len = 0;
    std::size_t validation_len = 0;
    std::size_t online_len = 0;

    std::size_t total() const noexcept { return offline_len + validation_len + online_len; }
    // gcd of the three lengths (the largest usable block length).
    std::size_t common_block_len() const noexcept;
    void validate(const BlockStore& store) const;
};

using Ordering = std::vector<std::size_t>;

struct SetTriple {
    DataSet offline;
    DataSet validation;
    DataSet online;
};

// Walks blocks in ordering order: offline first, then validation, then online.
SetTriple materialize_sets(const BlockStore& store, const Ordering& ordering,
                           const SetAllocation& alloc);

std::uint64_t factorial_capped(std::size_t n) noexcept;

// First `limit` permutations of 0..num_blocks-1 in lexicographic order.
std::vector<Ordering> enumerate_orderings(std::size_t num_blocks, std::uint64_t limit);

DataSet filter_class(const DataSet& set, std::size_t class_id, bool enabled);

// Fixed-capacity FIFO that overwrites its oldest item when full and counts
// the overwrites. push/pop are serialized so one producer thread and one
// consumer thread may share it.
template <typename T>
class CyclicBuffer {
public:
    explicit CyclicBuffer(std::size_t capacity) : storage_(capacity ? capacity : 1) {}

    void push(T item) {
        std::lock_guard lock(mutex_);
        if (size_ == storage_.size()) {
            head_ = (head_ + 1) % storage_.size();
            --size_;
            ++dropped_;
        }
        storage_[(head_ + size_) % storage_.size()] = std::move(item);
        ++size_;
    }

    std::optional<T> pop() {
        std::lock_guard lock(mutex_);
        if (size_ == 0) return std::nullopt;
        std::optional<T> out(std::move(storage_[head_]));
        head_ = (head_ + 1) % storage_.size();
        --size_;
        return out;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return size_;
    }
    bool full() const {
        std::lock_guard lock(mutex_);
        return size_ == storage_.size();
    }
    std::size_t capacity() const noexcept { return storage_.size(); }
    std::size_t dropped_count() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<T> storage_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    std::size_t dropped_ = 0;
};

}  // namespace otm
