#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bespoke {

/// Base error for every failure the toolkit reports.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Row-major integer table. Used for input vectors and simulated outputs.
template <typename T>
class Table {
public:
    Table() = default;
    Table(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    void push_row(std::span<const T> values) {
        if (rows_ == 0 && cols_ == 0)
            cols_ = values.size();
        if (values.size() != cols_)
            throw Error("table row width mismatch");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    const std::vector<T>& data() const { return data_; }
    bool operator==(const Table&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using VectorSet = Table<std::int32_t>;

/// FNV-1a, used for revision fingerprints and manifest hashes.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t size);
    template <typename T>
    void value(const T& v) { bytes(&v, sizeof(T)); }
    void str(std::string_view s) {
        value(s.size());
        bytes(s.data(), s.size());
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string hex64(std::uint64_t v);

/// Bits needed for an unsigned value (0 -> 0).
int unsigned_width(std::int64_t max_value);
/// Bits needed for a two's complement range [lo, hi].
int signed_width(std::int64_t lo, std::int64_t hi);
/// Width for a range: unsigned when lo >= 0, two's complement otherwise.
int range_width(std::int64_t lo, std::int64_t hi);

int ceil_log2(std::int64_t n);

/// Deterministic integer in [0, bound) from a 64-bit engine output stream.
/// Bound-rejection so results do not depend on the standard library's
/// distribution implementation.
template <typename Engine>
std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
    if (bound <= 1)
        return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
        std::uint64_t r = eng();
        if (r < limit)
            return r % bound;
    }
}

template <typename Engine>
double uniform_unit(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <typename Engine, typename T>
void deterministic_shuffle(Engine& eng, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_below(eng, i);
        std::swap(v[i - 1], v[j]);
    }
}

/// Derive a named sub-seed so every stage gets an independent stream.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view stage);

/// Runs body(i) for i in [0, n) over at most `threads` workers. Iterations
/// must be independent; results are stored by index so output order does
/// not depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned default_threads();

/// Minimal CSV helpers: comma separated, one header line.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

} // namespace bespoke
