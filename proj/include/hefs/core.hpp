#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hefs {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
    InvalidArgument,
    EmptyInput,
    LengthMismatch,
    OverlappingGroups,
    OutOfRange,
    EmptyGroup,
    DegenerateSplit,
    FeatureIndexOutOfRange,
    LagTooLarge,
    WindowTooLarge,
    DegenerateRange,
    GroupCountTooSmall,
    GroupCountMismatch,
    DimensionMismatch,
    SingularRegression,
    ZeroVariance,
    ParseError,
    NonNumericTarget,
    ConfigError,
    IOError,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::OverlappingGroups: return "OverlappingGroups";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::EmptyGroup: return "EmptyGroup";
        case ErrorKind::DegenerateSplit: return "DegenerateSplit";
        case ErrorKind::FeatureIndexOutOfRange: return "FeatureIndexOutOfRange";
        case ErrorKind::LagTooLarge: return "LagTooLarge";
        case ErrorKind::WindowTooLarge: return "WindowTooLarge";
        case ErrorKind::DegenerateRange: return "DegenerateRange";
        case ErrorKind::GroupCountTooSmall: return "GroupCountTooSmall";
        case ErrorKind::GroupCountMismatch: return "GroupCountMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SingularRegression: return "SingularRegression";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::NonNumericTarget: return "NonNumericTarget";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IOError: return "IOError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Warnings
// ---------------------------------------------------------------------------

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}
}  // namespace detail

/// Replaces the process-wide warning handler and returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
    return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
    if (detail::warning_sink()) detail::warning_sink()(msg);
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_)
                throw Error(ErrorKind::DimensionMismatch, "ragged rows in Matrix::from_rows");
            std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols_);
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Copies the listed columns, in order.
inline Matrix select_columns(const Matrix& x, std::span<const std::size_t> cols) {
    Matrix out(x.rows(), cols.size());
    for (std::size_t c : cols)
        if (c >= x.cols()) throw Error(ErrorKind::OutOfRange, "column index " + std::to_string(c));
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = x(r, cols[j]);
    return out;
}

/// Copies rows [begin, end).
inline Matrix slice_rows(const Matrix& x, std::size_t begin, std::size_t end) {
    if (begin > end || end > x.rows()) throw Error(ErrorKind::OutOfRange, "row slice out of range");
    Matrix out(end - begin, x.cols());
    for (std::size_t r = begin; r < end; ++r)
        std::copy(x.row(r).begin(), x.row(r).end(), out.row(r - begin).begin());
    return out;
}

/// Horizontally concatenates matrices with equal row counts.
inline Matrix hstack(std::span<const Matrix> parts) {
    std::size_t rows = parts.empty() ? 0 : parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw Error(ErrorKind::LengthMismatch, "hstack row counts differ");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p(r, c);
        offset += p.cols();
    }
    return out;
}

inline std::vector<double> slice(std::span<const double> v, std::size_t begin, std::size_t end) {
    if (begin > end || end > v.size()) throw Error(ErrorKind::OutOfRange, "slice out of range");
    return {v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end)};
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

using Timestamp = std::chrono::sys_seconds;

/// Aligned target sequence and feature matrix. Immutable after construction.
class Dataset {
public:
    Dataset(std::vector<double> y, Matrix x, std::vector<std::string> feature_names,
            std::optional<std::vector<Timestamp>> timestamps = std::nullopt)
        : y_(std::move(y)), x_(std::move(x)), names_(std::move(feature_names)), timestamps_(std::move(timestamps)) {
        if (y_.empty()) throw Error(ErrorKind::EmptyInput, "dataset needs at least one row");
        if (x_.rows() != y_.size() && !(x_.rows() == 0 && x_.cols() == 0))
            throw Error(ErrorKind::LengthMismatch, "feature rows " + std::to_string(x_.rows()) +
                                                       " != target length " + std::to_string(y_.size()));
        if (x_.rows() == 0) x_ = Matrix(y_.size(), 0);
        if (names_.size() != x_.cols())
            throw Error(ErrorKind::LengthMismatch, "feature_names length does not match column count");
        if (timestamps_ && timestamps_->size() != y_.size())
            throw Error(ErrorKind::LengthMismatch, "timestamps length does not match target length");
        for (double v : y_)
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite target value");
        for (double v : x_.data())
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite feature value");
    }

    std::size_t size() const noexcept { return y_.size(); }
    std::size_t n_features() const noexcept { return x_.cols(); }
    const std::vector<double>& y() const noexcept { return y_; }
    const Matrix& x() const noexcept { return x_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    const std::optional<std::vector<Timestamp>>& timestamps() const noexcept { return timestamps_; }

    /// Rows [begin, end) as a new dataset.
    Dataset rows(std::size_t begin, std::size_t end) const {
        std::optional<std::vector<Timestamp>> ts;
        if (timestamps_) ts.emplace(timestamps_->begin() + static_cast<std::ptrdiff_t>(begin),
                                    timestamps_->begin() + static_cast<std::ptrdiff_t>(end));
        return Dataset(slice(y_, begin, end), slice_rows(x_, begin, end), names_, std::move(ts));
    }

private:
    std::vector<double> y_;
    Matrix x_;
    std::vector<std::string> names_;
    std::optional<std::vector<Timestamp>> timestamps_;
};

// ---------------------------------------------------------------------------
// Feature groups
// ---------------------------------------------------------------------------

/// Ordered partition of feature columns. Group 0 is the target-history group.
struct FeatureGroups {
    std::vector<std::vector<std::size_t>> groups;

    std::size_t size() const noexcept { return groups.size(); }
    const std::vector<std::size_t>& operator[](std::size_t k) const { return groups.at(k); }

    /// All assigned columns in ascending order.
    std::vector<std::size_t> assigned() const {
        std::vector<std::size_t> all;
        for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
        std::sort(all.begin(), all.end());
        return all;
    }

    bool operator==(const FeatureGroups&) const = default;
};

/// Checks disjointness and range; warns about columns left out of every group.
inline FeatureGroups validate_groups(const Dataset& dataset, const FeatureGroups& groups) {
    const std::size_t m = dataset.n_features();
    if (groups.groups.empty()) throw Error(ErrorKind::EmptyGroup, "at least one feature group is required");
    std::vector<int> owner(m, -1);
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) throw Error(ErrorKind::EmptyGroup, "group " + std::to_string(k) + " has no columns");
        for (std::size_t c : groups[k]) {
            if (c >= m)
                throw Error(ErrorKind::OutOfRange,
                            "group " + std::to_string(k) + " references column " + std::to_string(c) +
                                " but M=" + std::to_string(m));
            if (owner[c] >= 0)
                throw Error(ErrorKind::OverlappingGroups, "column " + std::to_string(c) + " is in groups " +
                                                              std::to_string(owner[c]) + " and " + std::to_string(k));
            owner[c] = static_cast<int>(k);
        }
    }
    std::string unassigned;
    for (std::size_t c = 0; c < m; ++c)
        if (owner[c] < 0) unassigned += (unassigned.empty() ? "" : ", ") + dataset.feature_names()[c];
    if (!unassigned.empty()) warn("features excluded from every group: " + unassigned);
    return groups;
}

// ---------------------------------------------------------------------------
// Chronological split
// ---------------------------------------------------------------------------

/// Contiguous train / validation / test windows: [0,train_end) [val_start,val_end) [test_start,n).
struct ChronoSplit {
    std::size_t train_end = 0;
    std::size_t val_start = 0;
    std::size_t val_end = 0;
    std::size_t test_start = 0;
    std::size_t n = 0;

    bool has_validation() const noexcept { return val_end > val_start; }
    std::size_t test_size() const noexcept { return n - test_start; }

    bool operator==(const ChronoSplit&) const = default;
};

inline ChronoSplit chronological_split(std::size_t n, double train_frac, double val_frac) {
    if (!(train_frac > 0.0) || !(val_frac >= 0.0) || !(train_frac + val_frac < 1.0))
        throw Error(ErrorKind::InvalidArgument, "split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
    // Round on the cumulative boundaries so the three windows always tile [0, n).
    const auto train_end = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto val_end = static_cast<std::size_t>(std::llround((train_frac + val_frac) * static_cast<double>(n)));
    ChronoSplit s{train_end, train_end, val_end, val_end, n};
    if (s.train_end == 0) throw Error(ErrorKind::DegenerateSplit, "empty training window");
    if (val_frac > 0.0 && s.val_end == s.val_start) throw Error(ErrorKind::DegenerateSplit, "empty validation window");
    if (s.test_start >= n) throw Error(ErrorKind::DegenerateSplit, "empty test window");
    return s;
}

/// Split with an exact test window length; validation is carved from the end of the remaining prefix.
inline ChronoSplit split_with_test_size(std::size_t n, std::size_t test_size, double val_frac) {
    if (test_size == 0 || test_size >= n) throw Error(ErrorKind::DegenerateSplit, "test window must be in [1, n)");
    if (!(val_frac >= 0.0) || !(val_frac < 1.0)) throw Error(ErrorKind::InvalidArgument, "val_frac must be in [0,1)");
    const std::size_t test_start = n - test_size;
    const auto val_len = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(test_start)));
    if (val_len >= test_start) throw Error(ErrorKind::DegenerateSplit, "empty training window");
    if (val_frac > 0.0 && val_len == 0) throw Error(ErrorKind::DegenerateSplit, "empty validation window");
    const std::size_t train_end = test_start - val_len;
    return ChronoSplit{train_end, train_end, test_start, test_start, n};
}

/// Predictions aligned to rows [begin, begin + values.size()) of a dataset.
struct PredictionSeries {
    std::size_t begin = 0;
    std::vector<double> values;

    std::size_t end() const noexcept { return begin + values.size(); }
};

}  // namespace hefs
