#pragma once

#include "hefs/core.hpp"
#include "hefs/featgen.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hefs {

namespace csv {

/// Splits one CSV record; double quotes delimit fields that may contain commas.
inline std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty file");
    t.header = split_record(line);
    for (auto& h : t.header) h = trim(h);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        t.rows.push_back(split_record(line));
    }
    return t;
}

/// "%.12g" formatting used for every numeric CSV cell.
inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]", the same with 'T', or integer epoch seconds.
inline std::optional<Timestamp> parse_timestamp(const std::string& raw) {
    using namespace std::chrono;
    const std::string s = csv::trim(raw);
    if (s.empty()) return std::nullopt;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    const int fields = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (fields >= 3 && s.find('-') != std::string::npos) {
        if (fields > 3 && sep != ' ' && sep != 'T') return std::nullopt;
        if (fields == 4 || fields == 5) return std::nullopt;
        const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
        if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 60) return std::nullopt;
        return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec};
    }
    char* end = nullptr;
    const long long epoch = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return Timestamp{seconds{epoch}};
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Column-oriented CSV: one row per time step. The target column becomes y, other numeric columns become features.
/// Without a timestamp column, hourly timestamps from the Unix epoch are assigned.
inline Dataset ingest_csv(const std::filesystem::path& path, const std::string& target_col,
                          const std::optional<std::string>& timestamp_col = std::nullopt) {
    const csv::Table table = csv::read_table(path);
    const auto find_col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) throw Error(ErrorKind::ParseError, path.string() + ": no column named '" + name + "'");
        return static_cast<std::size_t>(it - table.header.begin());
    };
    const std::size_t target = find_col(target_col);
    std::optional<std::size_t> ts_col;
    if (timestamp_col) ts_col = find_col(*timestamp_col);

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == target || (ts_col && c == *ts_col)) continue;
        feature_cols.push_back(c);
        names.push_back(table.header[c]);
    }

    std::vector<double> y;
    std::vector<Timestamp> ts;
    Matrix x(table.rows.size(), feature_cols.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path.string() + ": row " + std::to_string(r + 2);  // 1-based, header is row 1
        if (row.size() != table.header.size())
            throw Error(ErrorKind::ParseError, where + " has " + std::to_string(row.size()) + " cells, header has " +
                                                   std::to_string(table.header.size()));
        const auto v = csv::parse_number(row[target]);
        if (!v) throw Error(ErrorKind::NonNumericTarget, where + ", column '" + target_col + "': '" + row[target] + "'");
        y.push_back(*v);
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            const auto f = csv::parse_number(row[feature_cols[j]]);
            if (!f)
                throw Error(ErrorKind::ParseError,
                            where + ", column '" + names[j] + "': cannot parse '" + row[feature_cols[j]] + "'");
            x(r, j) = *f;
        }
        if (ts_col) {
            const auto t = parse_timestamp(row[*ts_col]);
            if (!t) throw Error(ErrorKind::ParseError, where + ", column '" + *timestamp_col + "': bad timestamp '" + row[*ts_col] + "'");
            ts.push_back(*t);
        }
    }
    if (y.empty()) throw Error(ErrorKind::ParseError, path.string() + ": no data rows");
    if (!ts_col) ts = synthetic_hourly_timestamps(y.size());
    return Dataset(std::move(y), std::move(x), std::move(names), std::move(ts));
}

struct NamedSeries {
    std::string id;
    std::vector<double> values;
};

/// M4-style file: header row, then one series per row as `id, v1, v2, ...` with ragged trailing empty cells.
inline std::vector<NamedSeries> ingest_m4_rows(const std::filesystem::path& path) {
    const csv::Table table = csv::read_table(path);
    std::vector<NamedSeries> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        NamedSeries s{row.empty() ? std::string{} : csv::trim(row[0]), {}};
        bool ended = false;
        for (std::size_t c = 1; c < row.size(); ++c) {
            const std::string cell = csv::trim(row[c]);
            if (cell.empty()) {
                ended = true;
                continue;
            }
            const auto v = csv::parse_number(cell);
            if (!v || ended)
                throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(r + 2) + ", column " +
                                                       std::to_string(c + 1) + ": cannot parse '" + cell + "'");
            s.values.push_back(*v);
        }
        if (s.values.empty()) throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(r + 2) + " has no values");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw Error(ErrorKind::ParseError, path.string() + ": no series");
    return out;
}

/// Seeded sample of k rows without replacement, returned in file order.
inline std::vector<std::size_t> sample_rows(std::size_t count, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    if (k == 0 || k >= count) return idx;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

struct Curve {
    std::string method;
    std::vector<double> values;
};

/// Long-format `t,method,value`, methods in the given order, 12 significant digits.
inline void emit_plot_data(const std::vector<Curve>& curves, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
    out << "t,method,value\n";
    for (const auto& c : curves)
        for (std::size_t t = 0; t < c.values.size(); ++t) out << t << ',' << c.method << ',' << csv::format_number(c.values[t]) << '\n';
    if (!out) throw Error(ErrorKind::IOError, "failed writing " + path.string());
}

inline std::vector<Curve> read_plot_data(const std::filesystem::path& path) {
    const csv::Table table = csv::read_table(path);
    std::vector<Curve> curves;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto v = row.size() == 3 ? csv::parse_number(row[2]) : std::nullopt;
        if (!v) throw Error(ErrorKind::ParseError, path.string() + ": bad row " + std::to_string(r + 2));
        if (curves.empty() || curves.back().method != row[1]) curves.push_back(Curve{row[1], {}});
        curves.back().values.push_back(*v);
    }
    return curves;
}

struct PerTrialRow {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::string method;
    double wall_time_s = 0.0;
    double mse = 0.0;
};

inline std::vector<PerTrialRow> read_per_trial(const std::filesystem::path& path) {
    const csv::Table table = csv::read_table(path);
    const std::vector<std::string> expected{"trial", "seed", "method", "wall_time_s", "mse"};
    if (table.header != expected) throw Error(ErrorKind::ParseError, path.string() + ": not a per_trial.csv file");
    std::vector<PerTrialRow> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto trial = row.size() == 5 ? csv::parse_number(row[0]) : std::nullopt;
        const auto seed = row.size() == 5 ? csv::parse_number(row[1]) : std::nullopt;
        const auto wall = row.size() == 5 ? csv::parse_number(row[3]) : std::nullopt;
        const auto mse = row.size() == 5 ? csv::parse_number(row[4]) : std::nullopt;
        if (!trial || !seed || !wall || !mse) throw Error(ErrorKind::ParseError, path.string() + ": bad row " + std::to_string(r + 2));
        rows.push_back(PerTrialRow{static_cast<std::size_t>(*trial), static_cast<std::uint64_t>(std::strtoull(row[1].c_str(), nullptr, 10)),
                                   row[2], *wall, *mse});
    }
    return rows;
}

}  // namespace hefs
