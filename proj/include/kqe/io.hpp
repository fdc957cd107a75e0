#pragma once

#include "kqe/core.hpp"
#include "kqe/testing.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace kqe {

struct Dataset {
    std::string name;
    SampleSet points;
    std::string source;
};

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ArgumentError("unknown report format '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

/// Fixed 17 significant digits; round-trips every double.
inline std::string format_double17(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Locale-independent; rejects trailing garbage and non-finite values.
inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    auto where = [&] { return " at row " + std::to_string(row) + ", column " + std::to_string(col); };
    std::string_view t = trim(cell);
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    if (t.empty()) throw ParseError("empty cell" + where(), row, col);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError("non-numeric cell '" + std::string(t) + "'" + where(), row, col);
    if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(t) + "'" + where(), row, col);
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("error writing '" + path + "'");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Parse comma-separated numeric text; one row per line, blank lines ignored.
/// Rows and columns in error messages are 1-based physical positions.
inline SampleSet parse_csv(std::string_view text, bool has_header = false) {
    std::vector<double> values;
    std::size_t cols = 0, rows = 0, line_no = 0;
    bool header_pending = has_header;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            if (eol == text.size()) break;
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto cells = detail::split(line, ',');
        if (rows == 0) cols = cells.size();
        else if (cells.size() != cols)
            throw ParseError("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                                 " columns, found " + std::to_string(cells.size()),
                             line_no, cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) values.push_back(detail::parse_cell(cells[c], line_no, c + 1));
        ++rows;
    }
    SampleSet out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
    return out;
}

inline Dataset load_csv(const std::string& path, bool has_header = false) {
    Dataset d;
    d.points = parse_csv(detail::read_file(path), has_header);
    if (d.points.rows() == 0) throw ParseError("'" + path + "' contains no data rows", 0, 0);
    d.source = path;
    const auto slash = path.find_last_of('/');
    d.name = slash == std::string::npos ? path : path.substr(slash + 1);
    return d;
}

inline std::string to_csv(const SampleSet& points) {
    std::string out;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = 0; j < points.cols(); ++j) {
            if (j) out += ',';
            out += format_double17(points(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const SampleSet& points, const std::string& path) { detail::write_file(path, to_csv(points)); }

// ---------------------------------------------------------------------------
// Experiment reports
// ---------------------------------------------------------------------------

inline constexpr std::string_view report_csv_header = "method,param_name,param_value,rejection_rate,trials,seed";

inline std::string reports_to_csv(std::span<const ExperimentReport> reports) {
    std::string out(report_csv_header);
    out += '\n';
    for (const auto& r : reports)
        for (const auto& p : r.points) {
            out += r.method + ',' + r.param_name + ',' + format_double(p.param_value) + ',' +
                   format_double(p.rejection_rate) + ',' + std::to_string(p.trials) + ',' + std::to_string(r.seed) + '\n';
        }
    return out;
}

inline nlohmann::ordered_json report_to_json(const ExperimentReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["param_name"] = r.param_name;
    j["trials"] = r.trials;
    j["seed"] = r.seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.config) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& p : r.points)
        pts.push_back({{"param_value", p.param_value}, {"rejection_rate", p.rejection_rate}, {"trials", p.trials}});
    j["points"] = pts;
    return j;
}

inline ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
    ExperimentReport r;
    r.method = j.at("method").get<std::string>();
    r.param_name = j.at("param_name").get<std::string>();
    r.trials = j.at("trials").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    for (const auto& p : j.at("points"))
        r.points.push_back({p.at("param_value").get<double>(), p.at("rejection_rate").get<double>(),
                            p.at("trials").get<std::size_t>()});
    return r;
}

inline std::string reports_to_json(std::span<const ExperimentReport> reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    return arr.dump(2) + "\n";
}

/// Parse either a single report object or an array of them.
inline std::vector<ExperimentReport> reports_from_json(std::string_view text) {
    const auto j = nlohmann::ordered_json::parse(text);
    std::vector<ExperimentReport> out;
    if (j.is_array())
        for (const auto& e : j) out.push_back(report_from_json(e));
    else
        out.push_back(report_from_json(j));
    return out;
}

/// Inverse of reports_to_csv, minus the config echo (not part of the CSV schema).
inline std::vector<ExperimentReport> reports_from_csv(std::string_view text) {
    std::vector<ExperimentReport> out;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (++line_no == 1 || line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != 6) throw ParseError("report row " + std::to_string(line_no) + " needs 6 fields", line_no, 0);
        const std::string method(cells[0]), param(cells[1]);
        const double value = detail::parse_cell(cells[2], line_no, 3);
        const double rate = detail::parse_cell(cells[3], line_no, 4);
        const auto trials = static_cast<std::size_t>(detail::parse_cell(cells[4], line_no, 5));
        std::uint64_t seed = 0;
        std::from_chars(cells[5].data(), cells[5].data() + cells[5].size(), seed);
        if (out.empty() || out.back().method != method || out.back().param_name != param) {
            out.push_back({});
            out.back().method = method;
            out.back().param_name = param;
            out.back().trials = trials;
            out.back().seed = seed;
        }
        out.back().points.push_back({value, rate, trials});
    }
    return out;
}

inline void write_reports(std::span<const ExperimentReport> reports, ReportFormat format, const std::string& path) {
    detail::write_file(path, format == ReportFormat::csv ? reports_to_csv(reports) : reports_to_json(reports));
}

inline void write_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
    if (format == ReportFormat::json) detail::write_file(path, report_to_json(report).dump(2) + "\n");
    else write_reports(std::span<const ExperimentReport>(&report, 1), format, path);
}

inline std::vector<ExperimentReport> read_reports(const std::string& path, ReportFormat format) {
    const std::string text = detail::read_file(path);
    return format == ReportFormat::csv ? reports_from_csv(text) : reports_from_json(text);
}

} // namespace kqe
