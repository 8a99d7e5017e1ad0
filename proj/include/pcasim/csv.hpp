/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "error.hpp"
#include "matrix.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pcasim::csv {

struct Table {
    std::vector<std::string> header; // empty when the file has none
    Matrix<double> data;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace detail

/// Comma separated, '.' decimal, optional single header row. Blank lines
/// are skipped. Errors carry the 1-based line and column.
inline Table read(std::istream& in, const std::string& name = "<input>")
{
    Table t;
    std::vector<double> values;
    std::size_t cols = 0, rows = 0, lineno = 0;
    bool first = true;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line);
        if (first) {
            first = false;
            cols = cells.size();
            double probe = 0.0;
            bool numeric = true;
            for (auto c : cells) numeric = numeric && detail::parse_double(c, probe);
            if (!numeric) {
                bool any_numeric = false;
                for (auto c : cells) any_numeric = any_numeric || detail::parse_double(c, probe);
                if (!any_numeric) {
                    for (auto c : cells) t.header.emplace_back(detail::trim(c));
                    continue;
                }
            }
        }
        if (cells.size() != cols)
            throw InputError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                             " columns, found " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v = 0.0;
            if (!detail::parse_double(cells[j], v))
                throw InputError(name + ":" + std::to_string(lineno) + ":" + std::to_string(j + 1) +
                                 ": non-numeric cell '" + std::string(detail::trim(cells[j])) + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw InputError(name + ": no data rows");
    t.data = Matrix<double>(rows, cols, std::move(values));
    return t;
}

inline Table read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read(in, path);
}

/// Shortest round-trip representation, so output is stable and lossless.
inline std::string format(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline void write(std::ostream& os, const Matrix<double>& m, const std::vector<std::string>& header = {})
{
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    if (!header.empty()) os << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format(m(i, j));
        os << '\n';
    }
}

} // namespace pcasim::csv
