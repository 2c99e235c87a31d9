#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "abkd/error.hpp"

namespace abkd {

// Shortest round-trip decimal form; used for every number we persist so that
// reruns produce byte-identical files.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& file) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw DataError(file + ": missing column '" + name + "'");
    }
};

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(header[i]);
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw DataError(path + ": row width " + std::to_string(row.size()) +
                            " does not match header width " + std::to_string(header.size()));
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(row[i]);
        }
        out << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& file,
                                               std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw DataError(file + " line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(cur);
    return fields;
}

} // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line, path, line_no);
        if (line_no == 1) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size()) {
                throw DataError(path + " line " + std::to_string(line_no) + ": expected " +
                                std::to_string(table.header.size()) + " fields, got " +
                                std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) throw DataError(path + ": empty file");
    return table;
}

inline double parse_csv_double(const std::string& field, const std::string& file,
                               std::size_t row_no, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw DataError(file + " row " + std::to_string(row_no) + ": column '" + col +
                        "' is not a number: '" + field + "'");
    }
}

} // namespace abkd
