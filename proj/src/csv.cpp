#include "gsne/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gsne/errors.hpp"

namespace gsne {

int csv_table::col_index(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write file: " + path);
    out << content;
    if (!out) throw input_error("short write: " + path);
}

csv_table read_csv(const std::string& path) {
    return parse_csv(read_text_file(path), path);
}

csv_table parse_csv(const std::string& text, const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(record);
        record.clear();
    };

    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field.empty() && !field_started) {
                in_quotes = true;
                field_started = true;
            } else {
                field += c;
            }
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            break;
        default:
            field += c;
            field_started = true;
            break;
        }
    }
    if (in_quotes) throw input_error(origin + ": unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();

    if (records.empty()) throw input_error(origin + ": empty csv");
    csv_table t;
    t.header = records.front();
    for (size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() == 1 && records[r][0].empty()) continue; // trailing blank line
        if (records[r].size() != t.header.size()) {
            throw input_error(origin + ": row " + std::to_string(r) + " has " +
                              std::to_string(records[r].size()) + " cells, expected " +
                              std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace gsne
