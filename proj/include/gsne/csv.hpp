#pragma once

#include <string>
#include <vector>

namespace gsne {

// A parsed CSV table: header row plus string cells, rectangular.
struct csv_table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col_index(const std::string& name) const; // -1 when absent
};

// RFC-4180-ish reader: quoted fields, embedded commas/quotes/newlines,
// both LF and CRLF. Throws input_error on ragged rows or missing file.
csv_table read_csv(const std::string& path);
csv_table parse_csv(const std::string& text, const std::string& origin);

// Writer helpers. Doubles are printed with %.17g so values round-trip
// exactly and repeated exports are byte-identical.
std::string csv_quote(const std::string& field);
std::string format_double(double v);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace gsne
