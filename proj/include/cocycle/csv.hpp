#pragma once

#include <string>
#include <vector>

namespace cocycle {

// Plain-text tabular artifact: comma separators, '.' decimal point, one
// header row, LF line endings regardless of platform.  Cells are
// pre-formatted strings so rendering is trivially byte-stable.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Full round-trip precision ("%.17g", C locale) — parsing the cell back
// recovers the exact double.
std::string csv_number(double v);
std::string csv_integer(long long v);

// The complete file contents, including the trailing newline.
std::string render_csv(const CsvTable& table);

// Binary write (no newline translation); directories are not created.
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace cocycle
