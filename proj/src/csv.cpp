#include "cocycle/csv.hpp"

#include <cstdio>
#include <fstream>

#include "cocycle/errors.hpp"

namespace cocycle {

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_integer(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", v);
    return buf;
}

std::string render_csv(const CsvTable& table) {
    if (table.header.empty()) throw invalid_input("table has no columns");
    std::string out;
    auto append_row = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    append_row(table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw invalid_input("row width does not match the header");
        }
        append_row(row);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw invalid_input("cannot open output file: " + path);
    out.write(contents.data(),
              static_cast<std::streamsize>(contents.size()));
    if (!out) throw numerical_error("short write on output file: " + path);
}

}  // namespace cocycle
