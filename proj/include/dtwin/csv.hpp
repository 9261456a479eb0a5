#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace dtwin {

/// RFC 4180 subset: comma separated, optional double quotes with "" escapes,
/// CRLF tolerated. No embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> row_lines;  // 1-based source line of each row

    /// Column index or -1.
    int column(std::string_view name) const;
};

/// Blank lines are skipped. An empty input yields an empty header.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Strict float parse of a whole cell (surrounding blanks allowed).
bool parse_double(std::string_view text, double& out);

}  // namespace dtwin
