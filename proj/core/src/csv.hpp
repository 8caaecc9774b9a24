#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hts::detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    // Index of a required column; throws DataError naming the file.
    std::size_t column(const std::string &name) const;
    std::filesystem::path source;
};

// Plain comma-separated reader: no quoting, CRLF tolerated, blank lines skipped.
CsvTable read_csv(const std::filesystem::path &path);

std::vector<std::string> split(const std::string &line, char sep);

std::string trim(std::string s);

} // namespace hts::detail
