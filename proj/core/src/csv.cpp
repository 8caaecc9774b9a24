#include "csv.hpp"

#include "hts/error.hpp"

#include <algorithm>
#include <fstream>

namespace hts::detail {

std::vector<std::string> split(const std::string &line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

CsvTable read_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    CsvTable table;
    table.source = path;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split(line, ',');
        for (auto &f : fields) {
            f = trim(std::move(f));
        }
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (!have_header) {
        throw DataError("'" + path.string() + "' is empty");
    }
    return table;
}

std::size_t CsvTable::column(const std::string &name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError("'" + source.string() + "' lacks column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace hts::detail
