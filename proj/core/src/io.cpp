#include "hts/io.hpp"

#include "csv.hpp"
#include "hts/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hts {

namespace {

double parse_double(const std::string &text, const detail::CsvTable &table, std::size_t row) {
    double value = 0.0;
    const char *first = text.data();
    const char *last = text.data() + text.size();
    if (!text.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(table.source.string() + ":" + std::to_string(table.line_numbers[row]) +
                        ": not a number '" + text + "'");
    }
    return value;
}

std::ofstream open_out(const std::filesystem::path &path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    return out;
}

} // namespace

std::string format_number(double value) {
    if (value == 0.0) {
        return "0";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) {
        throw NumericError("cannot format number");
    }
    return std::string(buf, ptr);
}

Hierarchy read_hierarchy_csv(const std::filesystem::path &path) {
    const auto table = detail::read_csv(path);
    const auto c_id = table.column("node_id");
    const auto c_parent = table.column("parent_id");
    const auto c_level = table.column("level");
    std::vector<Node> nodes;
    nodes.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        Node node;
        node.id = row[c_id];
        if (!row[c_parent].empty()) {
            node.parent = row[c_parent];
        }
        const double level = parse_double(row[c_level], table, r);
        if (level != std::floor(level) || level < 0) {
            throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": bad level");
        }
        node.level = static_cast<int>(level);
        nodes.push_back(std::move(node));
    }
    return Hierarchy::from_nodes(std::move(nodes));
}

void write_hierarchy_csv(const std::filesystem::path &path, const Hierarchy &h) {
    auto out = open_out(path);
    out << "node_id,parent_id,level\n";
    for (const auto &node : h.nodes()) {
        out << node.id << ',' << node.parent.value_or("") << ',' << node.level << '\n';
    }
}

SeriesPanel read_observations_csv(const std::filesystem::path &path, const Hierarchy &h) {
    const auto table = detail::read_csv(path);
    const auto c_ts = table.column("timestamp");
    const auto c_node = table.column("node_id");
    const auto c_value = table.column("value");

    std::map<Timestamp, std::vector<std::optional<double>>> by_time;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        const Timestamp ts = parse_timestamp(row[c_ts]);
        const auto node = h.find(row[c_node]);
        if (!node) {
            throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": unknown node '" +
                            row[c_node] + "'");
        }
        auto &slot = by_time.try_emplace(ts, h.size()).first->second;
        auto &cell = slot[*node];
        if (cell) {
            throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": duplicate observation");
        }
        cell = parse_double(row[c_value], table, r);
    }

    SeriesPanel panel;
    panel.values.resize(static_cast<Index>(by_time.size()), static_cast<Index>(h.size()));
    Index t = 0;
    for (const auto &[ts, cells] : by_time) {
        panel.timestamps.push_back(ts);
        for (std::size_t n = 0; n < h.size(); ++n) {
            if (!cells[n]) {
                throw DataError("missing observation for node '" + h.id(n) + "' at " + format_timestamp(ts));
            }
            panel.values(t, static_cast<Index>(n)) = *cells[n];
        }
        ++t;
    }
    panel.exog.assign(h.size(), Matrix(static_cast<Index>(by_time.size()), 0));
    panel.exog_names.assign(h.size(), {});
    return panel;
}

void write_observations_csv(const std::filesystem::path &path, const Hierarchy &h, const SeriesPanel &panel) {
    auto out = open_out(path);
    out << "timestamp,node_id,value\n";
    for (std::size_t t = 0; t < panel.length(); ++t) {
        const auto ts = format_timestamp(panel.timestamps[t]);
        for (std::size_t n = 0; n < h.size(); ++n) {
            out << ts << ',' << h.id(n) << ',' << format_number(panel.values(static_cast<Index>(t), static_cast<Index>(n)))
                << '\n';
        }
    }
}

void read_exogenous_csv(const std::filesystem::path &path, const Hierarchy &h, SeriesPanel &panel) {
    const auto table = detail::read_csv(path);
    const auto c_ts = table.column("timestamp");
    const auto c_node = table.column("node_id");
    const auto c_var = table.column("variable");
    const auto c_value = table.column("value");

    std::map<Timestamp, std::size_t> row_of;
    for (std::size_t t = 0; t < panel.length(); ++t) {
        row_of.emplace(panel.timestamps[t], t);
    }
    std::vector<std::set<std::string>> names(h.size());
    for (const auto &row : table.rows) {
        const auto node = h.find(row[c_node]);
        if (!node) {
            throw DataError(path.string() + ": unknown node '" + row[c_node] + "'");
        }
        names[*node].insert(row[c_var]);
    }
    const auto T = static_cast<Index>(panel.length());
    std::vector<std::vector<std::vector<char>>> seen(h.size());
    for (std::size_t n = 0; n < h.size(); ++n) {
        panel.exog_names[n].assign(names[n].begin(), names[n].end());
        panel.exog[n] = Matrix::Zero(T, static_cast<Index>(names[n].size()));
        seen[n].assign(names[n].size(), std::vector<char>(panel.length(), 0));
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        const Timestamp ts = parse_timestamp(row[c_ts]);
        const auto it = row_of.find(ts);
        if (it == row_of.end()) {
            continue; // regressors outside the observed span are ignored
        }
        const std::size_t n = h.index_of(row[c_node]);
        const auto &nn = panel.exog_names[n];
        const auto v = static_cast<std::size_t>(std::find(nn.begin(), nn.end(), row[c_var]) - nn.begin());
        if (seen[n][v][it->second]) {
            throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": duplicate exogenous value");
        }
        seen[n][v][it->second] = 1;
        panel.exog[n](static_cast<Index>(it->second), static_cast<Index>(v)) = parse_double(row[c_value], table, r);
    }
    for (std::size_t n = 0; n < h.size(); ++n) {
        for (std::size_t v = 0; v < names[n].size(); ++v) {
            for (std::size_t t = 0; t < panel.length(); ++t) {
                if (!seen[n][v][t]) {
                    throw DataError("missing exogenous value '" + panel.exog_names[n][v] + "' for node '" + h.id(n) +
                                    "' at " + format_timestamp(panel.timestamps[t]));
                }
            }
        }
    }
}

void write_exogenous_csv(const std::filesystem::path &path, const Hierarchy &h, const SeriesPanel &panel) {
    auto out = open_out(path);
    out << "timestamp,node_id,variable,value\n";
    for (std::size_t t = 0; t < panel.length(); ++t) {
        const auto ts = format_timestamp(panel.timestamps[t]);
        for (std::size_t n = 0; n < h.size(); ++n) {
            for (std::size_t v = 0; v < panel.exog_names[n].size(); ++v) {
                out << ts << ',' << h.id(n) << ',' << panel.exog_names[n][v] << ','
                    << format_number(panel.exog[n](static_cast<Index>(t), static_cast<Index>(v))) << '\n';
            }
        }
    }
}

SeriesPanel load_panel(const Hierarchy &h, const std::filesystem::path &observations,
                       const std::optional<std::filesystem::path> &exogenous, double eps) {
    auto panel = read_observations_csv(observations, h);
    if (exogenous) {
        read_exogenous_csv(*exogenous, h, panel);
    }
    validate_panel(h, panel, eps);
    derive_interior_exog(h, panel);
    return panel;
}

void write_forecast_csv(std::ostream &out, const ForecastSet &fs, bool header) {
    if (header) {
        out << "timestamp,node_id,forecast,method\n";
    }
    for (std::size_t t = 0; t < fs.horizon(); ++t) {
        const auto ts = format_timestamp(fs.timestamps[t]);
        for (std::size_t n = 0; n < fs.node_ids.size(); ++n) {
            out << ts << ',' << fs.node_ids[n] << ','
                << format_number(fs.values(static_cast<Index>(t), static_cast<Index>(n))) << ',' << fs.method << '\n';
        }
    }
}

void write_forecast_csv(const std::filesystem::path &path, const ForecastSet &fs) {
    auto out = open_out(path);
    write_forecast_csv(out, fs, true);
}

std::vector<std::string> forecast_csv_methods(const std::filesystem::path &path) {
    const auto table = detail::read_csv(path);
    const auto c_method = table.column("method");
    std::vector<std::string> out;
    for (const auto &row : table.rows) {
        if (std::find(out.begin(), out.end(), row[c_method]) == out.end()) {
            out.push_back(row[c_method]);
        }
    }
    return out;
}

ForecastSet read_forecast_csv(const std::filesystem::path &path, const Hierarchy &h, const std::string &method) {
    const auto table = detail::read_csv(path);
    const auto c_ts = table.column("timestamp");
    const auto c_node = table.column("node_id");
    const auto c_value = table.column("forecast");
    const auto c_method = table.column("method");

    std::string wanted = method;
    if (wanted.empty()) {
        const auto methods = forecast_csv_methods(path);
        if (methods.size() != 1) {
            throw DataError("'" + path.string() + "' holds " + std::to_string(methods.size()) +
                            " methods; name the one to read");
        }
        wanted = methods.front();
    }
    std::map<Timestamp, std::vector<std::optional<double>>> by_time;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        if (row[c_method] != wanted) {
            continue;
        }
        const std::size_t n = h.index_of(row[c_node]);
        auto &slot = by_time.try_emplace(parse_timestamp(row[c_ts]), h.size()).first->second;
        slot[n] = parse_double(row[c_value], table, r);
    }
    if (by_time.empty()) {
        throw DataError("no rows for method '" + wanted + "' in '" + path.string() + "'");
    }
    ForecastSet fs;
    fs.method = wanted;
    for (const auto &node : h.nodes()) {
        fs.node_ids.push_back(node.id);
    }
    fs.values.resize(static_cast<Index>(by_time.size()), static_cast<Index>(h.size()));
    Index t = 0;
    for (const auto &[ts, cells] : by_time) {
        fs.timestamps.push_back(ts);
        for (std::size_t n = 0; n < h.size(); ++n) {
            if (!cells[n]) {
                throw DataError("forecast for node '" + h.id(n) + "' missing at " + format_timestamp(ts));
            }
            fs.values(t, static_cast<Index>(n)) = *cells[n];
        }
        ++t;
    }
    return fs;
}

void write_text_file(const std::filesystem::path &path, const std::string &content) {
    auto out = open_out(path);
    out << content;
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace hts
