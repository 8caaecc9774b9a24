#include "commands.hpp"

#include "hts/calendar.hpp"
#include "hts/error.hpp"
#include "hts/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#ifdef HTSF_HAVE_CURL
#include <curl/curl.h>
#endif

namespace fs = std::filesystem;

namespace htsf {

namespace {

constexpr const char *kLandingPage = "https://data.mendeley.com/datasets/s8dgbs3rng/1";

#ifdef HTSF_HAVE_CURL
std::size_t append_body(char *data, std::size_t size, std::size_t n, void *user) {
    static_cast<std::string *>(user)->append(data, size * n);
    return size * n;
}

std::string download(const std::string &url) {
    CURL *curl = curl_easy_init();
    if (!curl) throw hts::DataError("cannot initialise libcurl");
    std::string body;
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, append_body);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_TIMEOUT, 120L);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    if (rc != CURLE_OK) {
        throw hts::DataError(std::string("download of ") + url + " failed: " + curl_easy_strerror(rc));
    }
    return body;
}
#else
std::string download(const std::string &) {
    throw hts::ConfigError("htsf was built without libcurl; download the file by hand and pass --input");
}
#endif

std::vector<std::string> split_line(const std::string &line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && (cell[b] == ' ' || cell[b] == '"')) ++b;
        cell = cell.substr(b);
        if (!cell.empty() && cell.back() == '"') cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

// ISO dates, or day-first d/m/Y.
hts::Timestamp parse_date(const std::string &text) {
    if (text.find('/') == std::string::npos) return hts::parse_timestamp(text);
    int part[3] = {0, 0, 0};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto end = i < 2 ? text.find('/', pos) : text.size();
        if (end == std::string::npos) throw hts::DataError("unrecognised date '" + text + "'");
        std::from_chars(text.data() + pos, text.data() + end, part[i]);
        pos = end + 1;
    }
    char iso[16];
    std::snprintf(iso, sizeof iso, "%04d-%02d-%02d", part[2], part[1], part[0]);
    return hts::parse_timestamp(iso);
}

double parse_value(const std::string &text) {
    if (text.empty()) return 0.0;
    double v = 0.0;
    std::istringstream in(text);
    in >> v;
    if (in.fail()) throw hts::DataError("non-numeric value '" + text + "'");
    return v;
}

// QTY_B<brand>_<item> -> ("B<brand>", "B<brand>_<item>")
std::optional<std::pair<std::string, std::string>> item_of(const std::string &col, const std::string &prefix) {
    if (col.rfind(prefix, 0) != 0) return std::nullopt;
    const auto item = col.substr(prefix.size());
    const auto us = item.find('_');
    if (us == std::string::npos || item.empty() || item[0] != 'B') return std::nullopt;
    return std::make_pair(item.substr(0, us), item);
}

} // namespace

void cmd_fetch_italian(const ItalianOptions &o) {
    std::string text;
    if (!o.input.empty()) {
        text = hts::read_text_file(o.input);
    } else {
        if (o.url.empty()) {
            throw hts::ConfigError(std::string("no download URL; fetch the dataset from ") + kLandingPage +
                                   " and pass the CSV with --input");
        }
        text = download(o.url);
    }

    std::istringstream in(text);
    std::string header_line;
    std::getline(in, header_line);
    const char sep = std::count(header_line.begin(), header_line.end(), ';') >
                             std::count(header_line.begin(), header_line.end(), ',')
                         ? ';'
                         : ',';
    const auto header = split_line(header_line, sep);
    const auto date_col = std::find_if(header.begin(), header.end(), [](const std::string &c) {
        std::string u = c;
        std::transform(u.begin(), u.end(), u.begin(), [](unsigned char ch) { return std::toupper(ch); });
        return u == "DATE";
    });
    if (date_col == header.end()) {
        throw hts::DataError(std::string("input is not the wide Italian CSV (no DATE column); download it from ") +
                             kLandingPage + " and pass it with --input");
    }
    const auto c_date = static_cast<std::size_t>(date_col - header.begin());

    std::map<std::string, std::size_t> qty, promo; // item -> column
    std::map<std::string, std::string> brand_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (auto it = item_of(header[c], "QTY_")) {
            qty[it->second] = c;
            brand_of[it->second] = it->first;
        } else if (auto ip = item_of(header[c], "PROMO_")) {
            promo[ip->second] = c;
        }
    }
    if (qty.empty()) throw hts::DataError("input has no QTY_B<brand>_<item> columns");

    std::vector<hts::Node> nodes{{"total", std::nullopt, 0}};
    std::vector<std::string> brands;
    for (const auto &[item, brand] : brand_of) {
        if (std::find(brands.begin(), brands.end(), brand) == brands.end()) brands.push_back(brand);
        nodes.push_back({item, brand, 2});
    }
    for (const auto &b : brands) nodes.push_back({b, std::string("total"), 1});
    const auto h = hts::Hierarchy::from_nodes(nodes);
    const auto S = hts::build_summing_matrix(h);
    const std::size_t m = h.bottom_count();
    const std::size_t first_bottom = h.level_begin(h.levels() - 1);

    std::vector<hts::Timestamp> ts;
    std::vector<std::vector<double>> qty_rows, promo_rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line, sep);
        if (cells.size() < header.size()) throw hts::DataError("short row: '" + line + "'");
        ts.push_back(parse_date(cells[c_date]));
        std::vector<double> q(m), p(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const auto &id = h.id(first_bottom + j);
            q[j] = parse_value(cells[qty.at(id)]);
            if (auto pc = promo.find(id); pc != promo.end()) p[j] = parse_value(cells[pc->second]);
        }
        qty_rows.push_back(std::move(q));
        promo_rows.push_back(std::move(p));
    }
    if (ts.empty()) throw hts::DataError("input has no data rows");

    const auto T = static_cast<hts::Index>(ts.size());
    hts::Matrix bottom(T, static_cast<hts::Index>(m));
    for (hts::Index t = 0; t < T; ++t)
        for (std::size_t j = 0; j < m; ++j) bottom(t, static_cast<hts::Index>(j)) = qty_rows[t][j];

    hts::SeriesPanel panel;
    panel.timestamps = ts;
    panel.values = hts::aggregate(S, bottom);
    panel.exog.assign(h.size(), hts::Matrix(T, 0));
    panel.exog_names.assign(h.size(), {});
    if (!promo.empty()) {
        for (std::size_t j = 0; j < m; ++j) {
            hts::Matrix x(T, 1);
            for (hts::Index t = 0; t < T; ++t) x(t, 0) = promo_rows[t][j];
            panel.exog[first_bottom + j] = x;
            panel.exog_names[first_bottom + j] = {"promo"};
        }
    }

    const fs::path dir(o.output);
    fs::create_directories(dir);
    hts::write_hierarchy_csv(dir / "hierarchy.csv", h);
    hts::write_observations_csv(dir / "observations.csv", h, panel);
    if (!promo.empty()) hts::write_exogenous_csv(dir / "exogenous.csv", h, panel);
}

} // namespace htsf
