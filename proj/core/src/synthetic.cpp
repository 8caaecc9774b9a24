#include "hts/synthetic.hpp"

#include "hts/calendar.hpp"
#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>

namespace hts {

using json = nlohmann::json;

std::size_t GeneratorSpec::effective_cv_start() const {
    if (cv_starting_window > 0) {
        return cv_starting_window;
    }
    const std::size_t m = std::max<std::size_t>(season, 1);
    return std::max<std::size_t>(m, (length / 3) / m * m);
}

void GeneratorSpec::validate() const {
    if (children_per_level.empty()) {
        throw ConfigError("generator: children_per_level must list at least one level");
    }
    for (auto c : children_per_level) {
        if (c == 0) throw ConfigError("generator: every node needs at least one child");
    }
    if (season == 0) throw ConfigError("generator: season must be positive");
    if (length < 2 * season) throw ConfigError("generator: length must cover two seasons");
    if (length < 3 * effective_cv_start()) {
        throw ConfigError("generator: length " + std::to_string(length) + " is below three starting CV windows (" +
                          std::to_string(effective_cv_start()) + ")");
    }
    if (!(level > 0.0)) throw ConfigError("generator: level must be positive");
    if (top_noise < 0.0 || bottom_noise < 0.0) throw ConfigError("generator: noise must be non-negative");
    if (!(promo_probability >= 0.0 && promo_probability <= 1.0)) {
        throw ConfigError("generator: promo_probability must lie in [0, 1]");
    }
    if (promo_lift <= -1.0) throw ConfigError("generator: promo_lift must exceed -1");
    if (weekly_amplitude < 0.0 || yearly_amplitude < 0.0 || weekly_amplitude + yearly_amplitude >= 1.0) {
        throw ConfigError("generator: seasonal amplitudes must be non-negative and sum below 1");
    }
    parse_timestamp(start_date);
    if (shares) {
        for (const auto &set : *shares) {
            double sum = 0.0;
            for (double s : set) {
                if (!(s >= 0.0)) throw ConfigError("generator: shares must be non-negative");
                sum += s;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("generator: each share list must sum to one");
        }
    }
}

GeneratorSpec GeneratorSpec::from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("generator spec is not valid JSON: ") + e.what());
    }
    GeneratorSpec s;
    try {
        for (const auto &[key, value] : j.items()) {
            if (key == "children_per_level") s.children_per_level = value.get<std::vector<std::size_t>>();
            else if (key == "length") s.length = value.get<std::size_t>();
            else if (key == "start_date") s.start_date = value.get<std::string>();
            else if (key == "season") s.season = value.get<std::size_t>();
            else if (key == "level") s.level = value.get<double>();
            else if (key == "trend") s.trend = value.get<double>();
            else if (key == "weekly_amplitude") s.weekly_amplitude = value.get<double>();
            else if (key == "yearly_amplitude") s.yearly_amplitude = value.get<double>();
            else if (key == "top_noise") s.top_noise = value.get<double>();
            else if (key == "bottom_noise") s.bottom_noise = value.get<double>();
            else if (key == "regime") {
                const auto r = value.get<std::string>();
                if (r == "static") s.regime = ShareRegime::Static;
                else if (r == "switching") s.regime = ShareRegime::Switching;
                else throw ConfigError("generator: regime must be 'static' or 'switching'");
            } else if (key == "promo_probability") s.promo_probability = value.get<double>();
            else if (key == "promo_lift") s.promo_lift = value.get<double>();
            else if (key == "shares") s.shares = value.get<std::vector<std::vector<double>>>();
            else if (key == "cv_starting_window") s.cv_starting_window = value.get<std::size_t>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else throw ConfigError("generator: unknown key '" + key + "'");
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("generator spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string GeneratorSpec::to_json() const {
    json j;
    j["children_per_level"] = children_per_level;
    j["length"] = length;
    j["start_date"] = start_date;
    j["season"] = season;
    j["level"] = level;
    j["trend"] = trend;
    j["weekly_amplitude"] = weekly_amplitude;
    j["yearly_amplitude"] = yearly_amplitude;
    j["top_noise"] = top_noise;
    j["bottom_noise"] = bottom_noise;
    j["regime"] = regime == ShareRegime::Static ? "static" : "switching";
    j["promo_probability"] = promo_probability;
    j["promo_lift"] = promo_lift;
    if (shares) j["shares"] = *shares;
    j["cv_starting_window"] = effective_cv_start();
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

namespace {

std::string node_name(std::size_t level, std::size_t index, std::size_t count) {
    const int digits = std::max(1, static_cast<int>(std::to_string(count - 1).size()));
    char buf[32];
    std::snprintf(buf, sizeof buf, "L%zu_%0*zu", level, digits, index);
    return buf;
}

} // namespace

SyntheticData generate(const GeneratorSpec &spec) {
    spec.validate();
    // Structure: level k+1 has children_per_level[k] children per node.
    std::vector<Node> nodes{{"total", std::nullopt, 0}};
    std::vector<std::vector<std::string>> per_level{{"total"}};
    for (std::size_t k = 0; k < spec.children_per_level.size(); ++k) {
        const std::size_t count = per_level[k].size() * spec.children_per_level[k];
        std::vector<std::string> ids;
        for (std::size_t p = 0; p < per_level[k].size(); ++p) {
            for (std::size_t c = 0; c < spec.children_per_level[k]; ++c) {
                ids.push_back(node_name(k + 1, ids.size(), count));
                nodes.push_back({ids.back(), per_level[k][p], static_cast<int>(k + 1)});
            }
        }
        per_level.push_back(std::move(ids));
    }
    SyntheticData out;
    out.hierarchy = Hierarchy::from_nodes(nodes);
    const Hierarchy &h = out.hierarchy;
    const std::size_t M = h.size();
    const std::size_t T = spec.length;
    const int K = h.levels();
    const std::size_t bottom_begin = h.level_begin(K - 1);
    const std::size_t m = h.bottom_count();

    // Base shares within each sibling set.
    Rng share_rng(derive_seed(spec.seed, "shares"));
    std::vector<double> base(M, 1.0);
    std::size_t interior_index = 0;
    for (std::size_t n = 0; n < M; ++n) {
        if (h.is_leaf(n)) continue;
        const auto &kids = h.children(n);
        if (spec.shares) {
            if (interior_index >= spec.shares->size() || (*spec.shares)[interior_index].size() != kids.size()) {
                throw ConfigError("generator: explicit shares do not match the hierarchy shape");
            }
            for (std::size_t c = 0; c < kids.size(); ++c) base[kids[c]] = (*spec.shares)[interior_index][c];
        } else {
            double sum = 0.0;
            for (std::size_t c : kids) sum += (base[c] = share_rng.uniform(0.5, 1.5));
            for (std::size_t c : kids) base[c] /= sum;
        }
        ++interior_index;
    }
    if (spec.shares && interior_index != spec.shares->size()) {
        throw ConfigError("generator: explicit shares do not match the hierarchy shape");
    }

    out.truth.node_ids.resize(M);
    for (std::size_t n = 0; n < M; ++n) out.truth.node_ids[n] = h.id(n);
    out.truth.base_share = base;
    out.truth.proportion.resize(m);
    for (std::size_t b = 0; b < m; ++b) {
        double p = 1.0;
        for (std::size_t n = bottom_begin + b; h.parent(n); n = *h.parent(n)) p *= base[n];
        out.truth.proportion[b] = p;
    }

    SeriesPanel &panel = out.panel;
    const Timestamp start = parse_timestamp(spec.start_date);
    panel.timestamps.resize(T);
    for (std::size_t t = 0; t < T; ++t) panel.timestamps[t] = start + static_cast<Timestamp>(t) * 86400;
    panel.values = Matrix::Zero(static_cast<Index>(T), static_cast<Index>(M));
    panel.exog.assign(M, Matrix(static_cast<Index>(T), 0));
    panel.exog_names.assign(M, {});

    const bool switching = spec.regime == ShareRegime::Switching;
    Rng top_rng(derive_seed(spec.seed, "top"));
    Rng promo_rng(derive_seed(spec.seed, "promo"));
    Rng noise_rng(derive_seed(spec.seed, "noise"));
    if (switching) {
        for (std::size_t b = 0; b < m; ++b) {
            panel.exog[bottom_begin + b] = Matrix::Zero(static_cast<Index>(T), 1);
            panel.exog_names[bottom_begin + b] = {"promo"};
        }
    }
    out.truth.latent_top.resize(T);
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> share(M, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double td = static_cast<double>(t);
        const double latent = (spec.level + spec.trend * td) *
                              (1.0 + spec.weekly_amplitude * std::sin(two_pi * td / static_cast<double>(spec.season)) +
                               spec.yearly_amplitude * std::sin(two_pi * td / 365.25));
        out.truth.latent_top[t] = latent;
        const double top = latent * std::max(0.0, 1.0 + spec.top_noise * top_rng.normal());

        // Bottom-level shares within each sibling set.
        for (std::size_t n = 0; n < bottom_begin; ++n) {
            const auto &kids = h.children(n);
            if (kids.empty() || kids.front() < bottom_begin) {
                for (std::size_t c : kids) share[c] = base[c];
                continue;
            }
            double sum = 0.0;
            for (std::size_t c : kids) {
                double w = base[c];
                if (switching) {
                    const bool promo = promo_rng.bernoulli(spec.promo_probability);
                    panel.exog[c](static_cast<Index>(t), 0) = promo ? 1.0 : 0.0;
                    if (promo) w *= 1.0 + spec.promo_lift;
                }
                share[c] = w;
                sum += w;
            }
            for (std::size_t c : kids) share[c] /= sum;
        }
        for (std::size_t b = 0; b < m; ++b) {
            double v = top;
            for (std::size_t n = bottom_begin + b; h.parent(n); n = *h.parent(n)) v *= share[n];
            v *= std::max(0.0, 1.0 + spec.bottom_noise * noise_rng.normal());
            panel.values(static_cast<Index>(t), static_cast<Index>(bottom_begin + b)) = v;
        }
    }
    // Parents are sums of their children, deepest interior level first.
    for (std::size_t n = bottom_begin; n-- > 0;) {
        for (std::size_t c : h.children(n)) {
            panel.values.col(static_cast<Index>(n)) += panel.values.col(static_cast<Index>(c));
        }
    }
    derive_interior_exog(h, panel);
    return out;
}

void write_dataset(const std::filesystem::path &dir, const GeneratorSpec &spec, const SyntheticData &data) {
    std::filesystem::create_directories(dir);
    const Hierarchy &h = data.hierarchy;
    write_hierarchy_csv(dir / "hierarchy.csv", h);
    write_observations_csv(dir / "observations.csv", h, data.panel);
    SeriesPanel leaves_only = data.panel;
    bool any = false;
    for (std::size_t n = 0; n < h.size(); ++n) {
        if (!h.is_leaf(n)) {
            leaves_only.exog[n] = Matrix(static_cast<Index>(data.panel.length()), 0);
            leaves_only.exog_names[n].clear();
        }
        any = any || !leaves_only.exog_names[n].empty();
    }
    if (any) {
        write_exogenous_csv(dir / "exogenous.csv", h, leaves_only);
    }
    json truth;
    truth["spec"] = json::parse(spec.to_json());
    truth["panel_hash"] = std::to_string(panel_hash(data.panel));
    truth["hierarchy_hash"] = std::to_string(h.hash());
    json nodes = json::array();
    for (std::size_t n = 0; n < h.size(); ++n) {
        nodes.push_back({{"node_id", h.id(n)}, {"level", h.node(n).level}, {"base_share", data.truth.base_share[n]}});
    }
    truth["nodes"] = nodes;
    json props = json::object();
    const std::size_t bottom_begin = h.level_begin(h.levels() - 1);
    for (std::size_t b = 0; b < data.truth.proportion.size(); ++b) {
        props[h.id(bottom_begin + b)] = data.truth.proportion[b];
    }
    truth["bottom_proportions"] = props;
    truth["share_rule"] = spec.regime == ShareRegime::Static
                              ? "bottom share = product of base shares along the path"
                              : "bottom share within siblings = base * (1 + promo_lift * promo) / sum over siblings";
    write_text_file(dir / "truth.json", truth.dump(2) + "\n");
}

} // namespace hts
