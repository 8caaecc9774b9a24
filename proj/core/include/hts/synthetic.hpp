#pragma once

#include "hts/hierarchy.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hts {

enum class ShareRegime { Static, Switching };

// Daily hierarchy driven by one latent total:
//   top_t = (level + trend t) (1 + a_w sin(2 pi t / season) + a_y sin(2 pi t / 365.25)) (1 + top_noise e_t)
// Every sibling set splits its parent by shares. Interior shares are
// static. Bottom shares are base_i (1 + lift promo_{i,t}) renormalised
// within the sibling set, so a promoted item takes volume from its
// siblings; promo flags are iid Bernoulli(promo_probability). Without
// switching the bottom shares stay at base_i and no regressors are emitted.
// Bottom values carry multiplicative noise (1 + bottom_noise e_{i,t});
// parents are sums, so the panel is coherent by construction.
struct GeneratorSpec {
    std::vector<std::size_t> children_per_level{3, 4};
    std::size_t length = 1460;
    std::string start_date = "2015-01-01";
    std::size_t season = 7;
    double level = 1000.0;
    double trend = 0.2;
    double weekly_amplitude = 0.2;
    double yearly_amplitude = 0.1;
    double top_noise = 0.05;
    double bottom_noise = 0.05;
    ShareRegime regime = ShareRegime::Switching;
    double promo_probability = 0.15;
    double promo_lift = 2.0;
    // Optional explicit shares, one list per interior node in canonical
    // order; drawn from the seed otherwise.
    std::optional<std::vector<std::vector<double>>> shares;
    std::size_t cv_starting_window = 0; // 0: length / 3 rounded down to whole seasons
    std::uint64_t seed = 1;

    // Throws ConfigError. Requires length >= 3 * cv_starting_window.
    void validate() const;
    std::size_t effective_cv_start() const;

    static GeneratorSpec from_json(const std::string &text);
    std::string to_json() const;
};

struct GroundTruth {
    std::vector<std::string> node_ids;
    std::vector<double> base_share;   // per node within its sibling set (root: 1)
    std::vector<double> proportion;   // per bottom node, share of the root without promotions
    std::vector<double> latent_top;   // noiseless top signal
};

struct SyntheticData {
    Hierarchy hierarchy;
    SeriesPanel panel; // interior regressors derived as in load_panel
    GroundTruth truth;
};

SyntheticData generate(const GeneratorSpec &spec);

// hierarchy.csv, observations.csv, exogenous.csv (bottom regressors only,
// when present) and truth.json.
void write_dataset(const std::filesystem::path &dir, const GeneratorSpec &spec, const SyntheticData &data);

} // namespace hts
