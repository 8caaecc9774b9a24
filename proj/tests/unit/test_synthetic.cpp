#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/reconcile.hpp"
#include "hts/synthetic.hpp"

#include <doctest.h>

#include <filesystem>

using namespace hts;

namespace {

GeneratorSpec small_spec(std::uint64_t seed = 1) {
    GeneratorSpec g;
    g.children_per_level = {2, 3};
    g.length = 200;
    g.seed = seed;
    return g;
}

} // namespace

TEST_CASE("static shares are recovered exactly by historical proportions") {
    GeneratorSpec g;
    g.children_per_level = {2};
    g.length = 100;
    g.regime = ShareRegime::Static;
    g.bottom_noise = 0.0;
    g.shares = std::vector<std::vector<double>>{{0.3, 0.7}};
    const auto d = generate(g);
    const Vector top = d.panel.values.col(0);
    const Matrix bottom = d.panel.values.rightCols(2);
    const auto ahp = proportions_ahp(top, bottom);
    CHECK(std::abs(ahp(0) - 0.3) < 1e-9);
    CHECK(std::abs(ahp(1) - 0.7) < 1e-9);
    const auto pha = proportions_pha(top, bottom);
    CHECK(std::abs(pha(0) - 0.3) < 1e-9);
    CHECK(d.panel.exog[1].cols() == 0);
}

TEST_CASE("generation is seeded") {
    const auto a = generate(small_spec(3));
    const auto b = generate(small_spec(3));
    const auto c = generate(small_spec(4));
    CHECK(panel_hash(a.panel) == panel_hash(b.panel));
    CHECK(panel_hash(a.panel) != panel_hash(c.panel));
    CHECK(a.hierarchy.hash() == c.hierarchy.hash());
}

TEST_CASE("generated panels are valid and coherent") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto d = generate(small_spec(seed));
        CHECK_NOTHROW(validate_panel(d.hierarchy, d.panel));
        CHECK(d.hierarchy.size() == 1 + 2 + 6);
        CHECK(d.panel.values.minCoeff() >= 0.0);
        double total = 0.0;
        for (double p : d.truth.proportion) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        // sibling base shares lie on the simplex
        for (std::size_t n = 0; n < d.hierarchy.size(); ++n) {
            if (d.hierarchy.is_leaf(n)) continue;
            double s = 0.0;
            for (std::size_t c : d.hierarchy.children(n)) s += d.truth.base_share[c];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("promotions move volume between siblings") {
    auto g = small_spec(2);
    g.bottom_noise = 0.0;
    g.top_noise = 0.0;
    const auto d = generate(g);
    const auto &h = d.hierarchy;
    const std::size_t first = h.level_begin(h.levels() - 1);
    double promo_share = 0.0, plain_share = 0.0;
    int promo_n = 0, plain_n = 0;
    for (Index t = 0; t < d.panel.values.rows(); ++t) {
        const double parent = d.panel.values(t, static_cast<Index>(*h.parent(first)));
        const double share = d.panel.values(t, static_cast<Index>(first)) / parent;
        if (d.panel.exog[first](t, 0) > 0) {
            promo_share += share;
            ++promo_n;
        } else {
            plain_share += share;
            ++plain_n;
        }
    }
    REQUIRE(promo_n > 0);
    CHECK(promo_share / promo_n > plain_share / plain_n);
}

TEST_CASE("generator spec validation") {
    auto g = small_spec();
    g.cv_starting_window = 70;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.cv_starting_window = 0;
    CHECK(g.effective_cv_start() == 63);
    CHECK_NOTHROW(g.validate());

    CHECK_THROWS_AS(GeneratorSpec::from_json(R"({"length": 300, "colour": "red"})"), ConfigError);
    CHECK_THROWS_AS(GeneratorSpec::from_json(R"({"regime": "chaotic"})"), ConfigError);
    CHECK_THROWS_AS(GeneratorSpec::from_json("{"), ConfigError);
    const auto back = GeneratorSpec::from_json(g.to_json());
    CHECK(back.to_json() == g.to_json());
    CHECK(panel_hash(generate(back).panel) == panel_hash(generate(g).panel));
}

TEST_CASE("datasets written to disk load back") {
    const auto dir = std::filesystem::temp_directory_path() / "hts_synth_test";
    std::filesystem::remove_all(dir);
    const auto g = small_spec(9);
    const auto d = generate(g);
    write_dataset(dir, g, d);
    const auto h = read_hierarchy_csv(dir / "hierarchy.csv");
    CHECK(h.hash() == d.hierarchy.hash());
    const auto p = load_panel(h, dir / "observations.csv", dir / "exogenous.csv");
    CHECK(panel_hash(p) == panel_hash(d.panel));
    CHECK(std::filesystem::exists(dir / "truth.json"));
    std::filesystem::remove_all(dir);
}
