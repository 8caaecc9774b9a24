#include "hts/error.hpp"
#include "hts/neuralnet.hpp"
#include "hts/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace hts;
using namespace hts::nn;

namespace {

Dataset random_dataset(Rng &rng, const NetworkSpec &spec, std::size_t n) {
    Dataset d;
    d.exog.resize(static_cast<Index>(n), static_cast<Index>(spec.exog_dim));
    d.windows.resize(static_cast<Index>(n), static_cast<Index>(spec.window));
    d.targets.resize(static_cast<Index>(n), static_cast<Index>(spec.outputs));
    for (Index i = 0; i < d.exog.size(); ++i) d.exog.data()[i] = rng.normal();
    for (Index i = 0; i < d.windows.size(); ++i) d.windows.data()[i] = rng.normal();
    for (Index i = 0; i < d.targets.size(); ++i) d.targets.data()[i] = rng.normal();
    return d;
}

// Norm-wise relative error between analytic and central-difference gradients.
double gradient_error(Network &net, const Dataset &d, double fit_w, double sum_w) {
    const auto analytic = backward(net, d, fit_w, sum_w);
    auto p = net.parameters();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i], step = 1e-5;
        p[i] = keep + step;
        const double up = weighted_loss(d.targets, predict(net, d), fit_w, sum_w);
        p[i] = keep - step;
        const double down = weighted_loss(d.targets, predict(net, d), fit_w, sum_w);
        p[i] = keep;
        const double fd = (up - down) / (2 * step);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd + analytic[i] * analytic[i];
    }
    return den > 0 ? std::sqrt(num) / std::sqrt(den) : 0.0;
}

} // namespace

TEST_CASE("spec validation and widths") {
    auto spec = NetworkSpec::two_branch(3, 10, 2, 4, 3, 5, 2, 2);
    CHECK(spec.mlp_output_width() == 5);
    CHECK(spec.cnn_output_width() == 40);
    CHECK(spec.head_input_width() == 45);
    Network net(spec);
    CHECK(net.parameter_count() == spec.parameter_count());
    CHECK(spec.parameter_count() == (3 * 5 + 5) + (5 * 5 + 5) + (1 * 4 * 3 + 4) + (4 * 4 * 3 + 4) + (45 * 2 + 2));

    auto bad = spec;
    bad.outputs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.conv[0].kernel = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    // branches without inputs are omitted
    const auto cnn_only = NetworkSpec::two_branch(0, 8, 2, 2, 3, 4, 2, 3);
    CHECK(cnn_only.mlp_output_width() == 0);
    CHECK(cnn_only.head_input_width() == 16);
    CHECK(spec_from_json(to_json(spec)) == spec);
}

TEST_CASE("forward examples") {
    auto spec = NetworkSpec::two_branch(2, 3, 2, 2, 2, 2, 1, 1);
    Network net(spec);
    // all-zero weights: output is the head bias
    auto p = net.parameters();
    std::fill(p.begin(), p.end(), 0.0);
    p[p.size() - 2] = 1.5;
    p[p.size() - 1] = -0.5;
    const std::vector<double> x{1, 2}, w{3, 4, 5};
    Vector out = net.forward(x, w);
    CHECK(out(0) == 1.5);
    CHECK(out(1) == -0.5);

    // single dense identity layer with ReLU, no window
    NetworkSpec dense;
    dense.exog_dim = 2;
    dense.hidden = {2};
    dense.outputs = 2;
    Network d(dense);
    auto q = d.parameters();
    std::fill(q.begin(), q.end(), 0.0);
    // hidden W = I, b = 0; head W = I, b = 0
    q[0] = 1;
    q[3] = 1;
    q[6] = 1;
    q[9] = 1;
    const std::vector<double> xin{2, -3};
    out = d.forward(xin, {});
    CHECK(out(0) == 2);
    CHECK(out(1) == 0);

    // conv kernel [1, 0, 0] with same padding shifts the window by one
    NetworkSpec conv;
    conv.window = 4;
    conv.conv = {{1, 3}};
    conv.outputs = 4;
    Network c(conv);
    auto r = c.parameters();
    std::fill(r.begin(), r.end(), 0.0);
    r[0] = 1; // taps [1, 0, 0]
    for (int i = 0; i < 4; ++i) r[4 + i * 4 + i] = 1; // head identity after the conv bias
    const std::vector<double> win{1, 2, 3, 4};
    out = c.forward({}, win);
    CHECK(out(0) == 0);
    CHECK(out(1) == 1);
    CHECK(out(2) == 2);
    CHECK(out(3) == 3);

    CHECK_THROWS_AS(c.forward({}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("same padding keeps the temporal length") {
    Rng rng(1);
    for (std::size_t k : {1, 2, 3, 4, 8, 16}) {
        auto spec = NetworkSpec::two_branch(0, 30, 1, 3, k, 4, 6, 0);
        Network net(spec);
        net.initialize(rng);
        Workspace ws;
        std::vector<double> w(30, 1.0);
        net.forward(ws, {}, w);
        for (const auto &a : ws.conv_act) CHECK(a.size() == 3 * 30);
    }
}

TEST_CASE("coherence loss examples") {
    RowMatrix y(1, 2), yhat(1, 2);
    y << 1, 2;
    CHECK(coherence_loss(y, y, 0.5) == 0.0);
    yhat << 0, 0;
    CHECK(std::abs(coherence_loss(y, yhat, 0.5) - 7.0) < 1e-12);
    yhat << 1, 0;
    CHECK(std::abs(coherence_loss(y, yhat, 0.5) - 4.0) < 1e-12);
    CHECK_THROWS_AS(coherence_loss(y, yhat, 0.0), ConfigError);
    CHECK_THROWS_AS(coherence_loss(y, yhat, 1.0), ConfigError);

    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        RowMatrix a(3, 4), b(3, 4);
        for (Index j = 0; j < a.size(); ++j) {
            a.data()[j] = rng.normal();
            b.data()[j] = a.data()[j] + (i % 2 ? rng.normal() * 1e-7 : rng.normal());
        }
        const double l = coherence_loss(a, b, rng.uniform(0.05, 0.95));
        CHECK(l >= 0.0);
        if (l < 1e-12) CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t exog = trial % 3 == 0 ? 0 : 1 + rng.below(3);
        const std::size_t window = trial % 3 == 1 ? 0 : 3 + rng.below(5);
        NetworkSpec spec;
        spec.exog_dim = exog;
        spec.window = window;
        for (std::size_t l = 0, n = exog ? 1 + rng.below(2) : 0; l < n; ++l) spec.hidden.push_back(2 + rng.below(3));
        for (std::size_t l = 0, n = window ? 1 + rng.below(2) : 0; l < n; ++l)
            spec.conv.push_back({1 + rng.below(3), 1 + rng.below(4)});
        spec.outputs = 1 + rng.below(3);
        Network net(spec);
        net.initialize(rng);
        auto p = net.parameters();
        for (auto &v : p) v += rng.uniform(0.01, 0.1); // positive biases keep ReLUs away from kinks
        const auto d = random_dataset(rng, spec, 4);
        CHECK(gradient_error(net, d, 1.0, 0.0) < 1e-4);
        CHECK(gradient_error(net, d, 0.0, 1.0) < 1e-4);
        CHECK(gradient_error(net, d, 0.5, 0.5) < 1e-4);
    }
}

TEST_CASE("loss gradient splits into its two terms") {
    Rng rng(4);
    auto spec = NetworkSpec::two_branch(2, 6, 3, 2, 3, 4, 2, 2);
    Network net(spec);
    net.initialize(rng);
    const auto d = random_dataset(rng, spec, 5);
    const auto fit = backward(net, d, 1.0, 0.0);
    const auto sum = backward(net, d, 0.0, 1.0);
    const auto mixed = backward(net, d, 0.5);
    for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(std::abs(mixed[i] - 0.5 * fit[i] - 0.5 * sum[i]) < 1e-12);

    // perfect fit: the data term has zero gradient
    Dataset exact = d;
    exact.targets = predict(net, d);
    for (double g : backward(net, exact, 1.0, 0.0)) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("Adam steps") {
    const AdamConfig cfg;
    std::vector<double> w{1.0, -2.0}, g{0.3, -5.0};
    AdamState st(2);
    adam_step(w, g, st, cfg);
    CHECK(std::abs(w[0] - (1.0 - 1e-3)) < 1e-6);
    CHECK(std::abs(w[1] - (-2.0 + 1e-3)) < 1e-6);

    std::vector<double> z{0.7}, zero{0.0};
    AdamState sz(1);
    adam_step(z, zero, sz, cfg);
    CHECK(z[0] == 0.7);

    // two steps by hand
    std::vector<double> v{0.0}, c{2.0};
    AdamState s2(1);
    adam_step(v, c, s2, cfg);
    adam_step(v, c, s2, cfg);
    double m = 0, u = 0, x = 0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * 2.0;
        u = 0.999 * u + 0.001 * 4.0;
        const double mh = m / (1 - std::pow(0.9, t)), uh = u / (1 - std::pow(0.999, t));
        x -= 1e-3 * mh / (std::sqrt(uh) + 1e-8);
    }
    CHECK(std::abs(v[0] - x) < 1e-15);
}

TEST_CASE("training on a realizable target") {
    Rng rng(5);
    NetworkSpec spec;
    spec.exog_dim = 2;
    spec.hidden = {8};
    spec.outputs = 2;
    Dataset d;
    d.exog.resize(200, 2);
    d.windows.resize(200, 0);
    d.targets.resize(200, 2);
    for (Index i = 0; i < 200; ++i) {
        d.exog(i, 0) = rng.uniform(0, 1);
        d.exog(i, 1) = rng.uniform(0, 1);
        d.targets(i, 0) = 0.5 * d.exog(i, 0) + 0.2 * d.exog(i, 1);
        d.targets(i, 1) = 0.3 * d.exog(i, 0) - 0.1 * d.exog(i, 1);
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 300;
    cfg.seed = 1;
    const auto t = train(spec, d, cfg);
    CHECK(t.train_loss.back() < 1e-3);
    CHECK(!t.validation_loss.empty());

    const auto again = train(spec, d, cfg);
    CHECK(std::equal(t.network.parameters().begin(), t.network.parameters().end(),
                     again.network.parameters().begin()));

    // full batch with a small step: the loss never rises
    TrainConfig full = cfg;
    full.batch_size = 200;
    full.learning_rate = 1e-4;
    full.max_epochs = 60;
    full.validation_fraction = 0.0;
    const auto mono = train(spec, d, full);
    for (std::size_t e = 1; e < mono.train_loss.size(); ++e) CHECK(mono.train_loss[e] <= mono.train_loss[e - 1] + 1e-9);
}

TEST_CASE("early stopping with zero patience") {
    Rng rng(6);
    auto spec = NetworkSpec::two_branch(2, 0, 1, 1, 1, 4, 0, 1);
    auto d = random_dataset(rng, spec, 60); // pure noise: validation stops improving quickly
    TrainConfig cfg;
    cfg.patience = 0;
    cfg.max_epochs = 200;
    cfg.learning_rate = 0.05;
    cfg.validation_fraction = 0.3;
    cfg.seed = 2;
    const auto t = train(spec, d, cfg);
    const auto &v = t.validation_loss;
    REQUIRE(v.size() >= 2);
    CHECK(v.size() < 200);
    // every epoch before the last improved; the last one did not
    for (std::size_t e = 1; e + 1 < v.size(); ++e) CHECK(v[e] < v[e - 1]);
    CHECK(v.back() >= v[v.size() - 2]);
    CHECK(t.best_epoch == v.size() - 2);
}

TEST_CASE("training errors") {
    auto spec = NetworkSpec::two_branch(1, 0, 1, 1, 1, 2, 0, 1);
    Dataset empty;
    empty.exog.resize(0, 1);
    empty.windows.resize(0, 0);
    empty.targets.resize(0, 1);
    CHECK_THROWS_AS(train(spec, empty, TrainConfig{}), DataError);

    Rng rng(1);
    auto d = random_dataset(rng, spec, 10);
    d.targets(3, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(spec, d, TrainConfig{}), Error);

    TrainConfig bad;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("grid search") {
    Rng rng(7);
    const auto base = NetworkSpec::two_branch(1, 6, 1, 2, 2, 2, 1, 1);
    const auto d = random_dataset(rng, base, 30);
    TrainConfig cfg;
    cfg.max_epochs = 2;

    GridSpace one{{2}, {3}, {4}};
    const auto r1 = grid_search(one, base, d, cfg);
    CHECK(r1.cells.size() == 1);
    CHECK(r1.best.conv[0].kernel == 3);

    // stub trainer that plants the optimum at (32, 8, 64)
    const Trainer stub = [](const NetworkSpec &spec, const Dataset &, const TrainConfig &) {
        TrainedNetwork t;
        t.network = Network(spec);
        const bool planted = spec.conv[0].filters == 32 && spec.conv[0].kernel == 8 && spec.hidden[0] == 64;
        t.train_loss = {1.0};
        t.validation_loss = {planted ? 0.1 : 1.0};
        return t;
    };
    GridSpace full;
    const auto r = grid_search(full, base, d, cfg, stub);
    CHECK(r.cells.size() == 27);
    CHECK(r.best.conv[0].filters == 32);
    CHECK(r.best.conv[0].kernel == 8);
    CHECK(r.best.hidden[0] == 64);

    // ties go to the smallest cell; parallel evaluation selects the same
    const Trainer flat = [](const NetworkSpec &spec, const Dataset &, const TrainConfig &) {
        TrainedNetwork t;
        t.network = Network(spec);
        t.train_loss = {1.0};
        t.validation_loss = {0.5};
        return t;
    };
    const auto tie = grid_search(full, base, d, cfg, flat, 3);
    CHECK(tie.best_index == 0);

    const Trainer failing = [](const NetworkSpec &spec, const Dataset &, const TrainConfig &) -> TrainedNetwork {
        if (spec.hidden[0] == 64) throw TrainingError(3, "diverged");
        TrainedNetwork t;
        t.network = Network(spec);
        t.train_loss = {1.0};
        t.validation_loss = {static_cast<double>(spec.hidden[0])};
        return t;
    };
    const auto skip = grid_search(full, base, d, cfg, failing);
    CHECK(skip.best.hidden[0] == 128);
    std::size_t failed = 0;
    for (const auto &c : skip.cells) failed += c.failed;
    CHECK(failed == 9);
    const Trainer all_fail = [](const NetworkSpec &, const Dataset &, const TrainConfig &) -> TrainedNetwork {
        throw TrainingError(1, "nope");
    };
    CHECK_THROWS_AS(grid_search(full, base, d, cfg, all_fail), TrainingError);
}

TEST_CASE("weight file round trip") {
    Rng rng(8);
    const auto spec = NetworkSpec::two_branch(2, 5, 2, 2, 2, 3, 2, 2);
    auto d = random_dataset(rng, spec, 40);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    const auto t = train(spec, d, cfg);
    const auto path = std::filesystem::temp_directory_path() / "hts_roundtrip.nnw";
    t.save(path);
    const auto back = TrainedNetwork::load(path);
    std::filesystem::remove(path);
    CHECK(back.spec() == spec);
    CHECK(std::equal(t.network.parameters().begin(), t.network.parameters().end(), back.network.parameters().begin()));
    CHECK(back.predict(d) == t.predict(d));
    CHECK(back.train_loss == t.train_loss);
}

TEST_CASE("scaling tolerates constant columns") {
    Rng rng(9);
    auto spec = NetworkSpec::two_branch(2, 3, 1, 1, 1, 2, 1, 1);
    auto d = random_dataset(rng, spec, 20);
    d.exog.col(1).setConstant(4.0);
    const auto s = Scaling::fit(d);
    const auto z = s.apply(d);
    CHECK(z.exog.allFinite());
    CHECK(z.exog.col(1).cwiseAbs().maxCoeff() == 0.0);
}
