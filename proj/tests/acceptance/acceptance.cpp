// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include "hts/error.hpp"
#include "hts/evaluate.hpp"
#include "hts/forecasters.hpp"
#include "hts/io.hpp"
#include "hts/neuralnet.hpp"
#include "hts/nnd.hpp"
#include "hts/pipeline.hpp"
#include "hts/reconcile.hpp"
#include "hts/rng.hpp"
#include "hts/synthetic.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace hts;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    enum Kind { Pass, Fail, Skip } kind = Pass;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void log(const std::string &msg) { std::cerr << "  " << msg << std::endl; }

Matrix random_matrix(Rng &rng, Index r, Index c, double lo, double hi) {
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

Hierarchy random_hierarchy(Rng &rng, std::size_t max_bottom) {
    for (;;) {
        std::vector<Node> nodes{{"r", std::nullopt, 0}};
        std::vector<std::string> frontier{"r"};
        const std::size_t depth = 1 + rng.below(2);
        for (std::size_t k = 1; k <= depth; ++k) {
            std::vector<std::string> next;
            for (const auto &p : frontier) {
                const std::size_t c = 1 + rng.below(3);
                for (std::size_t i = 0; i < c; ++i) {
                    next.push_back(p + "_" + std::to_string(i));
                    nodes.push_back({next.back(), p, static_cast<int>(k)});
                }
            }
            frontier = next;
        }
        if (frontier.size() <= max_bottom) return Hierarchy::from_nodes(nodes);
    }
}

double bottom_mean(const EvalReport &r, int bottom_level, std::size_t method) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < r.node_ids.size(); ++i) {
        const double v = r.mase(static_cast<Index>(i), static_cast<Index>(method));
        if (r.levels[i] == bottom_level && std::isfinite(v)) {
            s += v;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : std::nan("");
}

std::size_t method_index(const EvalReport &r, const std::string &m) {
    const auto it = std::find(r.methods.begin(), r.methods.end(), m);
    if (it == r.methods.end()) throw std::runtime_error("method " + m + " missing from report");
    return static_cast<std::size_t>(it - r.methods.begin());
}

// ------------------------------------------------------------------ share-switching runs

// Settings for the directional runs: the default generator (3 levels,
// 12 bottom series, 1460 days) with the last year held out.
RunConfig directional_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.test_size = 365;
    cfg.horizon = 7;
    cfg.cv_start = 364;
    cfg.cv_step = 28;
    cfg.candidates = {ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::ARX, ModelKind::ETS};
    cfg.recon = {ReconMethod::BU, ReconMethod::AHP, ReconMethod::PHA};
    cfg.nnd = {NndStrategy::NND2};
    auto &n = cfg.nnd_config;
    n.window = {30, 1};
    n.calendar = parse_calendar_spec("dow,month");
    n.filters = 8;
    n.kernel = 4;
    n.units = 32;
    n.conv_layers = 6;
    n.mlp_layers = 3;
    n.train.max_epochs = 80;
    n.train.patience = 20;
    cfg.seed = seed;
    cfg.propagate();
    return cfg;
}

struct DirectionalRun {
    std::uint64_t seed = 0;
    double nnd2 = 0, bu = 0, ahp = 0, pha = 0;
    double raw_coherence = 0;
};

const std::vector<DirectionalRun> &directional_runs() {
    static const std::vector<DirectionalRun> runs = [] {
        std::vector<DirectionalRun> out;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto t0 = std::chrono::steady_clock::now();
            GeneratorSpec g;
            g.seed = seed;
            const auto data = generate(g);
            const auto &h = data.hierarchy;
            const auto S = build_summing_matrix(h);
            const auto cfg = directional_config(seed);
            const auto base = fit_base(h, data.panel, cfg);
            Warnings w;
            auto sets = reconcile_all(h, S, data.panel, base, cfg, w);
            const auto nnd = run_nnd(h, S, data.panel, base, NndStrategy::NND2, cfg);
            sets.push_back(nnd.forecasts);
            const auto report = evaluate_sets(h, data.panel, base.train_rows, sets, cfg);
            const int bottom = h.levels() - 1;
            DirectionalRun r;
            r.seed = seed;
            r.nnd2 = bottom_mean(report, bottom, method_index(report, "NND2"));
            r.bu = bottom_mean(report, bottom, method_index(report, "BU"));
            r.ahp = bottom_mean(report, bottom, method_index(report, "AHP"));
            r.pha = bottom_mean(report, bottom, method_index(report, "PHA"));
            r.raw_coherence = nnd.raw_coherence();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log("seed " + std::to_string(seed) + ": NND2 " + fmt(r.nnd2) + "  BU " + fmt(r.bu) + "  AHP " +
                fmt(r.ahp) + "  PHA " + fmt(r.pha) + "  raw coherence " + fmt(r.raw_coherence) + "  (" +
                fmt(secs) + " s)");
            out.push_back(r);
        }
        return out;
    }();
    return runs;
}

// ------------------------------------------------------------------ criteria

Verdict coherence() {
    constexpr double tol = 1e-9;
    std::map<std::string, double> worst;
    Rng rng(2024);
    for (std::uint64_t i = 0; i < 100; ++i) {
        GeneratorSpec g;
        g.children_per_level = {2 + rng.below(3), 1 + rng.below(4)};
        if (rng.bernoulli(0.25)) g.children_per_level.push_back(2);
        g.length = 112;
        g.regime = rng.bernoulli(0.5) ? ShareRegime::Switching : ShareRegime::Static;
        g.seed = 1000 + i;
        const auto data = generate(g);
        const auto &h = data.hierarchy;
        const auto S = build_summing_matrix(h);

        RunConfig cfg;
        cfg.test_size = 14;
        cfg.candidates = {ModelKind::Naive, ModelKind::SeasonalNaive};
        cfg.middle_level = 1;
        cfg.nnd = {NndStrategy::NND1, NndStrategy::NND2};
        auto &n = cfg.nnd_config;
        n.window = {7, 1};
        n.calendar = parse_calendar_spec("dow");
        n.filters = 2;
        n.kernel = 2;
        n.units = 4;
        n.conv_layers = 1;
        n.mlp_layers = 1;
        n.train.max_epochs = 2;
        cfg.seed = g.seed;
        cfg.propagate();

        const auto base = fit_base(h, data.panel, cfg);
        Warnings w;
        auto sets = reconcile_all(h, S, data.panel, base, cfg, w);
        for (auto s : cfg.nnd) sets.push_back(run_nnd(h, S, data.panel, base, s, cfg).forecasts);
        for (const auto &s : sets) {
            worst[s.method] = std::max(worst[s.method], coherence_violation(S, s.values));
        }
    }
    bool ok = worst.size() == 8;
    std::string detail;
    for (const auto &[m, v] : worst) {
        ok = ok && v <= tol;
        detail += m + " " + fmt(v) + ", ";
    }
    detail = "max violation over 100 instances: " + detail.substr(0, detail.size() - 2) + " (tol 1e-9)";

    double raw = 0.0;
    for (const auto &r : directional_runs()) raw += r.raw_coherence;
    raw /= static_cast<double>(directional_runs().size());
    const bool raw_ok = raw <= 1e-3;
    detail += "; raw NND2 output violation " + fmt(raw) + " (tol 1e-3, mean over the 10 directional seeds)";
    return {ok && raw_ok ? Verdict::Pass : Verdict::Fail, detail};
}

// Norm-wise relative error between analytic and central-difference gradients.
double gradient_error(nn::Network &net, const nn::Dataset &d, double fit_w, double sum_w) {
    const auto analytic = nn::backward(net, d, fit_w, sum_w);
    auto p = net.parameters();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i], step = 1e-5;
        p[i] = keep + step;
        const double up = nn::weighted_loss(d.targets, nn::predict(net, d), fit_w, sum_w);
        p[i] = keep - step;
        const double down = nn::weighted_loss(d.targets, nn::predict(net, d), fit_w, sum_w);
        p[i] = keep;
        const double fd = (up - down) / (2 * step);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd + analytic[i] * analytic[i];
    }
    return den > 0 ? std::sqrt(num / den) : 0.0;
}

Verdict gradients() {
    Rng rng(77);
    double worst = 0.0;
    std::size_t dense = 0, conv = 0, both = 0;
    for (int i = 0; i < 50; ++i) {
        nn::NetworkSpec spec;
        // cycle through MLP-only, CNN-only and two-branch networks
        const int shape = i % 3;
        spec.exog_dim = shape == 1 ? 0 : 1 + rng.below(3);
        spec.window = shape == 0 ? 0 : 3 + rng.below(5);
        if (spec.exog_dim) {
            for (std::size_t l = 0, L = 1 + rng.below(2); l < L; ++l) spec.hidden.push_back(2 + rng.below(4));
        }
        if (spec.window) {
            for (std::size_t l = 0, L = 1 + rng.below(2); l < L; ++l) {
                spec.conv.push_back({1 + rng.below(3), 1 + rng.below(4)});
            }
        }
        spec.outputs = 1 + rng.below(3);
        nn::Network net(spec);
        net.initialize(rng);
        // zero biases behind dead units put pre-activations exactly on the
        // ReLU kink, where central differences are meaningless
        for (auto &v : net.parameters()) v += rng.uniform(0.01, 0.1);
        nn::Dataset d;
        const auto n = static_cast<Index>(3 + rng.below(4));
        d.exog = random_matrix(rng, n, static_cast<Index>(spec.exog_dim), -1, 1);
        d.windows = random_matrix(rng, n, static_cast<Index>(spec.window), -1, 1);
        d.targets = random_matrix(rng, n, static_cast<Index>(spec.outputs), -1, 1);
        dense += !spec.hidden.empty();
        conv += !spec.conv.empty();
        both += !spec.hidden.empty() && !spec.conv.empty();
        const double alpha = rng.uniform(0.1, 0.9);
        for (auto [fw, sw] : {std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{1 - alpha, alpha}}) {
            const double err = gradient_error(net, d, fw, sw);
            worst = std::max(worst, err);
        }
    }
    const bool ok = worst < 1e-4 && dense > 0 && conv > 0 && both > 0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            "worst relative error " + fmt(worst) + " (tol 1e-4) over 50 networks: " + std::to_string(dense) +
                " with dense layers, " + std::to_string(conv) + " with conv layers, " + std::to_string(both) +
                " two-branch; fit, sum and mixed loss terms"};
}

Verdict oracles() {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const std::string &what) {
        if (!ok) failed.push_back(what);
    };
    auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

    // MASE and SMAPE against their formulas
    {
        const std::vector<double> ins{1, 2, 3, 4}, act{5, 6}, fc{4, 4};
        check(near(mase(act, fc, ins, 1), 1.5, 1e-9), "MASE example");
        check(near(smape(std::vector<double>{4}, std::vector<double>{6}), 0.4, 1e-9), "SMAPE 4/6");
        check(near(smape(std::vector<double>{10}, std::vector<double>{0}), 2.0, 1e-9), "SMAPE bound");
        Rng rng(5);
        for (int r = 0; r < 50; ++r) {
            const std::size_t m = 1 + rng.below(7), T = m + 2 + rng.below(30), H = 1 + rng.below(10);
            std::vector<double> y(T), a(H), f(H);
            for (auto &v : y) v = rng.uniform(1, 20);
            for (auto &v : a) v = rng.uniform(1, 20);
            for (auto &v : f) v = rng.uniform(1, 20);
            double num = 0, den = 0, sm = 0;
            for (std::size_t t = 0; t < H; ++t) {
                num += std::abs(a[t] - f[t]);
                sm += std::abs(a[t] - f[t]) / (std::abs(a[t]) + std::abs(f[t]));
            }
            for (std::size_t t = m; t < T; ++t) den += std::abs(y[t] - y[t - m]);
            const double want = (num / static_cast<double>(H)) / (den / static_cast<double>(T - m));
            check(near(mase(a, f, y, m), want, 1e-9 * std::max(1.0, want)), "MASE brute force");
            check(near(smape(a, f), 2 * sm / static_cast<double>(H), 1e-9), "SMAPE brute force");
        }
    }
    // AHP, PHA, FP, BU
    {
        Vector top(2);
        Matrix bottom(2, 2);
        top << 4, 4;
        bottom << 1, 3, 3, 1;
        check((proportions_ahp(top, bottom) - Vector::Constant(2, 0.5)).cwiseAbs().maxCoeff() <= 1e-9, "AHP example");
        top << 4, 10;
        bottom << 1, 3, 8, 2;
        check(near(proportions_pha(top, bottom)(0), 4.5 / 7, 1e-9), "PHA witness");
        check(near(proportions_ahp(top, bottom)(0), 0.525, 1e-9), "AHP witness");

        Rng rng(6);
        for (int r = 0; r < 50; ++r) {
            const Index T = 2 + static_cast<Index>(rng.below(20)), m = 1 + static_cast<Index>(rng.below(5));
            const Matrix b = random_matrix(rng, T, m, 0.5, 10);
            const Vector t = b.rowwise().sum();
            Vector ahp = Vector::Zero(m), pha = Vector::Zero(m);
            double tsum = 0;
            for (Index i = 0; i < T; ++i) {
                tsum += t(i);
                for (Index j = 0; j < m; ++j) {
                    ahp(j) += b(i, j) / t(i) / static_cast<double>(T);
                    pha(j) += b(i, j);
                }
            }
            pha /= tsum;
            check((proportions_ahp(t, b) - ahp).cwiseAbs().maxCoeff() <= 1e-9, "AHP brute force");
            check((proportions_pha(t, b) - pha).cwiseAbs().maxCoeff() <= 1e-9, "PHA brute force");
        }

        const auto h3 = Hierarchy::from_nodes({{"T", std::nullopt, 0},
                                               {"a", "T", 1},
                                               {"b", "T", 1},
                                               {"a1", "a", 2},
                                               {"a2", "a", 2},
                                               {"b1", "b", 2},
                                               {"b2", "b", 2}});
        Matrix base(1, 7);
        base << 10, 6, 4, 1, 2, 3, 5;
        const Matrix p = proportions_fp(h3, base);
        Vector want(4);
        want << 0.2, 0.4, 0.15, 0.25;
        check((p.row(0).transpose() - want).cwiseAbs().maxCoeff() <= 1e-9, "FP nested shares");
        const auto h2 = Hierarchy::from_nodes({{"T", std::nullopt, 0}, {"A", "T", 1}, {"B", "T", 1}});
        Matrix b2(1, 3);
        b2 << 123, 2, 3;
        const Matrix p2 = proportions_fp(h2, b2);
        check(near(p2(0, 0), 0.4, 1e-9) && near(p2(0, 1), 0.6, 1e-9), "FP single level");

        const auto S = build_summing_matrix(h3);
        Matrix bu(1, 4);
        bu << 1, 2, 3, 5;
        Matrix bu_want(1, 7);
        bu_want << 11, 3, 8, 1, 2, 3, 5;
        check(bottom_up(S, bu) == bu_want, "BU example");
    }
    // Friedman and Nemenyi
    {
        Matrix e(4, 3);
        e << 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3;
        const auto f = friedman_test(e);
        check(near(f.statistic, 8.0, 1e-9), "Friedman example");
        check(near(f.p_value, 0.018315638888734182, 1e-9), "Friedman p-value");
        const auto nm = nemenyi_test(e, 0.05);
        check(near(nm.critical_distance, 2.343 * std::sqrt(12.0 / 24.0), 1e-9), "Nemenyi CD");

        Rng rng(8);
        for (int r = 0; r < 30; ++r) {
            const Index N = 2 + static_cast<Index>(rng.below(10)), k = 2 + static_cast<Index>(rng.below(5));
            Matrix x(N, k);
            for (Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(rng.below(4)); // ties
            // average rank by counting smaller and equal entries
            std::vector<double> R(static_cast<std::size_t>(k), 0.0);
            for (Index i = 0; i < N; ++i) {
                for (Index j = 0; j < k; ++j) {
                    double less = 0, equal = 0;
                    for (Index l = 0; l < k; ++l) {
                        less += x(i, l) < x(i, j);
                        equal += x(i, l) == x(i, j);
                    }
                    R[static_cast<std::size_t>(j)] += (less + (equal + 1) / 2) / static_cast<double>(N);
                }
            }
            double sq = 0;
            for (double v : R) sq += v * v;
            const double kd = static_cast<double>(k), Nd = static_cast<double>(N);
            const double chi = 12 * Nd / (kd * (kd + 1)) * sq - 3 * Nd * (kd + 1);
            const auto got = friedman_test(x);
            check(near(got.statistic, chi, 1e-9), "Friedman counting oracle");
            for (std::size_t j = 0; j < R.size(); ++j) check(near(got.mean_ranks[j], R[j], 1e-9), "mean ranks");
        }
    }
    // MinT with W = I against the normal-equations projection
    {
        Rng rng(9);
        double worst = 0;
        for (int r = 0; r < 100; ++r) {
            const auto h = random_hierarchy(rng, 6);
            const auto S = build_summing_matrix(h);
            const Matrix base = random_matrix(rng, 3, static_cast<Index>(h.size()), -10, 10);
            const Matrix StS = S.S.transpose() * S.S;
            const Matrix oracle = (S.S * StS.inverse() * S.S.transpose() * base.transpose()).transpose();
            const Matrix I = Matrix::Identity(static_cast<Index>(h.size()), static_cast<Index>(h.size()));
            worst = std::max(worst, (mint_reconcile(S, base, I) - oracle).cwiseAbs().maxCoeff());
        }
        check(worst <= 1e-8, "MinT W=I (max error " + fmt(worst) + ")");
    }
    std::string detail = "MASE, SMAPE, AHP, PHA, FP, BU, Friedman, Nemenyi CD, MinT(W=I) on 100 instances";
    if (!failed.empty()) {
        detail += "; mismatched:";
        for (const auto &f : failed) detail += " [" + f + "]";
    }
    return {failed.empty() ? Verdict::Pass : Verdict::Fail, detail};
}

Verdict mint_fixed_point() {
    Rng rng(10);
    double fixed = 0, idem = 0;
    for (int r = 0; r < 100; ++r) {
        const auto h = random_hierarchy(rng, 6);
        const auto S = build_summing_matrix(h);
        const auto M = static_cast<Index>(h.size());
        const Matrix A = random_matrix(rng, M, M, -1, 1);
        const Matrix W = A * A.transpose() + 0.5 * Matrix::Identity(M, M);
        const Matrix coherent = aggregate(S, random_matrix(rng, 4, static_cast<Index>(h.bottom_count()), -10, 10));
        fixed = std::max(fixed, (mint_reconcile(S, coherent, W) - coherent).cwiseAbs().maxCoeff());
        const Matrix once = mint_reconcile(S, random_matrix(rng, 4, M, -10, 10), W);
        idem = std::max(idem, (mint_reconcile(S, once, W) - once).cwiseAbs().maxCoeff());
    }
    const bool ok = fixed <= 1e-10 && idem <= 1e-10;
    return {ok ? Verdict::Pass : Verdict::Fail, "coherent input moved by " + fmt(fixed) + ", idempotence gap " +
                                                    fmt(idem) + " (tol 1e-10, 100 random SPD W)"};
}

Verdict cls() {
    Rng rng(11);
    double simplex = 0, exact = 0, grid = 0;
    for (int r = 0; r < 200; ++r) {
        const Index T = 5 + static_cast<Index>(rng.below(30)), k = 1 + static_cast<Index>(rng.below(6));
        const Matrix f = random_matrix(rng, T, k, -5, 5);
        std::vector<double> y(static_cast<std::size_t>(T));
        for (auto &v : y) v = rng.uniform(-5, 5);
        const auto w = combine_cls(f, y).weights;
        simplex = std::max({simplex, -w.minCoeff(), std::abs(w.sum() - 1)});
    }
    for (int r = 0; r < 50; ++r) {
        const Index T = 10, k = 2 + static_cast<Index>(rng.below(4));
        Matrix f = random_matrix(rng, T, k, -5, 5);
        const Index truth = static_cast<Index>(rng.below(static_cast<std::size_t>(k)));
        std::vector<double> y(T);
        for (Index t = 0; t < T; ++t) y[static_cast<std::size_t>(t)] = f(t, truth);
        exact = std::max(exact, std::abs(combine_cls(f, y).weights(truth) - 1));
    }
    for (int r = 0; r < 20; ++r) {
        const Index T = 20;
        const Matrix f = random_matrix(rng, T, 2, -3, 3);
        std::vector<double> y(T);
        for (auto &v : y) v = rng.uniform(-3, 3);
        const auto fit = combine_cls(f, y);
        double best = std::numeric_limits<double>::infinity();
        Vector w(2);
        for (int g = 0; g <= 10000; ++g) {
            w << g * 1e-4, 1 - g * 1e-4;
            best = std::min(best, cls_objective(f, y, w));
        }
        grid = std::max(grid, std::abs(cls_objective(f, y, fit.weights) - best));
    }
    const bool ok = simplex <= 1e-8 && exact <= 1e-6 && grid <= 1e-4;
    return {ok ? Verdict::Pass : Verdict::Fail, "simplex violation " + fmt(simplex) + " (tol 1e-8), exact member off by " +
                                                    fmt(exact) + " (tol 1e-6), 2-member gap to grid " + fmt(grid) +
                                                    " (tol 1e-4)"};
}

Verdict directional() {
    std::size_t wins = 0;
    double nnd = 0, bu = 0, ahp = 0, pha = 0;
    for (const auto &r : directional_runs()) {
        wins += r.nnd2 < std::min({r.ahp, r.pha, r.bu});
        nnd += r.nnd2 / 10;
        bu += r.bu / 10;
        ahp += r.ahp / 10;
        pha += r.pha / 10;
    }
    return {wins >= 9 ? Verdict::Pass : Verdict::Fail,
            "NND2 beats min(AHP, PHA, BU) bottom-level MASE in " + std::to_string(wins) +
                "/10 seeds (need 9); means NND2 " + fmt(nnd) + ", BU " + fmt(bu) + ", AHP " + fmt(ahp) + ", PHA " +
                fmt(pha)};
}

Verdict nnd1_equals_nnd2() {
    std::size_t cases = 0, same = 0;
    for (std::size_t c = 2; c <= 6; ++c) {
        for (std::uint64_t seed : {1, 2}) {
            GeneratorSpec g;
            g.children_per_level = {c};
            g.length = 120;
            g.seed = seed;
            const auto data = generate(g);
            const auto S = build_summing_matrix(data.hierarchy);
            NndConfig cfg;
            cfg.window = {7, 1};
            cfg.calendar = parse_calendar_spec("dow");
            cfg.filters = 3;
            cfg.kernel = 3;
            cfg.units = 6;
            cfg.conv_layers = 2;
            cfg.mlp_layers = 2;
            cfg.train.max_epochs = 5;
            cfg.train.seed = seed;
            const auto a = train_ensemble(data.hierarchy, data.panel, 100, NndStrategy::NND1, cfg);
            const auto b = train_ensemble(data.hierarchy, data.panel, 100, NndStrategy::NND2, cfg);
            const auto pa = a.models.at(0).network.network.parameters();
            const auto pb = b.models.at(0).network.network.parameters();
            const Matrix start = data.panel.values.col(0).segment(100, 20);
            const auto fa = forecast_ensemble(a, data.hierarchy, S, data.panel, 100, start);
            const auto fb = forecast_ensemble(b, data.hierarchy, S, data.panel, 100, start);
            ++cases;
            same += a.models.size() == 1 && b.models.size() == 1 && std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()) &&
                    fa.values == fb.values;
        }
    }
    return {same == cases ? Verdict::Pass : Verdict::Fail,
            std::to_string(same) + "/" + std::to_string(cases) +
                " two-level hierarchies give bit-identical weights and forecasts"};
}

#ifdef HTSF_BINARY
int run(const std::string &args) {
    const std::string cmd = std::string(HTSF_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path &dir) {
    std::map<std::string, std::string> files;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
    }
    return files;
}

Verdict determinism() {
    const auto work = fs::temp_directory_path() / "hts_acceptance_determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    write_text_file(work / "spec.json", R"({"children_per_level": [2, 3], "length": 240, "seed": 5})");
    for (const char *d : {"data_a", "data_b"}) {
        if (run("synth --spec " + (work / "spec.json").string() + " --output " + (work / d).string()) != 0) {
            return {Verdict::Fail, "synth failed"};
        }
    }
    const auto data = work / "data_a";
    const std::string flags = " --hierarchy " + (data / "hierarchy.csv").string() + " --observations " +
                              (data / "observations.csv").string() + " --exogenous " +
                              (data / "exogenous.csv").string() +
                              " --test_size 28 --candidates naive,snaive,arx --strategies nnd1,nnd2,mo"
                              " --window 14 --filters 4 --kernel 3 --units 8 --conv_layers 2 --mlp_layers 1"
                              " --epochs 5 --calendar dow --seed 3";
    std::vector<std::map<std::string, std::string>> outputs;
    for (const auto &[name, jobs] : {std::pair{"run_a", 1}, std::pair{"run_b", 1}, std::pair{"run_c", 2}}) {
        const auto out = " --output " + (work / name).string() + " --jobs " + std::to_string(jobs);
        for (const char *cmd : {"forecast", "reconcile", "nnd", "evaluate"}) {
            if (run(std::string(cmd) + flags + out) != 0) return {Verdict::Fail, std::string(cmd) + " failed"};
        }
        outputs.push_back(snapshot(work / name));
    }
    const bool data_same = snapshot(work / "data_a") == snapshot(work / "data_b");
    const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    const auto files = outputs[0].size();
    fs::remove_all(work);
    return {data_same && same && files > 0 ? Verdict::Pass : Verdict::Fail,
            std::to_string(files) + " output files compared across two --jobs 1 runs and one --jobs 2 run: " +
                (same ? "identical" : "differ") + "; synth output " + (data_same ? "identical" : "differs")};
}

Verdict italian() {
    const char *csv = std::getenv("HTS_ITALIAN_CSV");
    const char *url = std::getenv("HTS_ITALIAN_URL");
    if (!csv && !url) return {Verdict::Skip, "set HTS_ITALIAN_CSV (local wide CSV) or HTS_ITALIAN_URL to run"};
    const auto work = fs::temp_directory_path() / "hts_acceptance_italian";
    fs::remove_all(work);
    const std::string src = csv ? std::string(" --input ") + csv : std::string(" --url ") + url;
    if (run("fetch-italian" + src + " --output " + work.string()) != 0) {
        return {Verdict::Skip, "fetch-italian could not obtain the dataset"};
    }
    const auto h = read_hierarchy_csv(work / "hierarchy.csv");
    const auto panel = load_panel(h, work / "observations.csv", work / "exogenous.csv");
    const auto S = build_summing_matrix(h);
    RunConfig cfg = directional_config(1);
    cfg.nnd_config.filters = 16;
    cfg.nnd_config.units = 64;
    cfg.propagate();
    const auto base = fit_base(h, panel, cfg);
    Warnings w;
    auto sets = reconcile_all(h, S, panel, base, cfg, w);
    sets.push_back(run_nnd(h, S, panel, base, NndStrategy::NND2, cfg).forecasts);
    const auto report = evaluate_sets(h, panel, base.train_rows, sets, cfg);
    const int bottom = h.levels() - 1;
    const double nnd = bottom_mean(report, bottom, method_index(report, "NND2"));
    const double bu = bottom_mean(report, bottom, method_index(report, "BU"));
    return {nnd < bu ? Verdict::Pass : Verdict::Fail, "item-level MASE NND2 " + fmt(nnd) + " vs BU " + fmt(bu)};
}
#else
Verdict determinism() { return {Verdict::Skip, "built without the htsf tool"}; }
Verdict italian() { return {Verdict::Skip, "built without the htsf tool"}; }
#endif

} // namespace

int main(int argc, char **argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"coherence", coherence},
        {"gradient correctness", gradients},
        {"oracle equivalence", oracles},
        {"MinT fixed point and idempotence", mint_fixed_point},
        {"CLS combination", cls},
        {"NND2 beats static top-down and BU at the bottom level", directional},
        {"NND1 equals NND2 on two-level hierarchies", nnd1_equals_nnd2},
        {"pipeline determinism across --jobs", determinism},
        {"Italian grocery data (optional)", italian},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(number)) continue;
        const auto &[name, fn] = criteria[i];
        std::cerr << "criterion " << number << ": " << name << std::endl;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception &e) {
            v = {Verdict::Fail, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char *tag = v.kind == Verdict::Pass ? "PASS" : v.kind == Verdict::Fail ? "FAIL" : "SKIP";
        std::cout << tag << " criterion " << number << ": " << name << " -- " << v.detail << " [" << fmt(secs)
                  << " s]" << std::endl;
        failures += v.kind == Verdict::Fail;
    }
    return failures == 0 ? 0 : 1;
}
