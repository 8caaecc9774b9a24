#include "hts/error.hpp"
#include "hts/hierarchy.hpp"
#include "hts/reconcile.hpp"
#include "hts/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace hts;

namespace {

Hierarchy two_level() { return Hierarchy::from_nodes({{"T", std::nullopt, 0}, {"A", "T", 1}, {"B", "T", 1}}); }

// T -> a, b; a -> a1, a2; b -> b1, b2
Hierarchy three_level() {
    return Hierarchy::from_nodes({{"T", std::nullopt, 0},
                                  {"a", "T", 1},
                                  {"b", "T", 1},
                                  {"a1", "a", 2},
                                  {"a2", "a", 2},
                                  {"b1", "b", 2},
                                  {"b2", "b", 2}});
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
                    next.push_back(p + std::to_string(i));
                    nodes.push_back({next.back(), p, static_cast<int>(k)});
                }
            }
            frontier = next;
        }
        if (frontier.size() <= max_bottom) return Hierarchy::from_nodes(nodes);
    }
}

Matrix random_matrix(Rng &rng, Index r, Index c, double lo = -10, double hi = 10) {
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

Matrix random_spd(Rng &rng, Index n) {
    const Matrix A = random_matrix(rng, n, n, -1, 1);
    return A * A.transpose() + 0.5 * Matrix::Identity(n, n);
}

// Least-squares projection onto span(S) through the normal equations.
Matrix ols_oracle(const Matrix &S, const Matrix &base) {
    const Matrix StS = S.transpose() * S;
    const Matrix beta = StS.inverse() * S.transpose() * base.transpose();
    return (S * beta).transpose();
}

} // namespace

TEST_CASE("bottom-up") {
    const auto S = build_summing_matrix(two_level());
    Matrix b(1, 2);
    b << 4, 5;
    const Matrix y = bottom_up(S, b);
    CHECK(y(0, 0) == 9);
    CHECK(bottom_up(S, Matrix::Zero(2, 2)).isZero());

    Rng rng(3);
    const auto h = three_level();
    const auto S3 = build_summing_matrix(h);
    const Matrix bb = random_matrix(rng, 4, 4);
    CHECK(bottom_up(S3, bb) == aggregate(S3, bb));
}

TEST_CASE("AHP and PHA hand examples") {
    Vector top(2);
    Matrix bottom(2, 2);
    top << 4, 4;
    bottom << 1, 3, 3, 1;
    Vector p = proportions_ahp(top, bottom);
    CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-12));

    bottom << 1, 3, 1, 3;
    p = proportions_ahp(top, bottom);
    CHECK(std::abs(p(0) - 0.25) < 1e-12);
    CHECK(std::abs(p(1) - 0.75) < 1e-12);
    p = proportions_pha(top, bottom);
    CHECK(std::abs(p(0) - 0.25) < 1e-12);
    CHECK(std::abs(p(1) - 0.75) < 1e-12);

    Matrix single(2, 1);
    single << 4, 4;
    CHECK(proportions_ahp(top, single)(0) == doctest::Approx(1.0));

    // AHP and PHA differ: A = [1, 8], B = [3, 2]
    top << 4, 10;
    bottom << 1, 3, 8, 2;
    CHECK(std::abs(proportions_pha(top, bottom)(0) - 4.5 / 7.0) < 1e-12);
    CHECK(std::abs(proportions_ahp(top, bottom)(0) - 0.525) < 1e-12);
}

TEST_CASE("AHP and PHA with zero totals") {
    Vector top(3);
    Matrix bottom(3, 2);
    top << 4, 0, 2;
    bottom << 1, 3, 0, 0, 1, 1;
    Warnings w;
    const Vector p = proportions_ahp(top, bottom, &w);
    CHECK(w.size() == 1);
    CHECK(std::abs(p(0) - (0.25 + 0.5) / 2) < 1e-12);
    CHECK_NOTHROW(proportions_pha(top, bottom));

    top.setZero();
    bottom.setZero();
    CHECK_THROWS_AS(proportions_ahp(top, bottom, &w), DataError);
    CHECK_THROWS_AS(proportions_pha(top, bottom), DataError);
}

TEST_CASE("constant shares make AHP equal PHA") {
    Rng rng(8);
    Vector top(20);
    Matrix bottom(20, 3);
    for (Index t = 0; t < 20; ++t) {
        top(t) = rng.uniform(1, 50);
        bottom(t, 0) = 0.2 * top(t);
        bottom(t, 1) = 0.5 * top(t);
        bottom(t, 2) = 0.3 * top(t);
    }
    CHECK((proportions_ahp(top, bottom) - proportions_pha(top, bottom)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forecasted proportions") {
    const auto h2 = two_level();
    Matrix base(1, 3);
    base << 100, 2, 3;
    Matrix p = proportions_fp(h2, base);
    CHECK(std::abs(p(0, 0) - 0.4) < 1e-12);
    CHECK(std::abs(p(0, 1) - 0.6) < 1e-12);

    const auto h3 = three_level();
    Matrix b3(1, 7);
    b3 << 10, 6, 4, 1, 2, 3, 5;
    p = proportions_fp(h3, b3);
    const double expected[] = {0.2, 0.4, 0.15, 0.25};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(p(0, i) - expected[i]) < 1e-12);

    b3.setConstant(7.0);
    p = proportions_fp(h3, b3);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(p(0, i) - 0.25) < 1e-12);

    // per-step shares
    Matrix two(2, 3);
    two << 5, 1, 1, 5, 1, 3;
    p = proportions_fp(h2, two);
    CHECK(std::abs(p(0, 0) - 0.5) < 1e-12);
    CHECK(std::abs(p(1, 0) - 0.25) < 1e-12);
}

TEST_CASE("forecasted proportions reject zero sibling sums") {
    const auto h3 = three_level();
    Matrix b3(2, 7);
    b3 << 10, 6, 4, 1, 2, 3, 5, 10, 6, 4, 1, 2, 0, 0;
    try {
        proportions_fp(h3, b3);
        FAIL("expected an error");
    } catch (const DataError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("'b'") != std::string::npos);
        CHECK(msg.find("step 2") != std::string::npos);
    }
}

TEST_CASE("FP on two levels ignores the top base forecast") {
    const auto h = two_level();
    const auto S = build_summing_matrix(h);
    Matrix base(1, 3);
    base << 10, 2, 3;
    Vector top(1);
    top << 20;
    const Matrix a = apply_topdown(S, proportions_fp(h, base), top);
    base(0, 0) = 1000;
    const Matrix b = apply_topdown(S, proportions_fp(h, base), top);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("top-down application") {
    const auto S = build_summing_matrix(two_level());
    Matrix p(1, 2);
    p << 0.4, 0.6;
    Vector top(1);
    top << 10;
    Matrix y = apply_topdown(S, p, top);
    CHECK(y(0, 0) == doctest::Approx(10));
    CHECK(y(0, 1) == doctest::Approx(4));
    CHECK(y(0, 2) == doctest::Approx(6));
    p << 1, 0;
    y = apply_topdown(S, p, top);
    CHECK(y(0, 1) == 10);
    CHECK(y(0, 2) == 0);

    Rng rng(4);
    const auto h = three_level();
    const auto S3 = build_summing_matrix(h);
    for (int i = 0; i < 10; ++i) {
        Matrix q = random_matrix(rng, 3, 4, 0, 1);
        for (Index r = 0; r < 3; ++r) q.row(r) /= q.row(r).sum();
        const Vector t = random_matrix(rng, 3, 1, 0, 100);
        const Matrix out = apply_topdown(S3, q, t);
        CHECK((out.rightCols(4).rowwise().sum() - t).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(coherence_violation(S3, out) <= 1e-9);
    }
}

TEST_CASE("middle-out boundaries and hand composition") {
    const auto h = three_level();
    const auto S = build_summing_matrix(h);

    // level 0 with root shares equals top-down
    Matrix p(1, 4);
    p << 0.1, 0.2, 0.3, 0.4;
    Matrix top(2, 1);
    top << 10, 20;
    CHECK((middle_out(h, S, 0, top, p) - apply_topdown(S, p, top.col(0))).cwiseAbs().maxCoeff() < 1e-12);

    // bottom level with unit shares equals bottom-up
    Matrix bottom(1, 4);
    bottom << 1, 2, 3, 4;
    CHECK((middle_out(h, S, 2, bottom, Matrix::Ones(1, 4)) - bottom_up(S, bottom)).cwiseAbs().maxCoeff() < 1e-12);

    // middle bases [6, 4] with historical shares within each brand
    Matrix values(2, 7);
    values << 10, 3, 7, 1, 2, 3, 4, 20, 8, 12, 2, 6, 6, 6;
    const Matrix shares = local_proportions(h, 1, values, ShareMethod::PHA);
    // a1: 3/11, a2: 8/11, b1: 9/19, b2: 10/19
    CHECK(std::abs(shares(0, 0) - 3.0 / 11.0) < 1e-12);
    CHECK(std::abs(shares(0, 3) - 10.0 / 19.0) < 1e-12);
    Matrix middle(1, 2);
    middle << 6, 4;
    const Matrix mo = middle_out(h, S, 1, middle, shares);
    CHECK(std::abs(mo(0, 3) - 6 * 3.0 / 11.0) < 1e-12);
    CHECK(std::abs(mo(0, 6) - 4 * 10.0 / 19.0) < 1e-12);
    CHECK(std::abs(mo(0, 1) - 6) < 1e-12);
    CHECK(std::abs(mo(0, 0) - 10) < 1e-12);

    const Matrix ahp = local_proportions(h, 1, values, ShareMethod::AHP);
    CHECK(std::abs(ahp(0, 0) - (1.0 / 3.0 + 2.0 / 8.0) / 2) < 1e-12);
}

TEST_CASE("shrinkage covariance") {
    Rng rng(21);
    const Matrix E = random_matrix(rng, 40, 5);
    const Matrix sample = sample_covariance(E);
    {
        // independent oracle of the sample covariance
        Matrix oracle(5, 5);
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 5; ++j) {
                double mi = E.col(i).mean(), mj = E.col(j).mean(), s = 0;
                for (Index t = 0; t < 40; ++t) s += (E(t, i) - mi) * (E(t, j) - mj);
                oracle(i, j) = s / 39.0;
            }
        CHECK((oracle - sample).cwiseAbs().maxCoeff() < 1e-12);
    }
    auto one = shrinkage_covariance(E, 1.0);
    CHECK((one.W - Matrix(sample.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
    auto zero = shrinkage_covariance(E, 0.0);
    CHECK((zero.W - sample).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(shrinkage_covariance(E, 1.5), ConfigError);

    // uncorrelated wide sample: intensity near one, off-diagonals shrunk
    Matrix wide(30, 20);
    for (Index i = 0; i < wide.size(); ++i) wide.data()[i] = rng.normal();
    const auto est = shrinkage_covariance(wide);
    const Matrix ws = sample_covariance(wide);
    CHECK(est.lambda > 0.7);
    CHECK(est.lambda <= 1.0);
    double off_est = 0, off_sample = 0;
    for (Index i = 0; i < 20; ++i)
        for (Index j = 0; j < 20; ++j)
            if (i != j) {
                off_est += std::abs(est.W(i, j));
                off_sample += std::abs(ws(i, j));
            }
    CHECK(off_est < off_sample);
    CHECK((est.W - est.W.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("shrinkage intensity matches the closed form") {
    Rng rng(9);
    Matrix E(25, 4);
    for (Index t = 0; t < 25; ++t) {
        const double common = rng.normal();
        for (Index j = 0; j < 4; ++j) E(t, j) = 0.6 * common + rng.normal();
    }
    // Var-hat of the empirical correlation from the unbiased second moments
    const double n = 25;
    Matrix z(25, 4);
    for (Index j = 0; j < 4; ++j) {
        const double mu = E.col(j).mean();
        double ss = 0;
        for (Index t = 0; t < 25; ++t) ss += (E(t, j) - mu) * (E(t, j) - mu);
        const double sd = std::sqrt(ss / (n - 1));
        for (Index t = 0; t < 25; ++t) z(t, j) = (E(t, j) - mu) / sd;
    }
    double num = 0, den = 0;
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) {
            if (i == j) continue;
            double wbar = 0;
            for (Index t = 0; t < 25; ++t) wbar += z(t, i) * z(t, j) / n;
            double v = 0;
            for (Index t = 0; t < 25; ++t) v += std::pow(z(t, i) * z(t, j) - wbar, 2);
            num += n / std::pow(n - 1, 3) * v;
            den += std::pow(n / (n - 1) * wbar, 2);
        }
    const double oracle = std::clamp(num / den, 0.0, 1.0);
    CHECK(std::abs(shrinkage_covariance(E).lambda - oracle) < 1e-12);
}

TEST_CASE("shrinkage jitter makes singular covariances usable") {
    Matrix E(10, 3);
    for (Index t = 0; t < 10; ++t) {
        E(t, 0) = t;
        E(t, 1) = 2.0 * t;
        E(t, 2) = 0.0;
    }
    const auto est = shrinkage_covariance(E, 0.0);
    CHECK(est.jitter > 0.0);
    Eigen::LLT<Matrix> llt(est.W);
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("MinT hand example with identity covariance") {
    const auto S = build_summing_matrix(two_level());
    Matrix base(1, 3);
    base << 10, 4, 5;
    const Matrix out = mint_reconcile(S, base, Matrix::Identity(3, 3));
    CHECK(std::abs(out(0, 1) - 13.0 / 3.0) < 1e-12);
    CHECK(std::abs(out(0, 2) - 16.0 / 3.0) < 1e-12);
    CHECK(std::abs(out(0, 0) - 29.0 / 3.0) < 1e-12);

    base << 9, 4, 5;
    CHECK((mint_reconcile(S, base, Matrix::Identity(3, 3)) - base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("MinT equals the normal-equations projection and preserves span(S)") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto h = random_hierarchy(rng, 6);
        const auto S = build_summing_matrix(h);
        const Index M = S.rows();
        const Matrix base = random_matrix(rng, 3, M);
        const Matrix I = Matrix::Identity(M, M);
        const Matrix out = mint_reconcile(S, base, I);
        CHECK((out - ols_oracle(S.S, base)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(coherence_violation(S, out) <= 1e-9);

        const Matrix W = random_spd(rng, M);
        const Matrix b = random_matrix(rng, 2, S.cols());
        const Matrix coherent = aggregate(S, b);
        CHECK((mint_reconcile(S, coherent, W) - coherent).cwiseAbs().maxCoeff() < 1e-9);
        const Matrix once = mint_reconcile(S, base, W);
        CHECK((mint_reconcile(S, once, W) - once).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(coherence_violation(S, once) <= 1e-9);
    }
}

TEST_CASE("reconciliation method names") {
    CHECK(parse_recon_method("mint") == ReconMethod::MINT);
    CHECK(parse_recon_list("BU, ahp") == std::vector<ReconMethod>{ReconMethod::BU, ReconMethod::AHP});
    CHECK_THROWS_AS(parse_recon_method("OLS"), ConfigError);
    CHECK(to_string(ReconMethod::PHA) == "PHA");
}
