#include "hts/stats.hpp"

#include "hts/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace hts::stats {

namespace {

constexpr int kMaxIter = 10000;
constexpr double kEps = 1e-16;

double gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz evaluation of the continued fraction for Q(a, x).
double gamma_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) {
            break;
        }
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) {
        throw NumericError("regularized gamma: invalid arguments");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x < a + 1.0) {
        return gamma_series(a, x);
    }
    return 1.0 - gamma_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) {
        throw NumericError("regularized gamma: invalid arguments");
    }
    if (x == 0.0) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return 1.0 - gamma_series(a, x);
    }
    return gamma_continued_fraction(a, x);
}

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) {
        return 1.0;
    }
    return regularized_gamma_q(dof / 2.0, x / 2.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

double nemenyi_q(std::size_t k, double alpha) {
    static constexpr std::array<double, 19> q05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                                3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
    static constexpr std::array<double, 19> q10{1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                                3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};
    if (k < 2 || k > 20) {
        throw ConfigError("Nemenyi table covers 2..20 methods, got " + std::to_string(k));
    }
    if (std::abs(alpha - 0.05) < 1e-12) {
        return q05[k - 2];
    }
    if (std::abs(alpha - 0.10) < 1e-12) {
        return q10[k - 2];
    }
    throw ConfigError("Nemenyi significance must be 0.05 or 0.10");
}

} // namespace hts::stats
