#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hts::stats {

// Regularised lower incomplete gamma P(a, x), by its power series
// (continued fraction for x > a + 1, where the series converges slowly).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

// Ranks 1..n, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Critical value q_alpha of the Nemenyi test (studentized range divided by
// sqrt 2, infinite degrees of freedom) for 2 <= k <= 20 and alpha in
// {0.05, 0.10}. k <= 10 follows the table in Demsar (2006, JMLR 7); larger
// k were computed from the studentized range quantile.
double nemenyi_q(std::size_t k, double alpha);

} // namespace hts::stats
