#pragma once

#include "hts/hierarchy.hpp"
#include "hts/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hts {

enum class ReconMethod { BU, AHP, PHA, FP, MO, MINT };

std::string_view to_string(ReconMethod m);
ReconMethod parse_recon_method(std::string_view name);
std::vector<ReconMethod> parse_recon_list(std::string_view list);

// All functions below work on H x M (or H x m_bottom) matrices in canonical
// node order; every returned H x M matrix is coherent by construction.

// S * bottom row by row.
Matrix bottom_up(const SummingMatrix &S, const Matrix &bottom);

// Average of historical proportions: p_i = mean_t bottom_{t,i} / top_t.
// Steps with a zero total are skipped (with a warning); if all are zero a
// DataError is thrown.
Vector proportions_ahp(const Vector &top, const Matrix &bottom, Warnings *warnings = nullptr);

// Proportion of historical averages: p_i = mean(bottom_i) / mean(top).
// Throws DataError when the mean total is zero.
Vector proportions_pha(const Vector &top, const Matrix &bottom);

// Forecasted proportions, one row per step: nested sibling shares of the
// base forecasts from `from_level` down to the bottom. With from_level 0
// each row is a proportion vector of the root. Throws DataError naming the
// parent node and step when a sibling sum is zero.
Matrix proportions_fp(const Hierarchy &h, const Matrix &base, int from_level = 0);

// Bottom = top_t * p (p is 1 x m or H x m), then aggregated.
Matrix apply_topdown(const SummingMatrix &S, const Matrix &p, const Vector &top);

// Each bottom series gets share_i of its ancestor on `level`; everything
// above is re-aggregated. shares: 1 x m or H x m, summing to one within
// each middle-level node.
Matrix middle_out(const Hierarchy &h, const SummingMatrix &S, int level, const Matrix &middle, const Matrix &shares);

enum class ShareMethod { AHP, PHA };

// Historical shares of every bottom series within its ancestor on `level`
// (1 x m_bottom). values: T x M observations.
Matrix local_proportions(const Hierarchy &h, int level, const Matrix &values, ShareMethod method,
                         Warnings *warnings = nullptr);

struct ErrorCovariance {
    Matrix W;
    double lambda = 0.0;
    double jitter = 0.0; // added to the diagonal to make W positive definite
};

// errors: T_e x M in-sample base-forecast errors, T_e >= 2.
Matrix sample_covariance(const Matrix &errors);

// W = lambda * diag(sample) + (1 - lambda) * sample. lambda is the
// Schafer-Strimmer estimate on standardised errors unless forced.
ErrorCovariance shrinkage_covariance(const Matrix &errors, std::optional<double> lambda = std::nullopt);

// S (S' W^-1 S)^-1 S' W^-1 yhat for every row of base (H x M). Uses
// Cholesky solves; throws NumericError if W or S' W^-1 S is not SPD.
Matrix mint_reconcile(const SummingMatrix &S, const Matrix &base, const Matrix &W);

} // namespace hts
