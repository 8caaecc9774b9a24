#include "hts/reconcile.hpp"

#include "hts/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>

namespace hts {

namespace {

constexpr std::array<std::pair<ReconMethod, std::string_view>, 6> kReconNames{{
    {ReconMethod::BU, "BU"},
    {ReconMethod::AHP, "AHP"},
    {ReconMethod::PHA, "PHA"},
    {ReconMethod::FP, "FP"},
    {ReconMethod::MO, "MO"},
    {ReconMethod::MINT, "MINT"},
}};

Matrix expand_rows(const Matrix &p, Index rows, const char *what) {
    if (p.rows() == rows) {
        return p;
    }
    if (p.rows() != 1) {
        throw DataError(std::string(what) + ": expected 1 or " + std::to_string(rows) + " rows of proportions");
    }
    return p.replicate(rows, 1);
}

} // namespace

std::string_view to_string(ReconMethod m) {
    for (const auto &[k, name] : kReconNames) {
        if (k == m) return name;
    }
    return "unknown";
}

ReconMethod parse_recon_method(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (const auto &[k, n] : kReconNames) {
        if (n == upper) return k;
    }
    throw ConfigError("unknown reconciliation method '" + std::string(name) + "' (expected BU, AHP, PHA, FP, MO or MINT)");
}

std::vector<ReconMethod> parse_recon_list(std::string_view list) {
    std::vector<ReconMethod> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const auto comma = std::min(list.find(',', pos), list.size());
        std::string item(list.substr(pos, comma - pos));
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
        if (!item.empty()) {
            const auto m = parse_recon_method(item);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        pos = comma + 1;
    }
    if (out.empty()) {
        throw ConfigError("empty reconciliation method list");
    }
    std::sort(out.begin(), out.end());
    return out;
}

Matrix bottom_up(const SummingMatrix &S, const Matrix &bottom) {
    return aggregate(S, bottom);
}

Vector proportions_ahp(const Vector &top, const Matrix &bottom, Warnings *warnings) {
    if (top.size() != bottom.rows() || top.size() == 0) {
        throw DataError("ahp: totals and bottom series must be non-empty and aligned");
    }
    Vector p = Vector::Zero(bottom.cols());
    std::size_t used = 0;
    for (Index t = 0; t < top.size(); ++t) {
        if (top(t) == 0.0) {
            continue;
        }
        p += bottom.row(t).transpose() / top(t);
        ++used;
    }
    if (used == 0) {
        throw DataError("ahp: the total is zero at every step");
    }
    const auto skipped = static_cast<std::size_t>(top.size()) - used;
    if (skipped > 0 && warnings) {
        warnings->push_back("ahp: skipped " + std::to_string(skipped) + " steps with a zero total");
    }
    p /= static_cast<double>(used);
    return p / p.sum();
}

Vector proportions_pha(const Vector &top, const Matrix &bottom) {
    if (top.size() != bottom.rows() || top.size() == 0) {
        throw DataError("pha: totals and bottom series must be non-empty and aligned");
    }
    const double mean_top = top.mean();
    if (mean_top == 0.0) {
        throw DataError("pha: the mean of the total is zero");
    }
    Vector p = bottom.colwise().mean().transpose() / mean_top;
    return p / p.sum();
}

Matrix proportions_fp(const Hierarchy &h, const Matrix &base, int from_level) {
    if (base.cols() != static_cast<Index>(h.size())) {
        throw DataError("fp: base forecasts do not match the hierarchy");
    }
    if (from_level < 0 || from_level >= h.levels()) {
        throw ConfigError("fp: level " + std::to_string(from_level) + " outside the hierarchy");
    }
    const auto bottom_begin = h.level_begin(h.levels() - 1);
    Matrix out(base.rows(), static_cast<Index>(h.bottom_count()));
    std::vector<double> share(h.size(), 0.0);
    for (Index t = 0; t < base.rows(); ++t) {
        for (std::size_t n : h.level_nodes(from_level)) {
            share[n] = 1.0;
        }
        for (int level = from_level; level + 1 < h.levels(); ++level) {
            for (std::size_t parent : h.level_nodes(level)) {
                const auto &kids = h.children(parent);
                double sigma = 0.0;
                for (std::size_t c : kids) sigma += base(t, static_cast<Index>(c));
                if (sigma == 0.0) {
                    throw DataError("fp: base forecasts of the children of '" + h.id(parent) + "' sum to zero at step " +
                                    std::to_string(t + 1));
                }
                for (std::size_t c : kids) {
                    share[c] = share[parent] * base(t, static_cast<Index>(c)) / sigma;
                }
            }
        }
        for (std::size_t b = 0; b < h.bottom_count(); ++b) {
            out(t, static_cast<Index>(b)) = share[bottom_begin + b];
        }
    }
    return out;
}

Matrix apply_topdown(const SummingMatrix &S, const Matrix &p, const Vector &top) {
    if (p.cols() != S.cols()) {
        throw DataError("topdown: proportions do not match the bottom level");
    }
    const Matrix shares = expand_rows(p, top.size(), "topdown");
    const Matrix bottom = shares.array().colwise() * top.array();
    return aggregate(S, bottom);
}

Matrix middle_out(const Hierarchy &h, const SummingMatrix &S, int level, const Matrix &middle, const Matrix &shares) {
    if (level < 0 || level >= h.levels()) {
        throw ConfigError("middle-out level " + std::to_string(level) + " outside the hierarchy");
    }
    if (middle.cols() != static_cast<Index>(h.level_count(level))) {
        throw DataError("middle-out: expected forecasts for the " + std::to_string(h.level_count(level)) +
                        " nodes of level " + std::to_string(level));
    }
    if (shares.cols() != S.cols()) {
        throw DataError("middle-out: shares do not match the bottom level");
    }
    const Matrix sh = expand_rows(shares, middle.rows(), "middle-out");
    const std::size_t bottom_begin = h.level_begin(h.levels() - 1);
    const std::size_t middle_begin = h.level_begin(level);
    Matrix bottom(middle.rows(), S.cols());
    for (std::size_t b = 0; b < h.bottom_count(); ++b) {
        const auto col = static_cast<Index>(h.ancestor_at(bottom_begin + b, level) - middle_begin);
        bottom.col(static_cast<Index>(b)) = middle.col(col).cwiseProduct(sh.col(static_cast<Index>(b)));
    }
    return aggregate(S, bottom);
}

Matrix local_proportions(const Hierarchy &h, int level, const Matrix &values, ShareMethod method, Warnings *warnings) {
    if (level < 0 || level >= h.levels()) {
        throw ConfigError("level " + std::to_string(level) + " outside the hierarchy");
    }
    if (values.cols() != static_cast<Index>(h.size())) {
        throw DataError("observations do not match the hierarchy");
    }
    Matrix out(1, static_cast<Index>(h.bottom_count()));
    const std::size_t bottom_begin = h.level_begin(h.levels() - 1);
    for (std::size_t a : h.level_nodes(level)) {
        const auto desc = h.bottom_descendants(a);
        Matrix block(values.rows(), static_cast<Index>(desc.size()));
        for (std::size_t j = 0; j < desc.size(); ++j) {
            block.col(static_cast<Index>(j)) = values.col(static_cast<Index>(desc[j]));
        }
        const Vector top = values.col(static_cast<Index>(a));
        Vector p;
        try {
            if (method == ShareMethod::AHP) {
                Warnings local;
                p = proportions_ahp(top, block, &local);
                if (warnings) {
                    for (auto &w : local) warnings->push_back(h.id(a) + ": " + w);
                }
            } else {
                p = proportions_pha(top, block);
            }
        } catch (const DataError &e) {
            throw DataError("node '" + h.id(a) + "': " + e.what());
        }
        for (std::size_t j = 0; j < desc.size(); ++j) {
            out(0, static_cast<Index>(desc[j] - bottom_begin)) = p(static_cast<Index>(j));
        }
    }
    return out;
}

Matrix sample_covariance(const Matrix &errors) {
    if (errors.rows() < 2) {
        throw DataError("covariance needs at least two error rows");
    }
    const Matrix centred = errors.rowwise() - errors.colwise().mean();
    return centred.transpose() * centred / static_cast<double>(errors.rows() - 1);
}

ErrorCovariance shrinkage_covariance(const Matrix &errors, std::optional<double> lambda) {
    const Matrix sample = sample_covariance(errors);
    const Index M = sample.rows();
    const auto n = static_cast<double>(errors.rows());
    ErrorCovariance out;
    if (lambda) {
        if (!(*lambda >= 0.0 && *lambda <= 1.0)) {
            throw ConfigError("shrinkage intensity must lie in [0, 1]");
        }
        out.lambda = *lambda;
    } else {
        // Schafer-Strimmer intensity towards the diagonal target:
        // sum_{i!=j} Var(r_ij) / sum_{i!=j} r_ij^2 on standardised errors.
        const Matrix centred = errors.rowwise() - errors.colwise().mean();
        Vector sd = sample.diagonal().cwiseSqrt();
        Matrix z = Matrix::Zero(errors.rows(), M);
        for (Index j = 0; j < M; ++j) {
            if (sd(j) > 0.0) z.col(j) = centred.col(j) / sd(j);
        }
        double num = 0.0, den = 0.0;
        for (Index i = 0; i < M; ++i) {
            for (Index j = i + 1; j < M; ++j) {
                if (sd(i) == 0.0 || sd(j) == 0.0) continue;
                const Vector w = z.col(i).cwiseProduct(z.col(j));
                const double wbar = w.mean();
                const double var_r = n / std::pow(n - 1.0, 3) * (w.array() - wbar).square().sum();
                const double r = n / (n - 1.0) * wbar;
                num += var_r;
                den += r * r;
            }
        }
        out.lambda = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 1.0;
    }
    out.W = (1.0 - out.lambda) * sample;
    out.W.diagonal() = sample.diagonal();

    const double mean_diag = M > 0 ? out.W.diagonal().mean() : 0.0;
    double jitter = 1e-8 * (mean_diag > 0.0 ? mean_diag : 1.0);
    for (int attempt = 0; attempt < 12; ++attempt) {
        Eigen::LLT<Matrix> llt(out.W);
        if (llt.info() == Eigen::Success) {
            return out;
        }
        out.W.diagonal().array() += jitter - out.jitter;
        out.jitter = jitter;
        jitter *= 10.0;
    }
    throw NumericError("error covariance could not be made positive definite");
}

Matrix mint_reconcile(const SummingMatrix &S, const Matrix &base, const Matrix &W) {
    const Index M = S.rows();
    if (base.cols() != M || W.rows() != M || W.cols() != M) {
        throw DataError("mint: base forecasts or covariance do not match the hierarchy");
    }
    Eigen::LLT<Matrix> w_llt(W);
    if (w_llt.info() != Eigen::Success) {
        throw NumericError("mint: error covariance is not positive definite");
    }
    const Matrix winv_s = w_llt.solve(S.S);          // W^-1 S
    const Matrix gram = S.S.transpose() * winv_s;    // S' W^-1 S
    Eigen::LLT<Matrix> g_llt(gram);
    if (g_llt.info() != Eigen::Success) {
        throw NumericError("mint: S' W^-1 S is singular");
    }
    const Matrix rhs = winv_s.transpose() * base.transpose(); // S' W^-1 yhat (W symmetric)
    const Matrix bottom = g_llt.solve(rhs);                   // m x H
    return aggregate(S, bottom.transpose());
}

} // namespace hts
