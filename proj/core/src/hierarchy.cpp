#include "hts/hierarchy.hpp"

#include "hts/error.hpp"
#include "hts/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

namespace hts {

Hierarchy Hierarchy::from_nodes(std::vector<Node> nodes) {
    if (nodes.empty()) {
        throw DataError("hierarchy has no nodes");
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node &a, const Node &b) {
        return a.level != b.level ? a.level < b.level : a.id < b.id;
    });

    Hierarchy h;
    h.nodes_ = std::move(nodes);
    const std::size_t n = h.nodes_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto &node = h.nodes_[i];
        if (node.id.empty()) {
            throw StructuralError(node.id, "empty node id");
        }
        if (node.level < 0) {
            throw StructuralError(node.id, "negative level");
        }
        if (!h.index_.emplace(node.id, i).second) {
            throw StructuralError(node.id, "duplicate node id");
        }
    }

    h.parents_.assign(n, std::nullopt);
    h.children_.assign(n, {});
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &node = h.nodes_[i];
        if (!node.parent) {
            if (node.level != 0) {
                throw StructuralError(node.id, "orphan node: no parent but level " + std::to_string(node.level));
            }
            if (++roots > 1) {
                throw StructuralError(node.id, "second root at level 0");
            }
            continue;
        }
        const auto it = h.index_.find(*node.parent);
        if (it == h.index_.end()) {
            throw StructuralError(node.id, "orphan node: parent '" + *node.parent + "' does not exist");
        }
        const auto &parent = h.nodes_[it->second];
        if (parent.level != node.level - 1) {
            throw StructuralError(node.id, "level gap: level " + std::to_string(node.level) + " under parent '" +
                                               parent.id + "' at level " + std::to_string(parent.level));
        }
        h.parents_[i] = it->second;
        h.children_[it->second].push_back(i);
    }
    if (roots == 0) {
        throw StructuralError(h.nodes_.front().id, "no root node at level 0");
    }

    const int depth = h.nodes_.back().level + 1;
    h.level_offsets_.assign(static_cast<std::size_t>(depth) + 1, n);
    for (std::size_t i = n; i-- > 0;) {
        h.level_offsets_[static_cast<std::size_t>(h.nodes_[i].level)] = i;
    }
    for (int k = depth - 1; k >= 0; --k) {
        // An empty level would already have produced a level gap above.
        h.level_offsets_[k] = std::min(h.level_offsets_[k], h.level_offsets_[k + 1]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (h.children_[i].empty() && h.nodes_[i].level != depth - 1) {
            throw StructuralError(h.nodes_[i].id, "leaf at level " + std::to_string(h.nodes_[i].level) +
                                                      " above the bottom level " + std::to_string(depth - 1));
        }
    }
    return h;
}

std::size_t Hierarchy::level_count(int level) const {
    if (level < 0 || level >= levels()) {
        return 0;
    }
    return level_offsets_[level + 1] - level_offsets_[level];
}

std::size_t Hierarchy::index_of(std::string_view id) const {
    if (auto idx = find(id)) {
        return *idx;
    }
    throw DataError("unknown node '" + std::string(id) + "'");
}

std::optional<std::size_t> Hierarchy::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::size_t> Hierarchy::level_nodes(int level) const {
    std::vector<std::size_t> out;
    if (level < 0 || level >= levels()) {
        return out;
    }
    for (std::size_t i = level_offsets_[level]; i < level_offsets_[level + 1]; ++i) {
        out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Hierarchy::bottom_descendants(std::size_t idx) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{idx};
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        if (children_[cur].empty()) {
            out.push_back(cur);
        } else {
            stack.insert(stack.end(), children_[cur].begin(), children_[cur].end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Hierarchy::ancestor_at(std::size_t idx, int level) const {
    std::size_t cur = idx;
    while (nodes_[cur].level > level) {
        cur = *parents_[cur];
    }
    return cur;
}

std::uint64_t Hierarchy::hash() const {
    std::uint64_t state = fnv1a64("hts-hierarchy");
    for (const auto &node : nodes_) {
        state = fnv1a64(node.id, state);
        state = fnv1a64("|", state);
        state = fnv1a64(node.parent.value_or(""), state);
        state = fnv1a64("|" + std::to_string(node.level) + "\n", state);
    }
    return state;
}

SummingMatrix build_summing_matrix(const Hierarchy &h) {
    const std::size_t m = h.size();
    const std::size_t nb = h.bottom_count();
    SummingMatrix out;
    out.S = Matrix::Zero(static_cast<Index>(m), static_cast<Index>(nb));
    out.row_ids.reserve(m);
    out.children.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.row_ids.push_back(h.id(i));
        out.children.push_back(h.children(i));
        for (std::size_t b : h.bottom_descendants(i)) {
            out.S(static_cast<Index>(i), static_cast<Index>(h.bottom_position(b))) = 1.0;
        }
    }
    for (std::size_t b : h.level_nodes(h.levels() - 1)) {
        out.col_ids.push_back(h.id(b));
    }
    return out;
}

Matrix aggregate(const SummingMatrix &S, const Matrix &bottom) {
    if (bottom.cols() != S.cols()) {
        throw DataError("aggregate: expected " + std::to_string(S.cols()) + " bottom columns, got " +
                        std::to_string(bottom.cols()));
    }
    return bottom * S.S.transpose();
}

double coherence_violation(const SummingMatrix &S, const Matrix &values) {
    if (values.cols() != S.rows()) {
        throw DataError("coherence_violation: expected " + std::to_string(S.rows()) + " columns, got " +
                        std::to_string(values.cols()));
    }
    double worst = 0.0;
    for (Index t = 0; t < values.rows(); ++t) {
        for (std::size_t n = 0; n < S.children.size(); ++n) {
            if (S.children[n].empty()) {
                continue;
            }
            double sum = 0.0;
            for (std::size_t c : S.children[n]) {
                sum += values(t, static_cast<Index>(c));
            }
            worst = std::max(worst, std::abs(values(t, static_cast<Index>(n)) - sum));
        }
    }
    return worst;
}

void validate_panel(const Hierarchy &h, const SeriesPanel &panel, double eps) {
    const std::size_t T = panel.length();
    if (static_cast<std::size_t>(panel.values.rows()) != T || static_cast<std::size_t>(panel.values.cols()) != h.size()) {
        throw DataError("panel shape does not match hierarchy and timestamps");
    }
    for (std::size_t t = 1; t < T; ++t) {
        if (panel.timestamps[t] <= panel.timestamps[t - 1]) {
            throw DataError("timestamps not strictly increasing at " + format_timestamp(panel.timestamps[t]));
        }
    }
    if (!panel.values.allFinite()) {
        throw DataError("panel contains non-finite observations");
    }
    if (panel.exog.size() != h.size() || panel.exog_names.size() != h.size()) {
        throw DataError("exogenous blocks do not match hierarchy size");
    }
    for (std::size_t n = 0; n < h.size(); ++n) {
        const auto &x = panel.exog[n];
        if (static_cast<std::size_t>(x.rows()) != T && x.cols() > 0) {
            throw DataError("exogenous rows for node '" + h.id(n) + "' do not match timestamps");
        }
        if (static_cast<std::size_t>(x.cols()) != panel.exog_names[n].size()) {
            throw DataError("exogenous names for node '" + h.id(n) + "' do not match columns");
        }
        if (!x.allFinite()) {
            throw DataError("non-finite exogenous value for node '" + h.id(n) + "'");
        }
    }
    for (std::size_t n = 0; n < h.size(); ++n) {
        const auto &kids = h.children(n);
        if (kids.empty()) {
            continue;
        }
        for (std::size_t t = 0; t < T; ++t) {
            double sum = 0.0;
            for (std::size_t c : kids) {
                sum += panel.values(static_cast<Index>(t), static_cast<Index>(c));
            }
            const double diff = std::abs(panel.values(static_cast<Index>(t), static_cast<Index>(n)) - sum);
            if (diff > eps) {
                throw DataError("incoherent observation for node '" + h.id(n) + "' at " +
                                format_timestamp(panel.timestamps[t]) + ": differs from children sum by " +
                                std::to_string(diff));
            }
        }
    }
}

void derive_interior_exog(const Hierarchy &h, SeriesPanel &panel) {
    const auto T = static_cast<Index>(panel.length());
    for (std::size_t n = 0; n < h.size(); ++n) {
        if (h.is_leaf(n) || panel.exog[n].cols() > 0) {
            continue;
        }
        const auto leaves = h.bottom_descendants(n);
        std::set<std::string> names;
        for (std::size_t b : leaves) {
            names.insert(panel.exog_names[b].begin(), panel.exog_names[b].end());
        }
        if (names.empty()) {
            continue;
        }
        std::vector<std::string> ordered(names.begin(), names.end());
        Matrix x = Matrix::Zero(T, static_cast<Index>(ordered.size()));
        for (std::size_t b : leaves) {
            const auto &bn = panel.exog_names[b];
            for (std::size_t v = 0; v < ordered.size(); ++v) {
                const auto it = std::find(bn.begin(), bn.end(), ordered[v]);
                if (it != bn.end()) {
                    x.col(static_cast<Index>(v)) += panel.exog[b].col(it - bn.begin());
                }
            }
        }
        x /= static_cast<double>(leaves.size());
        panel.exog[n] = std::move(x);
        panel.exog_names[n] = std::move(ordered);
    }
}

SeriesPanel head(const SeriesPanel &panel, std::size_t rows) {
    rows = std::min(rows, panel.length());
    SeriesPanel out;
    out.timestamps.assign(panel.timestamps.begin(), panel.timestamps.begin() + static_cast<std::ptrdiff_t>(rows));
    out.values = panel.values.topRows(static_cast<Index>(rows));
    out.exog_names = panel.exog_names;
    out.exog.reserve(panel.exog.size());
    for (const auto &x : panel.exog) {
        out.exog.push_back(x.cols() > 0 ? Matrix(x.topRows(static_cast<Index>(rows))) : Matrix(static_cast<Index>(rows), 0));
    }
    return out;
}

namespace {

std::uint64_t hash_doubles(const double *data, std::size_t count, std::uint64_t state) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, data + i, sizeof bits);
        char bytes[8];
        for (int b = 0; b < 8; ++b) {
            bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        }
        state = fnv1a64(std::string_view(bytes, 8), state);
    }
    return state;
}

} // namespace

std::uint64_t panel_hash(const SeriesPanel &panel) {
    std::uint64_t state = fnv1a64("hts-panel");
    for (Timestamp ts : panel.timestamps) {
        state = fnv1a64(std::to_string(ts) + ",", state);
    }
    const Matrix values = panel.values;
    state = hash_doubles(values.data(), static_cast<std::size_t>(values.size()), state);
    for (std::size_t n = 0; n < panel.exog.size(); ++n) {
        for (const auto &name : panel.exog_names[n]) {
            state = fnv1a64(name + ";", state);
        }
        state = hash_doubles(panel.exog[n].data(), static_cast<std::size_t>(panel.exog[n].size()), state);
    }
    return state;
}

} // namespace hts
