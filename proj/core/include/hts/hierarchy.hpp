#pragma once

#include "hts/calendar.hpp"
#include "hts/types.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hts {

struct Node {
    std::string id;
    std::optional<std::string> parent;
    int level = 0;
};

// Strict aggregation tree. Nodes are kept in canonical order, sorted by
// (level, id); every vector and matrix in the toolkit uses that order.
// All leaves sit on the deepest level K-1.
class Hierarchy {
public:
    Hierarchy() = default;

    // Validates and canonicalises. Throws StructuralError naming the node
    // for duplicates, orphans, level gaps, extra roots or shallow leaves.
    static Hierarchy from_nodes(std::vector<Node> nodes);

    std::size_t size() const { return nodes_.size(); }
    int levels() const { return static_cast<int>(level_offsets_.size()) - 1; }
    std::size_t level_count(int level) const;
    std::size_t bottom_count() const { return level_count(levels() - 1); }

    const std::vector<Node> &nodes() const { return nodes_; }
    const Node &node(std::size_t idx) const { return nodes_[idx]; }
    const std::string &id(std::size_t idx) const { return nodes_[idx].id; }

    std::size_t index_of(std::string_view id) const;
    std::optional<std::size_t> find(std::string_view id) const;

    std::optional<std::size_t> parent(std::size_t idx) const { return parents_[idx]; }
    const std::vector<std::size_t> &children(std::size_t idx) const { return children_[idx]; }
    bool is_leaf(std::size_t idx) const { return children_[idx].empty(); }

    // Canonical indices of nodes on a level; contiguous by construction.
    std::vector<std::size_t> level_nodes(int level) const;
    std::size_t level_begin(int level) const { return level_offsets_[level]; }

    // Position of a bottom node among the bottom nodes (S column).
    std::size_t bottom_position(std::size_t idx) const { return idx - level_offsets_[levels() - 1]; }

    // Bottom-level descendants in canonical order. A leaf returns itself.
    std::vector<std::size_t> bottom_descendants(std::size_t idx) const;

    // The ancestor of idx on `level` (idx itself if already there).
    std::size_t ancestor_at(std::size_t idx, int level) const;

    // Order-independent digest of the structure, used in model manifests.
    std::uint64_t hash() const;

private:
    std::vector<Node> nodes_;
    std::vector<std::optional<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> level_offsets_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Dense M x m_{K-1} 0/1 aggregation matrix with row/column labels. The
// direct-children lists are carried so coherence can be checked per edge.
struct SummingMatrix {
    Matrix S;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    std::vector<std::vector<std::size_t>> children;

    Index rows() const { return S.rows(); }
    Index cols() const { return S.cols(); }
};

SummingMatrix build_summing_matrix(const Hierarchy &h);

// Row t of the result is S * bottom.row(t).
Matrix aggregate(const SummingMatrix &S, const Matrix &bottom);

// max over rows and interior nodes of |value(node) - sum of children|.
double coherence_violation(const SummingMatrix &S, const Matrix &values);

// Aligned observations for every node of a hierarchy.
struct SeriesPanel {
    std::vector<Timestamp> timestamps;
    Matrix values;                              // T x M, canonical node order
    std::vector<Matrix> exog;                   // per node, T x d_n
    std::vector<std::vector<std::string>> exog_names;

    std::size_t length() const { return timestamps.size(); }
    std::size_t exog_width(std::size_t node) const { return static_cast<std::size_t>(exog[node].cols()); }
};

// Checks timestamps, finiteness and that every interior node equals the
// sum of its children within eps. Throws DataError.
void validate_panel(const Hierarchy &h, const SeriesPanel &panel, double eps = 1e-6);

// Interior nodes without their own regressors receive, per variable name,
// the mean over their bottom descendants (missing counts as zero). For a
// binary promotion flag this is the share of items on promotion.
void derive_interior_exog(const Hierarchy &h, SeriesPanel &panel);

// First `rows` observations; exogenous matrices are cut accordingly.
SeriesPanel head(const SeriesPanel &panel, std::size_t rows);

std::uint64_t panel_hash(const SeriesPanel &panel);

} // namespace hts
