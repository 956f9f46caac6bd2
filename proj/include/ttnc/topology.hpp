#ifndef TTNC_TOPOLOGY_HPP
#define TTNC_TOPOLOGY_HPP

#include <cstdint>
#include <vector>

#include "ttnc/tensor.hpp"

namespace ttnc {

/// Balanced binary tree over n_leaves = 2^k leaves, heap-indexed.
/// Internal nodes are 0 .. n_leaves-2 (0 is the root); the two child slots of
/// node k are 2k+1 and 2k+2. A slot >= n_leaves-1 is the leaf with index
/// slot - (n_leaves - 1). Leaf i carries feature leaf_feature[i], or -1 when
/// the leaf is padding beyond the declared feature count.
class TreeTopology {
  public:
    TreeTopology() = default;

    /// Builds a topology for n_features features with identity leaf layout,
    /// padding up to the next power of two.
    static TreeTopology balanced(Index n_features);

    /// Custom feature-to-leaf layout; layout[f] = leaf index of feature f.
    static TreeTopology with_layout(Index n_features, const std::vector<Index>& layout);

    Index n_leaves() const { return n_leaves_; }
    Index n_features() const { return n_features_; }
    Index n_internal() const { return n_leaves_ - 1; }

    bool is_internal_slot(Index slot) const { return slot < n_internal(); }
    Index leaf_of_slot(Index slot) const { return slot - n_internal(); }
    Index slot_of_leaf(Index leaf) const { return n_internal() + leaf; }
    Index parent(Index node) const { return (node - 1) / 2; }
    Index left_slot(Index node) const { return 2 * node + 1; }
    Index right_slot(Index node) const { return 2 * node + 2; }

    /// Feature sitting on leaf i, -1 for padded leaves.
    Index leaf_feature(Index leaf) const { return leaf_feature_[static_cast<std::size_t>(leaf)]; }
    bool leaf_padded(Index leaf) const { return leaf_feature(leaf) < 0; }
    /// Leaf carrying feature f.
    Index feature_leaf(Index f) const { return feature_leaf_[static_cast<std::size_t>(f)]; }
    const std::vector<Index>& leaf_features() const { return leaf_feature_; }

    /// Number of leaves in the subtree rooted at an internal node.
    Index subtree_leaves(Index node) const;
    /// True if the whole subtree below the slot consists of padded leaves.
    bool slot_all_padded(Index slot) const;
    /// Product of leaf physical dimensions (2 per feature leaf, 1 per padded
    /// leaf) in the subtree below the slot.
    Index slot_phys_product(Index slot) const;

    static Index next_pow2(Index n) {
        Index p = 1;
        while (p < n) p *= 2;
        return p;
    }

  private:
    Index n_leaves_ = 0;
    Index n_features_ = 0;
    std::vector<Index> leaf_feature_;
    std::vector<Index> feature_leaf_;
};

inline TreeTopology TreeTopology::balanced(Index n_features) {
    std::vector<Index> layout(static_cast<std::size_t>(n_features));
    for (Index f = 0; f < n_features; ++f) layout[static_cast<std::size_t>(f)] = f;
    return with_layout(n_features, layout);
}

inline TreeTopology TreeTopology::with_layout(Index n_features,
                                              const std::vector<Index>& layout) {
    if (n_features < 1) throw std::invalid_argument("TreeTopology: need at least one feature");
    if (static_cast<Index>(layout.size()) != n_features)
        throw std::invalid_argument("TreeTopology: layout length mismatch");
    TreeTopology t;
    t.n_features_ = n_features;
    t.n_leaves_ = std::max<Index>(next_pow2(n_features), 2);
    t.leaf_feature_.assign(static_cast<std::size_t>(t.n_leaves_), -1);
    t.feature_leaf_.assign(static_cast<std::size_t>(n_features), -1);
    for (Index f = 0; f < n_features; ++f) {
        Index leaf = layout[static_cast<std::size_t>(f)];
        if (leaf < 0 || leaf >= t.n_leaves_ || t.leaf_feature_[static_cast<std::size_t>(leaf)] >= 0)
            throw std::invalid_argument("TreeTopology: layout is not a valid injection");
        t.leaf_feature_[static_cast<std::size_t>(leaf)] = f;
        t.feature_leaf_[static_cast<std::size_t>(f)] = leaf;
    }
    return t;
}

inline Index TreeTopology::subtree_leaves(Index node) const {
    Index count = 0;
    std::vector<Index> stack{node};
    while (!stack.empty()) {
        Index s = stack.back();
        stack.pop_back();
        if (is_internal_slot(s)) {
            stack.push_back(left_slot(s));
            stack.push_back(right_slot(s));
        } else {
            ++count;
        }
    }
    return count;
}

inline bool TreeTopology::slot_all_padded(Index slot) const {
    if (!is_internal_slot(slot)) return leaf_padded(leaf_of_slot(slot));
    return slot_all_padded(left_slot(slot)) && slot_all_padded(right_slot(slot));
}

inline Index TreeTopology::slot_phys_product(Index slot) const {
    if (!is_internal_slot(slot)) return leaf_padded(leaf_of_slot(slot)) ? 1 : 2;
    Index p = slot_phys_product(left_slot(slot)) * slot_phys_product(right_slot(slot));
    // saturate: caller only compares against bond dimensions
    return std::min<Index>(p, Index(1) << 30);
}

}  // namespace ttnc

#endif  // TTNC_TOPOLOGY_HPP
