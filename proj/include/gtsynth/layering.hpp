#pragma once

// Layer structure of a latent Gaussian tree and the per-layer linear
// channels Y(l) = A Y(l+1) + Z that connect consecutive layers.

#include "gtsynth/tree_model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gtsynth {

struct LayeredTree {
  /// Layer of every node (indexed like the tree's nodes).
  std::vector<int> layer_of;
  /// Node indices per layer, 0 = bottom, each in document order.
  std::vector<std::vector<int>> layers;
  /// Unique neighbour one layer up, or -1 for top-layer nodes.
  std::vector<int> parent_of;
  /// Edges joining two top-layer nodes.
  std::vector<int> top_edges;

  int top_layer() const { return static_cast<int>(layers.size()) - 1; }
  const std::vector<int>& layer(int l) const { return layers[static_cast<std::size_t>(l)]; }
  /// Latent nodes of layer l in canonical (lexicographic id) order; their
  /// signs form B(l).
  std::vector<int> latents_at(const GaussianTree& tree, int l) const;
  /// Observed nodes of layer l in document order.
  std::vector<int> observed_at(const GaussianTree& tree, int l) const;
};

struct IntraLayerConflict {
  std::string a;
  std::string b;
  int layer = 0;
};

struct LayerAssignment {
  std::optional<LayeredTree> layered;
  std::vector<IntraLayerConflict> conflicts;
};

/// Layers by graph distance to the nearest observed node. Edges inside the
/// top layer are allowed; any other same-layer edge is reported as a
/// conflict. Throws HyperChainViolation when there are no conflicts but
/// some node has two or more upper neighbours.
LayerAssignment assign_layers(const GaussianTree& tree);

/// Pushes the far member of every same-layer pair into a new layer below,
/// working from the top down. Equivalent to layering by distance from the
/// top set of assign_layers. Throws HyperChainViolation when a node ends up
/// with two upper neighbours or a tie cannot be resolved without creating one.
LayeredTree restructure(const GaussianTree& tree);

/// Layers by distance from an explicit top set (which must induce a
/// connected subtree): layer = max depth - depth.
LayeredTree layer_from_top(const GaussianTree& tree, std::span<const std::string> top);

/// Linear channel from layer l+1 down to layer l.
struct LayerChannel {
  int layer = 0;
  /// Nodes of layer l, in LayeredTree order.
  std::vector<int> outputs;
  /// Nodes of layer l+1, in LayeredTree order.
  std::vector<int> inputs;
  /// For each output: position of its parent in `inputs`.
  std::vector<int> parent_pos;
  /// For each output: the parent edge.
  std::vector<int> edge;
  /// For each output: base rho of the parent edge (the single nonzero of its row).
  std::vector<double> coef;
  /// For each output: 1 - rho^2.
  std::vector<double> noise_var;

  std::size_t rows() const { return outputs.size(); }
  /// Dense |outputs| x |inputs| transition matrix.
  Eigen::MatrixXd transition() const;
};

/// Throws DomainError unless 0 <= l < top_layer.
LayerChannel build_layer_channel(const LayeredTree& lt, const GaussianTree& tree, int l);

}  // namespace gtsynth
