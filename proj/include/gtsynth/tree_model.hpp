#pragma once

// Latent Gaussian trees: unit-variance, zero-mean nodes joined by edges
// carrying a base correlation. Latent nodes additionally carry the
// Bernoulli parameter pi = P(sign = +1) of their sign variable.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gtsynth {

enum class NodeKind { Observed, Latent };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Observed;
  std::optional<double> pi;  // present iff Latent
};

struct Edge {
  std::string a;
  std::string b;
  double rho = 0.0;
};

/// One +/-1 value per latent node, in canonical latent order (latent ids
/// sorted lexicographically).
///
/// Sign classes are indexed by the integer whose binary digits read the
/// signs in canonical order, first latent most significant, digit 1 <-> +1.
struct SignAssignment {
  std::vector<int> b;

  static SignAssignment all_positive(std::size_t k);
  static SignAssignment from_index(std::uint64_t index, std::size_t k);
  std::uint64_t index() const;
  /// '1' for +1, '0' for -1, canonical order.
  std::string bitstring() const;
  SignAssignment negated() const;
  std::size_t size() const { return b.size(); }
};

struct Neighbor {
  int node;
  int edge;
};

class GaussianTree {
 public:
  /// Throws TreeError on duplicate ids, unknown edge endpoints, rho
  /// outside (-1,1)\{0}, pi missing or outside (0,1), or an edge set
  /// that is not a spanning tree.
  GaussianTree(std::vector<Node> nodes, std::vector<Edge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  bool is_latent(int i) const { return node(i).kind == NodeKind::Latent; }

  /// Node index for an id, or -1.
  int find(std::string_view id) const;
  /// Node index for an id; throws DomainError when absent.
  int index_of(std::string_view id) const;

  std::span<const Neighbor> neighbors(int i) const;
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  /// Edge endpoints as node indices.
  std::pair<int, int> endpoints(int edge) const { return ends_[static_cast<std::size_t>(edge)]; }
  double rho(int edge) const { return edges_[static_cast<std::size_t>(edge)].rho; }
  /// Edge joining u and v, or -1.
  int edge_between(int u, int v) const;

  /// Observed node indices in document order.
  const std::vector<int>& observed() const { return observed_; }
  /// Latent node indices in canonical (lexicographic id) order.
  const std::vector<int>& latents() const { return latents_; }
  std::size_t latent_count() const { return latents_.size(); }
  std::size_t observed_count() const { return observed_.size(); }
  /// Position of node i in canonical latent order, or -1 for observed nodes.
  int sign_slot(int i) const { return sign_slot_[static_cast<std::size_t>(i)]; }
  /// Sign factor of node i under `signs`: b of the node if latent, else 1.
  int sign_of(int i, const SignAssignment& signs) const;

  /// pi of every latent node in canonical order.
  std::vector<double> pi() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::pair<int, int>> ends_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<int> observed_;
  std::vector<int> latents_;
  std::vector<int> sign_slot_;
};

/// Symmetric matrix with node-id labels on rows and columns.
struct CovarianceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  int position(std::string_view id) const;
  double at(std::string_view a, std::string_view b) const;
  /// Sub-matrix over the given labels, in the given order.
  Eigen::MatrixXd block(std::span<const std::string> ids) const;
};

/// Parses a tree-spec JSON document. Throws TreeError.
GaussianTree parse_tree(std::string_view text);
GaussianTree load_tree(const std::string& path);
/// Serializes to the tree-spec JSON format; parse(serialize(t)) reproduces t.
std::string serialize_tree(const GaussianTree& tree);

/// Every violated invariant, as a human-readable message naming the
/// offending node. Empty iff the tree is a valid latent Gaussian tree.
std::vector<std::string> validate_tree(const GaussianTree& tree);

/// Signed correlation of an edge: base rho times the sign factor of each
/// latent endpoint.
double effective_rho(const GaussianTree& tree, int edge, const SignAssignment& signs);

/// All-node correlation matrix (document order) by path products of the
/// signed edge correlations. Throws DomainError on a sign vector of the
/// wrong length.
CovarianceMatrix joint_covariance(const GaussianTree& tree, const SignAssignment& signs);

/// Restriction of joint_covariance to observed nodes (document order).
CovarianceMatrix observed_covariance(const GaussianTree& tree, const SignAssignment& signs);

}  // namespace gtsynth
