#include "gtsynth/tree_model.hpp"

#include "gtsynth/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace gtsynth {

// ---- SignAssignment --------------------------------------------------------

SignAssignment SignAssignment::all_positive(std::size_t k) { return {std::vector<int>(k, 1)}; }

SignAssignment SignAssignment::from_index(std::uint64_t index, std::size_t k) {
  SignAssignment s{std::vector<int>(k, -1)};
  for (std::size_t j = 0; j < k; ++j) {
    if ((index >> (k - 1 - j)) & 1u) s.b[j] = 1;
  }
  return s;
}

std::uint64_t SignAssignment::index() const {
  std::uint64_t i = 0;
  for (int v : b) i = (i << 1) | (v > 0 ? 1u : 0u);
  return i;
}

std::string SignAssignment::bitstring() const {
  std::string s;
  s.reserve(b.size());
  for (int v : b) s.push_back(v > 0 ? '1' : '0');
  return s;
}

SignAssignment SignAssignment::negated() const {
  SignAssignment s = *this;
  for (int& v : s.b) v = -v;
  return s;
}

// ---- GaussianTree ----------------------------------------------------------

GaussianTree::GaussianTree(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.id.empty()) throw TreeError("empty node id");
    if (!index.emplace(n.id, static_cast<int>(i)).second)
      throw TreeError("duplicate node id " + n.id);
    if (n.kind == NodeKind::Latent) {
      if (!n.pi) throw TreeError("missing pi on latent node " + n.id);
      if (!(*n.pi > 0.0 && *n.pi < 1.0)) throw TreeError("pi outside (0,1) at " + n.id);
    } else if (n.pi) {
      throw TreeError("pi given on observed node " + n.id);
    }
  }

  adj_.resize(nodes_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    const auto ia = index.find(ed.a);
    const auto ib = index.find(ed.b);
    if (ia == index.end()) throw TreeError("edge references unknown node " + ed.a);
    if (ib == index.end()) throw TreeError("edge references unknown node " + ed.b);
    if (ia->second == ib->second) throw TreeError("not a tree: self-loop at " + ed.a);
    if (!(std::abs(ed.rho) < 1.0) || ed.rho == 0.0)
      throw TreeError("rho outside open interval (-1,1)\\{0} at edge " + ed.a + "-" + ed.b);
    ends_.emplace_back(ia->second, ib->second);
    adj_[static_cast<std::size_t>(ia->second)].push_back({ib->second, static_cast<int>(e)});
    adj_[static_cast<std::size_t>(ib->second)].push_back({ia->second, static_cast<int>(e)});
  }

  // A spanning tree has n-1 edges and is connected.
  if (nodes_.empty()) throw TreeError("not a tree: no nodes");
  if (edges_.size() + 1 != nodes_.size())
    throw TreeError("not a tree: " + std::to_string(edges_.size()) + " edges for " +
                    std::to_string(nodes_.size()) + " nodes");
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const Neighbor& nb : adj_[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(nb.node)]) {
        seen[static_cast<std::size_t>(nb.node)] = 1;
        ++reached;
        stack.push_back(nb.node);
      }
    }
  }
  if (reached != nodes_.size()) throw TreeError("not a tree: graph is disconnected or cyclic");

  sign_slot_.assign(nodes_.size(), -1);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == NodeKind::Latent)
      latents_.push_back(static_cast<int>(i));
    else
      observed_.push_back(static_cast<int>(i));
  }
  std::sort(latents_.begin(), latents_.end(),
            [this](int a, int b) { return node(a).id < node(b).id; });
  for (std::size_t j = 0; j < latents_.size(); ++j)
    sign_slot_[static_cast<std::size_t>(latents_[j])] = static_cast<int>(j);
}

int GaussianTree::find(std::string_view id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return static_cast<int>(i);
  return -1;
}

int GaussianTree::index_of(std::string_view id) const {
  const int i = find(id);
  if (i < 0) throw DomainError("unknown node id " + std::string(id));
  return i;
}

std::span<const Neighbor> GaussianTree::neighbors(int i) const {
  return adj_[static_cast<std::size_t>(i)];
}

int GaussianTree::edge_between(int u, int v) const {
  for (const Neighbor& nb : neighbors(u))
    if (nb.node == v) return nb.edge;
  return -1;
}

int GaussianTree::sign_of(int i, const SignAssignment& signs) const {
  const int slot = sign_slot(i);
  return slot < 0 ? 1 : signs.b[static_cast<std::size_t>(slot)];
}

std::vector<double> GaussianTree::pi() const {
  std::vector<double> out;
  out.reserve(latents_.size());
  for (int i : latents_) out.push_back(*node(i).pi);
  return out;
}

// ---- CovarianceMatrix ------------------------------------------------------

int CovarianceMatrix::position(std::string_view id) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == id) return static_cast<int>(i);
  throw DomainError("label not in covariance matrix: " + std::string(id));
}

double CovarianceMatrix::at(std::string_view a, std::string_view b) const {
  return values(position(a), position(b));
}

Eigen::MatrixXd CovarianceMatrix::block(std::span<const std::string> ids) const {
  std::vector<int> pos;
  pos.reserve(ids.size());
  for (const auto& id : ids) pos.push_back(position(id));
  Eigen::MatrixXd out(pos.size(), pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < pos.size(); ++j) out(i, j) = values(pos[i], pos[j]);
  return out;
}

// ---- parse / serialize -----------------------------------------------------

GaussianTree parse_tree(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TreeError(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") ||
      !doc["nodes"].is_array() || !doc["edges"].is_array())
    throw TreeError("malformed document: expected object with \"nodes\" and \"edges\" arrays");

  std::vector<Node> nodes;
  for (const auto& jn : doc["nodes"]) {
    if (!jn.is_object() || !jn.contains("id") || !jn["id"].is_string() || !jn.contains("kind") ||
        !jn["kind"].is_string())
      throw TreeError("malformed document: node needs string \"id\" and \"kind\"");
    Node n;
    n.id = jn["id"].get<std::string>();
    const auto kind = jn["kind"].get<std::string>();
    if (kind == "observed")
      n.kind = NodeKind::Observed;
    else if (kind == "latent")
      n.kind = NodeKind::Latent;
    else
      throw TreeError("malformed document: unknown node kind \"" + kind + "\"");
    if (jn.contains("pi")) {
      if (!jn["pi"].is_number()) throw TreeError("malformed document: pi must be a number");
      n.pi = jn["pi"].get<double>();
    }
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  for (const auto& je : doc["edges"]) {
    if (!je.is_object() || !je.contains("a") || !je.contains("b") || !je.contains("rho") ||
        !je["a"].is_string() || !je["b"].is_string() || !je["rho"].is_number())
      throw TreeError("malformed document: edge needs string \"a\", \"b\" and numeric \"rho\"");
    edges.push_back({je["a"].get<std::string>(), je["b"].get<std::string>(), je["rho"].get<double>()});
  }
  return GaussianTree(std::move(nodes), std::move(edges));
}

GaussianTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TreeError("cannot read tree file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tree(ss.str());
}

std::string serialize_tree(const GaussianTree& tree) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const Node& n : tree.nodes()) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = n.kind == NodeKind::Latent ? "latent" : "observed";
    if (n.pi) jn["pi"] = *n.pi;
    doc["nodes"].push_back(std::move(jn));
  }
  doc["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : tree.edges()) doc["edges"].push_back({{"a", e.a}, {"b", e.b}, {"rho", e.rho}});
  return doc.dump(2) + "\n";
}

// ---- validation ------------------------------------------------------------

std::vector<std::string> validate_tree(const GaussianTree& tree) {
  std::vector<std::string> out;
  if (tree.observed_count() < 3) out.emplace_back("fewer than 3 observed nodes");
  if (tree.latent_count() == 0) out.emplace_back("no latent nodes");
  for (int i : tree.latents()) {
    if (tree.degree(i) < 3) out.push_back("latent degree < 3 at " + tree.node(i).id);
  }
  return out;
}

// ---- covariance ------------------------------------------------------------

double effective_rho(const GaussianTree& tree, int edge, const SignAssignment& signs) {
  const auto [u, v] = tree.endpoints(edge);
  return tree.rho(edge) * tree.sign_of(u, signs) * tree.sign_of(v, signs);
}

CovarianceMatrix joint_covariance(const GaussianTree& tree, const SignAssignment& signs) {
  if (signs.size() != tree.latent_count())
    throw DomainError("sign vector has " + std::to_string(signs.size()) + " entries, tree has " +
                      std::to_string(tree.latent_count()) + " latent nodes");
  const auto n = static_cast<int>(tree.node_count());
  std::vector<double> signed_rho(tree.edges().size());
  for (std::size_t e = 0; e < signed_rho.size(); ++e)
    signed_rho[e] = effective_rho(tree, static_cast<int>(e), signs);

  CovarianceMatrix cov;
  cov.values = Eigen::MatrixXd::Identity(n, n);
  for (const Node& nd : tree.nodes()) cov.labels.push_back(nd.id);

  // Walk outwards from each u; the product along the path accumulates in
  // path order, and only the upper triangle is kept so (u,v) and (v,u)
  // are bit-identical.
  std::vector<double> prod(static_cast<std::size_t>(n));
  std::vector<int> stack;
  std::vector<char> seen(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    prod[static_cast<std::size_t>(u)] = 1.0;
    seen[static_cast<std::size_t>(u)] = 1;
    stack.assign(1, u);
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : tree.neighbors(w)) {
        const auto v = static_cast<std::size_t>(nb.node);
        if (seen[v]) continue;
        seen[v] = 1;
        prod[v] = prod[static_cast<std::size_t>(w)] * signed_rho[static_cast<std::size_t>(nb.edge)];
        stack.push_back(nb.node);
      }
    }
    for (int v = u + 1; v < n; ++v) {
      cov.values(u, v) = prod[static_cast<std::size_t>(v)];
      cov.values(v, u) = prod[static_cast<std::size_t>(v)];
    }
  }
  return cov;
}

CovarianceMatrix observed_covariance(const GaussianTree& tree, const SignAssignment& signs) {
  const CovarianceMatrix joint = joint_covariance(tree, signs);
  const auto& obs = tree.observed();
  CovarianceMatrix out;
  out.values.resize(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out.labels.push_back(tree.node(obs[i]).id);
    for (std::size_t j = 0; j < obs.size(); ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          joint.values(obs[i], obs[j]);
  }
  return out;
}

}  // namespace gtsynth
