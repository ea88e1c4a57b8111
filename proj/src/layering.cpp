#include "gtsynth/layering.hpp"

#include "gtsynth/errors.hpp"

#include <algorithm>
#include <deque>

namespace gtsynth {

std::vector<int> LayeredTree::latents_at(const GaussianTree& tree, int l) const {
  std::vector<int> out;
  for (int v : layer(l))
    if (tree.is_latent(v)) out.push_back(v);
  std::sort(out.begin(), out.end(),
            [&tree](int a, int b) { return tree.sign_slot(a) < tree.sign_slot(b); });
  return out;
}

std::vector<int> LayeredTree::observed_at(const GaussianTree& tree, int l) const {
  std::vector<int> out;
  for (int v : layer(l))
    if (!tree.is_latent(v)) out.push_back(v);
  return out;
}

namespace {

std::vector<int> multi_source_bfs(const GaussianTree& tree, const std::vector<int>& sources) {
  std::vector<int> dist(tree.node_count(), -1);
  std::deque<int> queue;
  for (int s : sources) {
    dist[static_cast<std::size_t>(s)] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const Neighbor& nb : tree.neighbors(u)) {
      auto& d = dist[static_cast<std::size_t>(nb.node)];
      if (d < 0) {
        d = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(nb.node);
      }
    }
  }
  return dist;
}

// Fills layers, parents and top edges from layer_of; throws when some node
// below the top has other than one upper neighbour.
LayeredTree finish(const GaussianTree& tree, std::vector<int> layer_of) {
  LayeredTree lt;
  const int top = *std::max_element(layer_of.begin(), layer_of.end());
  lt.layers.assign(static_cast<std::size_t>(top) + 1, {});
  lt.parent_of.assign(tree.node_count(), -1);
  for (std::size_t v = 0; v < tree.node_count(); ++v)
    lt.layers[static_cast<std::size_t>(layer_of[v])].push_back(static_cast<int>(v));

  for (std::size_t v = 0; v < tree.node_count(); ++v) {
    const int lv = layer_of[v];
    if (lv == top) continue;
    int upper = 0;
    for (const Neighbor& nb : tree.neighbors(static_cast<int>(v))) {
      if (layer_of[static_cast<std::size_t>(nb.node)] == lv + 1) {
        ++upper;
        lt.parent_of[v] = nb.node;
      }
    }
    if (upper != 1)
      throw HyperChainViolation("node " + tree.node(static_cast<int>(v)).id + " has " +
                                std::to_string(upper) + " upper-layer neighbours");
  }
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    const auto [a, b] = tree.endpoints(static_cast<int>(e));
    if (layer_of[static_cast<std::size_t>(a)] == top && layer_of[static_cast<std::size_t>(b)] == top)
      lt.top_edges.push_back(static_cast<int>(e));
  }
  lt.layer_of = std::move(layer_of);
  return lt;
}

LayeredTree layer_from_top_set(const GaussianTree& tree, const std::vector<int>& top) {
  const std::vector<int> depth = multi_source_bfs(tree, top);
  // Every non-top node must be reached from exactly one side; two adjacent
  // nodes at equal depth below the top cannot be split without leaving one
  // of them with two upper neighbours.
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    const auto [a, b] = tree.endpoints(static_cast<int>(e));
    const int da = depth[static_cast<std::size_t>(a)];
    const int db = depth[static_cast<std::size_t>(b)];
    if (da == db && da > 0) {
      const int moved = tree.node(a).id > tree.node(b).id ? a : b;
      throw HyperChainViolation("moving " + tree.node(moved).id + " below " +
                                tree.node(moved == a ? b : a).id +
                                " leaves it with two upper-layer neighbours");
    }
  }
  const int maxdepth = *std::max_element(depth.begin(), depth.end());
  std::vector<int> layer_of(depth.size());
  for (std::size_t v = 0; v < depth.size(); ++v) layer_of[v] = maxdepth - depth[v];
  return finish(tree, std::move(layer_of));
}

}  // namespace

LayerAssignment assign_layers(const GaussianTree& tree) {
  const std::vector<int> dist = multi_source_bfs(tree, tree.observed());
  const int top = *std::max_element(dist.begin(), dist.end());
  LayerAssignment out;
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    const auto [a, b] = tree.endpoints(static_cast<int>(e));
    const int la = dist[static_cast<std::size_t>(a)];
    if (la == dist[static_cast<std::size_t>(b)] && la != top)
      out.conflicts.push_back({tree.node(a).id, tree.node(b).id, la});
  }
  if (out.conflicts.empty()) out.layered = finish(tree, dist);
  return out;
}

LayeredTree restructure(const GaussianTree& tree) {
  const std::vector<int> dist = multi_source_bfs(tree, tree.observed());
  const int top = *std::max_element(dist.begin(), dist.end());
  std::vector<int> top_set;
  for (std::size_t v = 0; v < dist.size(); ++v)
    if (dist[v] == top) top_set.push_back(static_cast<int>(v));
  return layer_from_top_set(tree, top_set);
}

LayeredTree layer_from_top(const GaussianTree& tree, std::span<const std::string> top) {
  if (top.empty()) throw DomainError("empty top set");
  std::vector<int> top_set;
  for (const auto& id : top) top_set.push_back(tree.index_of(id));
  return layer_from_top_set(tree, top_set);
}

Eigen::MatrixXd LayerChannel::transition() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(outputs.size()),
                                            static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t r = 0; r < outputs.size(); ++r) a(static_cast<Eigen::Index>(r), parent_pos[r]) = coef[r];
  return a;
}

LayerChannel build_layer_channel(const LayeredTree& lt, const GaussianTree& tree, int l) {
  if (l < 0 || l >= lt.top_layer())
    throw DomainError("layer " + std::to_string(l) + " outside [0, " +
                      std::to_string(lt.top_layer()) + ")");
  LayerChannel ch;
  ch.layer = l;
  ch.outputs = lt.layer(l);
  ch.inputs = lt.layer(l + 1);
  for (int v : ch.outputs) {
    const int u = lt.parent_of[static_cast<std::size_t>(v)];
    const auto pos = std::find(ch.inputs.begin(), ch.inputs.end(), u) - ch.inputs.begin();
    const int e = tree.edge_between(u, v);
    const double r = tree.rho(e);
    ch.parent_pos.push_back(static_cast<int>(pos));
    ch.edge.push_back(e);
    ch.coef.push_back(r);
    ch.noise_var.push_back(1.0 - r * r);
  }
  return ch;
}

}  // namespace gtsynth
