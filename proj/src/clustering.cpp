/*
 * Copyright (c) 2026, The fedsur Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedsur/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace fedsur {

std::vector<double> core_distances(const DistanceMatrix& d, int min_samples) {
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  const std::size_t n = d.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(min_samples), n);
  std::vector<double> core(n, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.assign(d.row(i).begin(), d.row(i).end());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

DistanceMatrix mutual_reachability(const DistanceMatrix& d, int min_samples) {
  const auto core = core_distances(d, min_samples);
  const std::size_t n = d.size();
  DistanceMatrix mr(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      mr(i, j) = i == j ? 0.0 : std::max({core[i], core[j], d(i, j)});
    }
  }
  return mr;
}

std::vector<MstEdge> minimum_spanning_tree(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<bool> in_tree(n, false);
  std::vector<double> key(n, kInf);
  std::vector<std::size_t> link(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (d(current, v) < key[v]) {
        key[v] = d(current, v);
        link[v] = current;
      }
      if (next == n || key[v] < key[next]) next = v;
    }
    in_tree[next] = true;
    edges.push_back({std::min(link[next], next), std::max(link[next], next), key[next]});
    current = next;
  }
  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
  });
  return edges;
}

namespace {

constexpr double kInfLambda = std::numeric_limits<double>::infinity();

double lambda_of(double distance) { return distance > 0.0 ? 1.0 / distance : kInfLambda; }

// a - b with inf - inf = 0.
double lambda_gap(double a, double b) { return a == b ? 0.0 : a - b; }

struct DendroNode {
  int left = -1;
  int right = -1;
  double distance = 0.0;
  std::size_t size = 1;
  std::size_t min_leaf = 0;
};

struct Condensed {
  int parent = -1;
  double birth = 0.0;
  double end = 0.0;
  std::vector<std::pair<std::size_t, double>> fallouts;  // (point, lambda)
  std::vector<int> children;
  std::size_t size = 0;
};

class Hierarchy {
 public:
  Hierarchy(const DistanceMatrix& mr, std::size_t min_cluster_size) : n_(mr.size()), mcs_(min_cluster_size) {
    build_dendrogram(mr);
    condense();
  }

  std::vector<int> labels() const {
    const auto selected = select();
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < clusters_.size(); ++c) {
      if (!selected[c]) continue;
      std::vector<std::pair<std::size_t, double>> pts;
      collect(static_cast<int>(c), pts);
      std::vector<std::size_t> members;
      for (const auto& [p, lam] : pts) {
        if (c != 0 || lam >= clusters_[0].end) members.push_back(p);
      }
      std::sort(members.begin(), members.end());
      if (!members.empty()) groups.push_back(std::move(members));
    }
    std::sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
    std::vector<int> out(n_, -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (auto p : groups[g]) out[p] = static_cast<int>(g);
    }
    return out;
  }

 private:
  void build_dendrogram(const DistanceMatrix& mr) {
    nodes_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) nodes_[i].min_leaf = i;
    std::vector<std::size_t> uf(n_);
    std::iota(uf.begin(), uf.end(), std::size_t{0});
    std::vector<int> top(n_);
    std::iota(top.begin(), top.end(), 0);
    auto find = [&](std::size_t x) {
      while (uf[x] != x) x = uf[x] = uf[uf[x]];
      return x;
    };
    for (const auto& e : minimum_spanning_tree(mr)) {
      const auto ra = find(e.a);
      const auto rb = find(e.b);
      DendroNode node;
      node.left = top[ra];
      node.right = top[rb];
      node.distance = e.weight;
      node.size = nodes_[node.left].size + nodes_[node.right].size;
      node.min_leaf = std::min(nodes_[node.left].min_leaf, nodes_[node.right].min_leaf);
      nodes_.push_back(node);
      uf[rb] = ra;
      top[ra] = static_cast<int>(nodes_.size() - 1);
    }
  }

  // Descendants of `node` reached through internal nodes at the same height.
  void pieces(int node, double height, std::vector<int>& out) const {
    for (int child : {nodes_[node].left, nodes_[node].right}) {
      if (nodes_[child].left >= 0 && nodes_[child].distance == height) {
        pieces(child, height, out);
      } else {
        out.push_back(child);
      }
    }
  }

  void leaves(int node, std::vector<std::size_t>& out) const {
    if (nodes_[node].left < 0) {
      out.push_back(static_cast<std::size_t>(node));
      return;
    }
    leaves(nodes_[node].left, out);
    leaves(nodes_[node].right, out);
  }

  void condense() {
    if (n_ < mcs_ || n_ < 2) return;
    std::vector<std::pair<int, int>> work;  // (cluster id, dendrogram node)
    clusters_.push_back({-1, 0.0, 0.0, {}, {}, n_});
    work.emplace_back(0, static_cast<int>(nodes_.size() - 1));
    while (!work.empty()) {
      auto [cid, node] = work.back();
      work.pop_back();
      while (true) {
        const double lam = lambda_of(nodes_[node].distance);
        std::vector<int> parts;
        pieces(node, nodes_[node].distance, parts);
        std::vector<int> big;
        for (int p : parts) {
          if (nodes_[p].size >= mcs_) {
            big.push_back(p);
          } else {
            std::vector<std::size_t> pts;
            leaves(p, pts);
            for (auto q : pts) clusters_[cid].fallouts.emplace_back(q, lam);
          }
        }
        if (big.size() == 1) {
          node = big.front();
          continue;
        }
        clusters_[cid].end = lam;
        std::sort(big.begin(), big.end(), [&](int x, int y) { return nodes_[x].min_leaf < nodes_[y].min_leaf; });
        for (int b : big) {
          const int child = static_cast<int>(clusters_.size());
          clusters_.push_back({cid, lam, 0.0, {}, {}, nodes_[b].size});
          clusters_[cid].children.push_back(child);
          work.emplace_back(child, b);
        }
        break;
      }
    }
  }

  double stability(std::size_t c) const {
    const auto& cl = clusters_[c];
    double s = 0.0;
    for (const auto& [p, lam] : cl.fallouts) s += lambda_gap(lam, cl.birth);
    for (int k : cl.children) {
      s += static_cast<double>(clusters_[k].size) * lambda_gap(clusters_[k].birth, cl.birth);
    }
    return s;
  }

  void deselect(int c, std::vector<bool>& selected) const {
    for (int k : clusters_[c].children) {
      selected[k] = false;
      deselect(k, selected);
    }
  }

  std::vector<bool> select() const {
    std::vector<bool> selected(clusters_.size(), false);
    std::vector<double> value(clusters_.size(), 0.0);
    for (std::size_t c = clusters_.size(); c-- > 0;) {
      const double own = stability(c);
      if (clusters_[c].children.empty()) {
        selected[c] = true;
        value[c] = own;
        continue;
      }
      double sum = 0.0;
      for (int k : clusters_[c].children) sum += value[k];
      if (sum > own) {
        value[c] = sum;
      } else {
        value[c] = own;
        selected[c] = true;
        deselect(static_cast<int>(c), selected);
      }
    }
    return selected;
  }

  void collect(int c, std::vector<std::pair<std::size_t, double>>& out) const {
    const auto& cl = clusters_[c];
    out.insert(out.end(), cl.fallouts.begin(), cl.fallouts.end());
    for (int k : cl.children) collect(k, out);
  }

  std::size_t n_;
  std::size_t mcs_;
  std::vector<DendroNode> nodes_;
  std::vector<Condensed> clusters_;
};

}  // namespace

ClusterResult hdbscan(const DistanceMatrix& d, int min_cluster_size, int min_samples) {
  if (min_cluster_size < 2) throw std::invalid_argument("min_cluster_size must be >= 2");
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  ClusterResult result;
  const std::size_t n = d.size();
  if (n < static_cast<std::size_t>(min_cluster_size)) {
    result.labels.assign(n, -1);
    return result;
  }
  const Hierarchy h(mutual_reachability(d, min_samples), static_cast<std::size_t>(min_cluster_size));
  result.labels = h.labels();
  for (int l : result.labels) {
    if (l >= 0) ++result.cluster_sizes[l];
  }
  return result;
}

std::vector<int> largest_cluster(const ClusterResult& result) {
  int best = -1;
  std::size_t best_size = 0;
  for (const auto& [id, size] : result.cluster_sizes) {
    if (size > best_size) {
      best = id;
      best_size = size;
    }
  }
  std::vector<int> members;
  if (best < 0) return members;
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    if (result.labels[i] == best) members.push_back(static_cast<int>(i));
  }
  return members;
}

}  // namespace fedsur
