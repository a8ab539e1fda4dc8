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

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "fedsur/params.hpp"

namespace fedsur {

struct ClusterResult {
  std::vector<int> labels;                  // cluster id >= 0, or -1 for noise
  std::map<int, std::size_t> cluster_sizes;

  int cluster_count() const noexcept { return static_cast<int>(cluster_sizes.size()); }
};

/// Core distance of each point: the min_samples-th smallest entry of its row,
/// the point itself counting as the first (so min_samples = 1 gives 0).
/// min_samples is clamped to n.
std::vector<double> core_distances(const DistanceMatrix& d, int min_samples);

/// MR(a, b) = max(core_a, core_b, D(a, b)); the diagonal stays zero.
DistanceMatrix mutual_reachability(const DistanceMatrix& d, int min_samples);

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// Prim's algorithm on a dense matrix, edges returned sorted by
/// (weight, min endpoint, max endpoint).
std::vector<MstEdge> minimum_spanning_tree(const DistanceMatrix& d);

/// HDBSCAN over a precomputed distance matrix: mutual reachability, single
/// linkage, condensed tree with min_cluster_size, excess-of-mass selection.
///
/// Equal merge heights are collapsed into one multi-way split, so the result
/// depends only on the thresholded connectivity of the mutual-reachability
/// graph. The root may be selected (single-cluster mode); in that case only
/// the points still attached to the root when it dissolves or splits are
/// labelled, everything that peeled off earlier is noise. Labels are numbered
/// in order of each cluster's smallest member.
///
/// Fewer than min_cluster_size points yields all noise. Throws
/// std::invalid_argument if min_cluster_size < 2 or min_samples < 1.
ClusterResult hdbscan(const DistanceMatrix& d, int min_cluster_size, int min_samples);

/// Members of the largest cluster, ties to the lower id; empty when all noise.
std::vector<int> largest_cluster(const ClusterResult& result);

}  // namespace fedsur
