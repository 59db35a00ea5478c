/*
 * Copyright 2026 The WCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Exact (unregularised) optimal transport between uniform marginals on tiny
// instances, for validating the Sinkhorn solvers.
//
//  * m == n <= 8: the optimum is attained at (1/n) times a permutation matrix,
//    so every permutation is enumerated.
//  * min(m, n) <= 3 and max(m, n) <= 6: every basic feasible solution of the
//    transportation polytope is enumerated. A basis is a spanning tree of the
//    bipartite row/column graph with m + n - 1 cells; its flows are recovered
//    by peeling leaves.

#ifndef WCL_EXACT_OT_HPP_
#define WCL_EXACT_OT_HPP_

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wcl/errors.hpp"
#include "wcl/sinkhorn.hpp"

namespace wcl {

struct ExactOtResult {
  TransportPlan plan;
  double distance = 0.0;
};

inline constexpr int kMaxPermutationSize = 8;
inline constexpr int kMaxBasisShortSide = 3;
inline constexpr int kMaxBasisLongSide = 6;

namespace detail {

inline ExactOtResult permutation_ot(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += c(i, perm[static_cast<std::size_t>(i)]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Re-sum the optimal terms in sorted order so the value does not depend on
  // which side indexes the rows; this keeps the oracle bitwise symmetric.
  std::vector<double> terms;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    p(i, best[static_cast<std::size_t>(i)]) = 1.0 / n;
    terms.push_back(c(i, best[static_cast<std::size_t>(i)]));
  }
  std::sort(terms.begin(), terms.end());
  return {TransportPlan(std::move(p)),
          std::accumulate(terms.begin(), terms.end(), 0.0) / n};
}

// Solves for the flows on a candidate basis. Returns false when the cells
// contain a cycle (not a basis) or a flow comes out negative (infeasible).
inline bool basis_flows(int m, int n, const std::vector<int>& cells,
                        Eigen::MatrixXd& flows) {
  std::vector<double> supply(static_cast<std::size_t>(m + n));
  for (int i = 0; i < m; ++i) supply[static_cast<std::size_t>(i)] = 1.0 / m;
  for (int j = 0; j < n; ++j) supply[static_cast<std::size_t>(m + j)] = 1.0 / n;
  std::vector<int> degree(static_cast<std::size_t>(m + n), 0);
  for (int cell : cells) {
    ++degree[static_cast<std::size_t>(cell / n)];
    ++degree[static_cast<std::size_t>(m + cell % n)];
  }
  std::vector<bool> used(cells.size(), false);
  flows.setZero(m, n);
  constexpr double kSlack = 1e-12;
  for (std::size_t done = 0; done < cells.size(); ++done) {
    // Find an unused cell touching a leaf node.
    std::size_t pick = cells.size();
    int leaf = -1;
    for (std::size_t k = 0; k < cells.size() && pick == cells.size(); ++k) {
      if (used[k]) continue;
      const int r = cells[k] / n;
      const int col = m + cells[k] % n;
      if (degree[static_cast<std::size_t>(r)] == 1) {
        pick = k;
        leaf = r;
      } else if (degree[static_cast<std::size_t>(col)] == 1) {
        pick = k;
        leaf = col;
      }
    }
    if (pick == cells.size()) return false;  // every remaining node has a cycle
    used[pick] = true;
    const int r = cells[pick] / n;
    const int col = m + cells[pick] % n;
    const int other = leaf == r ? col : r;
    const double amount = supply[static_cast<std::size_t>(leaf)];
    if (amount < -kSlack) return false;
    supply[static_cast<std::size_t>(leaf)] = 0.0;
    supply[static_cast<std::size_t>(other)] -= amount;
    --degree[static_cast<std::size_t>(r)];
    --degree[static_cast<std::size_t>(col)];
    flows(r, col - m) = std::max(amount, 0.0);
  }
  for (double s : supply) {
    if (std::abs(s) > kSlack) return false;
  }
  return true;
}

inline ExactOtResult basis_ot(const Eigen::MatrixXd& c) {
  const int m = static_cast<int>(c.rows());
  const int n = static_cast<int>(c.cols());
  const int cells = m * n;
  const int basis_size = m + n - 1;

  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(basis_size));
  Eigen::MatrixXd flows(m, n);
  Eigen::MatrixXd best_flows;
  double best_cost = std::numeric_limits<double>::infinity();

  // Lexicographic enumeration of basis_size-subsets of the cells.
  std::vector<int> idx(static_cast<std::size_t>(basis_size));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (basis_flows(m, n, idx, flows)) {
      const double cost = (flows.array() * c.array()).sum();
      if (cost < best_cost) {
        best_cost = cost;
        best_flows = flows;
      }
    }
    int k = basis_size - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == cells - basis_size + k) {
      --k;
    }
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (int t = k + 1; t < basis_size; ++t) {
      idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  return {TransportPlan(std::move(best_flows)), best_cost};
}

}  // namespace detail

inline bool exact_ot_supported(Eigen::Index m, Eigen::Index n) {
  if (m == n && m <= kMaxPermutationSize) return true;
  return std::min(m, n) <= kMaxBasisShortSide &&
         std::max(m, n) <= kMaxBasisLongSide;
}

// Globally optimal <P, C> over all couplings with uniform marginals.
inline ExactOtResult exact_ot_oracle(const CostMatrix& c) {
  const Eigen::Index m = c.rows();
  const Eigen::Index n = c.cols();
  if (!exact_ot_supported(m, n)) {
    throw CapacityError("exact_ot_oracle: " + std::to_string(m) + "x" +
                        std::to_string(n) +
                        " exceeds the enumeration limits (m == n <= 8, or "
                        "min <= 3 and max <= 6)");
  }
  if (m == n) return detail::permutation_ot(c.matrix());
  return detail::basis_ot(c.matrix());
}

}  // namespace wcl

#endif  // WCL_EXACT_OT_HPP_
