#pragma once

#include <vector>

namespace rebal::detail {

// Dinic max-flow on double capacities. Small graphs only (the feasibility
// check builds m + n + 2 nodes), so no scaling tricks are needed.
class MaxFlow {
 public:
  explicit MaxFlow(int node_count);

  void add_edge(int from, int to, double capacity);

  // Returns the max-flow value from source to sink. Residual capacities
  // below eps are treated as zero.
  double solve(int source, int sink, double eps);

  // After solve(): nodes reachable from the source in the residual graph.
  std::vector<bool> min_cut_side(int source, double eps) const;

 private:
  struct Edge {
    int to;
    double cap;
    int rev;
  };

  bool bfs_levels(int source, int sink, double eps);
  double dfs_push(int v, int sink, double pushed, double eps);

  std::vector<std::vector<Edge>> graph_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
};

}  // namespace rebal::detail
