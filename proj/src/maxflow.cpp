#include "maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace rebal::detail {

MaxFlow::MaxFlow(int node_count)
    : graph_(node_count), level_(node_count), iter_(node_count) {}

void MaxFlow::add_edge(int from, int to, double capacity) {
  graph_[from].push_back({to, capacity, static_cast<int>(graph_[to].size())});
  graph_[to].push_back({from, 0.0, static_cast<int>(graph_[from].size()) - 1});
}

bool MaxFlow::bfs_levels(int source, int sink, double eps) {
  std::fill(level_.begin(), level_.end(), -1);
  std::queue<int> queue;
  level_[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop();
    for (const Edge& e : graph_[v]) {
      if (e.cap > eps && level_[e.to] < 0) {
        level_[e.to] = level_[v] + 1;
        queue.push(e.to);
      }
    }
  }
  return level_[sink] >= 0;
}

double MaxFlow::dfs_push(int v, int sink, double pushed, double eps) {
  if (v == sink) return pushed;
  for (std::size_t& i = iter_[v]; i < graph_[v].size(); ++i) {
    Edge& e = graph_[v][i];
    if (e.cap > eps && level_[v] < level_[e.to]) {
      double got = dfs_push(e.to, sink, std::min(pushed, e.cap), eps);
      if (got > eps) {
        e.cap -= got;
        graph_[e.to][e.rev].cap += got;
        return got;
      }
    }
  }
  return 0.0;
}

double MaxFlow::solve(int source, int sink, double eps) {
  double flow = 0.0;
  while (bfs_levels(source, sink, eps)) {
    std::fill(iter_.begin(), iter_.end(), 0);
    for (;;) {
      double got = dfs_push(source, sink, std::numeric_limits<double>::max(), eps);
      if (got <= eps) break;
      flow += got;
    }
  }
  return flow;
}

std::vector<bool> MaxFlow::min_cut_side(int source, double eps) const {
  std::vector<bool> reachable(graph_.size(), false);
  std::queue<int> queue;
  reachable[source] = true;
  queue.push(source);
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop();
    for (const Edge& e : graph_[v]) {
      if (e.cap > eps && !reachable[e.to]) {
        reachable[e.to] = true;
        queue.push(e.to);
      }
    }
  }
  return reachable;
}

}  // namespace rebal::detail
