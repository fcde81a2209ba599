#pragma once

#include <cstddef>
#include <vector>

namespace icdpipe {

/// Strong connectivity of a directed graph on n nodes given an edge
/// predicate. Forward and reverse reachability from node 0; n is small
/// everywhere this is used.
template <typename HasEdge>
bool strongly_connected(std::size_t n, HasEdge&& has_edge) {
  if (n <= 1) return true;
  auto reach = [&](bool reversed) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        if (seen[v]) continue;
        bool edge = reversed ? has_edge(v, u) : has_edge(u, v);
        if (edge) {
          seen[v] = true;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reach(false) && reach(true);
}

}  // namespace icdpipe
