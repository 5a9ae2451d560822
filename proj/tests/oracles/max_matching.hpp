#pragma once

// Maximum-cardinality bipartite matching (Kuhn's augmenting paths) between
// two event lists, an edge joining events at most `window` ns apart.
// Quadratic; meant for small streams only.

#include <bellrm/events.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

inline std::size_t max_matching(const std::vector<bellrm::DetectionEvent>& a,
                                const std::vector<bellrm::DetectionEvent>& b, std::uint64_t window) {
  std::vector<std::vector<std::size_t>> adj(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto ta = a[i].timestamp_ns, tb = b[j].timestamp_ns;
      if ((ta > tb ? ta - tb : tb - ta) <= window) adj[i].push_back(j);
    }
  }
  std::vector<long> match_b(b.size(), -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (auto j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (match_b[j] < 0 || augment(static_cast<std::size_t>(match_b[j]))) {
        match_b[j] = static_cast<long>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t size = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    seen.assign(b.size(), 0);
    if (augment(i)) ++size;
  }
  return size;
}

}  // namespace oracle
