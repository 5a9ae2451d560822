#pragma once

// Compression-ratio complexity estimate from an LZ78 incremental parse.
//
// The sequence is parsed into phrases, each phrase being the longest
// dictionary phrase that prefixes the remaining input plus one new bit.
// Every phrase is emitted as (parent index, next bit) and the cost of
// the output is counted in bits:
//
//   * a flag, adaptively coded, telling whether the parent is the most
//     recently created phrase;
//   * otherwise the parent's rank among the phrases that can still be
//     extended, as a truncated-binary code;
//   * the new bit: free when the parent already has one child (only the
//     other branch is left), else adaptively coded with the bit leading
//     into the parent as context.
//
// The final phrase may be a bare dictionary phrase with no new bit.
// ratio = ceil(total bits) / n.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace bellrm {

namespace detail {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i, int delta) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }
  // Sum over [0, i).
  long long prefix(std::size_t i) const {
    long long s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<long long> tree_;
};

// Truncated-binary code length of a value in [0, m).
inline int truncated_binary_bits(std::uint64_t value, std::uint64_t m) {
  if (m <= 1) return 0;
  int k = 63 - __builtin_clzll(m);
  const std::uint64_t u = (std::uint64_t{1} << (k + 1)) - m;
  return value < u ? k : k + 1;
}

// Krichevsky-Trofimov estimate for a binary event.
inline double kt_cost(std::uint64_t hits, std::uint64_t total, bool event) {
  const double p = (static_cast<double>(hits) + 0.5) / (static_cast<double>(total) + 1.0);
  return -std::log2(event ? p : 1.0 - p);
}

}  // namespace detail

struct ParseStats {
  std::uint64_t phrases = 0;
  double cost_bits = 0.0;
};

inline ParseStats lz78_parse_cost(std::span<const std::uint8_t> bits) {
  constexpr std::int32_t kNone = -1;
  const std::size_t n = bits.size();
  std::vector<std::array<std::int32_t, 2>> children;
  std::vector<std::uint8_t> edge;  // bit into the node; 2 for the root
  children.reserve(n + 1);
  edge.reserve(n + 1);
  children.push_back({kNone, kNone});
  edge.push_back(2);

  detail::Fenwick open(n + 1);  // nodes with a free branch
  std::size_t open_count = 1;
  open.add(0, 1);

  std::uint64_t flag_hits = 0, flag_total = 0;
  std::array<std::array<std::uint64_t, 2>, 3> literal{};
  std::size_t last = 0;

  ParseStats stats;
  std::size_t k = 0;
  while (k < n) {
    std::size_t node = 0;
    while (k < n && children[node][bits[k]] != kNone) {
      node = static_cast<std::size_t>(children[node][bits[k]]);
      ++k;
    }
    const bool final_phrase = k >= n;
    const bool is_last = node == last;
    stats.cost_bits += detail::kt_cost(flag_hits, flag_total, is_last);
    flag_hits += is_last ? 1 : 0;
    ++flag_total;

    if (!is_last) {
      std::uint64_t rank = 0, candidates = 0;
      if (final_phrase) {
        rank = node - (last < node ? 1 : 0);
        candidates = children.size() - 1;
      } else {
        const bool last_open = children[last][0] == kNone || children[last][1] == kNone;
        rank = static_cast<std::uint64_t>(open.prefix(node)) - (last_open && last < node ? 1 : 0);
        candidates = open_count - (last_open ? 1 : 0);
      }
      stats.cost_bits += detail::truncated_binary_bits(rank, candidates);
    }

    if (!final_phrase) {
      const std::uint8_t b = bits[k++];
      const bool had_child = children[node][0] != kNone || children[node][1] != kNone;
      if (!had_child) {
        auto& c = literal[edge[node]];
        stats.cost_bits += detail::kt_cost(c[b], c[0] + c[1], true);
        ++c[b];
      } else {
        // Second child fills the node.
        open.add(node, -1);
        --open_count;
      }
      const auto id = static_cast<std::int32_t>(children.size());
      children[node][b] = id;
      children.push_back({kNone, kNone});
      edge.push_back(b);
      open.add(static_cast<std::size_t>(id), 1);
      ++open_count;
      last = static_cast<std::size_t>(id);
    }
    ++stats.phrases;
  }
  return stats;
}

inline constexpr std::size_t kMinCompressionLength = 1000;

// Compressed size over input size. Total for any input; inputs shorter
// than kMinCompressionLength carry no calibration guarantee. Empty input
// gives 0.
inline double compression_ratio(std::span<const std::uint8_t> bits) {
  if (bits.empty()) return 0.0;
  const auto stats = lz78_parse_cost(bits);
  return std::ceil(stats.cost_bits) / static_cast<double>(bits.size());
}

}  // namespace bellrm
