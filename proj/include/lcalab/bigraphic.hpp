#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lcalab/errors.hpp"
#include "lcalab/random.hpp"

namespace lcalab {

using Degrees = std::vector<std::uint32_t>;
using IndexEdge = std::pair<std::uint32_t, std::uint32_t>;

/// Gale-Ryser test. `a` must be non-increasing.
inline bool check_bigraphic(const Degrees& a, const Degrees& b) {
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[i - 1]) throw InputError("check_bigraphic: first sequence is not sorted");
  std::uint64_t sum_a = std::accumulate(a.begin(), a.end(), std::uint64_t{0});
  std::uint64_t sum_b = std::accumulate(b.begin(), b.end(), std::uint64_t{0});
  if (sum_a != sum_b) return false;
  if (a.empty()) return true;

  // at_least[r] = #{j : b_j >= r} for r = 1..|a|
  const std::size_t R = a.size();
  std::vector<std::uint64_t> at_least(R + 2, 0);
  for (auto bj : b) at_least[std::min<std::size_t>(bj, R + 1)] += 1;
  for (std::size_t r = R + 1; r-- > 1;) at_least[r - 1] += at_least[r];

  std::uint64_t lhs = 0;
  std::uint64_t rhs = 0;  // sum_j min(b_j, r)
  for (std::size_t r = 1; r <= R; ++r) {
    lhs += a[r - 1];
    rhs += at_least[r];
    if (lhs > rhs) return false;
  }
  return true;
}

struct RepairOutcome {
  Degrees a_prime;                     // same index order as the input
  std::vector<std::uint32_t> broken;   // ascending indices with a'_i != a_i
  std::uint64_t total_decrement = 0;
};

/// Lowers the current maximum of `a` (smallest index on ties) until the sums
/// agree, then verifies the pair is bigraphic.
inline RepairOutcome repair_degrees(const Degrees& a, const Degrees& b) {
  std::uint64_t sum_a = std::accumulate(a.begin(), a.end(), std::uint64_t{0});
  std::uint64_t sum_b = std::accumulate(b.begin(), b.end(), std::uint64_t{0});
  if (sum_a < sum_b) throw InputError("repair_degrees: caller must pass the larger side first");

  RepairOutcome out;
  out.a_prime = a;
  out.total_decrement = sum_a - sum_b;
  if (out.total_decrement > 0) {
    using Item = std::pair<std::uint32_t, std::uint32_t>;  // (value, index)
    auto cmp = [](const Item& x, const Item& y) {
      return x.first != y.first ? x.first < y.first : x.second > y.second;
    };
    std::priority_queue<Item, std::vector<Item>, decltype(cmp)> heap(cmp);
    for (std::uint32_t i = 0; i < a.size(); ++i)
      if (a[i] > 0) heap.push({a[i], i});
    for (std::uint64_t step = 0; step < out.total_decrement; ++step) {
      auto [value, index] = heap.top();
      heap.pop();
      out.a_prime[index] = value - 1;
      if (value > 1) heap.push({value - 1, index});
    }
  }
  for (std::uint32_t i = 0; i < a.size(); ++i)
    if (out.a_prime[i] != a[i]) out.broken.push_back(i);

  Degrees sorted = out.a_prime;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  if (!check_bigraphic(sorted, b))
    throw InfeasibleAfterRepair("repaired degree pair is not bigraphic");
  return out;
}

struct PairRepair {
  Degrees a;
  Degrees b;
  bool extended = false;  // the one-sided repair was not enough
};

/// Repairs the larger side as in repair_degrees. When `extend` is set and the
/// result is still not bigraphic, keeps lowering the maximum entry of both
/// sides (smallest index first) until it is; otherwise the failure propagates.
inline PairRepair repair_pair(const Degrees& a, const Degrees& b, bool extend) {
  std::uint64_t sum_a = std::accumulate(a.begin(), a.end(), std::uint64_t{0});
  std::uint64_t sum_b = std::accumulate(b.begin(), b.end(), std::uint64_t{0});
  PairRepair out{a, b, false};
  try {
    if (sum_a >= sum_b) {
      out.a = repair_degrees(a, b).a_prime;
    } else {
      out.b = repair_degrees(b, a).a_prime;
    }
    return out;
  } catch (const InfeasibleAfterRepair&) {
    if (!extend) throw;
  }
  // Equalize sums first, then shave both sides in lockstep.
  auto lower_max = [](Degrees& x) {
    auto it = std::max_element(x.begin(), x.end());
    if (it != x.end() && *it > 0) *it -= 1;
  };
  if (sum_a >= sum_b) {
    for (std::uint64_t i = 0; i < sum_a - sum_b; ++i) lower_max(out.a);
  } else {
    for (std::uint64_t i = 0; i < sum_b - sum_a; ++i) lower_max(out.b);
  }
  out.extended = true;
  for (;;) {
    Degrees sorted = out.a;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (check_bigraphic(sorted, out.b)) return out;
    lower_max(out.a);
    lower_max(out.b);
  }
}

namespace detail {

class EdgeMembership {
 public:
  EdgeMembership(std::size_t rows, std::size_t cols) : cols_(cols) {
    if (rows * cols <= (std::size_t{1} << 27)) {
      bits_.assign((rows * cols + 63) / 64, 0);
      dense_ = true;
    }
  }
  bool contains(std::uint32_t u, std::uint32_t v) const {
    if (dense_) {
      std::size_t k = std::size_t(u) * cols_ + v;
      return (bits_[k >> 6] >> (k & 63)) & 1;
    }
    return sparse_.count(key(u, v)) != 0;
  }
  void insert(std::uint32_t u, std::uint32_t v) {
    if (dense_) {
      std::size_t k = std::size_t(u) * cols_ + v;
      bits_[k >> 6] |= std::uint64_t{1} << (k & 63);
    } else {
      sparse_.insert(key(u, v));
    }
  }
  void erase(std::uint32_t u, std::uint32_t v) {
    if (dense_) {
      std::size_t k = std::size_t(u) * cols_ + v;
      bits_[k >> 6] &= ~(std::uint64_t{1} << (k & 63));
    } else {
      sparse_.erase(key(u, v));
    }
  }

 private:
  static std::uint64_t key(std::uint32_t u, std::uint32_t v) {
    return (std::uint64_t(u) << 32) | v;
  }
  std::size_t cols_;
  bool dense_ = false;
  std::vector<std::uint64_t> bits_;
  std::unordered_set<std::uint64_t> sparse_;
};

}  // namespace detail

inline std::uint64_t switch_steps(std::uint64_t m) {
  return static_cast<std::uint64_t>(std::ceil(10.0 * double(m) * std::log(double(m) + 2.0)));
}

/// Havel-Hakimi style construction followed by `switch_steps(m)` random
/// 2-switches. Edges are (index into a, index into b).
template <class Rng>
std::vector<IndexEdge> realize_bipartite(const Degrees& a, const Degrees& b, Rng& rng) {
  std::uint64_t sum_a = std::accumulate(a.begin(), a.end(), std::uint64_t{0});
  std::uint64_t sum_b = std::accumulate(b.begin(), b.end(), std::uint64_t{0});
  if (sum_a != sum_b) throw RealizationError("realize_bipartite: degree sums differ");

  // Remaining b-degrees kept sorted non-increasing together with their owners.
  std::vector<std::uint32_t> order(b.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t x, std::uint32_t y) { return b[x] > b[y]; });
  std::vector<std::uint32_t> rem(b.size());
  for (std::size_t p = 0; p < order.size(); ++p) rem[p] = b[order[p]];

  std::vector<IndexEdge> edges;
  edges.reserve(sum_a);
  for (std::uint32_t i = 0; i < a.size(); ++i) {
    const std::uint32_t need = a[i];
    if (need == 0) continue;
    if (need > rem.size() || rem[need - 1] == 0)
      throw RealizationError("realize_bipartite: greedy construction stalled");
    // Decrement the `need` largest entries; inside the tie run that straddles
    // the cut, take its tail so the array stays sorted.
    const std::uint32_t pivot = rem[need - 1];
    auto first = std::size_t(std::lower_bound(rem.begin(), rem.end(), pivot, std::greater<>()) -
                             rem.begin());
    auto last = std::size_t(std::upper_bound(rem.begin(), rem.end(), pivot, std::greater<>()) -
                            rem.begin());
    for (std::size_t p = 0; p < first; ++p) {
      rem[p] -= 1;
      edges.push_back({i, order[p]});
    }
    for (std::size_t p = last - (need - first); p < last; ++p) {
      rem[p] -= 1;
      edges.push_back({i, order[p]});
    }
  }

  const std::size_t m = edges.size();
  if (m < 2) return edges;
  detail::EdgeMembership present(a.size(), b.size());
  for (auto [u, v] : edges) present.insert(u, v);
  const std::uint64_t steps = switch_steps(m);
  for (std::uint64_t t = 0; t < steps; ++t) {
    std::size_t e = uniform_below(rng, m);
    std::size_t f = uniform_below(rng, m);
    auto [u, v] = edges[e];
    auto [x, y] = edges[f];
    if (u == x || v == y) continue;
    if (present.contains(u, y) || present.contains(x, v)) continue;
    present.erase(u, v);
    present.erase(x, y);
    present.insert(u, y);
    present.insert(x, v);
    edges[e] = {u, y};
    edges[f] = {x, v};
  }
  return edges;
}

}  // namespace lcalab
