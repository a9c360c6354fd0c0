#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcalab/errors.hpp"
#include "lcalab/instance.hpp"
#include "lcalab/parallel.hpp"
#include "lcalab/rational.hpp"

namespace lcalab {

/// Non-owning CSR view.
struct GraphView {
  std::uint32_t n = 0;
  const std::uint64_t* offsets = nullptr;
  const std::uint32_t* adjacency = nullptr;

  std::span<const std::uint32_t> neighbors(std::uint32_t v) const {
    return {adjacency + offsets[v], adjacency + offsets[v + 1]};
  }
};

/// Small owning undirected graph for tests and tools.
struct Graph {
  std::uint32_t n = 0;
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> adjacency;

  static Graph from_edges(std::uint32_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    Graph g;
    g.n = n;
    std::vector<std::vector<std::uint32_t>> lists(n);
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) throw InputError("edge endpoint out of range");
      lists[u].push_back(v);
      lists[v].push_back(u);
    }
    g.offsets.push_back(0);
    for (auto& l : lists) {
      std::sort(l.begin(), l.end());
      g.adjacency.insert(g.adjacency.end(), l.begin(), l.end());
      g.offsets.push_back(g.adjacency.size());
    }
    return g;
  }
  GraphView view() const { return {n, offsets.data(), adjacency.data()}; }
};

inline GraphView view_of(const Instance& inst) {
  return {inst.n(), inst.offsets.data(), inst.adjacency.data()};
}

/// BFS 2-coloring; raises NotBipartite on an odd cycle.
inline std::vector<std::uint8_t> two_coloring(GraphView g) {
  std::vector<std::uint8_t> color(g.n, 2);
  std::vector<std::uint32_t> queue;
  for (std::uint32_t s = 0; s < g.n; ++s) {
    if (color[s] != 2) continue;
    color[s] = 0;
    queue.assign(1, s);
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const auto u = queue[h];
      for (auto v : g.neighbors(u)) {
        if (color[v] == 2) {
          color[v] = color[u] ^ 1;
          queue.push_back(v);
        } else if (color[v] == color[u]) {
          throw NotBipartite("odd cycle through " + std::to_string(u) + "-" + std::to_string(v));
        }
      }
    }
  }
  return color;
}

inline std::vector<std::uint8_t> label_coloring(const Instance& inst) {
  std::vector<std::uint8_t> color(inst.n());
  for (VertexId v = 0; v < inst.n(); ++v) color[v] = static_cast<std::uint8_t>(color_of(inst.label_of(v)));
  return color;
}

struct MatchingResult {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> matching;  // (color 0, color 1)
  std::uint64_t size = 0;
  std::vector<std::uint32_t> cover;  // ascending
};

namespace detail {

inline constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

/// Checks the certificate; a failure here is a bug in the matcher.
inline void verify_konig(GraphView g, const std::vector<std::uint8_t>& color, const MatchingResult& r) {
  std::vector<std::uint8_t> used(g.n, 0);
  for (auto [u, v] : r.matching) {
    if (used[u] || used[v]) throw std::logic_error("matching reuses a vertex");
    used[u] = used[v] = 1;
    auto nb = g.neighbors(u);
    if (!std::binary_search(nb.begin(), nb.end(), v) && std::find(nb.begin(), nb.end(), v) == nb.end())
      throw std::logic_error("matching edge missing from graph");
  }
  if (r.cover.size() != r.size || r.matching.size() != r.size)
    throw std::logic_error("Konig certificate size differs from matching size");
  std::vector<std::uint8_t> in_cover(g.n, 0);
  for (auto c : r.cover) in_cover[c] = 1;
  for (std::uint32_t u = 0; u < g.n; ++u) {
    if (color[u] != 0) continue;
    for (auto v : g.neighbors(u))
      if (!in_cover[u] && !in_cover[v]) throw std::logic_error("cover misses an edge");
  }
}

}  // namespace detail

/// Maximum bipartite matching with a König vertex cover certificate, which is
/// verified before returning. `color` must be a proper 2-coloring.
inline MatchingResult hopcroft_karp(GraphView g, const std::vector<std::uint8_t>& color) {
  using detail::kNone;
  if (color.size() != g.n) throw InputError("coloring size mismatch");
  for (std::uint32_t u = 0; u < g.n; ++u)
    for (auto v : g.neighbors(u))
      if (color[u] == color[v]) throw NotBipartite("edge inside one color class");

  std::vector<std::uint32_t> left;
  for (std::uint32_t u = 0; u < g.n; ++u)
    if (color[u] == 0) left.push_back(u);

  std::vector<std::uint32_t> mate(g.n, kNone);
  std::vector<std::uint32_t> dist(g.n, kNone);
  std::vector<std::uint64_t> it(g.n);
  std::vector<std::uint32_t> queue;
  queue.reserve(left.size());

  // Cheap greedy start.
  for (auto u : left)
    for (auto v : g.neighbors(u))
      if (mate[v] == kNone) {
        mate[u] = v;
        mate[v] = u;
        break;
      }

  std::vector<std::uint32_t> stack;
  for (;;) {
    // BFS layers over left vertices.
    queue.clear();
    for (auto u : left) {
      if (mate[u] == kNone) {
        dist[u] = 0;
        queue.push_back(u);
      } else {
        dist[u] = kNone;
      }
    }
    bool found = false;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const auto u = queue[h];
      for (auto v : g.neighbors(u)) {
        const auto w = mate[v];
        if (w == kNone) {
          found = true;
        } else if (dist[w] == kNone) {
          dist[w] = dist[u] + 1;
          queue.push_back(w);
        }
      }
    }
    if (!found) break;

    // Iterative DFS along the layering.
    for (auto u : left) it[u] = g.offsets[u];
    for (auto root : left) {
      if (mate[root] != kNone) continue;
      stack.assign(1, root);
      while (!stack.empty()) {
        const auto u = stack.back();
        bool advanced = false;
        while (it[u] < g.offsets[u + 1]) {
          const auto v = g.adjacency[it[u]];
          const auto w = mate[v];
          if (w == kNone) {
            // Augment along the stack.
            std::uint32_t free_v = v;
            for (std::size_t k = stack.size(); k-- > 0;) {
              const auto x = stack[k];
              const auto prev = mate[x];
              mate[x] = free_v;
              mate[free_v] = x;
              free_v = prev;
            }
            stack.clear();
            advanced = true;
            break;
          }
          if (dist[w] == dist[u] + 1) {
            stack.push_back(w);
            advanced = true;
            break;
          }
          ++it[u];
        }
        if (!advanced) {
          dist[u] = kNone;  // dead end for this phase
          stack.pop_back();
          if (!stack.empty()) ++it[stack.back()];
        }
      }
    }
  }

  MatchingResult r;
  for (auto u : left)
    if (mate[u] != kNone) r.matching.push_back({u, mate[u]});
  r.size = r.matching.size();

  // König: Z = vertices reachable from free left vertices by alternating paths.
  std::vector<std::uint8_t> reached(g.n, 0);
  queue.clear();
  for (auto u : left)
    if (mate[u] == kNone) {
      reached[u] = 1;
      queue.push_back(u);
    }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const auto u = queue[h];
    for (auto v : g.neighbors(u)) {
      if (reached[v]) continue;
      reached[v] = 1;
      const auto w = mate[v];
      if (w != kNone && !reached[w]) {
        reached[w] = 1;
        queue.push_back(w);
      }
    }
  }
  for (std::uint32_t v = 0; v < g.n; ++v)
    if ((color[v] == 0 && !reached[v] && mate[v] != kNone) || (color[v] == 1 && reached[v]))
      r.cover.push_back(v);
  detail::verify_konig(g, color, r);
  return r;
}

inline MatchingResult hopcroft_karp(GraphView g) { return hopcroft_karp(g, two_coloring(g)); }
inline MatchingResult hopcroft_karp(const Instance& inst) {
  return hopcroft_karp(view_of(inst), label_coloring(inst));
}

/// Exact maximum matching of a general graph on at most 16 vertices by
/// branching on the lowest unmatched vertex, memoized over used-vertex masks.
inline std::uint32_t brute_force_matching(GraphView g) {
  if (g.n > 16) throw TooLarge("brute_force_matching supports at most 16 vertices");
  std::vector<std::uint16_t> nbr(g.n, 0);
  for (std::uint32_t u = 0; u < g.n; ++u)
    for (auto v : g.neighbors(u))
      if (v != u) nbr[u] |= std::uint16_t(1u << v);
  std::unordered_map<std::uint32_t, std::uint32_t> memo;
  const std::uint32_t full = g.n == 16 ? 0xFFFFu : ((1u << g.n) - 1);
  std::function<std::uint32_t(std::uint32_t)> best = [&](std::uint32_t used) -> std::uint32_t {
    if (used == full) return 0;
    auto hit = memo.find(used);
    if (hit != memo.end()) return hit->second;
    std::uint32_t v = 0;
    while (used >> v & 1) ++v;
    std::uint32_t result = best(used | (1u << v));  // v stays unmatched
    std::uint32_t options = nbr[v] & ~used & full;
    while (options) {
      const std::uint32_t u = __builtin_ctz(options);
      options &= options - 1;
      result = std::max(result, 1 + best(used | (1u << v) | (1u << u)));
    }
    memo.emplace(used, result);
    return result;
  };
  return best(0);
}

/// (2/eps + 1 - 4 eps^2) N/4: YES-world lower bound.
inline Rational yes_matching_bound(const PublicParams& p) {
  const Rational eps(1, p.k);
  return (2 / eps + 1 - 4 * eps * eps) * Rational(p.N) / 4;
}

/// (2/eps + 4 eps) N/4: NO-world upper bound (König cover of the B blocks,
/// A_K and the delusive blocks).
inline Rational no_matching_bound(const PublicParams& p) {
  const Rational eps(1, p.k);
  return (2 / eps + 4 * eps) * Rational(p.N) / 4;
}

struct GapTrial {
  std::uint64_t trial = 0;
  World world = World::yes;
  std::uint64_t seed = 0;
  std::uint64_t mu = 0;
  double bound = 0.0;
  double slack = 0.0;  // YES: mu - bound, NO: bound - mu
  bool within_bound = false;
  std::uint64_t edges = 0;
  std::uint64_t broken = 0;
  double broken_bound = 0.0;
  std::uint32_t extended_repairs = 0;
};

struct GapReport {
  ConstructionParams params;
  std::vector<GapTrial> trials;  // YES trials first, then NO, each by trial index
  double yes_bound = 0.0;
  double no_bound = 0.0;
  std::uint64_t min_yes = 0;
  std::uint64_t max_no = 0;
  std::int64_t observed_gap = 0;  // min_yes - max_no
  std::uint64_t no_violations = 0;
  double yes_near_perfect_fraction = 0.0;  // mu_yes >= 0.98 (2/eps + 1) N/4
};

/// Generates one instance in the given world and measures its maximum matching.
inline GapTrial gap_trial(const ConstructionParams& base, World world, std::uint64_t trial,
                          std::uint64_t master_seed) {
  const auto seed = derive_seed(master_seed, world == World::yes ? "gap-yes" : "gap-no", trial);
  const auto p = base.with_world(world).with_seed(seed);
  const auto inst = assemble_instance(p);
  const auto m = hopcroft_karp(inst);
  GapTrial t;
  t.trial = trial;
  t.world = world;
  t.seed = seed;
  t.mu = m.size;
  const Rational bound = world == World::yes ? yes_matching_bound(p.public_view())
                                             : no_matching_bound(p.public_view());
  t.bound = to_double(bound);
  t.slack = world == World::yes ? double(m.size) - t.bound : t.bound - double(m.size);
  t.within_bound = world == World::yes ? Rational(m.size) >= bound : Rational(m.size) <= bound;
  t.edges = inst.edge_count();
  t.broken = inst.broken.size();
  t.broken_bound = broken_bound(inst);
  t.extended_repairs = inst.extended_repairs;
  return t;
}

/// `trials` YES and `trials` NO instances that differ only in world.
inline GapReport matching_gap_experiment(const ConstructionParams& base, std::uint64_t trials,
                                         std::uint64_t master_seed, unsigned threads = worker_count()) {
  GapReport rep;
  rep.params = base;
  rep.yes_bound = to_double(yes_matching_bound(base.public_view()));
  rep.no_bound = to_double(no_matching_bound(base.public_view()));
  rep.trials = parallel_map<GapTrial>(
      2 * trials,
      [&](std::size_t i) {
        const World w = i < trials ? World::yes : World::no;
        return gap_trial(base, w, i % trials, master_seed);
      },
      threads);

  const double near_perfect = 0.98 * (2.0 * base.k + 1.0) * double(base.N) / 4.0;
  rep.min_yes = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t near = 0, yes_count = 0;
  for (const auto& t : rep.trials) {
    if (t.world == World::yes) {
      rep.min_yes = std::min(rep.min_yes, t.mu);
      near += double(t.mu) >= near_perfect;
      ++yes_count;
    } else {
      rep.max_no = std::max(rep.max_no, t.mu);
      rep.no_violations += !t.within_bound;
    }
  }
  if (yes_count == 0) rep.min_yes = 0;
  rep.observed_gap = std::int64_t(rep.min_yes) - std::int64_t(rep.max_no);
  rep.yes_near_perfect_fraction = yes_count ? double(near) / double(yes_count) : 0.0;
  return rep;
}

}  // namespace lcalab
