#pragma once

// Exhaustive reference implementations shared by the unit tests and the
// acceptance binary. Each one is deliberately naive and independent of the
// library routine it checks.

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "lcalab/bigraphic.hpp"
#include "lcalab/random.hpp"
#include "lcalab/treegame.hpp"

namespace lcalab::testing {

// Brute-force realizability: try every edge subset of the complete bipartite
// graph between |a| and |b| vertices.
inline bool realizable_by_enumeration(const Degrees& a, const Degrees& b) {
  const std::size_t p = a.size(), q = b.size();
  const std::size_t cells = p * q;
  if (cells == 0) {
    for (auto x : a) if (x) return false;
    for (auto x : b) if (x) return false;
    return true;
  }
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cells); ++mask) {
    bool good = true;
    for (std::size_t i = 0; i < p && good; ++i) {
      std::uint32_t deg = 0;
      for (std::size_t j = 0; j < q; ++j) deg += (mask >> (i * q + j)) & 1;
      good = deg == a[i];
    }
    for (std::size_t j = 0; j < q && good; ++j) {
      std::uint32_t deg = 0;
      for (std::size_t i = 0; i < p; ++i) deg += (mask >> (i * q + j)) & 1;
      good = deg == b[j];
    }
    if (good) return true;
  }
  return false;
}

using Edges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Independent oracle: enumerate every subset of edges and keep the largest one
// that is a matching. Only used on graphs with few edges.
inline std::uint32_t max_matching_by_edge_subsets(std::uint32_t n, const Edges& edges) {
  std::uint32_t best = 0;
  const std::size_t m = edges.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    std::uint32_t used = 0, size = 0;
    bool ok = true;
    for (std::size_t e = 0; e < m && ok; ++e) {
      if (!(mask >> e & 1)) continue;
      auto [u, v] = edges[e];
      if ((used >> u & 1) || (used >> v & 1)) ok = false;
      used |= (1u << u) | (1u << v);
      ++size;
    }
    if (ok) best = std::max(best, size);
  }
  (void)n;
  return best;
}

inline Edges random_bipartite(std::uint32_t left, std::uint32_t right, double p, Engine& rng) {
  Edges e;
  for (std::uint32_t u = 0; u < left; ++u)
    for (std::uint32_t v = 0; v < right; ++v)
      if (bernoulli(rng, p)) e.push_back({u, left + v});
  return e;
}

// Sum over every hidden history (label and edge type of each node) of the
// probability of producing the observed S flags. Returns the unnormalized
// root weights for all histories and for the bad-path-free ones.
struct BruteForce {
  std::vector<Rational> all, clean;
};

inline BruteForce enumerate_histories(const GameTree& g) {
  const auto& model = g.model();
  const auto& idx = model.index();
  const auto L = model.size();
  const auto k = g.k();
  BruteForce out{std::vector<Rational>(L, Rational(0)), std::vector<Rational>(L, Rational(0))};
  std::vector<std::size_t> label(g.size());
  std::vector<std::uint32_t> prog(g.size());
  std::vector<bool> mixed(g.size());
  std::size_t root = 0;

  std::function<void(NodeId, const Rational&, bool)> go = [&](NodeId v, const Rational& w, bool bad) {
    if (v == g.size()) {
      out.all[root] += w;
      if (!bad) out.clean[root] += w;
      return;
    }
    const NodeId par = *g.parent(v);
    for (const auto& o : model.outcomes(label[par])) {
      if ((o.to == 0) != g.is_s(v)) continue;
      label[v] = o.to;
      prog[v] = prog[par] + (o.special ? 1 : 0);
      mixed[v] = mixed[par] || GameReferee::mixer_rule(idx.label(o.to), prog[v], k);
      go(v + 1, w * o.p, bad || (!mixed[v] && prog[v] + 1 >= k));
    }
  };
  for (root = 0; root < L; ++root) {
    if (g.root_prior()[root] == 0 || (root == 0) != g.is_s(0)) continue;
    label[0] = root;
    prog[0] = 0;
    mixed[0] = false;
    go(1, g.root_prior()[root], false);
  }
  return out;
}

inline std::vector<Rational> normalized(std::vector<Rational> w) {
  Rational z = 0;
  for (const auto& x : w) z += x;
  for (auto& x : w) x /= z;
  return w;
}

}  // namespace lcalab::testing
