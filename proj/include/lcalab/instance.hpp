#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/bigraphic.hpp"
#include "lcalab/block.hpp"
#include "lcalab/params.hpp"
#include "lcalab/random.hpp"
#include "lcalab/table.hpp"

namespace lcalab {

using VertexId = std::uint32_t;

/// A realized labeled bipartite graph. Labels, world and the broken set are
/// ground truth; attacker code only ever sees an Oracle built on top of this.
struct Instance {
  ConstructionParams params;
  std::vector<BlockLabel> blocks;          // realized blocks in canonical order
  std::vector<VertexId> block_begin;       // blocks.size() + 1 entries
  std::vector<std::uint16_t> block_of;     // per vertex
  std::vector<std::uint64_t> offsets;      // CSR, n + 1 entries
  std::vector<VertexId> adjacency;         // sorted per vertex
  std::vector<VertexId> broken;            // ascending
  std::uint32_t extended_repairs = 0;      // block pairs that needed repair_pair's fallback

  VertexId n() const { return static_cast<VertexId>(block_of.size()); }
  World world() const { return params.world; }
  std::uint64_t edge_count() const { return adjacency.size() / 2; }

  const BlockLabel& label_of(VertexId v) const { return blocks[block_of[v]]; }
  std::uint32_t degree(VertexId v) const {
    return static_cast<std::uint32_t>(offsets[v + 1] - offsets[v]);
  }
  std::span<const VertexId> neighbors(VertexId v) const {
    return {adjacency.data() + offsets[v], adjacency.data() + offsets[v + 1]};
  }
  bool is_broken(VertexId v) const { return std::binary_search(broken.begin(), broken.end(), v); }
  bool has_edge(VertexId u, VertexId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  std::size_t block_index(const BlockLabel& b) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i] == b) return i;
    throw InputError("instance has no block " + b.name());
  }
  std::pair<VertexId, VertexId> block_range(const BlockLabel& b) const {
    auto i = block_index(b);
    return {block_begin[i], block_begin[i + 1]};
  }

  /// Each undirected edge once, as (smaller, larger).
  std::vector<std::pair<VertexId, VertexId>> edges() const {
    std::vector<std::pair<VertexId, VertexId>> out;
    out.reserve(edge_count());
    for (VertexId u = 0; u < n(); ++u)
      for (auto v : neighbors(u))
        if (u < v) out.push_back({u, v});
    return out;
  }

  /// Rebuilds the CSR arrays from an edge list. Duplicates are kept so that
  /// audits can see them.
  void set_edges(const std::vector<std::pair<VertexId, VertexId>>& list) {
    std::vector<std::uint64_t> deg(n() + 1, 0);
    for (auto [u, v] : list) {
      deg[u] += 1;
      deg[v] += 1;
    }
    offsets.assign(n() + 1, 0);
    for (VertexId v = 0; v < n(); ++v) offsets[v + 1] = offsets[v] + deg[v];
    adjacency.assign(offsets[n()], 0);
    std::vector<std::uint64_t> fill(offsets.begin(), offsets.end() - 1);
    for (auto [u, v] : list) {
      adjacency[fill[u]++] = v;
      adjacency[fill[v]++] = u;
    }
    for (VertexId v = 0; v < n(); ++v)
      std::sort(adjacency.begin() + offsets[v], adjacency.begin() + offsets[v + 1]);
  }

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Block a neighbor slot lands in once D parts are resolved: every edge joins
/// the two colors, so the target is the unique realized block of the requested
/// type on the other color.
inline BlockLabel realized_target(const BlockLabel& from, const BlockLabel& target) {
  const int c = color_of(from);
  if (target.is_delusive()) return BlockLabel::D(target.level, c == 0 ? Part::R : Part::L);
  if (from.is_delusive()) {
    BlockLabel t = target;
    t.side = color_of(BlockLabel{t.kind, t.level, 1, Part::None}) != c ? 1 : 2;
    return t;
  }
  return target;
}

/// Per-vertex demands between one color-0 block (`first`) and one color-1
/// block (`second`).
struct DegreeDemand {
  BlockLabel first;
  BlockLabel second;
  Degrees a;  // per vertex of `first`
  Degrees b;  // per vertex of `second`
};

struct DemandDraw {
  std::vector<std::uint32_t> slots;  // per vertex, indexed like Instance
  std::vector<DegreeDemand> pairs;
  std::int64_t parity_vertex = -1;   // vertex that absorbed the parity fix
};

namespace detail {

struct Layout {
  std::vector<BlockLabel> blocks;
  std::vector<VertexId> begin;
  std::vector<std::uint16_t> block_of;
};

inline Layout make_layout(const ConstructionParams& p) {
  Layout L;
  L.blocks = realized_blocks(p.k);
  auto sizes = block_sizes(p);
  L.begin.push_back(0);
  for (const auto& b : L.blocks) L.begin.push_back(L.begin.back() + VertexId(sizes.at(b)));
  L.block_of.resize(L.begin.back());
  for (std::size_t i = 0; i < L.blocks.size(); ++i)
    std::fill(L.block_of.begin() + L.begin[i], L.block_of.begin() + L.begin[i + 1],
              static_cast<std::uint16_t>(i));
  return L;
}

}  // namespace detail

/// Samples every vertex's slot count and the block type of each slot, and
/// aggregates the counts into per-block-pair demand sequences.
template <class Rng>
DemandDraw draw_degree_demands(const ConstructionParams& p, const TransitionTable& table,
                               Rng& rng) {
  const auto L = detail::make_layout(p);
  const std::size_t nb = L.blocks.size();
  auto index_of = [&](const BlockLabel& b) {
    return std::size_t(std::find(L.blocks.begin(), L.blocks.end(), b) - L.blocks.begin());
  };

  DemandDraw out;
  out.slots.assign(L.block_of.size(), 0);

  // Slot counts: s for S, floor/ceil of d' for everything with a row.
  const Rational dp = table.d_prime;
  const auto lo = static_cast<std::uint32_t>(floor_of(dp));
  const double frac = to_double(dp - Rational(lo));
  std::uint64_t total = 0;
  for (std::size_t bi = 0; bi < nb; ++bi) {
    const auto& b = L.blocks[bi];
    if (!table.has_row(b)) continue;
    for (VertexId v = L.begin[bi]; v < L.begin[bi + 1]; ++v) {
      std::uint32_t c = b.kind == BlockKind::S ? p.s : lo + (frac > 0 && bernoulli(rng, frac));
      out.slots[v] = c;
      total += c;
    }
  }
  if (total % 2 == 1) {
    const auto dk = BlockLabel::D(p.k, Part::L);
    std::size_t bi = table.has_row(dk) ? index_of(dk) : index_of(BlockLabel::A(p.k, 1));
    VertexId v = L.begin[bi];
    out.slots[v] -= 1;
    out.parity_vertex = v;
  }

  // One DegreeDemand per (color-0, color-1) block pair that has any weight.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_index;
  auto pair_for = [&](std::size_t x, std::size_t y) -> std::pair<std::size_t, bool> {
    const bool x_first = color_of(L.blocks[x]) == 0;
    auto key = x_first ? std::make_pair(x, y) : std::make_pair(y, x);
    auto it = pair_index.find(key);
    if (it == pair_index.end()) {
      DegreeDemand dd;
      dd.first = L.blocks[key.first];
      dd.second = L.blocks[key.second];
      dd.a.assign(L.begin[key.first + 1] - L.begin[key.first], 0);
      dd.b.assign(L.begin[key.second + 1] - L.begin[key.second], 0);
      out.pairs.push_back(std::move(dd));
      it = pair_index.emplace(key, out.pairs.size() - 1).first;
    }
    return {it->second, x_first};
  };

  std::vector<std::size_t> targets;
  std::vector<double> weights;
  std::vector<std::uint32_t> counts;
  for (std::size_t bi = 0; bi < nb; ++bi) {
    const auto& from = L.blocks[bi];
    if (!table.has_row(from)) continue;
    targets.clear();
    weights.clear();
    for (const auto& e : table.row(from)) {
      std::size_t t = index_of(realized_target(from, e.target));
      auto pos = std::find(targets.begin(), targets.end(), t);
      if (pos == targets.end()) {
        targets.push_back(t);
        weights.push_back(to_double(e.weight));
      } else {
        weights[pos - targets.begin()] += to_double(e.weight);
      }
    }
    const auto cdf = cumulative(weights);
    std::vector<std::pair<std::size_t, bool>> sinks;
    for (auto t : targets) sinks.push_back(pair_for(bi, t));

    for (VertexId v = L.begin[bi]; v < L.begin[bi + 1]; ++v) {
      counts.assign(targets.size(), 0);
      for (std::uint32_t c = 0; c < out.slots[v]; ++c) counts[sample_cdf(rng, cdf)] += 1;
      for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        auto& dd = out.pairs[sinks[ti].first];
        (sinks[ti].second ? dd.a : dd.b)[v - L.begin[bi]] = counts[ti];
      }
    }
  }
  return out;
}

struct AssembleOptions {
  /// Fall back to two-sided repair when the one-sided repair leaves a block
  /// pair unrealizable (only happens when blocks are tiny). Counted in
  /// Instance::extended_repairs. When false, InfeasibleAfterRepair propagates.
  bool extended_repair = true;
};

/// Generates one instance. Fully determined by params (including the seed).
inline Instance assemble_instance(const ConstructionParams& p, AssembleOptions opt = {}) {
  const auto table = transition_table(p);
  const auto L = detail::make_layout(p);

  Instance inst;
  inst.params = p;
  inst.blocks = L.blocks;
  inst.block_begin = L.begin;
  inst.block_of = L.block_of;

  auto demand_rng = make_engine(derive_seed(p.seed, "demands"));
  auto draw = draw_degree_demands(p, table, demand_rng);

  std::vector<std::pair<VertexId, VertexId>> all;
  for (const auto& dd : draw.pairs) {
    const VertexId base_a = L.begin[std::find(L.blocks.begin(), L.blocks.end(), dd.first) -
                                    L.blocks.begin()];
    const VertexId base_b = L.begin[std::find(L.blocks.begin(), L.blocks.end(), dd.second) -
                                    L.blocks.begin()];
    // A vertex cannot have more neighbors in a block than the block has
    // vertices; the excess is dropped here and the vertex ends up broken.
    Degrees a = dd.a;
    Degrees b = dd.b;
    for (auto& x : a) x = std::min<std::uint32_t>(x, std::uint32_t(b.size()));
    for (auto& x : b) x = std::min<std::uint32_t>(x, std::uint32_t(a.size()));
    try {
      auto fixed = repair_pair(a, b, opt.extended_repair);
      a = std::move(fixed.a);
      b = std::move(fixed.b);
      inst.extended_repairs += fixed.extended;
    } catch (const InfeasibleAfterRepair& e) {
      throw InfeasibleAfterRepair(std::string(e.what()) + " for block pair " + dd.first.name() +
                                  " / " + dd.second.name());
    }
    auto rng = make_engine(derive_seed(p.seed, "pair:" + dd.first.name() + "|" + dd.second.name()));
    for (auto [i, j] : realize_bipartite(a, b, rng)) all.push_back({base_a + i, base_b + j});
  }
  inst.set_edges(all);

  for (VertexId v = 0; v < inst.n(); ++v)
    if (inst.degree(v) != draw.slots[v] || std::int64_t(v) == draw.parity_vertex)
      inst.broken.push_back(v);
  return inst;
}

struct AuditOptions {
  double broken_constant = 12.0;
};

struct AuditReport {
  std::uint64_t n = 0;
  std::uint64_t edges = 0;
  std::uint64_t broken = 0;
  double broken_bound = 0.0;
  std::uint32_t extended_repairs = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& needle) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
  }
};

inline double broken_bound(const Instance& inst, double constant = 12.0) {
  const double n = inst.n();
  return constant * std::sqrt(n * to_double(inst.params.d_prime())) * std::log(n);
}

/// Structural checks on an instance. Reports every violation found; never throws.
inline AuditReport audit_instance(const Instance& inst, AuditOptions opt = {}) {
  AuditReport rep;
  rep.n = inst.n();
  rep.edges = inst.edge_count();
  rep.broken = inst.broken.size();
  rep.broken_bound = broken_bound(inst, opt.broken_constant);
  rep.extended_repairs = inst.extended_repairs;
  auto& bad = rep.violations;

  TransitionTable table;
  try {
    table = transition_table(inst.params);
  } catch (const Error& e) {
    bad.push_back(std::string("table: ") + e.what());
    return rep;
  }
  const auto lo = static_cast<std::uint32_t>(floor_of(table.d_prime));
  const std::uint32_t hi = inst.params.public_view().max_degree();

  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> pair_edges;
  for (VertexId u = 0; u < inst.n(); ++u) {
    auto nb = inst.neighbors(u);
    const auto& lu = inst.label_of(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const VertexId v = nb[i];
      if (v == u) bad.push_back("self-loop at " + std::to_string(u));
      if (i > 0 && nb[i - 1] == v && u < v)
        bad.push_back("multi-edge " + std::to_string(u) + "-" + std::to_string(v));
      if (v >= inst.n()) {
        bad.push_back("neighbor out of range at " + std::to_string(u));
        continue;
      }
      if (!inst.has_edge(v, u))
        bad.push_back("asymmetric adjacency " + std::to_string(u) + "-" + std::to_string(v));
      if (u > v) continue;
      const auto& lv = inst.label_of(v);
      if (color_of(lu) == color_of(lv))
        bad.push_back("not bipartite: " + std::to_string(u) + "-" + std::to_string(v));
      bool legal = table.weight(lu, lv) > 0 && table.weight(lv, lu) > 0 &&
                   realized_target(lu, lv.whole()) == lv && realized_target(lv, lu.whole()) == lu;
      if (!legal)
        bad.push_back("illegal block pair " + lu.name() + " - " + lv.name() + " at " +
                      std::to_string(u) + "-" + std::to_string(v));
      pair_edges[{inst.block_of[u], inst.block_of[v]}] += 1;
    }
  }

  for (VertexId v = 0; v < inst.n(); ++v) {
    const auto& b = inst.label_of(v);
    const auto deg = inst.degree(v);
    const bool active = table.has_row(b);
    const std::uint32_t cap = !active ? 0 : b.kind == BlockKind::S ? inst.params.s : hi;
    if (deg > cap)
      bad.push_back("degree " + std::to_string(deg) + " above " + std::to_string(cap) + " at " +
                    std::to_string(v));
    if (active && !inst.is_broken(v)) {
      const bool fits = b.kind == BlockKind::S ? deg == inst.params.s : deg >= lo && deg <= hi;
      if (!fits)
        bad.push_back("unbroken vertex " + std::to_string(v) + " has degree " +
                      std::to_string(deg));
    }
  }

  if (double(rep.broken) > rep.broken_bound)
    bad.push_back("broken set " + std::to_string(rep.broken) + " exceeds bound " +
                  std::to_string(rep.broken_bound));

  // Edge counts per block pair can only fall below the sampled expectation
  // (repair and capping remove slots), so check the upper tail.
  const double ln_n = std::log(std::max<double>(inst.n(), 2));
  for (const auto& [key, count] : pair_edges) {
    const auto& x = inst.blocks[key.first];
    const auto& y = inst.blocks[key.second];
    double ex = 0.0;
    for (const auto& e : table.row(x))
      if (realized_target(x, e.target) == y) ex += to_double(e.weight);
    ex *= double(inst.block_begin[key.first + 1] - inst.block_begin[key.first]);
    double ey = 0.0;
    for (const auto& e : table.row(y))
      if (realized_target(y, e.target) == x) ey += to_double(e.weight);
    ey *= double(inst.block_begin[key.second + 1] - inst.block_begin[key.second]);
    const double mean = std::min(ex, ey);
    if (double(count) > mean + 4.0 * std::sqrt(mean * ln_n) + 4.0 * ln_n)
      bad.push_back("degree concentration: " + x.name() + " - " + y.name() + " has " +
                    std::to_string(count) + " edges, expected about " + std::to_string(mean));
  }
  return rep;
}

inline nlohmann::json to_json(const AuditReport& r) {
  return {{"n", r.n},
          {"edges", r.edges},
          {"broken", r.broken},
          {"broken_bound", r.broken_bound},
          {"extended_repairs", r.extended_repairs},
          {"ok", r.ok()},
          {"violations", r.violations}};
}

}  // namespace lcalab
