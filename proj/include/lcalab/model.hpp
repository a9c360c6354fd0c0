#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "lcalab/block.hpp"
#include "lcalab/params.hpp"
#include "lcalab/rational.hpp"
#include "lcalab/table.hpp"

namespace lcalab {

/// Block type with the side forgotten: S, A_i, B_i or D_i.
struct GameLabel {
  BlockKind kind = BlockKind::S;
  std::uint8_t level = 0;

  static constexpr GameLabel S() { return {BlockKind::S, 0}; }
  static constexpr GameLabel A(int i) { return {BlockKind::A, static_cast<std::uint8_t>(i)}; }
  static constexpr GameLabel B(int i) { return {BlockKind::B, static_cast<std::uint8_t>(i)}; }
  static constexpr GameLabel D(int i) { return {BlockKind::D, static_cast<std::uint8_t>(i)}; }
  static constexpr GameLabel of(const BlockLabel& b) { return {b.kind, b.level}; }

  friend constexpr auto operator<=>(const GameLabel&, const GameLabel&) = default;

  std::string name() const {
    switch (kind) {
      case BlockKind::S:
        return "S";
      case BlockKind::A:
        return "A_" + std::to_string(level);
      case BlockKind::B:
        return "B_" + std::to_string(level);
      case BlockKind::D:
        return "D_" + std::to_string(level);
    }
    return "?";
  }
};

/// Dense indexing of the 3k+1 game labels: S, A_1..A_k, B_1..B_k, D_1..D_k.
struct LabelIndex {
  std::uint32_t k = 0;

  std::size_t size() const { return 3 * std::size_t(k) + 1; }
  std::size_t operator()(const GameLabel& g) const {
    switch (g.kind) {
      case BlockKind::S:
        return 0;
      case BlockKind::A:
        return g.level;
      case BlockKind::B:
        return k + g.level;
      case BlockKind::D:
        return 2 * std::size_t(k) + g.level;
    }
    return 0;
  }
  GameLabel label(std::size_t i) const {
    if (i == 0) return GameLabel::S();
    if (i <= k) return GameLabel::A(int(i));
    if (i <= 2 * k) return GameLabel::B(int(i - k));
    return GameLabel::D(int(i - 2 * k));
  }
};

/// Row-stochastic matrix over game labels with exact entries. Rows of labels
/// absent from the table are all zero.
struct CollapsedRows {
  LabelIndex index;
  std::vector<std::vector<Rational>> p;  // p[from][to]

  bool has_row(std::size_t from) const {
    for (const auto& x : p[from])
      if (x != 0) return true;
    return false;
  }
};

/// Collapses sides: a side-1 source row (D rows as is) with its targets summed
/// per game label, normalized by the row total.
inline CollapsedRows collapse(const TransitionTable& t) {
  CollapsedRows out;
  out.index = {t.k};
  const auto L = out.index.size();
  out.p.assign(L, std::vector<Rational>(L, Rational(0)));
  for (std::size_t i = 0; i < L; ++i) {
    const GameLabel g = out.index.label(i);
    BlockLabel src;
    switch (g.kind) {
      case BlockKind::S:
        src = BlockLabel::S(1);
        break;
      case BlockKind::A:
        src = BlockLabel::A(g.level, 1);
        break;
      case BlockKind::B:
        src = BlockLabel::B(g.level, 1);
        break;
      case BlockKind::D:
        src = BlockLabel::D(g.level);
        break;
    }
    if (!t.has_row(src)) continue;
    Rational total = 0;
    for (const auto& e : t.row(src)) total += e.weight;
    for (const auto& e : t.row(src)) out.p[i][out.index(GameLabel::of(e.target))] += e.weight / total;
  }
  return out;
}

inline std::vector<std::vector<double>> to_double(const CollapsedRows& r) {
  std::vector<std::vector<double>> out(r.p.size());
  for (std::size_t i = 0; i < r.p.size(); ++i)
    for (const auto& x : r.p[i]) out[i].push_back(lcalab::to_double(x));
  return out;
}

/// The chain an attacker can compute from public information alone: the
/// average of the YES and NO collapsed rows of the variant.
inline std::vector<std::vector<double>> public_chain(const PublicParams& pp) {
  ConstructionParams p{pp.N, pp.k, pp.d, pp.s, pp.variant, World::yes, 0};
  auto yes = to_double(collapse(transition_table(p)));
  auto no = to_double(collapse(transition_table(p.with_world(World::no))));
  for (std::size_t i = 0; i < yes.size(); ++i)
    for (std::size_t j = 0; j < yes[i].size(); ++j) yes[i][j] = 0.5 * (yes[i][j] + no[i][j]);
  return yes;
}

/// Expected vertex count per game label (both sides together).
inline std::vector<double> label_sizes(const PublicParams& p) {
  LabelIndex idx{p.k};
  std::vector<double> out(idx.size(), 0.0);
  for (const auto& [b, size] : block_sizes(p).sizes) out[idx(GameLabel::of(b))] += double(size);
  return out;
}

/// First-passage distribution into S for a label chain in which the walker
/// refuses to step into `avoid` labels (rows renormalized without them).
/// pmf[x][t] = Pr[T = t | start x] for t <= horizon; survival[x] = Pr[T > horizon].
struct HittingTable {
  std::size_t horizon = 0;
  std::vector<std::vector<double>> pmf;
  std::vector<double> survival;

  double prob(std::size_t start, std::size_t t) const {
    return t <= horizon ? pmf[start][t] : 0.0;
  }
};

inline HittingTable hitting_table(std::vector<std::vector<double>> P, const std::vector<bool>& avoid,
                                  std::size_t horizon) {
  const std::size_t L = P.size();
  for (std::size_t x = 0; x < L; ++x) {
    double keep = 0.0;
    for (std::size_t y = 0; y < L; ++y) {
      if (avoid[y]) P[x][y] = 0.0;
      keep += P[x][y];
    }
    if (keep > 0)
      for (auto& v : P[x]) v /= keep;
  }
  HittingTable h;
  h.horizon = horizon;
  h.pmf.assign(L, std::vector<double>(horizon + 1, 0.0));
  std::vector<double> u(L, 1.0), next(L);
  u[0] = 0.0;
  h.pmf[0][0] = 1.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    for (std::size_t x = 1; x < L; ++x) {
      double acc = 0.0;
      for (std::size_t y = 1; y < L; ++y) acc += P[x][y] * u[y];
      next[x] = acc;
    }
    next[0] = 0.0;
    for (std::size_t x = 1; x < L; ++x) h.pmf[x][t] = std::max(0.0, u[x] - next[x]);
    u.swap(next);
  }
  h.survival = u;
  return h;
}

}  // namespace lcalab
