#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/block.hpp"
#include "lcalab/errors.hpp"
#include "lcalab/params.hpp"
#include "lcalab/rational.hpp"

namespace lcalab {

struct TableEntry {
  BlockLabel target;
  Rational weight;
};

/// Per-source categorical neighbor-type distribution, in expected-neighbor
/// units: weights of a non-S row sum to d' = d(1 + eps^3) + s.
struct TransitionTable {
  World world = World::yes;
  Variant variant = Variant::full_hierarchy;
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::uint32_t s = 0;
  Rational d_prime;
  std::map<BlockLabel, std::vector<TableEntry>> rows;
  /// Entries that were clamped to zero because the regime made them negative.
  std::vector<std::string> adjustments;

  bool has_row(const BlockLabel& from) const { return rows.count(from.whole()) != 0; }

  const std::vector<TableEntry>& row(const BlockLabel& from) const {
    auto it = rows.find(from.whole());
    if (it == rows.end()) throw InputError("table has no row " + from.name());
    return it->second;
  }

  Rational weight(const BlockLabel& from, const BlockLabel& to) const {
    auto it = rows.find(from.whole());
    if (it == rows.end()) return 0;
    for (const auto& e : it->second)
      if (e.target == to.whole()) return e.weight;
    return 0;
  }
};

struct TableOptions {
  /// Raise NegativeWeight instead of clamping out-of-regime entries.
  bool strict = false;
};

namespace detail {

class RowBuilder {
 public:
  void add(const BlockLabel& to, const Rational& w) {
    for (auto& e : entries_) {
      if (e.target == to) {
        e.weight += w;
        return;
      }
    }
    entries_.push_back({to, w});
  }
  std::vector<TableEntry> take() {
    std::sort(entries_.begin(), entries_.end(),
              [](const TableEntry& a, const TableEntry& b) { return a.target < b.target; });
    return std::move(entries_);
  }

 private:
  std::vector<TableEntry> entries_;
};

inline std::map<BlockLabel, std::vector<TableEntry>> full_rows(const ConstructionParams& p,
                                                               const TableOptions& opt,
                                                               std::vector<std::string>& notes) {
  const int K = static_cast<int>(p.k);
  const Rational eps(1, p.k);
  const Rational e2 = eps * eps;
  const Rational e3 = e2 * eps;
  const Rational e4 = e2 * e2;
  const Rational d(p.d);
  const Rational s(p.s);

  std::map<BlockLabel, std::vector<TableEntry>> rows;

  for (int j = 1; j <= 2; ++j) {
    RowBuilder srow;
    srow.add(BlockLabel::B(1, j), s);
    rows[BlockLabel::S(j)] = srow.take();

    // B^j_1
    {
      RowBuilder r;
      r.add(BlockLabel::S(j), s);
      r.add(BlockLabel::A(1, j), d);
      r.add(BlockLabel::D(1), e3 * d);
      rows[BlockLabel::B(1, j)] = r.take();
    }
    // B^j_i, 1 < i < K
    for (int i = 2; i < K; ++i) {
      RowBuilder r;
      r.add(BlockLabel::A(i - 1, j), s);
      r.add(BlockLabel::A(i, j), d);
      r.add(BlockLabel::D(i), Rational(K - i + 1) * e4 * d);
      for (int l = 1; l < i; ++l) r.add(BlockLabel::D(l), e4 * d);
      rows[BlockLabel::B(i, j)] = r.take();
    }
    // A^j_i, 1 <= i < K
    for (int i = 1; i < K; ++i) {
      RowBuilder r;
      r.add(BlockLabel::B(i + 1, j), s);
      r.add(BlockLabel::B(i, j), d);
      r.add(BlockLabel::D(i), Rational(K - i + 1) * e4 * d);
      for (int l = 1; l < i; ++l) r.add(BlockLabel::D(l), e4 * d);
      rows[BlockLabel::A(i, j)] = r.take();
    }

    // Level-K rows differ between the worlds.
    RowBuilder bk;
    RowBuilder ak;
    bk.add(BlockLabel::A(K - 1, j), s);
    if (p.world == World::yes) {
      bk.add(BlockLabel::A(K, j), (1 - e2) * d);
      bk.add(BlockLabel::B(K, 3 - j), e2 * d);
      ak.add(BlockLabel::A(K, 3 - j), s);
      ak.add(BlockLabel::B(K, j), d);
    } else {
      Rational cross = e2 * (d + s) - s;
      Rational to_a = (1 - e2) * (d + s);
      if (cross < 0) {
        if (opt.strict)
          throw NegativeWeight("NO-world weight B^" + std::to_string(j) + "_" +
                               std::to_string(K) + " -> B^" + std::to_string(3 - j) + "_" +
                               std::to_string(K) + " is " + to_fraction_string(cross));
        notes.push_back("B^" + std::to_string(j) + "_" + std::to_string(K) +
                        " cross-side weight " + to_fraction_string(cross) +
                        " clamped to 0; deficit moved to A^" + std::to_string(j) + "_" +
                        std::to_string(K));
        to_a += cross;
        cross = 0;
      }
      bk.add(BlockLabel::A(K, j), to_a);
      if (cross > 0) bk.add(BlockLabel::B(K, 3 - j), cross);
      ak.add(BlockLabel::B(K, j), d + s);
    }
    for (int l = 1; l <= K; ++l) {
      bk.add(BlockLabel::D(l), e4 * d);
      ak.add(BlockLabel::D(l), e4 * d);
    }
    rows[BlockLabel::B(K, j)] = bk.take();
    rows[BlockLabel::A(K, j)] = ak.take();
  }

  // Delusive rows (identical in both worlds).
  for (int i = 1; i <= K; ++i) {
    RowBuilder r;
    if (i < K) {
      r.add(BlockLabel::D(i), (1 - 2 * eps + Rational(2 * i) * e2 - Rational(5, 2) * e2 + 3 * e4) *
                                      d +
                                  s);
    } else {
      r.add(BlockLabel::D(i), (1 - Rational(5, 2) * e2 + 3 * e4) * d + s);
    }
    for (int l = 1; l <= K; ++l)
      if (l != i) r.add(BlockLabel::D(l), e4 * d);
    for (int j = 1; j <= 2; ++j) {
      r.add(BlockLabel::A(K, j), (e2 - e4) * d);
      r.add(BlockLabel::B(K, j), e2 * d / 4);
      if (i < K) {
        r.add(BlockLabel::A(i, j), Rational(K - i + 1) * e2 * d / 4);
        r.add(BlockLabel::B(i, j), Rational(K - i + 1) * e2 * d / 4);
        for (int l = i + 1; l < K; ++l) {
          r.add(BlockLabel::A(l, j), e2 * d / 4);
          r.add(BlockLabel::B(l, j), e2 * d / 4);
        }
      }
    }
    rows[BlockLabel::D(i)] = r.take();
  }

  for (auto& [from, entries] : rows) {
    for (const auto& e : entries)
      if (e.weight < 0)
        throw NegativeWeight("weight " + from.name() + " -> " + e.target.name() + " is " +
                             to_fraction_string(e.weight));
    std::erase_if(entries, [](const TableEntry& e) { return e.weight == 0; });
  }
  return rows;
}

inline bool keeps_delusive(Variant v, int level) {
  switch (v) {
    case Variant::core_only:
      return false;
    case Variant::single_delusive:
      return level == 1;
    case Variant::full_hierarchy:
      return true;
  }
  return true;
}

}  // namespace detail

/// Exact neighbor-type table for the given params. Reduced variants drop the
/// delusive blocks they exclude (rows and columns) and rescale each remaining
/// row back to d'.
inline TransitionTable transition_table(const ConstructionParams& p, TableOptions opt = {}) {
  TransitionTable t;
  t.world = p.world;
  t.variant = p.variant;
  t.k = p.k;
  t.d = p.d;
  t.s = p.s;
  t.d_prime = p.d_prime();
  t.rows = detail::full_rows(p, opt, t.adjustments);
  if (p.variant == Variant::full_hierarchy) return t;

  std::map<BlockLabel, std::vector<TableEntry>> kept;
  for (auto& [from, entries] : t.rows) {
    if (from.is_delusive() && !detail::keeps_delusive(p.variant, from.level)) continue;
    std::vector<TableEntry> row;
    for (const auto& e : entries)
      if (!e.target.is_delusive() || detail::keeps_delusive(p.variant, e.target.level))
        row.push_back(e);
    if (from.kind != BlockKind::S) {
      Rational sum = 0;
      for (const auto& e : row) sum += e.weight;
      for (auto& e : row) e.weight = e.weight * t.d_prime / sum;
    }
    kept[from] = std::move(row);
  }
  t.rows = std::move(kept);
  return t;
}

struct RowIssue {
  BlockLabel row;
  Rational residual;  // row sum minus the expected total
  std::string what;
};

struct ValidationReport {
  std::size_t rows_checked = 0;
  std::vector<BlockLabel> s_rows;  // checked for shape only, sum check skipped
  std::vector<RowIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Exact audit: every weight non-negative, every non-S row sums to d', every S
/// row is the single entry (B^j_1, s).
inline ValidationReport validate_table(const TransitionTable& t) {
  ValidationReport rep;
  for (const auto& [from, entries] : t.rows) {
    ++rep.rows_checked;
    for (const auto& e : entries)
      if (e.weight < 0)
        rep.issues.push_back({from, e.weight, "negative weight toward " + e.target.name()});
    if (from.kind == BlockKind::S) {
      rep.s_rows.push_back(from);
      const bool shape = entries.size() == 1 && entries[0].target == BlockLabel::B(1, from.side);
      Rational sum = 0;
      for (const auto& e : entries) sum += e.weight;
      if (!shape) rep.issues.push_back({from, sum - t.s, "S row must be a single B_1 entry"});
      else if (sum != t.s)
        rep.issues.push_back({from, sum - t.s, "S row weight differs from s"});
      continue;
    }
    Rational sum = 0;
    for (const auto& e : entries) sum += e.weight;
    if (sum != t.d_prime) rep.issues.push_back({from, sum - t.d_prime, "row sum differs from d'"});
  }
  return rep;
}

/// Canonical JSON: rows keyed by block name (sorted), weights as "num/den".
inline nlohmann::json to_json(const TransitionTable& t) {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [from, entries] : t.rows) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& e : entries) row[e.target.name()] = to_fraction_string(e.weight);
    rows[from.name()] = row;
  }
  return {{"world", to_string(t.world)},
          {"variant", to_string(t.variant)},
          {"k", t.k},
          {"d", t.d},
          {"s", t.s},
          {"d_prime", to_fraction_string(t.d_prime)},
          {"rows", rows}};
}

inline TransitionTable table_from_json(const nlohmann::json& j) {
  TransitionTable t;
  t.world = parse_world(j.at("world").get<std::string>());
  t.variant = parse_variant(j.at("variant").get<std::string>());
  t.k = j.at("k").get<std::uint32_t>();
  t.d = j.at("d").get<std::uint32_t>();
  t.s = j.at("s").get<std::uint32_t>();
  t.d_prime = parse_fraction(j.at("d_prime").get<std::string>());
  for (const auto& [from, row] : j.at("rows").items()) {
    std::vector<TableEntry> entries;
    for (const auto& [to, w] : row.items())
      entries.push_back({BlockLabel::parse(to), parse_fraction(w.get<std::string>())});
    t.rows[BlockLabel::parse(from)] = std::move(entries);
  }
  return t;
}

}  // namespace lcalab
