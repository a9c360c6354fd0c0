#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcalab/matching.hpp"
#include "lcalab/model.hpp"
#include "lcalab/oracle.hpp"
#include "lcalab/parallel.hpp"
#include "lcalab/random.hpp"
#include "lcalab/stats.hpp"

namespace lcalab {

/// Attacker-side memory for per-vertex tests. Answers are stable for a fixed
/// oracle, so remembering them is free of charge and honest.
struct ProbeCache {
  std::unordered_map<PublicId, bool> is_s;
  std::unordered_map<PublicId, bool> is_b1;
  std::unordered_map<PublicId, bool> is_d1;
};

/// One query: only S vertices have degree at most s.
inline bool probe_s(Oracle& o, PublicId id, ProbeCache* cache = nullptr) {
  if (cache) {
    auto it = cache->is_s.find(id);
    if (it != cache->is_s.end()) return it->second;
  }
  const bool s = !o.query(id, o.s() + 1).has_value();
  if (cache) cache->is_s.emplace(id, s);
  return s;
}

/// Scans the neighbor list and reports whether some neighbor probes as S.
inline bool b1_test(Oracle& o, PublicId id, ProbeCache* cache = nullptr) {
  if (cache) {
    auto it = cache->is_b1.find(id);
    if (it != cache->is_b1.end()) return it->second;
  }
  bool found = false;
  const auto top = o.max_degree();
  for (std::uint32_t i = 1; i <= top && !found; ++i) {
    auto nb = o.query(id, i);
    if (!nb) break;
    found = probe_s(o, *nb, cache);
  }
  if (cache) cache->is_b1.emplace(id, found);
  return found;
}

/// Uniform neighbor by rejection over indices 1..max_degree; nullopt when
/// `tries` draws all came back Bottom (or were refused by `accept`).
template <class Rng>
std::optional<PublicId> random_neighbor(Oracle& o, PublicId id, Rng& rng, std::uint32_t tries,
                                        const std::function<bool(PublicId)>& accept = {}) {
  const auto top = o.max_degree();
  for (std::uint32_t t = 0; t < tries; ++t) {
    auto nb = o.query(id, 1 + static_cast<std::uint32_t>(uniform_below(rng, top)));
    if (nb && (!accept || accept(*nb))) return nb;
  }
  return std::nullopt;
}

/// Thresholds for d1_test derived from the public chain: the fraction of a
/// vertex's neighbors that lie in B_1, per label.
struct D1Thresholds {
  bool enabled = false;  // false when the variant has no D_1 block
  double d1_fraction = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

inline D1Thresholds d1_thresholds(const PublicParams& p) {
  D1Thresholds th;
  const auto P = public_chain(p);
  LabelIndex idx{p.k};
  const auto d1 = idx(GameLabel::D(1));
  const auto b1 = idx(GameLabel::B(1));
  double row_sum = 0.0;
  for (double x : P[d1]) row_sum += x;
  if (row_sum == 0.0) return th;
  th.enabled = true;
  th.d1_fraction = P[d1][b1];
  double below = 0.0, above = 1.0;
  for (std::size_t x = 0; x < P.size(); ++x) {
    if (x == d1) continue;
    const double q = P[x][b1];
    if (q < th.d1_fraction) below = std::max(below, q);
    if (q > th.d1_fraction) above = std::min(above, q);
  }
  th.lower = 0.5 * (below + th.d1_fraction);
  th.upper = 0.5 * (above + th.d1_fraction);
  return th;
}

inline std::uint32_t default_d1_samples(const PublicParams& p) {
  return static_cast<std::uint32_t>(std::ceil(64.0 * std::log(double(p.n()))));
}

/// Samples random neighbors, applies b1_test to each and reports D_1 when the
/// B_1 fraction falls between the two thresholds around D_1's own fraction.
template <class Rng>
bool d1_test(Oracle& o, PublicId id, std::uint32_t samples, Rng& rng, const D1Thresholds& th,
             ProbeCache* cache = nullptr) {
  if (samples == 0 || !th.enabled) return false;
  if (cache) {
    auto it = cache->is_d1.find(id);
    if (it != cache->is_d1.end()) return it->second;
  }
  std::uint32_t hits = 0, seen = 0;
  for (std::uint32_t t = 0; t < samples; ++t) {
    auto nb = random_neighbor(o, id, rng, 8);
    if (!nb) continue;
    ++seen;
    hits += b1_test(o, *nb, cache);
  }
  const double f = seen ? double(hits) / double(seen) : 0.0;
  const bool d1 = seen > 0 && f > th.lower && f < th.upper;
  if (cache) cache->is_d1.emplace(id, d1);
  return d1;
}

/// Same question as d1_test, but stops sampling once a likelihood ratio
/// against every other B_1-fraction on the public chain settles the answer
/// at odds `odds`. `max_samples` caps the work at the fixed-sample cost.
template <class Rng>
bool d1_test_sequential(Oracle& o, PublicId id, std::uint32_t max_samples, Rng& rng,
                        const D1Thresholds& th, const std::vector<double>& alternatives, double odds,
                        ProbeCache* cache = nullptr) {
  if (max_samples == 0 || !th.enabled) return false;
  if (cache) {
    auto it = cache->is_d1.find(id);
    if (it != cache->is_d1.end()) return it->second;
  }
  const double log_odds = std::log(odds);
  const double f = th.d1_fraction;
  // llr[a] = log Pr[data | D_1] - log Pr[data | alternative a]
  std::vector<double> llr(alternatives.size(), 0.0);
  std::uint32_t hits = 0, seen = 0;
  std::optional<bool> verdict;
  for (std::uint32_t t = 0; t < max_samples && !verdict; ++t) {
    auto nb = random_neighbor(o, id, rng, 8);
    if (!nb) continue;
    ++seen;
    const bool h = b1_test(o, *nb, cache);
    hits += h;
    bool all_beaten = true;
    for (std::size_t a = 0; a < alternatives.size(); ++a) {
      const double q = alternatives[a];
      const double pd = h ? f : 1.0 - f;
      const double pa = h ? q : 1.0 - q;
      llr[a] += std::log(std::max(pd, 1e-300)) - std::log(std::max(pa, 1e-300));
      if (llr[a] < -log_odds) verdict = false;
      if (llr[a] < log_odds) all_beaten = false;
    }
    if (!verdict && all_beaten) verdict = true;
  }
  if (!verdict) {
    const double fr = seen ? double(hits) / double(seen) : 0.0;
    verdict = seen > 0 && fr > th.lower && fr < th.upper;
  }
  if (cache) cache->is_d1.emplace(id, *verdict);
  return *verdict;
}

/// Distinct B_1-fractions of the labels other than D_1 and S on the public chain.
inline std::vector<double> d1_alternatives(const PublicParams& p) {
  const auto P = public_chain(p);
  LabelIndex idx{p.k};
  const auto d1 = idx(GameLabel::D(1));
  const auto b1 = idx(GameLabel::B(1));
  std::vector<double> out;
  for (std::size_t x = 1; x < P.size(); ++x) {
    if (x == d1) continue;
    double row = 0.0;
    for (double v : P[x]) row += v;
    if (row == 0.0) continue;
    const double q = P[x][b1];
    if (std::none_of(out.begin(), out.end(), [&](double y) { return std::abs(y - q) < 1e-12; }))
      out.push_back(q);
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <class Rng>
bool d1_test(Oracle& o, PublicId id, std::uint32_t samples, Rng& rng) {
  return d1_test(o, id, samples, rng, d1_thresholds(o.public_params()));
}

struct WalkOptions {
  /// Candidate next vertices for which this returns true are refused.
  std::function<bool(PublicId)> avoid;
  std::function<void(PublicId)> on_visit;
  ProbeCache* cache = nullptr;
};

/// Walks from `start` until an S vertex is found. Returns the number of steps
/// taken, or nullopt after `max_len` steps or at a dead end. `steps` tracks
/// progress so a caller catching BudgetExhausted knows how far it got.
template <class Rng>
std::optional<std::uint32_t> walk_once(Oracle& o, PublicId start, std::uint32_t max_len, Rng& rng,
                                       const WalkOptions& opt, std::uint32_t& steps) {
  steps = 0;
  PublicId cur = start;
  const std::uint32_t tries = 4 * o.max_degree();
  std::function<bool(PublicId)> accept;
  if (opt.avoid) accept = [&](PublicId x) { return !opt.avoid(x); };
  for (;;) {
    if (opt.on_visit) opt.on_visit(cur);
    if (probe_s(o, cur, opt.cache)) return steps;
    if (steps == max_len) return std::nullopt;
    auto next = random_neighbor(o, cur, rng, tries, accept);
    if (!next) return std::nullopt;
    cur = *next;
    ++steps;
  }
}

struct HittingProfile {
  std::vector<std::uint64_t> counts;  // counts[t] = walks that hit S after t steps
  std::uint64_t timeouts = 0;
  std::uint64_t walks = 0;
  std::uint64_t queries_used = 0;

  double mean_hit() const {
    double s = 0.0, c = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
      s += double(t) * double(counts[t]);
      c += double(counts[t]);
    }
    return c > 0 ? s / c : 0.0;
  }
  std::vector<double> samples() const {
    std::vector<double> out;
    for (std::size_t t = 0; t < counts.size(); ++t) out.insert(out.end(), counts[t], double(t));
    return out;
  }
};

template <class Rng>
HittingProfile walk_hitting_profile(Oracle& o, PublicId start, std::uint32_t walks,
                                    std::uint32_t max_len, Rng& rng, const WalkOptions& opt = {}) {
  HittingProfile prof;
  prof.counts.assign(std::size_t(max_len) + 1, 0);
  const auto before = o.query_count();
  ProbeCache local;
  WalkOptions use = opt;
  if (!use.cache) use.cache = &local;
  for (std::uint32_t w = 0; w < walks; ++w) {
    std::uint32_t steps = 0;
    auto hit = walk_once(o, start, max_len, rng, use, steps);
    if (hit) {
      prof.counts[*hit] += 1;
    } else {
      prof.timeouts += 1;
    }
    prof.walks += 1;
  }
  prof.queries_used = o.query_count() - before;
  return prof;
}

struct LayerGuess {
  bool unknown = true;
  GameLabel label;
  std::uint64_t queries_used = 0;
  std::uint32_t walks = 0;
  double confidence = 0.0;

  int level() const { return label.level; }
};

struct LayerClassifierOptions {
  std::size_t horizon = 20000;      // walk length cap, also the reference table length
  std::uint32_t d1_samples = 0;     // 0 = 64 ln n
  double confidence = 0.999;        // stop once the top posterior reaches this
  std::uint32_t min_walks = 4;
  std::optional<bool> d1_filter;    // default: on unless the variant is core_only
  /// Stop d1 sampling early once the answer is this many times likelier
  /// than the alternative; 0 runs the fixed-sample test.
  double d1_odds = 1e4;
};

/// Guesses a vertex's game label from S-hitting times of random walks started
/// there, by likelihood against hitting-time tables computed from the public
/// label chain. With the D_1 filter the walk refuses to step into vertices
/// that d1_test flags, and the reference chain refuses D_1 likewise.
class LayerClassifier {
 public:
  LayerClassifier(const PublicParams& p, LayerClassifierOptions opt = {}) : p_(p), opt_(opt) {
    idx_ = {p.k};
    filter_ = opt.d1_filter.value_or(p.variant != Variant::core_only);
    samples_ = opt.d1_samples ? opt.d1_samples : default_d1_samples(p);
    th_ = d1_thresholds(p);
    if (!th_.enabled) filter_ = false;
    alternatives_ = d1_alternatives(p);
    const auto P = public_chain(p);
    std::vector<bool> avoid(idx_.size(), false);
    if (filter_) avoid[idx_(GameLabel::D(1))] = true;
    table_ = hitting_table(P, avoid, opt.horizon);
    cdf_.assign(idx_.size(), {});
    for (std::size_t x = 0; x < idx_.size(); ++x) {
      cdf_[x].resize(opt.horizon + 1);
      double acc = 0.0;
      for (std::size_t t = 0; t <= opt.horizon; ++t) cdf_[x][t] = (acc += table_.pmf[x][t]);
    }
    const auto sizes = label_sizes(p);
    for (std::size_t x = 1; x < idx_.size(); ++x) {
      double row = 0.0;
      for (double v : P[x]) row += v;
      if (row == 0.0) continue;
      if (filter_ && x == idx_(GameLabel::D(1))) continue;
      candidates_.push_back(x);
      log_prior_.push_back(std::log(sizes[x]));
    }
  }

  const PublicParams& params() const { return p_; }
  bool uses_d1_filter() const { return filter_; }
  const D1Thresholds& thresholds() const { return th_; }

  template <class Rng>
  LayerGuess classify(Oracle& o, PublicId id, std::uint64_t budget, Rng& rng) const {
    LayerGuess g;
    const auto before = o.query_count();
    const auto saved = o.budget();
    o.set_budget(before + budget);
    ProbeCache cache;
    std::vector<double> ll(log_prior_);
    auto done = [&] {
      o.set_budget(saved);
      g.queries_used = o.query_count() - before;
      return g;
    };
    auto decide = [&] {
      std::size_t best = 0;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < ll.size(); ++c)
        if (ll[c] > mx) {
          mx = ll[c];
          best = c;
        }
      double z = 0.0;
      for (double v : ll) z += std::exp(v - mx);
      g.unknown = false;
      g.label = idx_.label(candidates_[best]);
      g.confidence = 1.0 / z;
    };
    auto observe = [&](std::optional<std::uint32_t> hit, std::uint32_t steps) {
      for (std::size_t c = 0; c < ll.size(); ++c) {
        const auto x = candidates_[c];
        double p;
        if (hit) {
          p = table_.prob(x, *hit);
        } else {
          p = steps <= opt_.horizon ? 1.0 - cdf_[x][steps] : table_.survival[x];
        }
        ll[c] += std::log(std::max(p, 1e-300));
      }
    };

    try {
      if (probe_s(o, id, &cache)) {
        g.unknown = false;
        g.label = GameLabel::S();
        g.confidence = 1.0;
        return done();
      }
      if (filter_ && is_d1(o, id, rng, cache)) {
        g.unknown = false;
        g.label = GameLabel::D(1);
        g.confidence = 1.0;
        return done();
      }
      WalkOptions wo;
      wo.cache = &cache;
      if (filter_) wo.avoid = [&](PublicId x) { return is_d1(o, x, rng, cache); };
      for (;;) {
        std::uint32_t steps = 0;
        std::optional<std::uint32_t> hit;
        try {
          hit = walk_once(o, id, static_cast<std::uint32_t>(opt_.horizon), rng, wo, steps);
        } catch (const BudgetExhausted&) {
          if (steps > 0) observe(std::nullopt, steps);
          throw;
        }
        observe(hit, steps);
        g.walks += 1;
        decide();
        if (g.walks >= opt_.min_walks && g.confidence >= opt_.confidence) break;
      }
    } catch (const BudgetExhausted&) {
      if (g.walks == 0 && ll == log_prior_) {
        g.unknown = true;
        return done();
      }
      decide();
    }
    return done();
  }

 private:
  PublicParams p_;
  LayerClassifierOptions opt_;
  LabelIndex idx_;
  bool filter_ = false;
  std::uint32_t samples_ = 0;
  D1Thresholds th_;
  HittingTable table_;
  std::vector<std::vector<double>> cdf_;
  std::vector<std::size_t> candidates_;
  std::vector<double> log_prior_;
  std::vector<double> alternatives_;

  template <class Rng>
  bool is_d1(Oracle& o, PublicId id, Rng& rng, ProbeCache& cache) const {
    if (opt_.d1_odds > 0)
      return d1_test_sequential(o, id, samples_, rng, th_, alternatives_, opt_.d1_odds, &cache);
    return d1_test(o, id, samples_, rng, th_, &cache);
  }
};

template <class Rng>
LayerGuess layer_classifier(Oracle& o, PublicId id, std::uint64_t budget, Variant variant, Rng& rng) {
  auto p = o.public_params();
  p.variant = variant;
  return LayerClassifier(p).classify(o, id, budget, rng);
}

/// constant * d^power * ln^2 n, the budget scale for layer classification.
inline std::uint64_t classifier_budget(const PublicParams& p, double constant, unsigned power) {
  const double ln = std::log(double(p.n()));
  return static_cast<std::uint64_t>(constant * std::pow(double(p.d), power) * ln * ln);
}

struct ClassifierTrial {
  std::uint64_t index = 0;
  VertexId vertex = 0;
  GameLabel truth;
  bool broken = false;
  LayerGuess guess;
  bool correct = false;
};

struct ClassifierReport {
  Variant variant = Variant::core_only;
  std::uint64_t budget = 0;
  std::uint32_t min_level = 1;
  std::uint64_t vertices = 0;
  std::uint64_t correct = 0;
  std::uint64_t unknown = 0;
  double accuracy = 0.0;
  Interval interval;
  double mean_queries = 0.0;
  std::vector<ClassifierTrial> per_vertex;
};

/// Classifies `vertices` distinct A/B vertices of level >= min_level, drawn
/// uniformly without replacement, each with its own oracle. A guess counts as
/// correct when it names a core label (A or B) at the true level.
inline ClassifierReport classifier_experiment(const Instance& inst, std::uint64_t budget, std::uint64_t vertices,
                                              std::uint32_t min_level, std::uint64_t seed,
                                              unsigned threads = worker_count()) {
  std::vector<VertexId> pool;
  for (VertexId v = 0; v < inst.n(); ++v) {
    const auto& b = inst.label_of(v);
    if ((b.kind == BlockKind::A || b.kind == BlockKind::B) && b.level >= min_level) pool.push_back(v);
  }
  if (pool.size() < vertices)
    throw InputError("only " + std::to_string(pool.size()) + " eligible vertices for the classifier");
  SplitMix pick(derive_seed(seed, "clf-pick"));
  shuffle(pool, pick);
  pool.resize(vertices);

  const auto pub = inst.params.public_view();
  const LayerClassifier clf(pub);
  ClassifierReport rep;
  rep.variant = pub.variant;
  rep.budget = budget;
  rep.min_level = min_level;
  rep.vertices = vertices;
  rep.per_vertex = parallel_map<ClassifierTrial>(
      vertices,
      [&](std::size_t i) {
        Oracle o(inst, derive_seed(seed, "clf-oracle", i), Recording::count_only);
        Referee ref(o);
        auto rng = make_engine(derive_seed(seed, "clf-walk", i));
        ClassifierTrial t;
        t.index = i;
        t.vertex = pool[i];
        t.truth = GameLabel::of(inst.label_of(pool[i]));
        t.broken = inst.is_broken(pool[i]);
        t.guess = clf.classify(o, ref.id_of(pool[i]), budget, rng);
        t.correct = !t.guess.unknown && t.guess.label.kind != BlockKind::D && t.guess.label.kind != BlockKind::S &&
                    t.guess.level() == t.truth.level;
        return t;
      },
      threads);
  double q = 0.0;
  for (const auto& t : rep.per_vertex) {
    rep.correct += t.correct;
    rep.unknown += t.guess.unknown;
    q += double(t.guess.queries_used);
  }
  rep.accuracy = vertices ? double(rep.correct) / double(vertices) : 0.0;
  rep.interval = wilson(rep.correct, vertices);
  rep.mean_queries = vertices ? q / double(vertices) : 0.0;
  return rep;
}

struct MatchAnswer {
  bool matched = false;
  std::optional<PublicId> partner;
};

/// Local oracle for the randomized greedy maximal matching under a shared
/// random edge ranking: an edge is in the matching iff no adjacent edge of
/// lower rank is. Neighbor lists and edge decisions are memoized for the run,
/// so answers to different questions are mutually consistent.
class GreedyMatchOracle {
 public:
  GreedyMatchOracle(Oracle& o, std::uint64_t rank_seed) : o_(&o), seed_(rank_seed) {}

  MatchAnswer query(PublicId v) {
    for (const auto& [rank, u] : incident(v))
      if (in_matching(v, u)) return {true, u};
    return {};
  }

  std::uint64_t rank(PublicId u, PublicId v) const {
    const std::uint64_t lo = std::min(u, v), hi = std::max(u, v);
    return splitmix64(seed_ ^ splitmix64((lo << 32) | hi));
  }

 private:
  using Incident = std::vector<std::pair<std::uint64_t, PublicId>>;

  const Incident& incident(PublicId v) {
    auto it = lists_.find(v);
    if (it != lists_.end()) return it->second;
    Incident list;
    for (std::uint32_t i = 1;; ++i) {
      auto nb = o_->query(v, i);
      if (!nb) break;
      list.push_back({rank(v, *nb), *nb});
    }
    std::sort(list.begin(), list.end());
    return lists_.emplace(v, std::move(list)).first->second;
  }

  bool in_matching(PublicId u, PublicId v) {
    const std::uint64_t key = (std::uint64_t(std::min(u, v)) << 32) | std::max(u, v);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const auto r = rank(u, v);
    bool result = true;
    // Merge the two incident lists by rank and stop at the edge itself.
    const Incident lu = incident(u);
    const Incident lv = incident(v);
    std::size_t a = 0, b = 0;
    while (result) {
      const bool take_a = a < lu.size() && (b >= lv.size() || lu[a].first <= lv[b].first);
      if (!take_a && b >= lv.size()) break;
      const auto [rk, w] = take_a ? lu[a] : lv[b];
      const PublicId x = take_a ? u : v;
      if (rk >= r) break;
      if (in_matching(x, w)) result = false;
      take_a ? ++a : ++b;
    }
    memo_.emplace(key, result);
    return result;
  }

  Oracle* o_;
  std::uint64_t seed_;
  std::unordered_map<PublicId, Incident> lists_;
  std::unordered_map<std::uint64_t, bool> memo_;
};

inline MatchAnswer greedy_match_oracle(Oracle& o, PublicId id, std::uint64_t shared_rank_seed) {
  return GreedyMatchOracle(o, shared_rank_seed).query(id);
}

/// Samples t random vertices and returns (t'/t) n/2 where t' of them are
/// reported matched by `match_fn`.
inline double estimate_matching_size(Oracle& o, std::uint64_t t,
                                     const std::function<bool(PublicId)>& match_fn) {
  if (t == 0) throw InputError("estimate_matching_size needs t >= 1");
  std::uint64_t matched = 0;
  for (std::uint64_t i = 0; i < t; ++i) matched += match_fn(o.random_vertex());
  return double(matched) / double(t) * double(o.n()) / 2.0;
}

// ---------------------------------------------------------------------------
// YES/NO distinguisher harness

struct StrategyContext {
  PublicParams params;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  const Referee* referee = nullptr;  // only handed to referee-mode strategies
};

using Strategy = std::function<World(Oracle&, const StrategyContext&)>;

namespace detail {

/// Hitting-time pmf of a walk from a uniformly random vertex, per world.
inline std::vector<double> mixed_hitting_pmf(const PublicParams& p, World w, std::size_t horizon,
                                             const std::vector<std::size_t>& starts) {
  ConstructionParams cp{p.N, p.k, p.d, p.s, p.variant, w, 0};
  const auto P = to_double(collapse(transition_table(cp)));
  const auto sizes = label_sizes(p);
  auto h = hitting_table(P, std::vector<bool>(P.size(), false), horizon);
  std::vector<double> out(horizon + 2, 0.0);  // last slot: censored
  double z = 0.0;
  for (auto x : starts) z += sizes[x];
  for (auto x : starts) {
    for (std::size_t t = 0; t <= horizon; ++t) out[t] += sizes[x] / z * h.pmf[x][t];
    out[horizon + 1] += sizes[x] / z * h.survival[x];
  }
  return out;
}

inline World sign_to_world(double llr_yes_minus_no, std::uint64_t seed) {
  if (llr_yes_minus_no > 0) return World::yes;
  if (llr_yes_minus_no < 0) return World::no;
  return (splitmix64(seed) & 1) ? World::yes : World::no;
}

}  // namespace detail

/// Random walks from random vertices; log-likelihood ratio of the observed
/// hitting times under the public YES and NO label chains.
inline Strategy random_walk_strategy(std::size_t horizon = 20000) {
  return [horizon](Oracle& o, const StrategyContext& ctx) {
    LabelIndex idx{ctx.params.k};
    std::vector<std::size_t> starts;
    const auto P = public_chain(ctx.params);
    for (std::size_t x = 0; x < idx.size(); ++x) {
      double row = 0.0;
      for (double v : P[x]) row += v;
      if (row > 0) starts.push_back(x);
    }
    const auto yes = detail::mixed_hitting_pmf(ctx.params, World::yes, horizon, starts);
    const auto no = detail::mixed_hitting_pmf(ctx.params, World::no, horizon, starts);
    auto rng = make_engine(derive_seed(ctx.seed, "random-walk"));
    ProbeCache cache;
    WalkOptions wo;
    wo.cache = &cache;
    double llr = 0.0;
    try {
      for (;;) {
        const PublicId start = o.random_vertex();
        std::uint32_t steps = 0;
        auto hit = walk_once(o, start, static_cast<std::uint32_t>(horizon), rng, wo, steps);
        const std::size_t t = hit ? *hit : horizon + 1;
        llr += std::log(std::max(yes[t], 1e-300)) - std::log(std::max(no[t], 1e-300));
      }
    } catch (const BudgetExhausted&) {
    }
    return detail::sign_to_world(llr, ctx.seed);
  };
}

/// Spends part of the budget locating vertices the classifier places at the
/// top level, then walks from those and compares YES/NO likelihoods for
/// top-level starts.
inline Strategy layer_then_walk_strategy(std::size_t horizon = 20000) {
  return [horizon](Oracle& o, const StrategyContext& ctx) {
    LabelIndex idx{ctx.params.k};
    const int K = static_cast<int>(ctx.params.k);
    std::vector<std::size_t> top{idx(GameLabel::A(K)), idx(GameLabel::B(K))};
    const auto yes = detail::mixed_hitting_pmf(ctx.params, World::yes, horizon, top);
    const auto no = detail::mixed_hitting_pmf(ctx.params, World::no, horizon, top);
    LayerClassifierOptions lo;
    lo.horizon = horizon;
    LayerClassifier clf(ctx.params, lo);
    auto rng = make_engine(derive_seed(ctx.seed, "layer-then-walk"));
    const std::uint64_t per_vertex = std::max<std::uint64_t>(ctx.budget / 8, 1);
    double llr = 0.0;
    try {
      for (;;) {
        const PublicId v = o.random_vertex();
        auto guess = clf.classify(o, v, std::min(per_vertex, o.remaining()), rng);
        if (guess.unknown || guess.level() != K || guess.label.kind == BlockKind::D) continue;
        ProbeCache cache;
        WalkOptions wo;
        wo.cache = &cache;
        for (int w = 0; w < 8; ++w) {
          std::uint32_t steps = 0;
          auto hit = walk_once(o, v, static_cast<std::uint32_t>(horizon), rng, wo, steps);
          const std::size_t t = hit ? *hit : horizon + 1;
          llr += std::log(std::max(yes[t], 1e-300)) - std::log(std::max(no[t], 1e-300));
        }
      }
    } catch (const BudgetExhausted&) {
    }
    return detail::sign_to_world(llr, ctx.seed);
  };
}

/// Estimates the matching size with the greedy LCA and compares it with the
/// midpoint of the two worlds' matching bounds.
inline Strategy greedy_estimate_strategy() {
  return [](Oracle& o, const StrategyContext& ctx) {
    const double threshold =
        0.5 * (to_double(yes_matching_bound(ctx.params)) + to_double(no_matching_bound(ctx.params)));
    GreedyMatchOracle lca(o, derive_seed(ctx.seed, "greedy-rank"));
    std::uint64_t sampled = 0, matched = 0;
    try {
      for (;;) {
        const PublicId v = o.random_vertex();
        const bool m = lca.query(v).matched;
        ++sampled;
        matched += m;
      }
    } catch (const BudgetExhausted&) {
    }
    if (sampled == 0) return detail::sign_to_world(0.0, ctx.seed);
    const double estimate = double(matched) / double(sampled) * double(o.n()) / 2.0;
    return estimate >= threshold ? World::yes : World::no;
  };
}

inline Strategy coin_strategy() {
  return [](Oracle&, const StrategyContext& ctx) {
    return (splitmix64(derive_seed(ctx.seed, "coin")) & 1) ? World::yes : World::no;
  };
}

/// Referee mode: exact maximum matching of the whole instance.
inline Strategy referee_hk_strategy() {
  return [](Oracle&, const StrategyContext& ctx) {
    if (!ctx.referee) throw InputError("referee_hk needs the referee capability");
    const auto mu = hopcroft_karp(ctx.referee->instance()).size;
    const double threshold =
        0.5 * (to_double(yes_matching_bound(ctx.params)) + to_double(no_matching_bound(ctx.params)));
    return double(mu) >= threshold ? World::yes : World::no;
  };
}

inline bool strategy_needs_referee(const std::string& name) { return name == "referee_hk"; }

inline Strategy make_strategy(const std::string& name) {
  if (name == "random_walk") return random_walk_strategy();
  if (name == "layer_then_walk") return layer_then_walk_strategy();
  if (name == "greedy_estimate") return greedy_estimate_strategy();
  if (name == "coin") return coin_strategy();
  if (name == "referee_hk") return referee_hk_strategy();
  throw InputError("unknown strategy '" + name + "'");
}

struct DistinguisherTrial {
  std::uint64_t trial = 0;
  World truth = World::yes;
  World guess = World::yes;
  std::uint64_t queries_used = 0;
  bool budget_escaped = false;  // strategy let BudgetExhausted escape
};

struct DistinguisherReport {
  std::string strategy;
  std::uint64_t budget = 0;
  std::uint64_t trials = 0;
  std::uint64_t correct = 0;
  double accuracy = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 1.0;
  double mean_queries = 0.0;
  std::vector<DistinguisherTrial> per_trial;
};

struct DistinguisherOptions {
  /// Number of instances generated per world; trials draw from this pool
  /// with fresh oracle seeds. 0 means one fresh instance per trial.
  std::uint64_t instance_pool = 0;
  unsigned threads = worker_count();
};

/// Fair-coin world per trial, strategy sees only the oracle (plus the referee
/// when the strategy is a referee-mode one). Budget honesty is enforced by the
/// oracle itself: the reported queries are its counter.
inline DistinguisherReport world_distinguisher(const ConstructionParams& base, const std::string& name,
                                               const Strategy& strategy, std::uint64_t budget,
                                               std::uint64_t trials, std::uint64_t seed,
                                               DistinguisherOptions opt = {}) {
  const bool referee = strategy_needs_referee(name);
  auto instance_for = [&](World w, std::uint64_t slot) {
    const auto s = derive_seed(seed, w == World::yes ? "dist-yes" : "dist-no", slot);
    return assemble_instance(base.with_world(w).with_seed(s));
  };
  std::vector<Instance> pool_yes, pool_no;
  if (opt.instance_pool > 0) {
    pool_yes = parallel_map<Instance>(opt.instance_pool, [&](std::size_t i) { return instance_for(World::yes, i); },
                                      opt.threads);
    pool_no = parallel_map<Instance>(opt.instance_pool, [&](std::size_t i) { return instance_for(World::no, i); },
                                     opt.threads);
  }

  DistinguisherReport rep;
  rep.strategy = name;
  rep.budget = budget;
  rep.trials = trials;
  rep.per_trial = parallel_map<DistinguisherTrial>(
      trials,
      [&](std::size_t t) {
        DistinguisherTrial r;
        r.trial = t;
        r.truth = (splitmix64(derive_seed(seed, "dist-coin", t)) & 1) ? World::yes : World::no;
        Instance fresh;
        const Instance* inst;
        if (opt.instance_pool > 0) {
          const auto slot = t % opt.instance_pool;
          inst = r.truth == World::yes ? &pool_yes[slot] : &pool_no[slot];
        } else {
          fresh = instance_for(r.truth, t);
          inst = &fresh;
        }
        Oracle o(*inst, derive_seed(seed, "dist-oracle", t), Recording::count_only);
        o.set_budget(budget);
        Referee ref(o);
        StrategyContext ctx{inst->params.public_view(), budget, derive_seed(seed, "dist-strategy", t),
                            referee ? &ref : nullptr};
        try {
          r.guess = strategy(o, ctx);
        } catch (const BudgetExhausted&) {
          r.budget_escaped = true;
          r.guess = detail::sign_to_world(0.0, ctx.seed);
        }
        r.queries_used = o.query_count();
        return r;
      },
      opt.threads);

  double q = 0.0;
  for (const auto& r : rep.per_trial) {
    rep.correct += r.truth == r.guess;
    q += double(r.queries_used);
  }
  rep.accuracy = trials ? double(rep.correct) / double(trials) : 0.0;
  const auto w = wilson(rep.correct, trials);
  rep.wilson_lo = w.lo;
  rep.wilson_hi = w.hi;
  rep.mean_queries = trials ? q / double(trials) : 0.0;
  return rep;
}

}  // namespace lcalab
