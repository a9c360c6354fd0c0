#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/errors.hpp"
#include "lcalab/model.hpp"
#include "lcalab/parallel.hpp"
#include "lcalab/random.hpp"
#include "lcalab/rational.hpp"
#include "lcalab/stats.hpp"
#include "lcalab/table.hpp"

namespace lcalab {

/// One way of crossing from a parent label to a child label. A collapsed
/// transition X -> Y is split into up to three outcomes by edge type.
struct GameOutcome {
  std::size_t to = 0;
  bool special = false;
  bool world_specific = false;  // only present in this world's table (always special)
  Rational p;
  double pd = 0.0;
};

/// Transition model of the label-guessing game for one world: collapsed
/// label rows with their special and world-specific parts.
class GameModel {
 public:
  GameModel(const PublicParams& params, World world) : params_(params), world_(world) {
    index_ = {params.k};
    const auto L = index_.size();
    ConstructionParams cp{params.N, params.k, params.d, params.s, params.variant, world, 0};
    const auto mine = transition_table(cp);
    const auto other = transition_table(cp.with_world(lcalab::other(world)));
    rows_.assign(L, {});
    P_.assign(L, std::vector<Rational>(L, Rational(0)));
    Pd_.assign(L, std::vector<double>(L, 0.0));
    cdf_.assign(L, {});
    for (std::size_t x = 0; x < L; ++x) {
      const BlockLabel src = source_block(index_.label(x));
      if (!mine.has_row(src)) continue;
      Rational total = 0;
      for (const auto& e : mine.row(src)) total += e.weight;
      // (to, special, specific) -> weight
      std::map<std::tuple<std::size_t, bool, bool>, Rational> parts;
      for (const auto& e : mine.row(src)) {
        const std::size_t y = index_(GameLabel::of(e.target));
        Rational specific = e.weight - other.weight(src, e.target);
        if (specific < 0) specific = 0;
        Rational special = 0;
        const Rational rest = e.weight - specific;
        if (structural_special(index_.label(x), index_.label(y))) {
          special = rest;
        } else if (x == y && index_.label(x).kind == BlockKind::D) {
          special = std::min(rest, Rational(e.weight * Rational(params.s) / delusive_self_weight(index_.label(x).level)));
        }
        if (specific > 0) parts[{y, true, true}] += specific;
        if (special > 0) parts[{y, true, false}] += special;
        if (rest - special > 0) parts[{y, false, false}] += rest - special;
      }
      double acc = 0.0;
      for (const auto& [key, w] : parts) {
        const auto [y, sp, ws] = key;
        GameOutcome o{y, sp, ws, w / total, 0.0};
        o.pd = lcalab::to_double(o.p);
        P_[x][y] += o.p;
        rows_[x].push_back(o);
        acc += o.pd;
        cdf_[x].push_back(acc);
      }
      for (std::size_t y = 0; y < L; ++y) Pd_[x][y] = lcalab::to_double(P_[x][y]);
    }
  }

  const PublicParams& params() const { return params_; }
  World world() const { return world_; }
  const LabelIndex& index() const { return index_; }
  std::size_t size() const { return index_.size(); }
  bool has_row(std::size_t x) const { return !rows_[x].empty(); }
  const std::vector<GameOutcome>& outcomes(std::size_t x) const { return rows_[x]; }
  const std::vector<std::vector<Rational>>& exact() const { return P_; }
  const std::vector<std::vector<double>>& approx() const { return Pd_; }

  Rational transition(GameLabel from, GameLabel to) const { return P_[index_(from)][index_(to)]; }

  Rational special_probability(GameLabel from) const {
    Rational p = 0;
    for (const auto& o : rows_[index_(from)])
      if (o.special) p += o.p;
    return p;
  }

  template <class Rng>
  const GameOutcome& sample(std::size_t x, Rng& rng) const {
    if (rows_[x].empty()) throw InputError("label " + index_.label(x).name() + " has no transitions");
    return rows_[x][sample_cdf(rng, std::span<const double>(cdf_[x]))];
  }

  /// The D_i self weight p (the special share of a D_i -> D_i edge is s/p).
  Rational delusive_self_weight(int i) const {
    const Rational eps(1, params_.k);
    const Rational e2 = eps * eps;
    const Rational e4 = e2 * e2;
    const Rational d(params_.d);
    if (i < int(params_.k))
      return (1 - 2 * eps + Rational(2 * i) * e2 - Rational(5, 2) * e2 + 3 * e4) * d + Rational(params_.s);
    return (1 - Rational(5, 2) * e2 + 3 * e4) * d + Rational(params_.s);
  }

  static bool structural_special(GameLabel from, GameLabel to) {
    auto is = [](GameLabel g, BlockKind k, int level) { return g.kind == k && g.level == level; };
    if (from.kind == BlockKind::S) return to.kind == BlockKind::B && to.level == 1;
    if (to.kind == BlockKind::S) return is(from, BlockKind::B, 1);
    if (from.kind == BlockKind::B && to.kind == BlockKind::A) return to.level + 1 == from.level;
    if (from.kind == BlockKind::A && to.kind == BlockKind::B) return from.level + 1 == to.level;
    return false;
  }

 private:
  static BlockLabel source_block(GameLabel g) {
    switch (g.kind) {
      case BlockKind::S:
        return BlockLabel::S(1);
      case BlockKind::A:
        return BlockLabel::A(g.level, 1);
      case BlockKind::B:
        return BlockLabel::B(g.level, 1);
      case BlockKind::D:
        return BlockLabel::D(g.level);
    }
    return BlockLabel::S(1);
  }

  PublicParams params_;
  World world_;
  LabelIndex index_;
  std::vector<std::vector<GameOutcome>> rows_;
  std::vector<std::vector<Rational>> P_;
  std::vector<std::vector<double>> Pd_;
  std::vector<std::vector<double>> cdf_;
};

using NodeId = std::uint32_t;

/// Distribution over game labels, dense by LabelIndex.
using LabelPrior = std::vector<Rational>;

inline LabelPrior uniform_prior(const LabelIndex& idx, const std::vector<GameLabel>& support) {
  LabelPrior p(idx.size(), Rational(0));
  for (auto g : support) p[idx(g)] += Rational(1, support.size());
  return p;
}

inline std::vector<GameLabel> top_level_labels(std::uint32_t k) {
  const int K = static_cast<int>(k);
  return {GameLabel::A(K), GameLabel::B(K), GameLabel::D(K)};
}

/// A grown game tree. The public interface is what a player observes: the
/// shape and which nodes are S. Labels and edge types are reachable through
/// GameReferee only.
class GameTree {
 public:
  GameTree(std::shared_ptr<const GameModel> model, LabelPrior prior, std::uint64_t seed)
      : model_(std::move(model)), prior_(std::move(prior)), rng_(make_engine(seed)) {}

  std::size_t size() const { return nodes_.size(); }
  std::uint32_t k() const { return model_->params().k; }
  const GameModel& model() const { return *model_; }
  const LabelPrior& root_prior() const { return prior_; }
  std::optional<NodeId> parent(NodeId v) const {
    if (nodes_.at(v).parent < 0) return std::nullopt;
    return NodeId(nodes_[v].parent);
  }
  bool is_s(NodeId v) const { return nodes_.at(v).is_s; }
  std::uint32_t depth(NodeId v) const { return nodes_.at(v).depth; }
  const std::vector<NodeId>& children(NodeId v) const { return nodes_.at(v).children; }

 private:
  friend class GameReferee;
  friend GameTree new_game(std::shared_ptr<const GameModel>, LabelPrior, std::uint64_t);
  friend std::pair<NodeId, bool> open_child(GameTree&, NodeId);
  friend GameTree game_from_json(const nlohmann::json&);
  friend GameTree game_with_labels(std::shared_ptr<const GameModel>, LabelPrior, const std::vector<GameLabel>&,
                                   const std::vector<NodeId>&);

  struct Node {
    std::int32_t parent = -1;
    std::size_t label = 0;
    bool is_s = false;
    bool special = false;
    bool world_specific = false;
    std::uint32_t depth = 0;
    std::uint32_t progress = 0;
    std::vector<NodeId> children;
  };

  NodeId add(std::int32_t parent, std::size_t label, bool special, bool specific) {
    Node n;
    n.parent = parent;
    n.label = label;
    n.is_s = model_->index().label(label).kind == BlockKind::S;
    n.special = special;
    n.world_specific = specific;
    if (parent >= 0) {
      const auto& p = nodes_[parent];
      n.depth = p.depth + 1;
      n.progress = p.progress + (special ? 1 : 0);
    }
    nodes_.push_back(std::move(n));
    const auto id = NodeId(nodes_.size() - 1);
    if (parent >= 0) nodes_[parent].children.push_back(id);
    return id;
  }

  std::shared_ptr<const GameModel> model_;
  LabelPrior prior_;
  Engine rng_;
  std::vector<Node> nodes_;
};

inline GameTree new_game(std::shared_ptr<const GameModel> model, LabelPrior prior, std::uint64_t seed) {
  if (prior.size() != model->size()) throw InputError("root prior has the wrong number of labels");
  Rational total = 0;
  for (const auto& x : prior) {
    if (x < 0) throw InputError("root prior has a negative entry");
    total += x;
  }
  if (total != 1) throw InputError("root prior does not sum to 1");
  GameTree g(std::move(model), std::move(prior), seed);
  std::vector<double> w;
  for (const auto& x : g.prior_) w.push_back(to_double(x));
  const auto cdf = cumulative(w);
  g.add(-1, sample_cdf(g.rng_, std::span<const double>(cdf)), false, false);
  return g;
}

inline GameTree new_game(const PublicParams& p, World world, std::uint64_t seed) {
  auto model = std::make_shared<const GameModel>(p, world);
  auto prior = uniform_prior(model->index(), top_level_labels(p.k));
  return new_game(std::move(model), std::move(prior), seed);
}

/// Opens one new child below `v`; returns it with its revealed S flag.
inline std::pair<NodeId, bool> open_child(GameTree& g, NodeId v) {
  const auto parent_label = g.nodes_.at(v).label;
  const auto& o = g.model_->sample(parent_label, g.rng_);
  const auto id = g.add(std::int32_t(v), o.to, o.special, o.world_specific);
  return {id, g.nodes_[id].is_s};
}

/// Ground truth of a game: labels, edge types, progress and mixers.
class GameReferee {
 public:
  explicit GameReferee(const GameTree& g) : g_(&g) {}

  World world() const { return g_->model_->world(); }
  GameLabel label(NodeId v) const { return g_->model_->index().label(g_->nodes_.at(v).label); }
  GameLabel root_label() const { return label(0); }
  /// Type of the edge between v and its parent (false for the root).
  bool special(NodeId v) const { return g_->nodes_.at(v).special; }
  bool world_specific(NodeId v) const { return g_->nodes_.at(v).world_specific; }
  std::uint32_t progress(NodeId v) const { return g_->nodes_.at(v).progress; }

  bool root_in_top_level() const {
    const auto r = root_label();
    return r.level == g_->k() && r.kind != BlockKind::S;
  }

  bool is_mixer(NodeId v) const {
    if (!root_in_top_level())
      throw WrongRootRegime("mixer vertices need a level-k root, got " + root_label().name());
    return mixer_rule(label(v), progress(v), g_->k());
  }

  /// A node whose label is D_j with j <= k - p - 1, where p < k - 1 is its
  /// progress counted from the subtree root.
  static bool mixer_rule(GameLabel g, std::uint32_t p, std::uint32_t k) {
    if (p + 1 >= k) return false;
    return g.kind == BlockKind::D && g.level >= 1 && g.level <= int(k - p - 1);
  }

  /// Nodes that end a root path with >= k-1 special edges and no mixer.
  std::vector<NodeId> bad_path_ends() const { return bad_path_ends_below(0); }
  bool has_bad_path() const { return !bad_path_ends().empty(); }

  /// Same, for paths starting at `top` (progress and mixers relative to it).
  std::vector<NodeId> bad_path_ends_below(NodeId top) const {
    std::vector<NodeId> out;
    const auto k = g_->k();
    // (node, progress from top); the walk stops at mixers.
    std::vector<std::pair<NodeId, std::uint32_t>> stack{{top, 0}};
    while (!stack.empty()) {
      auto [v, p] = stack.back();
      stack.pop_back();
      if (v != top && mixer_rule(label(v), p, k)) continue;
      if (p + 1 >= k) out.push_back(v);
      for (auto c : g_->nodes_[v].children) stack.push_back({c, p + (special(c) ? 1u : 0u)});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const GameTree* g_;
};

inline std::uint32_t progress(const GameReferee& ref, NodeId v) { return ref.progress(v); }
inline bool is_mixer(const GameReferee& ref, NodeId v) { return ref.is_mixer(v); }

// ---------------------------------------------------------------------------
// Root posterior

enum class PosteriorMode { automatic, exact, floating };

struct PosteriorResult {
  LabelIndex index;
  std::vector<double> p;                      // by LabelIndex
  std::optional<std::vector<Rational>> exact;  // present when computed exactly

  double at(GameLabel g) const { return p[index(g)]; }
  /// max/min of the posterior over `labels` (infinity if some entry is 0).
  double ratio(const std::vector<GameLabel>& labels) const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (auto g : labels) {
      lo = std::min(lo, at(g));
      hi = std::max(hi, at(g));
    }
    return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
};

namespace detail {

/// Neumaier-compensated accumulator.
struct CompensatedSum {
  long double sum = 0.0L, carry = 0.0L;
  void add(long double x) {
    const long double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  long double value() const { return sum + carry; }
};

template <class Num>
struct Accumulator {
  Num total = 0;
  void add(const Num& x) { total += x; }
  Num value() const { return total; }
};
template <>
struct Accumulator<long double> : CompensatedSum {};

template <class Num>
struct MessageEngine {
  const GameTree& g;
  std::vector<std::vector<Num>> P;                       // collapsed label rows
  std::vector<std::vector<std::pair<std::size_t, Num>>> plain;    // per label: (to, p) without special part
  std::vector<std::vector<std::pair<std::size_t, Num>>> special;  // per label: (to, p) special part

  MessageEngine(const GameTree& game, const std::function<Num(const Rational&)>& cast) : g(game) {
    const auto& m = g.model();
    const auto L = m.size();
    P.assign(L, std::vector<Num>(L, Num(0)));
    plain.assign(L, {});
    special.assign(L, {});
    for (std::size_t x = 0; x < L; ++x) {
      for (std::size_t y = 0; y < L; ++y) P[x][y] = cast(m.exact()[x][y]);
      for (const auto& o : m.outcomes(x)) (o.special ? special : plain)[x].push_back({o.to, cast(o.p)});
    }
  }

  Num evidence(NodeId v, std::size_t x) const { return (x == 0) == g.is_s(v) ? Num(1) : Num(0); }

  /// up[v][x]: probability of every S flag in v's subtree given label x at v.
  std::vector<std::vector<Num>> plain_messages() const {
    const auto L = g.model().size();
    std::vector<std::vector<Num>> up(g.size(), std::vector<Num>(L, Num(0)));
    // Children always have larger ids than parents, so a reverse sweep is leaf-to-root.
    for (std::size_t v = g.size(); v-- > 0;) {
      auto& m = up[v];
      for (std::size_t x = 0; x < L; ++x) m[x] = evidence(NodeId(v), x);
      for (auto c : g.children(NodeId(v))) {
        for (std::size_t x = 0; x < L; ++x) {
          if (m[x] == Num(0)) continue;
          Accumulator<Num> acc;
          for (std::size_t y = 0; y < L; ++y)
            if (P[x][y] != Num(0)) acc.add(P[x][y] * up[c][y]);
          m[x] *= acc.value();
        }
      }
    }
    return up;
  }

  /// cond[v][p][x]: probability of the S flags in v's subtree and of no
  /// mixer-free path below v reaching k-1 special edges from the root, given
  /// label x at v and progress p < k-1 at v. A mixer cuts the condition off.
  std::vector<std::vector<Num>> conditioned_root_messages(const std::vector<std::vector<Num>>& up) const {
    const auto L = g.model().size();
    const auto k = g.k();
    const std::uint32_t levels = k - 1;  // progress values 0..k-2 are still safe
    const auto& idx = g.model().index();
    std::vector<std::vector<std::vector<Num>>> cond(
        g.size(), std::vector<std::vector<Num>>(levels, std::vector<Num>(L, Num(0))));
    auto value = [&](NodeId c, std::size_t y, std::uint32_t q) -> Num {
      if (q >= levels) return Num(0);
      return cond[c][q][y];
    };
    for (std::size_t v = g.size(); v-- > 0;) {
      for (std::uint32_t p = 0; p < levels; ++p) {
        auto& m = cond[v][p];
        for (std::size_t x = 0; x < L; ++x) {
          if (v != 0 && GameReferee::mixer_rule(idx.label(x), p, k)) {
            m[x] = up[v][x];
            continue;
          }
          m[x] = evidence(NodeId(v), x);
          for (auto c : g.children(NodeId(v))) {
            if (m[x] == Num(0)) break;
            Accumulator<Num> acc;
            for (const auto& [y, w] : plain[x]) acc.add(w * value(c, y, p));
            for (const auto& [y, w] : special[x]) acc.add(w * value(c, y, p + 1));
            m[x] *= acc.value();
          }
        }
      }
    }
    if (levels == 0) return {std::vector<Num>(L, Num(0))};
    return {cond[0][0]};
  }
};

}  // namespace detail

/// What the root posterior conditions on besides the observations.
enum class PosteriorCondition {
  none,
  /// also on the hidden labels containing no bad path (root-relative)
  bad_path_free,
};

struct PosteriorOptions {
  PosteriorMode mode = PosteriorMode::automatic;
  PosteriorCondition condition = PosteriorCondition::none;
};

/// Exact marginal of the root label given the tree shape and every node's S
/// flag: leaf-to-root sum-product over hidden labels with the game's own
/// transition rows. Exact rationals up to 32 nodes in automatic mode.
inline PosteriorResult root_posterior(const GameTree& g, PosteriorOptions opt = {}) {
  const auto& model = g.model();
  const auto L = model.size();
  PosteriorResult r;
  r.index = model.index();
  const bool exact =
      opt.mode == PosteriorMode::exact || (opt.mode == PosteriorMode::automatic && g.size() <= 32);
  auto run = [&](auto cast) {
    using Num = decltype(cast(Rational(0)));
    detail::MessageEngine<Num> engine(g, cast);
    auto up = engine.plain_messages();
    std::vector<Num> m = opt.condition == PosteriorCondition::none ? up[0] : engine.conditioned_root_messages(up)[0];
    std::vector<Num> post(L);
    detail::Accumulator<Num> z;
    for (std::size_t x = 0; x < L; ++x) {
      post[x] = cast(g.root_prior()[x]) * m[x];
      z.add(post[x]);
    }
    if (!(z.value() > Num(0))) throw InputError("observed tree has probability zero under the root prior");
    for (auto& x : post) x /= z.value();
    return post;
  };
  if (exact) {
    auto post = run([](const Rational& q) { return q; });
    for (const auto& x : post) r.p.push_back(to_double(x));
    r.exact = std::move(post);
  } else {
    for (auto x : run([](const Rational& q) { return q.convert_to<long double>(); })) r.p.push_back(double(x));
  }
  return r;
}

inline PosteriorResult root_posterior(const GameTree& g, PosteriorMode mode) {
  return root_posterior(g, PosteriorOptions{mode, PosteriorCondition::none});
}

// ---------------------------------------------------------------------------
// Query policies: a policy sees only the observed tree and names the node to
// expand next, or nullopt to stop.

using GamePolicy = std::function<std::optional<NodeId>(const GameTree&, Engine&)>;
using PolicyFactory = std::function<GamePolicy()>;

/// Expands a uniformly random existing node.
inline PolicyFactory random_child_policy() {
  return [] {
    return GamePolicy([](const GameTree& g, Engine& rng) -> std::optional<NodeId> {
      return NodeId(uniform_below(rng, g.size()));
    });
  };
}

/// Walks down from the root, always expanding the newest node, and restarts
/// from the root after reaching S.
inline PolicyFactory dfs_policy() {
  return [] {
    auto current = std::make_shared<std::optional<NodeId>>();
    return GamePolicy([current](const GameTree& g, Engine&) -> std::optional<NodeId> {
      NodeId v = current->has_value() ? NodeId(g.size() - 1) : 0;
      if (g.is_s(v)) v = 0;
      *current = v;
      return v;
    });
  };
}

/// Breadth-first: every node gets `branching` children, in FIFO order.
inline PolicyFactory bfs_policy(std::uint32_t branching = 4) {
  return [branching] {
    return GamePolicy([branching](const GameTree& g, Engine&) -> std::optional<NodeId> {
      for (NodeId v = 0; v < g.size(); ++v)
        if (g.children(v).size() < branching) return v;
      return std::nullopt;
    });
  };
}

inline PolicyFactory make_game_policy(const std::string& name, std::uint32_t branching = 4) {
  if (name == "random_child") return random_child_policy();
  if (name == "dfs") return dfs_policy();
  if (name == "bfs") return bfs_policy(branching);
  throw InputError("unknown game policy '" + name + "'");
}

/// Grows `g` to at most `max_nodes` nodes with a fresh instance of the policy.
inline void grow(GameTree& g, const PolicyFactory& factory, std::size_t max_nodes, std::uint64_t policy_seed) {
  auto policy = factory();
  auto rng = make_engine(policy_seed);
  while (g.size() < max_nodes) {
    auto v = policy(g, rng);
    if (!v) break;
    if (*v >= g.size()) throw InputError("policy named a node that does not exist");
    open_child(g, *v);
  }
}

/// Canonical encoding of what a player saw: parent list and S flags.
inline std::string observation_key(const GameTree& g) {
  std::string key;
  key.reserve(g.size() * 6);
  for (NodeId v = 1; v < g.size(); ++v) {
    key += std::to_string(*g.parent(v));
    key += g.is_s(v) ? 's' : ',';
  }
  key += g.is_s(0) ? "|s" : "|";
  return key;
}

// ---------------------------------------------------------------------------
// Experiments

struct GameSetup {
  PublicParams params;
  std::string policy = "random_child";
  std::uint32_t branching = 4;
  std::size_t tree_size = 200;
};

struct MixerReport {
  GameSetup setup;
  std::uint64_t trials = 0;
  std::uint64_t bad_path_trials = 0;
  double bad_path_frequency = 0.0;
  Interval bad_path_interval;
  double bound_constant = 8.0;
  double bad_path_bound = 0.0;  // C |T| / d
  std::uint64_t conditioned_games = 0;
  double tolerance = 1.05;
  std::uint64_t flat_games = 0;
  double flat_fraction = 0.0;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  std::vector<double> ratios;  // per bad-path-free game, in trial order
};

struct MixerOptions {
  double bound_constant = 8.0;
  double tolerance = 1.05;
  /// Keep playing past `trials` until this many bad-path-free games exist
  /// (0 = no minimum); gives up after 100x trials.
  std::uint64_t min_conditioned = 0;
  unsigned threads = worker_count();
};

struct MixerGame {
  bool bad_path = false;
  double ratio = 0.0;
};

inline MixerGame play_mixer_game(const std::shared_ptr<const GameModel>& model, const GameSetup& setup,
                                 const PolicyFactory& policy, std::uint64_t seed, std::uint64_t trial) {
  auto g = new_game(model, uniform_prior(model->index(), top_level_labels(setup.params.k)),
                    derive_seed(seed, "game", trial));
  grow(g, policy, setup.tree_size, derive_seed(seed, "policy", trial));
  MixerGame out;
  out.bad_path = GameReferee(g).has_bad_path();
  if (!out.bad_path) {
    const auto top = top_level_labels(setup.params.k);
    out.ratio = root_posterior(g).ratio(top);
  }
  return out;
}

/// Grows games under `policy` from a uniform level-k root and measures how
/// often a mixer-free path with k-1 special edges appears, and how flat the
/// root posterior is over the level-k labels when none does.
inline MixerReport mixer_hit_experiment(const GameSetup& setup, const PolicyFactory& policy,
                                        std::uint64_t trials, std::uint64_t seed, MixerOptions opt = {}) {
  auto model = std::make_shared<const GameModel>(setup.params, World::yes);
  MixerReport rep;
  rep.setup = setup;
  rep.bound_constant = opt.bound_constant;
  rep.tolerance = opt.tolerance;
  std::vector<MixerGame> games;
  std::uint64_t next = 0;
  const std::uint64_t cap = std::max<std::uint64_t>(trials, 1) * 100;
  auto run = [&](std::uint64_t count) {
    auto batch = parallel_map<MixerGame>(
        count, [&](std::size_t i) { return play_mixer_game(model, setup, policy, seed, next + i); },
        opt.threads);
    next += count;
    games.insert(games.end(), batch.begin(), batch.end());
  };
  run(trials);
  auto conditioned = [&] {
    return std::uint64_t(std::count_if(games.begin(), games.end(), [](const MixerGame& m) { return !m.bad_path; }));
  };
  while (opt.min_conditioned > 0 && conditioned() < opt.min_conditioned && next < cap)
    run(std::min<std::uint64_t>(std::max<std::uint64_t>(trials, 1), cap - next));

  rep.trials = games.size();
  for (const auto& m : games) {
    if (m.bad_path) {
      ++rep.bad_path_trials;
      continue;
    }
    rep.ratios.push_back(m.ratio);
    rep.flat_games += m.ratio <= opt.tolerance;
    rep.max_ratio = std::max(rep.max_ratio, m.ratio);
  }
  rep.conditioned_games = rep.ratios.size();
  rep.bad_path_frequency = rep.trials ? double(rep.bad_path_trials) / double(rep.trials) : 0.0;
  rep.bad_path_interval = wilson(rep.bad_path_trials, rep.trials);
  rep.bad_path_bound = opt.bound_constant * double(setup.tree_size) / double(setup.params.d);
  rep.flat_fraction = rep.conditioned_games ? double(rep.flat_games) / double(rep.conditioned_games) : 0.0;
  if (!rep.ratios.empty()) {
    auto sorted = rep.ratios;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    rep.median_ratio = sorted[sorted.size() / 2];
  }
  return rep;
}

/// Builds a tree with chosen hidden labels: node i > 0 hangs below
/// parents[i-1]. Structural edges are marked special, nothing is world
/// specific. Throws InputError if a parent-to-child transition has
/// probability zero.
inline GameTree game_with_labels(std::shared_ptr<const GameModel> model, LabelPrior prior,
                                 const std::vector<GameLabel>& labels, const std::vector<NodeId>& parents) {
  if (labels.empty() || parents.size() + 1 != labels.size())
    throw InputError("need one parent for every label but the first");
  const auto& idx = model->index();
  GameTree g(model, std::move(prior), 0);
  g.add(-1, idx(labels[0]), false, false);
  for (std::size_t i = 1; i < labels.size(); ++i) {
    const auto par = parents[i - 1];
    if (par >= i) throw InputError("parent must precede its child");
    const auto from = idx.label(g.nodes_[par].label);
    if (model->transition(from, labels[i]) == 0)
      throw InputError(from.name() + " -> " + labels[i].name() + " has probability zero");
    g.add(std::int32_t(par), idx(labels[i]), GameModel::structural_special(from, labels[i]), false);
  }
  return g;
}

/// A single root-to-S chain with no D vertex: a level-k B root that drops one
/// level per special edge (B_i -> A_{i-1} -> B_{i-1} -> ...) and ends at S.
/// Its root posterior is the counterexample to flatness.
inline GameTree planted_s_path(const PublicParams& p) {
  auto model = std::make_shared<const GameModel>(p, World::yes);
  std::vector<GameLabel> chain;
  for (int i = int(p.k); i >= 2; --i) {
    chain.push_back(GameLabel::B(i));
    chain.push_back(GameLabel::A(i - 1));
  }
  chain.push_back(GameLabel::B(1));
  chain.push_back(GameLabel::S());
  std::vector<NodeId> parents;
  for (std::size_t i = 1; i < chain.size(); ++i) parents.push_back(NodeId(i - 1));
  auto prior = uniform_prior(model->index(), top_level_labels(p.k));
  return game_with_labels(std::move(model), std::move(prior), chain, parents);
}

struct BadEventReport {
  GameSetup setup;
  std::uint64_t trials = 0;
  std::uint64_t games_with_crucial = 0;
  std::uint64_t bad_events = 0;
  double frequency = 0.0;
  Interval interval;
  double bound_constant = 8.0;
  double bound = 0.0;  // C Q^2 / d^2
  std::uint64_t tv_trials = 0;
  std::uint64_t tv_yes_kept = 0;
  std::uint64_t tv_no_kept = 0;
  double tv_distance = 0.0;
};

struct BadEventOptions {
  double bound_constant = 8.0;
  /// Paired YES/NO games for the total-variation estimate (0 skips it).
  std::uint64_t tv_trials = 0;
  unsigned threads = worker_count();
};

/// True when some node entered over a world-specific edge roots a subtree
/// containing a bad path (relative to that node).
inline bool has_bad_event(const GameTree& g, bool* saw_crucial = nullptr) {
  GameReferee ref(g);
  bool crucial = false, bad = false;
  for (NodeId v = 1; v < g.size() && !bad; ++v) {
    if (!ref.world_specific(v)) continue;
    crucial = true;
    bad = !ref.bad_path_ends_below(v).empty();
  }
  if (saw_crucial) *saw_crucial = crucial;
  return bad;
}

inline BadEventReport bad_event_experiment(const GameSetup& setup, const PolicyFactory& policy,
                                           std::uint64_t trials, std::uint64_t seed, BadEventOptions opt = {}) {
  BadEventReport rep;
  rep.setup = setup;
  rep.trials = trials;
  rep.bound_constant = opt.bound_constant;
  auto yes = std::make_shared<const GameModel>(setup.params, World::yes);
  auto no = std::make_shared<const GameModel>(setup.params, World::no);
  const auto prior = uniform_prior(yes->index(), top_level_labels(setup.params.k));

  struct Outcome {
    bool crucial = false;
    bool bad = false;
  };
  auto outcomes = parallel_map<Outcome>(
      trials,
      [&](std::size_t t) {
        auto g = new_game(yes, prior, derive_seed(seed, "bad-event-game", t));
        grow(g, policy, setup.tree_size, derive_seed(seed, "bad-event-policy", t));
        Outcome o;
        o.bad = has_bad_event(g, &o.crucial);
        return o;
      },
      opt.threads);
  for (const auto& o : outcomes) {
    rep.games_with_crucial += o.crucial;
    rep.bad_events += o.bad;
  }
  rep.frequency = trials ? double(rep.bad_events) / double(trials) : 0.0;
  rep.interval = wilson(rep.bad_events, trials);
  const double Q = double(setup.tree_size), d = double(setup.params.d);
  rep.bound = opt.bound_constant * Q * Q / (d * d);

  if (opt.tv_trials > 0) {
    struct Seen {
      bool kept = false;
      std::string key;
    };
    auto observe = [&](const std::shared_ptr<const GameModel>& m, const char* tag) {
      return parallel_map<Seen>(
          opt.tv_trials,
          [&](std::size_t t) {
            auto g = new_game(m, prior, derive_seed(seed, tag, t));
            // Same policy randomness in both worlds for a given trial.
            grow(g, policy, setup.tree_size, derive_seed(seed, "tv-policy", t));
            Seen s;
            s.kept = !has_bad_event(g);
            if (s.kept) s.key = observation_key(g);
            return s;
          },
          opt.threads);
    };
    const auto a = observe(yes, "tv-yes");
    const auto b = observe(no, "tv-no");
    std::map<std::string, std::pair<double, double>> freq;
    for (const auto& s : a)
      if (s.kept) ++rep.tv_yes_kept, freq[s.key].first += 1;
    for (const auto& s : b)
      if (s.kept) ++rep.tv_no_kept, freq[s.key].second += 1;
    double tv = 0.0;
    for (const auto& [key, f] : freq)
      tv += std::abs(f.first / double(std::max<std::uint64_t>(rep.tv_yes_kept, 1)) -
                     f.second / double(std::max<std::uint64_t>(rep.tv_no_kept, 1)));
    rep.tv_trials = opt.tv_trials;
    rep.tv_distance = tv / 2;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Snapshots

inline nlohmann::json to_json(const GameTree& g, bool with_referee = true) {
  nlohmann::json j;
  const auto& p = g.model().params();
  j["params"] = {{"N", p.N}, {"k", p.k}, {"d", p.d}, {"s", p.s}, {"variant", to_string(p.variant)}};
  nlohmann::json prior = nlohmann::json::array();
  for (const auto& x : g.root_prior()) prior.push_back(to_fraction_string(x));
  j["root_prior"] = prior;
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId v = 0; v < g.size(); ++v) {
    auto par = g.parent(v);
    nodes.push_back({{"parent", par ? nlohmann::json(*par) : nlohmann::json(nullptr)}, {"is_S", g.is_s(v)}});
  }
  j["nodes"] = nodes;
  if (with_referee) {
    GameReferee ref(g);
    nlohmann::json r;
    r["world"] = to_string(ref.world());
    nlohmann::json labels = nlohmann::json::array(), special = nlohmann::json::array(),
                   specific = nlohmann::json::array();
    for (NodeId v = 0; v < g.size(); ++v) {
      labels.push_back(ref.label(v).name());
      special.push_back(ref.special(v));
      specific.push_back(ref.world_specific(v));
    }
    r["labels"] = labels;
    r["special"] = special;
    r["world_specific"] = specific;
    j["referee"] = r;
  }
  return j;
}

inline GameLabel parse_game_label(const std::string& s) {
  if (s == "S") return GameLabel::S();
  if (s.size() < 3 || s[1] != '_') throw FormatError("bad game label '" + s + "'");
  int level = 0;
  try {
    level = std::stoi(s.substr(2));
  } catch (const std::exception&) {
    throw FormatError("bad game label '" + s + "'");
  }
  if (level < 1 || level > 255) throw FormatError("bad game label '" + s + "'");
  switch (s[0]) {
    case 'A':
      return GameLabel::A(level);
    case 'B':
      return GameLabel::B(level);
    case 'D':
      return GameLabel::D(level);
  }
  throw FormatError("bad game label '" + s + "'");
}

/// Rebuilds a snapshot. Without the referee section the hidden labels are
/// unknown, so non-S nodes get placeholder labels (root: A_k) and edge flags
/// are false; the observed tree and its posterior are unaffected.
inline GameTree game_from_json(const nlohmann::json& j) {
  try {
    const auto& pj = j.at("params");
    PublicParams p{pj.at("N").get<std::uint64_t>(), pj.at("k").get<std::uint32_t>(),
                   pj.at("d").get<std::uint32_t>(), pj.at("s").get<std::uint32_t>(),
                   parse_variant(pj.at("variant").get<std::string>())};
    World w = World::yes;
    const bool has_ref = j.contains("referee");
    if (has_ref) w = parse_world(j.at("referee").at("world").get<std::string>());
    auto model = std::make_shared<const GameModel>(p, w);
    LabelPrior prior;
    for (const auto& x : j.at("root_prior")) prior.push_back(parse_fraction(x.get<std::string>()));
    if (prior.size() != model->size()) throw FormatError("root prior has the wrong length");
    GameTree g(model, prior, 0);
    const auto& nodes = j.at("nodes");
    const auto& idx = model->index();
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      const auto& n = nodes[v];
      std::int32_t parent = -1;
      if (!n.at("parent").is_null()) {
        parent = n.at("parent").get<std::int32_t>();
        if (parent < 0 || std::size_t(parent) >= v) throw FormatError("node parent must precede it");
      } else if (v != 0) {
        throw FormatError("only node 0 may be the root");
      }
      const bool is_s = n.at("is_S").get<bool>();
      std::size_t label;
      bool special = false, specific = false;
      if (has_ref) {
        const auto& r = j.at("referee");
        label = idx(parse_game_label(r.at("labels").at(v).get<std::string>()));
        special = r.at("special").at(v).get<bool>();
        specific = r.at("world_specific").at(v).get<bool>();
        if ((label == 0) != is_s) throw FormatError("is_S disagrees with the referee label");
      } else {
        label = is_s ? 0 : idx(GameLabel::A(int(p.k)));
      }
      g.add(parent, label, special, specific);
    }
    if (g.size() == 0) throw FormatError("snapshot has no nodes");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("game snapshot: ") + e.what());
  }
}

}  // namespace lcalab
