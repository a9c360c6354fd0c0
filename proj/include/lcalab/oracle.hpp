#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/errors.hpp"
#include "lcalab/instance.hpp"
#include "lcalab/parallel.hpp"
#include "lcalab/random.hpp"
#include "lcalab/stats.hpp"

namespace lcalab {

using PublicId = std::uint32_t;
using Answer = std::optional<PublicId>;  // nullopt is Bottom

struct TranscriptEntry {
  std::uint64_t step = 0;
  std::optional<PublicId> queried_id;  // empty for random_vertex draws
  std::uint32_t index = 0;             // 0 for random_vertex draws
  Answer answer;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

enum class Recording { full, count_only };

/// Attacker-side view of an instance: public IDs, permuted adjacency lists and
/// honest query accounting. Ground truth is reachable only through Referee.
class Oracle {
 public:
  Oracle(const Instance& inst, std::uint64_t seed, Recording mode = Recording::full)
      : inst_(&inst), seed_(seed), mode_(mode) {
    const VertexId n = inst.n();
    id_of_.resize(n);
    std::iota(id_of_.begin(), id_of_.end(), 0u);
    auto rng = make_engine(derive_seed(seed, "ids"));
    shuffle(id_of_, rng);
    vertex_of_.resize(n);
    for (VertexId v = 0; v < n; ++v) vertex_of_[id_of_[v]] = v;
    max_degree_ = inst.params.public_view().max_degree();
  }

  const PublicParams public_params() const { return inst_->params.public_view(); }
  std::uint32_t n() const { return inst_->n(); }
  /// ceil(d'), the public upper bound on every degree.
  std::uint32_t max_degree() const { return max_degree_; }
  std::uint32_t s() const { return inst_->params.s; }
  std::uint64_t query_count() const { return count_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  Recording recording() const { return mode_; }

  void set_budget(std::optional<std::uint64_t> budget) { budget_ = budget; }
  std::optional<std::uint64_t> budget() const { return budget_; }
  std::uint64_t remaining() const {
    return budget_ ? (*budget_ > count_ ? *budget_ - count_ : 0) : ~std::uint64_t{0};
  }

  /// The i-th neighbor (1-based) of `id` in this oracle's fixed random order,
  /// or Bottom when the degree is below i.
  Answer query(PublicId id, std::uint32_t i) {
    if (id >= n()) throw UnknownId("unknown vertex id " + std::to_string(id));
    if (i == 0) throw InputError("neighbor index must be >= 1");
    charge();
    const VertexId v = vertex_of_[id];
    Answer ans;
    if (i <= inst_->degree(v)) {
      const auto* perm = list_perm(v);
      ans = id_of_[inst_->adjacency[inst_->offsets[v] + perm[i - 1]]];
    }
    note_touch(v);
    if (ans) note_touch(vertex_of_[*ans]);
    record({count_, id, i, ans});
    return ans;
  }

  /// Uniform public ID; costs one query. The k-th draw of an oracle depends
  /// only on (seed, k).
  PublicId random_vertex() {
    charge();
    SplitMix g(derive_seed(seed_, "random_vertex", draws_++));
    const auto id = static_cast<PublicId>(uniform_below(g, n()));
    note_touch(vertex_of_[id]);
    record({count_, std::nullopt, 0, id});
    return id;
  }

 private:
  friend class Referee;

  void charge() {
    if (budget_ && count_ >= *budget_)
      throw BudgetExhausted("query budget of " + std::to_string(*budget_) + " exhausted");
    ++count_;
  }
  void record(TranscriptEntry e) {
    if (mode_ == Recording::full) transcript_.push_back(e);
  }
  void note_touch(VertexId v) {
    if (!touched_broken_ && inst_->is_broken(v)) touched_broken_ = true;
  }
  // Per-vertex list orders live in one array parallel to the adjacency and
  // are shuffled the first time the vertex is queried.
  const std::uint32_t* list_perm(VertexId v) {
    if (perm_.empty()) {
      perm_.resize(inst_->adjacency.size());
      perm_ready_.assign(inst_->n(), false);
    }
    std::uint32_t* perm = perm_.data() + inst_->offsets[v];
    if (!perm_ready_[v]) {
      const auto deg = inst_->degree(v);
      for (std::uint32_t i = 0; i < deg; ++i) perm[i] = i;
      SplitMix g(derive_seed(seed_, "list", v));
      for (std::uint32_t i = deg; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(g, i)]);
      perm_ready_[v] = true;
    }
    return perm;
  }

  const Instance* inst_;
  std::uint64_t seed_;
  Recording mode_;
  std::vector<PublicId> id_of_;
  std::vector<VertexId> vertex_of_;
  std::vector<std::uint32_t> perm_;
  std::vector<bool> perm_ready_;
  std::uint32_t max_degree_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t draws_ = 0;
  std::optional<std::uint64_t> budget_;
  std::vector<TranscriptEntry> transcript_;
  bool touched_broken_ = false;
};

/// Instrumentation capability: ground truth behind an oracle's public IDs.
/// Experiments hand attackers the Oracle only.
class Referee {
 public:
  explicit Referee(const Oracle& o) : o_(&o) {}

  const Instance& instance() const { return *o_->inst_; }
  World world() const { return o_->inst_->world(); }
  VertexId vertex_of(PublicId id) const { return o_->vertex_of_.at(id); }
  PublicId id_of(VertexId v) const { return o_->id_of_.at(v); }
  const BlockLabel& label_of(PublicId id) const { return o_->inst_->label_of(vertex_of(id)); }
  bool is_broken(PublicId id) const { return o_->inst_->is_broken(vertex_of(id)); }

  /// Whether any queried or answered vertex so far is broken.
  bool touched_broken() const { return o_->touched_broken_; }

 private:
  const Oracle* o_;
};

inline nlohmann::json to_json(const TranscriptEntry& e) {
  nlohmann::json j;
  j["step"] = e.step;
  j["queried_id"] = e.queried_id ? nlohmann::json(*e.queried_id) : nlohmann::json(nullptr);
  j["index"] = e.index;
  j["answer"] = e.answer ? nlohmann::json(*e.answer) : nlohmann::json(nullptr);
  return j;
}

inline TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  e.step = j.at("step").get<std::uint64_t>();
  if (!j.at("queried_id").is_null()) e.queried_id = j.at("queried_id").get<PublicId>();
  e.index = j.at("index").get<std::uint32_t>();
  if (!j.at("answer").is_null()) e.answer = j.at("answer").get<PublicId>();
  return e;
}

inline void write_transcript_jsonl(const std::vector<TranscriptEntry>& t, std::ostream& out) {
  for (const auto& e : t) out << to_json(e).dump() << '\n';
}

inline std::vector<TranscriptEntry> read_transcript_jsonl(std::istream& in) {
  std::vector<TranscriptEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(transcript_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("transcript line: ") + e.what());
    }
  }
  return out;
}

struct DiscoveryReport {
  std::uint64_t vertices = 0;
  std::uint64_t edges = 0;
  std::vector<bool> collision;  // per transcript entry
  std::vector<std::uint64_t> collision_steps;
  bool acyclic = true;
  /// Every new edge attached a vertex that had no discovered edge yet.
  bool leaf_appending = true;

  bool rooted_forest() const { return acyclic && leaf_appending; }
};

/// Replays a transcript into the discovered graph F_t and flags the steps
/// that attached an edge to an already non-singleton answer vertex.
inline DiscoveryReport discovered_graph(const std::vector<TranscriptEntry>& transcript) {
  DiscoveryReport rep;
  std::unordered_map<PublicId, std::uint32_t> degree;
  std::unordered_set<std::uint64_t> edges;
  std::unordered_map<PublicId, PublicId> parent;  // union-find for cycle detection
  auto find = [&](PublicId x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent.emplace(x, x);
      return x;
    }
    PublicId root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) {
      PublicId next = parent[x];
      parent[x] = root;
      x = next;
    }
    return root;
  };

  rep.collision.assign(transcript.size(), false);
  for (std::size_t t = 0; t < transcript.size(); ++t) {
    const auto& e = transcript[t];
    if (e.queried_id) find(*e.queried_id);
    if (e.answer) find(*e.answer);
    if (!e.queried_id || !e.answer) continue;
    const PublicId u = *e.queried_id;
    const PublicId v = *e.answer;
    const std::uint64_t key = u < v ? (std::uint64_t(u) << 32 | v) : (std::uint64_t(v) << 32 | u);
    if (!edges.insert(key).second) continue;
    if (degree[v] > 0) {
      rep.collision[t] = true;
      rep.collision_steps.push_back(e.step);
      rep.leaf_appending = false;
    }
    degree[u] += 1;
    degree[v] += 1;
    auto ru = find(u), rv = find(v);
    if (ru == rv) {
      rep.acyclic = false;
    } else {
      parent[ru] = rv;
    }
  }
  rep.vertices = parent.size();
  rep.edges = edges.size();
  return rep;
}

/// Q queries: one random_vertex draw, then Q-1 neighbor queries at uniform
/// indices in [1, max_degree] from the current endpoint (a Bottom answer
/// leaves the walk where it is).
inline void random_walk_queries(Oracle& o, std::uint64_t Q, Engine& rng) {
  if (Q == 0) return;
  PublicId cur = o.random_vertex();
  for (std::uint64_t q = 1; q < Q; ++q) {
    const auto i = static_cast<std::uint32_t>(1 + uniform_below(rng, o.max_degree()));
    if (auto a = o.query(cur, i)) cur = *a;
  }
}

/// Transcript of trial t at length Q in collision_experiment.
inline std::vector<TranscriptEntry> collision_transcript(const Instance& inst, std::uint64_t Q, std::uint64_t seed,
                                                         std::uint64_t t) {
  const auto trial_seed = derive_seed(derive_seed(seed, "collision", Q), "trial", t);
  Oracle o(inst, trial_seed);
  auto rng = make_engine(derive_seed(trial_seed, "walk"));
  random_walk_queries(o, Q, rng);
  return o.transcript();
}

struct CollisionPoint {
  std::uint64_t Q = 0;
  std::uint64_t trials = 0;
  std::uint64_t non_forest = 0;   // transcripts whose discovered graph is not a rooted forest
  std::uint64_t collided = 0;     // transcripts with at least one collision step
  std::uint64_t cyclic = 0;
  double frequency = 0.0;         // non_forest / trials
  Interval interval;
  double scale = 0.0;             // Q^2 d' / n
};

struct CollisionReport {
  std::vector<CollisionPoint> points;
  /// frequency[i+1] / frequency[i] (infinity when frequency[i] is 0).
  std::vector<double> ratios;
};

/// Random-walk transcripts of each length in `lengths` on one instance; trial
/// t of length Q uses its own oracle seeded from (seed, Q, t).
inline CollisionReport collision_experiment(const Instance& inst, const std::vector<std::uint64_t>& lengths,
                                            std::uint64_t trials, std::uint64_t seed,
                                            unsigned threads = worker_count()) {
  CollisionReport rep;
  const double dprime = to_double(inst.params.d_prime());
  for (auto Q : lengths) {
    struct Outcome {
      bool forest = true, collided = false, acyclic = true;
    };
    auto outcomes = parallel_map<Outcome>(
        trials,
        [&](std::size_t t) {
          const auto d = discovered_graph(collision_transcript(inst, Q, seed, t));
          return Outcome{d.rooted_forest(), !d.collision_steps.empty(), d.acyclic};
        },
        threads);
    CollisionPoint pt;
    pt.Q = Q;
    pt.trials = trials;
    for (const auto& x : outcomes) {
      pt.non_forest += !x.forest;
      pt.collided += x.collided;
      pt.cyclic += !x.acyclic;
    }
    pt.frequency = trials ? double(pt.non_forest) / double(trials) : 0.0;
    pt.interval = wilson(pt.non_forest, trials);
    pt.scale = double(Q) * double(Q) * dprime / double(inst.n());
    rep.points.push_back(pt);
  }
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const double a = rep.points[i - 1].frequency, b = rep.points[i].frequency;
    rep.ratios.push_back(a > 0 ? b / a : std::numeric_limits<double>::infinity());
  }
  return rep;
}

}  // namespace lcalab
