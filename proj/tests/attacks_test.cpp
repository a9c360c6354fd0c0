#include <gtest/gtest.h>

#include <set>

#include <algorithm>
#include <cmath>
#include <map>

#include "lcalab/attacks.hpp"

namespace lcalab {
namespace {

const Instance& big(Variant v) {
  static std::map<Variant, Instance> cache;
  auto it = cache.find(v);
  if (it == cache.end())
    it = cache.emplace(v, assemble_instance(build_params(4096, 8, 64, 4, v, World::yes, 21))).first;
  return it->second;
}

std::vector<PublicId> ids_with(const Referee& ref, GameLabel g, std::size_t limit,
                               bool include_broken = false) {
  std::vector<PublicId> out;
  for (VertexId v = 0; v < ref.instance().n() && out.size() < limit; ++v)
    if (GameLabel::of(ref.instance().label_of(v)) == g &&
        (include_broken || !ref.instance().is_broken(v)))
      out.push_back(ref.id_of(v));
  return out;
}

// An arbitrary graph wrapped as an instance so the oracle can serve it. Labels
// are meaningless here; only the adjacency matters.
Instance toy_instance(std::uint32_t n, const std::vector<std::pair<VertexId, VertexId>>& edges) {
  Instance inst;
  inst.params = build_params(64, 2, 16, 2, Variant::core_only, World::yes, 0);
  inst.blocks = {BlockLabel::S(1)};
  inst.block_begin = {0, n};
  inst.block_of.assign(n, 0);
  inst.set_edges(edges);
  return inst;
}

std::vector<std::pair<VertexId, VertexId>> random_bipartite(std::uint32_t left, std::uint32_t right,
                                                            double p, std::uint64_t seed) {
  auto rng = make_engine(seed);
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (VertexId u = 0; u < left; ++u)
    for (VertexId v = 0; v < right; ++v)
      if (bernoulli(rng, p)) edges.push_back({u, left + v});
  return edges;
}

TEST(ProbeS, OnlySVerticesProbeBottomAtSPlusOne) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 3);
  Referee ref(o);
  // Reduced variants keep the D blocks as isolated vertices; those and broken
  // vertices are outside the degree guarantee.
  int checked = 0;
  for (PublicId id = 0; id < o.n(); id += 37) {
    const auto v = ref.vertex_of(id);
    if (inst.degree(v) == 0 || inst.is_broken(v)) continue;
    EXPECT_EQ(probe_s(o, id), ref.label_of(id).kind == BlockKind::S) << id;
    ++checked;
  }
  EXPECT_GT(checked, 800);
}

TEST(B1Test, MatchesGroundTruthSNeighbor) {
  const auto& inst = big(Variant::full_hierarchy);
  Oracle o(inst, 4);
  Referee ref(o);
  const auto b1 = ids_with(ref, GameLabel::B(1), 1000);
  ASSERT_EQ(b1.size(), 1000u);
  int positives = 0;
  for (auto id : b1) {
    bool truth = false;
    for (auto u : inst.neighbors(ref.vertex_of(id))) truth = truth || inst.label_of(u).kind == BlockKind::S;
    const bool got = b1_test(o, id);
    EXPECT_EQ(got, truth) << id;
    positives += got;
  }
  // S demand of a B_1 vertex is roughly Poisson with mean s|S|/|B_1| = 4.
  EXPECT_GE(positives, 950);
}

TEST(B1Test, TopLevelAndSVerticesAreNegative) {
  const auto& inst = big(Variant::full_hierarchy);
  Oracle o(inst, 5);
  Referee ref(o);
  for (auto g : {GameLabel::A(8), GameLabel::B(8), GameLabel::S()})
    for (auto id : ids_with(ref, g, 200)) EXPECT_FALSE(b1_test(o, id)) << g.name();
}

TEST(D1Test, ThresholdsSitBetweenNeighboringFractions) {
  const auto th = d1_thresholds(PublicParams{4096, 8, 64, 4, Variant::single_delusive});
  ASSERT_TRUE(th.enabled);
  EXPECT_GT(th.d1_fraction, th.lower);
  EXPECT_LT(th.d1_fraction, th.upper);
  EXPECT_GT(th.lower, 0.0);
  EXPECT_FALSE(d1_thresholds(PublicParams{4096, 8, 64, 4, Variant::core_only}).enabled);
}

// At the acceptance parameters a D_1 vertex has only about 4 B_1 neighbors,
// so a few percent of them sit below the lower threshold whatever the sample
// size; k = 4, d = 128 gives the test room to show its sampling accuracy.
const Instance& d1_instance() {
  static const Instance inst =
      assemble_instance(build_params(2048, 4, 128, 4, Variant::single_delusive, World::yes, 23));
  return inst;
}

TEST(D1Test, SeparatesD1FromA2) {
  const auto& inst = d1_instance();
  Oracle o(inst, 6, Recording::count_only);
  Referee ref(o);
  const auto samples = default_d1_samples(o.public_params());
  auto rng = make_engine(6);
  // D_1 vertices are all broken here (the A_K surplus lands on the D side).
  const auto d1 = ids_with(ref, GameLabel::D(1), 200, true);
  const auto a2 = ids_with(ref, GameLabel::A(2), 200);
  ASSERT_GE(d1.size(), 100u);
  int d1_hits = 0, a2_hits = 0;
  for (auto id : d1) d1_hits += d1_test(o, id, samples, rng);
  for (auto id : a2) a2_hits += d1_test(o, id, samples, rng);
  EXPECT_GE(d1_hits, 0.95 * double(d1.size()));
  EXPECT_LE(a2_hits, 0.05 * double(a2.size()));
}

TEST(D1Test, SequentialVersionMatchesAccuracyWithFewerQueries) {
  const auto& inst = d1_instance();
  Oracle fixed(inst, 7, Recording::count_only), seq(inst, 7, Recording::count_only);
  Referee ref(fixed);
  const auto p = fixed.public_params();
  const auto samples = default_d1_samples(p);
  const auto th = d1_thresholds(p);
  const auto alts = d1_alternatives(p);
  auto r1 = make_engine(7), r2 = make_engine(8);
  for (auto g : {GameLabel::D(1), GameLabel::A(1), GameLabel::B(3), GameLabel::A(4)}) {
    const auto ids = ids_with(ref, g, 60, true);
    int fixed_yes = 0, seq_yes = 0;
    for (auto id : ids) {
      fixed_yes += d1_test(fixed, id, samples, r1, th);
      seq_yes += d1_test_sequential(seq, id, samples, r2, th, alts, 1e4);
    }
    const bool is_d1 = g == GameLabel::D(1);
    const double want = is_d1 ? 0.95 : 0.05;
    if (is_d1) {
      EXPECT_GE(seq_yes, want * double(ids.size())) << g.name();
      EXPECT_GE(fixed_yes, want * double(ids.size())) << g.name();
    } else {
      EXPECT_LE(seq_yes, want * double(ids.size())) << g.name();
      EXPECT_LE(fixed_yes, want * double(ids.size())) << g.name();
    }
  }
  EXPECT_LT(seq.query_count(), fixed.query_count());
}

TEST(D1Test, ZeroSamplesIsAlwaysFalse) {
  const auto& inst = d1_instance();
  Oracle o(inst, 8);
  Referee ref(o);
  auto rng = make_engine(8);
  for (auto id : ids_with(ref, GameLabel::D(1), 20, true)) EXPECT_FALSE(d1_test(o, id, 0, rng));
  EXPECT_EQ(o.query_count(), 0u);
}

TEST(Walk, FromSHitsImmediately) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 9);
  Referee ref(o);
  auto rng = make_engine(9);
  const auto s = ids_with(ref, GameLabel::S(), 1).front();
  auto prof = walk_hitting_profile(o, s, 50, 100, rng);
  EXPECT_EQ(prof.counts[0], 50u);
  EXPECT_EQ(prof.timeouts, 0u);
}

TEST(Walk, CoreHittingTimeSeparatesB1FromBk) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 10, Recording::count_only);
  Referee ref(o);
  auto rng = make_engine(10);
  auto from_b1 = walk_hitting_profile(o, ids_with(ref, GameLabel::B(1), 1).front(), 1000, 50000, rng);
  auto from_b8 = walk_hitting_profile(o, ids_with(ref, GameLabel::B(8), 1).front(), 1000, 50000, rng);
  EXPECT_EQ(from_b1.timeouts + from_b8.timeouts, 0u);
  const auto x = from_b1.samples(), y = from_b8.samples();
  const double se = std::hypot(standard_error(x), standard_error(y));
  EXPECT_LT(mean(x), mean(y));
  EXPECT_GE(mean(y) - mean(x), 2 * se);
}

TEST(Walk, QueriesUsedIsTheCounterDelta) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 11);
  auto rng = make_engine(11);
  o.query(0, 1);
  auto prof = walk_hitting_profile(o, 5, 20, 3000, rng);
  EXPECT_EQ(prof.queries_used + 1, o.query_count());
  EXPECT_EQ(prof.walks, 20u);
}

// The chance that a walk from a uniform non-S vertex meets D before S follows
// from the public chain by first-step analysis; the realized graph should agree.
TEST(Walk, FullHierarchyMeetsDAtTheChainRate) {
  const auto& inst = big(Variant::full_hierarchy);
  const auto pp = inst.params.public_view();
  const auto P = public_chain(pp);
  LabelIndex idx{pp.k};
  std::vector<double> h(P.size(), 0.0);
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next(P.size(), 0.0);
    for (std::size_t x = 1; x < P.size(); ++x) {
      if (idx.label(x).kind == BlockKind::D) {
        next[x] = 1.0;
        continue;
      }
      for (std::size_t y = 0; y < P.size(); ++y) next[x] += P[x][y] * h[y];
    }
    h = next;
  }
  const auto sizes = label_sizes(pp);
  double z = 0.0, expect = 0.0;
  for (std::size_t x = 1; x < P.size(); ++x)
    if (idx.label(x).kind != BlockKind::D) {
      z += sizes[x];
      expect += sizes[x] * h[x];
    }
  expect /= z;

  Oracle o(inst, 12, Recording::count_only);
  Referee ref(o);
  auto rng = make_engine(12);
  const int walks = 2000;
  int met = 0, started = 0;
  while (started < walks) {
    const PublicId start = o.random_vertex();
    const auto kind = ref.label_of(start).kind;
    if (kind == BlockKind::S || kind == BlockKind::D) continue;
    ++started;
    bool seen_d = false;
    WalkOptions wo;
    wo.on_visit = [&](PublicId v) { seen_d = seen_d || ref.label_of(v).kind == BlockKind::D; };
    std::uint32_t steps = 0;
    walk_once(o, start, 100000, rng, wo, steps);
    met += seen_d;
  }
  const auto ci = wilson(met, walks, 4.0);
  EXPECT_LE(ci.lo, expect);
  EXPECT_GE(ci.hi, expect);
}

TEST(LayerClassifier, SVertexAndUnknownOnZeroBudget) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 13);
  Referee ref(o);
  auto rng = make_engine(13);
  LayerClassifier clf(o.public_params());
  auto g = clf.classify(o, ids_with(ref, GameLabel::S(), 1).front(), 1000, rng);
  EXPECT_FALSE(g.unknown);
  EXPECT_EQ(g.label, GameLabel::S());
  EXPECT_EQ(g.queries_used, 1u);
  auto u = clf.classify(o, ids_with(ref, GameLabel::A(3), 1).front(), 0, rng);
  EXPECT_TRUE(u.unknown);
  EXPECT_EQ(u.queries_used, 0u);
  EXPECT_EQ(o.budget(), std::nullopt);  // caller's budget restored
}

TEST(LayerClassifier, CoreOnlyLayersAtLinearBudget) {
  const auto& inst = big(Variant::core_only);
  Oracle o(inst, 14, Recording::count_only);
  Referee ref(o);
  auto rng = make_engine(14);
  LayerClassifier clf(o.public_params());
  const double ln = std::log(double(o.n()));
  const auto budget = static_cast<std::uint64_t>(64 * 64 * ln * ln);
  int correct = 0, total = 0;
  for (int level = 1; level <= 8; ++level)
    for (auto kind : {BlockKind::A, BlockKind::B})
      for (auto id : ids_with(ref, GameLabel{kind, std::uint8_t(level)}, 2)) {
        const auto before = o.query_count();
        auto g = clf.classify(o, id, budget, rng);
        EXPECT_EQ(g.queries_used, o.query_count() - before);
        EXPECT_LE(g.queries_used, budget);
        correct += !g.unknown && g.level() == level && g.label.kind != BlockKind::D;
        ++total;
      }
  EXPECT_GE(correct, 0.8 * total);
}

TEST(GreedyMatch, IsolatedVertexCostsOneQuery) {
  auto inst = toy_instance(3, {{1, 2}});
  Oracle o(inst, 1);
  Referee ref(o);
  GreedyMatchOracle lca(o, 99);
  auto a = lca.query(ref.id_of(0));
  EXPECT_FALSE(a.matched);
  EXPECT_EQ(o.query_count(), 1u);
}

TEST(GreedyMatch, SingleEdgeBothEndsAgree) {
  auto inst = toy_instance(2, {{0, 1}});
  Oracle o(inst, 1);
  Referee ref(o);
  const PublicId a = ref.id_of(0), b = ref.id_of(1);
  EXPECT_EQ(greedy_match_oracle(o, a, 5).partner, b);
  EXPECT_EQ(greedy_match_oracle(o, b, 5).partner, a);
}

// Offline reference: scan all edges in rank order and keep each one whose
// endpoints are both still free.
TEST(GreedyMatch, AgreesWithOfflineGreedyAndIsMaximal) {
  for (std::uint64_t g = 0; g < 30; ++g) {
    const std::uint32_t left = 20 + g * 3, right = 25 + g * 2;
    const auto edges = random_bipartite(left, right, 0.02 + 0.005 * double(g), 100 + g);
    auto inst = toy_instance(left + right, edges);
    Oracle o(inst, 200 + g);
    Referee ref(o);
    GreedyMatchOracle lca(o, 300 + g);

    std::vector<std::tuple<std::uint64_t, VertexId, VertexId>> ranked;
    for (auto [u, v] : edges) ranked.push_back({lca.rank(ref.id_of(u), ref.id_of(v)), u, v});
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::optional<VertexId>> mate(inst.n());
    for (auto [r, u, v] : ranked)
      if (!mate[u] && !mate[v]) {
        mate[u] = v;
        mate[v] = u;
      }

    std::vector<std::optional<VertexId>> got(inst.n());
    for (VertexId v = 0; v < inst.n(); ++v) {
      auto a = lca.query(ref.id_of(v));
      ASSERT_EQ(a.matched, a.partner.has_value());
      if (a.partner) got[v] = ref.vertex_of(*a.partner);
    }
    for (VertexId v = 0; v < inst.n(); ++v) {
      EXPECT_EQ(got[v], mate[v]) << "graph " << g << " vertex " << v;
      if (got[v]) {
        EXPECT_EQ(got[*got[v]], v);
      }
    }
    for (auto [u, v] : edges) EXPECT_TRUE(got[u] || got[v]) << "edge left uncovered";
  }
}

TEST(EstimateMatchingSize, PerfectAndEmptyGraphs) {
  std::vector<std::pair<VertexId, VertexId>> pm;
  for (VertexId v = 0; v < 20; ++v) pm.push_back({v, 20 + v});
  auto full = toy_instance(40, pm);
  Oracle o(full, 1);
  GreedyMatchOracle lca(o, 2);
  EXPECT_DOUBLE_EQ(estimate_matching_size(o, 50, [&](PublicId v) { return lca.query(v).matched; }), 20.0);

  auto empty = toy_instance(40, {});
  Oracle e(empty, 1);
  GreedyMatchOracle lca2(e, 2);
  EXPECT_DOUBLE_EQ(estimate_matching_size(e, 50, [&](PublicId v) { return lca2.query(v).matched; }), 0.0);
  EXPECT_THROW(estimate_matching_size(e, 0, [](PublicId) { return true; }), InputError);
}

TEST(EstimateMatchingSize, UnbiasedOnTinyGraph) {
  // Path 0-1-2-3-4 with the matching {0-1, 2-3}: mu' = 2 of n = 5.
  auto inst = toy_instance(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  std::vector<double> xs;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    Oracle o(inst, seed);
    Referee ref(o);
    xs.push_back(estimate_matching_size(o, 1, [&](PublicId id) { return ref.vertex_of(id) < 4; }));
  }
  EXPECT_NEAR(mean(xs), 2.0, 4 * standard_error(xs));
}

TEST(EstimateMatchingSize, WithinEpsNOnYesInstance) {
  const auto p = build_params(1024, 4, 64, 4, Variant::full_hierarchy, World::yes, 31);
  const auto inst = assemble_instance(p);
  const auto mm = hopcroft_karp(inst);
  std::vector<bool> matched(inst.n(), false);
  for (auto [u, v] : mm.matching) matched[u] = matched[v] = true;
  const double eps = 0.25;
  const auto t = static_cast<std::uint64_t>(64 / (eps * eps));
  int good = 0;
  const int trials = 20;
  for (int i = 0; i < trials; ++i) {
    Oracle o(inst, 500 + i, Recording::count_only);
    Referee ref(o);
    const double est = estimate_matching_size(
        o, t, [&](PublicId id) { return bool(matched[ref.vertex_of(id)]); });
    good += std::abs(est - double(mm.size)) <= eps * double(inst.n());
  }
  EXPECT_GE(good, 0.9 * trials);
}

TEST(Distinguisher, RefereeExactMatchingIsNearPerfect) {
  // The YES lower bound only clears the NO upper bound for larger k, so this
  // runs at the acceptance parameters.
  const auto base = build_params(4096, 8, 64, 4, Variant::full_hierarchy, World::yes, 0);
  DistinguisherOptions opt;
  opt.instance_pool = 2;
  auto rep = world_distinguisher(base, "referee_hk", referee_hk_strategy(), ~std::uint64_t{0}, 200, 41, opt);
  EXPECT_GE(rep.accuracy, 0.99);
  EXPECT_EQ(rep.trials, 200u);
  EXPECT_LE(rep.wilson_lo, rep.accuracy);
  EXPECT_GE(rep.wilson_hi, rep.accuracy);
}

TEST(Distinguisher, RefereeIsWithheldFromOrdinaryStrategies) {
  const auto base = build_params(64, 2, 16, 2, Variant::full_hierarchy, World::yes, 0);
  DistinguisherOptions opt;
  opt.instance_pool = 1;
  bool saw_referee = false;
  Strategy spy = [&](Oracle&, const StrategyContext& ctx) {
    saw_referee = saw_referee || ctx.referee != nullptr;
    return World::yes;
  };
  world_distinguisher(base, "spy", spy, 10, 5, 1, opt);
  EXPECT_FALSE(saw_referee);
}

TEST(Distinguisher, CoinIsAtChance) {
  const auto base = build_params(64, 2, 16, 2, Variant::full_hierarchy, World::yes, 0);
  DistinguisherOptions opt;
  opt.instance_pool = 2;
  auto rep = world_distinguisher(base, "coin", coin_strategy(), 0, 1000, 42, opt);
  EXPECT_LE(rep.wilson_lo, 0.5);
  EXPECT_GE(rep.wilson_hi, 0.5);
  EXPECT_EQ(rep.mean_queries, 0.0);
}

TEST(Distinguisher, BudgetedStrategiesStayNearChanceAtK8) {
  const auto base = build_params(4096, 8, 64, 4, Variant::full_hierarchy, World::yes, 0);
  const double ln = std::log(double(base.n()));
  const auto budget = static_cast<std::uint64_t>(64.0 * 64.0 * ln * ln);
  DistinguisherOptions opt;
  opt.instance_pool = 2;
  for (const std::string name : {"random_walk", "layer_then_walk", "greedy_estimate"}) {
    auto rep = world_distinguisher(base, name, make_strategy(name), budget, 100, 43, opt);
    EXPECT_LE(rep.accuracy, 0.6) << name;
    for (const auto& t : rep.per_trial) EXPECT_LE(t.queries_used, budget) << name;
  }
}

TEST(Distinguisher, UnknownStrategyNameThrows) {
  EXPECT_THROW(make_strategy("oracle_peek"), InputError);
}

TEST(ClassifierExperiment, DistinctVerticesAboveMinLevel) {
  const auto& inst = big(Variant::core_only);
  const auto budget = classifier_budget(inst.params.public_view(), 64, 1);
  const double ln = std::log(double(inst.n()));
  EXPECT_EQ(budget, static_cast<std::uint64_t>(64 * 64 * ln * ln));
  const auto rep = classifier_experiment(inst, budget, 12, 3, 5, 2);
  ASSERT_EQ(rep.per_vertex.size(), 12u);
  std::set<VertexId> seen;
  std::uint64_t correct = 0;
  for (const auto& t : rep.per_vertex) {
    EXPECT_TRUE(seen.insert(t.vertex).second);
    EXPECT_GE(t.truth.level, 3);
    EXPECT_TRUE(t.truth.kind == BlockKind::A || t.truth.kind == BlockKind::B);
    EXPECT_LE(t.guess.queries_used, budget);
    correct += t.correct;
  }
  EXPECT_EQ(rep.correct, correct);
  EXPECT_DOUBLE_EQ(rep.accuracy, double(correct) / 12.0);
  EXPECT_GE(rep.accuracy, 0.75);
  const auto again = classifier_experiment(inst, budget, 12, 3, 5, 1);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(again.per_vertex[i].vertex, rep.per_vertex[i].vertex);
    EXPECT_EQ(again.per_vertex[i].correct, rep.per_vertex[i].correct);
  }
}

TEST(ClassifierExperiment, ZeroBudgetIsAllUnknownAndPoolIsChecked) {
  const auto& inst = big(Variant::core_only);
  const auto rep = classifier_experiment(inst, 0, 5, 1, 1, 1);
  EXPECT_EQ(rep.unknown, 5u);
  EXPECT_EQ(rep.correct, 0u);
  EXPECT_THROW(classifier_experiment(inst, 0, inst.n(), 1, 1, 1), InputError);
}

}  // namespace
}  // namespace lcalab
