// Acceptance run: one PASS/FAIL line per criterion. A FAIL is a measured
// outcome, not a crash, so the process exits 0 unless something throws.
//
//   acceptance [--only 1,4,7] [--seed N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lcalab/attacks.hpp"
#include "lcalab/harness.hpp"
#include "lcalab/matching.hpp"
#include "lcalab/treegame.hpp"
#include "support/brute_force.hpp"

using namespace lcalab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::uint64_t master_seed = 20261016;

const ConstructionParams& acceptance_base() {
  static const auto p = build_params(4096, 8, 64, 4, Variant::full_hierarchy, World::yes, 1);
  return p;
}

// 1 -------------------------------------------------------------------------

Outcome row_sums() {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t rows = 0, bad = 0;
  std::string first_bad;
  for (std::uint32_t k : {2u, 4u, 8u})
    for (std::uint32_t d : {16u, 64u, 256u})
      for (std::uint32_t s : {1u, 2u, 4u})
        for (auto w : {World::yes, World::no})
          for (auto v : {Variant::core_only, Variant::single_delusive, Variant::full_hierarchy}) {
            const auto t = transition_table(build_params(4096, k, d, s, v, w, 1));
            const Rational want = Rational(d) * (1 + Rational(1, k * k * k)) + s;
            for (const auto& [from, row] : t.rows) {
              if (from.kind == BlockKind::S) continue;
              Rational sum = 0;
              for (const auto& e : row) sum += e.weight;
              ++rows;
              if (sum != want) {
                ++bad;
                if (first_bad.empty()) first_bad = from.name() + " k=" + std::to_string(k);
              }
            }
          }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {bad == 0 && secs < 1.0, std::to_string(rows) + " rows, " + std::to_string(bad) + " off" +
                                       (first_bad.empty() ? "" : " (first " + first_bad + ")") + ", " +
                                       fmt("%.3f s", secs)};
}

// 2, 3, 5 -------------------------------------------------------------------

const GapReport& gap_report() {
  static const GapReport rep = matching_gap_experiment(acceptance_base(), 50, derive_seed(master_seed, "gap"));
  return rep;
}

Outcome no_world_bound() {
  const auto& rep = gap_report();
  const std::uint64_t k = 8, N = 4096;
  std::uint64_t count = 0, over = 0, worst = 0;
  for (const auto& t : rep.trials) {
    if (t.world != World::no) continue;
    ++count;
    worst = std::max(worst, t.mu);
    // mu <= (2k + 4/k) N/4  <=>  4k mu <= (2k^2 + 4) N
    over += 4 * k * t.mu > (2 * k * k + 4) * N;
  }
  return {count == 50 && over == 0,
          std::to_string(count) + " NO instances, max mu " + std::to_string(worst) + " vs bound 16896, " +
              std::to_string(over) + " over"};
}

Outcome yes_no_gap() {
  const auto& rep = gap_report();
  return {rep.observed_gap >= 200, "min YES " + std::to_string(rep.min_yes) + ", max NO " +
                                       std::to_string(rep.max_no) + ", gap " + std::to_string(rep.observed_gap) +
                                       " (need >= 200)"};
}

Outcome broken_bound_rate() {
  const auto& rep = gap_report();
  const auto pub = acceptance_base().public_view();
  const double n = double(pub.n());
  const double bound = 12.0 * std::sqrt(n * to_double(pub.d_prime())) * std::log(n);
  std::uint64_t within = 0, worst = 0;
  for (const auto& t : rep.trials) {
    within += double(t.broken) <= bound;
    worst = std::max(worst, t.broken);
  }
  return {rep.trials.size() == 100 && within >= 99,
          std::to_string(within) + "/" + std::to_string(rep.trials.size()) + " within " + fmt("%.0f", bound) +
              ", max broken " + std::to_string(worst)};
}

// 4 -------------------------------------------------------------------------

// Exhaustive: for each row pick a column subset of the right size, then check
// the column sums. Independent of the Gale-Ryser test it checks.
bool realizable_by_rows(const Degrees& a, const Degrees& b) {
  std::uint64_t sa = 0, sb = 0;
  for (auto x : a) sa += x;
  for (auto x : b) sb += x;
  if (sa != sb) return false;
  const std::size_t q = b.size();
  std::vector<std::uint32_t> col(q, 0);
  std::function<bool(std::size_t)> go = [&](std::size_t i) {
    if (i == a.size()) {
      for (std::size_t j = 0; j < q; ++j)
        if (col[j] != b[j]) return false;
      return true;
    }
    for (std::uint32_t mask = 0; mask < (1u << q); ++mask) {
      if (std::uint32_t(__builtin_popcount(mask)) != a[i]) continue;
      bool ok = true;
      for (std::size_t j = 0; j < q; ++j) {
        col[j] += mask >> j & 1;
        ok = ok && col[j] <= b[j];
      }
      if (ok && go(i + 1)) {
        for (std::size_t j = 0; j < q; ++j) col[j] -= mask >> j & 1;
        return true;
      }
      for (std::size_t j = 0; j < q; ++j) col[j] -= mask >> j & 1;
    }
    return false;
  };
  return go(0);
}

void nonincreasing(std::size_t len, std::uint32_t max, std::uint32_t budget, Degrees& cur,
                   std::vector<Degrees>& out) {
  if (cur.size() == len) {
    out.push_back(cur);
    return;
  }
  const std::uint32_t hi = cur.empty() ? max : std::min(max, cur.back());
  for (std::uint32_t x = 0; x <= std::min(hi, budget); ++x) {
    cur.push_back(x);
    nonincreasing(len, max, budget - x, cur, out);
    cur.pop_back();
  }
}

Outcome repair_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = make_engine(derive_seed(master_seed, "repair"));
  std::uint64_t ok = 0;
  const std::uint64_t pairs = 10000;
  for (std::uint64_t t = 0; t < pairs; ++t) {
    const auto p = 64 + uniform_below(rng, 961), q = 64 + uniform_below(rng, 961);
    const double rho = 0.002 + 0.3 * uniform01(rng);
    std::binomial_distribution<std::uint32_t> ba(std::uint32_t(q), rho), bb(std::uint32_t(p), rho);
    Degrees a(p), b(q);
    for (auto& x : a) x = ba(rng);
    for (auto& x : b) x = bb(rng);
    std::uint64_t sa = 0, sb = 0;
    for (auto x : a) sa += x;
    for (auto x : b) sb += x;
    if (sa < sb) std::swap(a, b);
    try {
      auto a2 = repair_degrees(a, b).a_prime;
      std::sort(a2.begin(), a2.end(), std::greater<>());
      ok += check_bigraphic(a2, b);
    } catch (const InfeasibleAfterRepair&) {
    }
  }

  // Every pair of degree sequences with at most 4 entries per side and total
  // degree at most 12; the second sequence is also tried shuffled.
  std::uint64_t compared = 0, disagree = 0;
  for (std::size_t p = 1; p <= 4; ++p)
    for (std::size_t q = 1; q <= 4; ++q) {
      std::vector<Degrees> as, bs;
      Degrees cur;
      nonincreasing(p, std::uint32_t(q), 12, cur, as);
      nonincreasing(q, std::uint32_t(p), 12, cur, bs);
      for (const auto& a : as)
        for (const auto& b : bs) {
          std::uint64_t sa = 0, sb = 0;
          for (auto x : a) sa += x;
          for (auto x : b) sb += x;
          if (sa + sb > 12) continue;
          const bool truth = realizable_by_rows(a, b);
          auto b2 = b;
          shuffle(b2, rng);
          disagree += (check_bigraphic(a, b) != truth) + (check_bigraphic(a, b2) != truth);
          ++compared;
        }
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok == pairs && disagree == 0 && secs < 60,
          std::to_string(ok) + "/" + std::to_string(pairs) + " repaired pairs bigraphic; " + std::to_string(compared) +
              " small pairs, " + std::to_string(disagree) + " disagreements; " + fmt("%.1f s", secs)};
}

// 6 -------------------------------------------------------------------------

Outcome matcher_equivalence() {
  auto rng = make_engine(derive_seed(master_seed, "matcher"));
  std::uint64_t equal = 0, certified = 0;
  for (int t = 0; t < 500; ++t) {
    const auto left = std::uint32_t(1 + uniform_below(rng, 7)), right = std::uint32_t(1 + uniform_below(rng, 7));
    const auto edges = testing::random_bipartite(left, right, uniform01(rng), rng);
    const auto g = Graph::from_edges(left + right, edges);
    std::vector<std::uint8_t> color(left + right, 0);
    for (auto v = left; v < left + right; ++v) color[v] = 1;
    const auto r = hopcroft_karp(g.view(), color);
    equal += r.size == brute_force_matching(g.view());
    // Certificate checked against the edge list: a matching of edges in the
    // graph, and a cover of the same size touching every edge.
    std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set(edges.begin(), edges.end());
    std::set<std::uint32_t> used, cover(r.cover.begin(), r.cover.end());
    bool ok = r.matching.size() == r.size && cover.size() == r.size;
    for (auto [u, v] : r.matching)
      ok = ok && edge_set.count({std::min(u, v), std::max(u, v)}) && used.insert(u).second && used.insert(v).second;
    for (auto [u, v] : edges) ok = ok && (cover.count(u) || cover.count(v));
    certified += ok;
  }
  return {equal == 500 && certified == 500,
          std::to_string(equal) + "/500 equal, " + std::to_string(certified) + "/500 certified"};
}

// 7 -------------------------------------------------------------------------

Outcome posterior_equivalence() {
  const PublicParams params[] = {{64, 2, 16, 2, Variant::full_hierarchy},
                                 {4096, 3, 64, 4, Variant::full_hierarchy},
                                 {4096, 4, 64, 4, Variant::single_delusive}};
  auto rng = make_engine(derive_seed(master_seed, "posterior"));
  std::uint64_t equal = 0, total = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto& p = params[i % 3];
    auto model = std::make_shared<const GameModel>(p, i % 2 ? World::no : World::yes);
    const auto& idx = model->index();
    // Random support for the root prior over labels present in the variant.
    std::vector<GameLabel> support;
    for (std::size_t x = 0; x < idx.size(); ++x)
      if (model->has_row(x) && uniform01(rng) < 0.5) support.push_back(idx.label(x));
    if (support.empty()) support.push_back(GameLabel::A(p.k));
    auto g = new_game(model, uniform_prior(idx, support), derive_seed(master_seed, "posterior-game", i));
    const auto size = 1 + uniform_below(rng, 8);
    const char* policies[] = {"random_child", "dfs", "bfs"};
    grow(g, make_game_policy(policies[i % 3], 2 + std::uint32_t(i % 3)), size,
         derive_seed(master_seed, "posterior-policy", i));
    const auto want = testing::normalized(testing::enumerate_histories(g).all);
    const auto got = root_posterior(g, PosteriorMode::exact);
    ++total;
    equal += got.exact && *got.exact == want;
  }
  return {equal == total, std::to_string(equal) + "/" + std::to_string(total) + " games match exactly"};
}

// 8 -------------------------------------------------------------------------

Outcome mixer_flatness() {
  const auto t0 = std::chrono::steady_clock::now();
  const PublicParams p{4096, 2, 256, 2, Variant::full_hierarchy};
  MixerOptions opt;
  opt.min_conditioned = 1000;
  GameSetup setup{p, "random_child", 4, 200};
  const auto rep = mixer_hit_experiment(setup, make_game_policy(setup.policy, setup.branching), 1000,
                                        derive_seed(master_seed, "mixer"), opt);
  const double planted = root_posterior(planted_s_path(p)).ratio(top_level_labels(p.k));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string info;
  for (const char* other : {"bfs", "dfs"}) {
    GameSetup s2{p, other, 4, 200};
    const auto r2 = mixer_hit_experiment(s2, make_game_policy(other, 4), 1000, derive_seed(master_seed, "mixer"), opt);
    info += std::string(", ") + other + " " + fmt("%.3f", r2.flat_fraction);
  }
  return {rep.conditioned_games >= 1000 && rep.flat_fraction >= 0.95 && planted > 1.2 && secs < 300,
          "random_child: " + std::to_string(rep.flat_games) + "/" + std::to_string(rep.conditioned_games) +
              " bad-path-free games flat out of " + std::to_string(rep.trials) + " played (" +
              fmt("%.3f", rep.flat_fraction) + ", need 0.95), max ratio " + fmt("%.3f", rep.max_ratio) +
              ", planted ratio " + fmt("%.3f", planted) + ", " + fmt("%.0f s", secs) + " [info" + info + "]"};
}

// 9 -------------------------------------------------------------------------

Outcome attack_profile() {
  struct Arm {
    Variant v;
    unsigned power;
    double threshold;
    bool at_least;
  };
  const Arm arms[] = {{Variant::core_only, 1, 0.9, true},
                      {Variant::single_delusive, 2, 0.8, true},
                      {Variant::full_hierarchy, 2, 0.65, false}};
  bool pass = true;
  std::string detail;
  for (const auto& arm : arms) {
    const auto inst = assemble_instance(acceptance_base().with_seed(derive_seed(master_seed, "clf-instance"))
                                            .with_variant(arm.v));
    const auto budget = classifier_budget(inst.params.public_view(), 64, arm.power);
    const auto rep = classifier_experiment(inst, budget, 200, 1, derive_seed(master_seed, "clf", unsigned(arm.v)));
    const bool ok = arm.at_least ? rep.interval.lo > arm.threshold : rep.interval.hi < arm.threshold;
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : "; ") + to_string(arm.v) + " " + fmt("%.3f", rep.accuracy) + " [" +
              fmt("%.3f", rep.interval.lo) + "," + fmt("%.3f", rep.interval.hi) + "] " +
              (arm.at_least ? ">" : "<") + fmt("%.2f", arm.threshold) + " budget " + std::to_string(budget);
  }
  return {pass, detail};
}

// 10 ------------------------------------------------------------------------

Outcome collision_scaling() {
  const auto inst = assemble_instance(acceptance_base().with_seed(derive_seed(master_seed, "collision-instance")));
  const auto rep = collision_experiment(inst, {8, 16, 32}, 10000, derive_seed(master_seed, "collision"));
  bool pass = inst.n() == 35296 && rep.ratios.size() == 2;
  std::string detail = "n " + std::to_string(inst.n()) + ", frequencies";
  for (const auto& pt : rep.points) detail += " " + fmt("%.4f", pt.frequency);
  detail += ", ratios";
  for (double r : rep.ratios) {
    pass = pass && r >= 2 && r <= 8;
    detail += " " + fmt("%.2f", r);
  }
  return {pass, detail};
}

// 11 ------------------------------------------------------------------------

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Outcome replay_determinism() {
  const fs::path root = fs::temp_directory_path() / ("lcalab_acceptance_" + std::to_string(master_seed));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string big = "\n[params]\nN = 4096\nk = 8\nd = 64\ns = 4\n";
  const std::string small = "\n[params]\nN = 256\nk = 2\nd = 16\ns = 2\n";
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"row_gap", "experiment = \"gap\"\ntrials = 1" + big},
      {"audit", "experiment = \"audit\"\ntrials = 2\nsave_instances = true" + small},
      {"treegame_mixer",
       "experiment = \"treegame-mixer\"\ntrials = 100\n[params]\nN = 4096\nk = 2\nd = 256\ns = 2\n"},
      {"treegame_badevent",
       "experiment = \"treegame-badevent\"\ntrials = 100\ntv_trials = 200\n[params]\nN = 4096\nk = 2\nd = 256\ns = 2\n"},
      {"classifier", "experiment = \"classifier\"\nvertices = 4\nbudget_power = 1" + big + "variant = \"core_only\"\n"},
      {"collision", "experiment = \"collision\"\ntrials = 500\nlengths = [8, 16]\nsave_transcripts = 3" + big},
      {"distinguisher",
       "experiment = \"distinguisher\"\ntrials = 4\nstrategies = [\"coin\", \"random_walk\"]\nbudgets = [2000]\n"
       "instance_pool = 1" +
           small},
  };
  std::uint64_t identical = 0;
  std::string detail;
  for (const auto& [name, body] : configs) {
    const std::string text = "output = \"" + name + "\"\nseed = " + std::to_string(master_seed) + "\n" + body;
    const auto cfg = root / (name + ".toml");
    write_text(cfg, text);
    const std::string lab = shell_quote(LAB_BINARY) + " --out " + shell_quote(root.string());
    const int run = std::system((lab + " run --config " + shell_quote(cfg.string()) + " > /dev/null").c_str());
    const int rep = std::system((lab + " replay --manifest " + shell_quote((root / name / "manifest.json").string()) +
                                 " --dir " + shell_quote("replay_" + name) + " > /dev/null")
                                    .c_str());
    const bool ok = run == 0 && rep == 0;
    identical += ok;
    if (!ok) detail += " " + name + "(run " + std::to_string(run) + ", replay " + std::to_string(rep) + ")";
  }
  return {identical == configs.size(), std::to_string(identical) + "/" + std::to_string(configs.size()) +
                                           " experiment kinds replay byte-identical" +
                                           (detail.empty() ? "" : ";" + detail)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--seed", master_seed, "Master seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"row-sum identity", row_sums},
      {"NO-world matching bound", no_world_bound},
      {"YES/NO matching gap", yes_no_gap},
      {"Gale-Ryser and repair soundness", repair_soundness},
      {"broken-vertex bound", broken_bound_rate},
      {"exact matcher equivalence", matcher_equivalence},
      {"posterior equivalence", posterior_equivalence},
      {"mixer flatness", mixer_flatness},
      {"attack degradation profile", attack_profile},
      {"collision-rate scaling", collision_scaling},
      {"replay determinism", replay_determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  int passed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = criteria[i].second();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (out.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << out.detail << " ("
              << fmt("%.1f s", secs) << ")" << std::endl;
    passed += out.pass;
    ++ran;
  }
  std::cout << passed << "/" << ran << " criteria passed" << std::endl;
  return 0;
}
