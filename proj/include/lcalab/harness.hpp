#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/attacks.hpp"
#include "lcalab/errors.hpp"
#include "lcalab/instance.hpp"
#include "lcalab/instance_io.hpp"
#include "lcalab/matching.hpp"
#include "lcalab/oracle.hpp"
#include "lcalab/params.hpp"
#include "lcalab/report.hpp"
#include "lcalab/toml.hpp"
#include "lcalab/treegame.hpp"

namespace lcalab {

inline constexpr const char* kLabVersion = "0.1.0";

enum class ExperimentKind { gap, collision, classifier, distinguisher, treegame_mixer, treegame_badevent, audit };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::gap:
      return "gap";
    case ExperimentKind::collision:
      return "collision";
    case ExperimentKind::classifier:
      return "classifier";
    case ExperimentKind::distinguisher:
      return "distinguisher";
    case ExperimentKind::treegame_mixer:
      return "treegame-mixer";
    case ExperimentKind::treegame_badevent:
      return "treegame-badevent";
    case ExperimentKind::audit:
      return "audit";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::gap, ExperimentKind::collision, ExperimentKind::classifier,
                 ExperimentKind::distinguisher, ExperimentKind::treegame_mixer, ExperimentKind::treegame_badevent,
                 ExperimentKind::audit})
    if (to_string(k) == s) return k;
  throw InputError("unknown experiment kind '" + s + "'");
}

/// A parsed experiment config. `options` holds the kind-specific keys with
/// defaults filled in; `source` is the config exactly as parsed, which is
/// what the config hash covers.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::gap;
  std::vector<ConstructionParams> grid;
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;
  std::string output = ".";
  nlohmann::json options = nlohmann::json::object();
  nlohmann::json source = nlohmann::json::object();
};

namespace detail {

inline std::uint64_t get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    throw InputError("'" + key + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

inline double get_number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw InputError("'" + key + "' must be a number");
  return j.get<double>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key) {
  if (!j.is_string()) throw InputError("'" + key + "' must be a string");
  return j.get<std::string>();
}

// Kind-specific keys and their defaults.
inline nlohmann::json option_defaults(ExperimentKind k) {
  using nlohmann::json;
  switch (k) {
    case ExperimentKind::gap:
      return json::object();
    case ExperimentKind::collision:
      return {{"lengths", {8, 16, 32}}, {"world", "YES"}, {"save_transcripts", 0}};
    case ExperimentKind::classifier:
      return {{"world", "YES"},     {"vertices", 200},        {"min_level", 1},
              {"budget", 0},        {"budget_constant", 64.0}, {"budget_power", 2}};
    case ExperimentKind::distinguisher:
      return {{"strategies", {"random_walk", "layer_then_walk", "greedy_estimate", "coin"}},
              {"budgets", json::array()},
              {"budget_constant", 64.0},
              {"budget_powers", {2}},
              {"instance_pool", 2}};
    case ExperimentKind::treegame_mixer:
      return {{"policy", "random_child"}, {"branching", 4},      {"tree_size", 200},
              {"min_conditioned", 0},     {"bound_constant", 8.0}, {"tolerance", 1.05}};
    case ExperimentKind::treegame_badevent:
      return {{"policy", "bfs"}, {"branching", 4}, {"tree_size", 200}, {"bound_constant", 8.0}, {"tv_trials", 0}};
    case ExperimentKind::audit:
      return {{"world", "YES"}, {"broken_constant", 12.0}, {"save_instances", false}};
  }
  return json::object();
}

// Every scalar or array entry of [params] becomes one grid axis.
inline std::vector<ConstructionParams> expand_grid(const nlohmann::json& params) {
  if (!params.is_object()) throw InputError("[params] table is required");
  static const std::vector<std::string> axes{"N", "k", "d", "s", "variant"};
  for (const auto& [key, _] : params.items())
    if (std::find(axes.begin(), axes.end(), key) == axes.end()) throw InputError("unknown params key '" + key + "'");
  std::vector<std::vector<nlohmann::json>> values;
  for (const auto& a : axes) {
    if (!params.contains(a)) {
      if (a == "variant") {
        values.push_back({"full_hierarchy"});
        continue;
      }
      throw InputError("params." + a + " is required");
    }
    const auto& v = params.at(a);
    if (v.is_array()) {
      if (v.empty()) throw InputError("params." + a + " is an empty list");
      values.emplace_back(v.begin(), v.end());
    } else {
      values.push_back({v});
    }
  }
  std::vector<ConstructionParams> grid;
  std::vector<std::size_t> at(axes.size(), 0);
  for (;;) {
    auto num = [&](std::size_t i) {
      const auto& v = values[i][at[i]];
      if (!v.is_number_integer()) throw InputError("params." + axes[i] + " must be an integer");
      return v.get<std::int64_t>();
    };
    const auto& var = values[4][at[4]];
    if (!var.is_string()) throw InputError("params.variant must be a string");
    grid.push_back(build_params(num(0), num(1), num(2), num(3), parse_variant(var.get<std::string>()), World::yes, 0));
    std::size_t i = axes.size();
    while (i > 0) {
      --i;
      if (++at[i] < values[i].size()) break;
      at[i] = 0;
      if (i == 0) return grid;
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config must be a table");
  ExperimentConfig c;
  c.source = j;
  static const std::set<std::string> common{"experiment", "seed", "trials", "output", "params"};
  if (!j.contains("experiment")) throw InputError("'experiment' is required");
  c.kind = parse_experiment_kind(detail::get_string(j.at("experiment"), "experiment"));
  if (j.contains("seed")) c.seed = detail::get_count(j.at("seed"), "seed");
  if (j.contains("trials")) c.trials = detail::get_count(j.at("trials"), "trials");
  if (c.trials < 1) throw InputError("trials must be >= 1");
  if (j.contains("output")) c.output = detail::get_string(j.at("output"), "output");
  if (std::filesystem::path(c.output).is_absolute()) throw InputError("output must be relative to --out");
  c.grid = detail::expand_grid(j.contains("params") ? j.at("params") : nlohmann::json());
  c.options = detail::option_defaults(c.kind);
  for (const auto& [key, value] : j.items()) {
    if (common.count(key)) continue;
    if (!c.options.contains(key))
      throw InputError("unknown key '" + key + "' for experiment " + to_string(c.kind));
    if (value.type() != c.options.at(key).type() &&
        !(value.is_number() && c.options.at(key).is_number()))
      throw InputError("key '" + key + "' has the wrong type");
    c.options[key] = value;
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& toml_text) { return parse_config(toml::parse(toml_text)); }

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(c.source.dump())); }

// ---------------------------------------------------------------------------
// Experiment runners. Each returns the tables to emit plus any extra files.

struct RunOutput {
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> files;  // relative path, bytes
};

namespace detail {

inline std::vector<std::string> param_columns() { return {"N", "k", "d", "s", "variant"}; }

inline std::vector<Cell> param_cells(const ConstructionParams& p) {
  return {std::uint64_t(p.N), std::uint64_t(p.k), std::uint64_t(p.d), std::uint64_t(p.s), to_string(p.variant)};
}

inline Table make_table(std::string name, const std::vector<std::string>& extra) {
  Table t;
  t.name = std::move(name);
  t.columns = param_columns();
  t.columns.insert(t.columns.end(), extra.begin(), extra.end());
  return t;
}

inline std::vector<Cell> row(const ConstructionParams& p, std::vector<Cell> extra) {
  auto r = param_cells(p);
  r.insert(r.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  return r;
}

inline RunOutput run_gap(const ExperimentConfig& c, unsigned threads) {
  auto detail = make_table("gap_report", {"world", "trial", "seed", "mu", "bound", "slack", "within_bound", "edges",
                                          "broken", "broken_bound", "broken_within", "extended_repairs"});
  auto summary = make_table(
      "gap_summary", {"trials", "yes_bound", "no_bound", "min_yes", "max_no", "observed_gap", "no_violations",
                      "no_within_frequency", "no_within_wilson_lo", "no_within_wilson_hi", "broken_within",
                      "broken_within_frequency", "broken_within_wilson_lo", "broken_within_wilson_hi",
                      "yes_near_perfect_fraction"});
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    const auto rep = matching_gap_experiment(p, c.trials, derive_seed(c.seed, "gap", gi), threads);
    std::uint64_t broken_ok = 0, no_ok = 0, no_total = 0;
    for (const auto& t : rep.trials) {
      const bool bw = double(t.broken) <= t.broken_bound;
      broken_ok += bw;
      if (t.world == World::no) {
        ++no_total;
        no_ok += t.within_bound;
      }
      detail.add(row(p, {to_string(t.world), t.trial, t.seed, t.mu, t.bound, t.slack, t.within_bound, t.edges,
                         t.broken, t.broken_bound, bw, std::uint64_t(t.extended_repairs)}));
    }
    const auto wn = wilson(no_ok, no_total);
    const auto wb = wilson(broken_ok, rep.trials.size());
    summary.add(row(p, {c.trials, rep.yes_bound, rep.no_bound, rep.min_yes, rep.max_no, std::int64_t(rep.observed_gap),
                        rep.no_violations, no_total ? double(no_ok) / double(no_total) : 0.0, wn.lo, wn.hi, broken_ok,
                        rep.trials.empty() ? 0.0 : double(broken_ok) / double(rep.trials.size()), wb.lo, wb.hi,
                        rep.yes_near_perfect_fraction}));
  }
  return {{detail, summary}, {}};
}

inline RunOutput run_collision(const ExperimentConfig& c, unsigned threads) {
  std::vector<std::uint64_t> lengths;
  for (const auto& q : c.options.at("lengths")) {
    const auto Q = get_count(q, "lengths");
    if (Q == 0) throw InputError("lengths must be >= 1");
    lengths.push_back(Q);
  }
  const World world = parse_world(c.options.at("world").get<std::string>());
  const auto save = get_count(c.options.at("save_transcripts"), "save_transcripts");
  auto table = make_table("collision_report", {"world", "n", "Q", "trials", "non_forest", "collided", "cyclic",
                                               "frequency", "wilson_lo", "wilson_hi", "scale", "ratio_to_previous"});
  RunOutput out;
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    const auto inst = assemble_instance(p.with_world(world).with_seed(derive_seed(c.seed, "collision-instance", gi)));
    const auto walk_seed = derive_seed(c.seed, "collision-walks", gi);
    const auto rep = collision_experiment(inst, lengths, c.trials, walk_seed, threads);
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
      const auto& pt = rep.points[i];
      table.add(row(p, {to_string(world), std::uint64_t(inst.n()), pt.Q, pt.trials, pt.non_forest, pt.collided,
                        pt.cyclic, pt.frequency, pt.interval.lo, pt.interval.hi, pt.scale,
                        i == 0 ? std::numeric_limits<double>::quiet_NaN() : rep.ratios[i - 1]}));
      for (std::uint64_t t = 0; t < std::min(save, c.trials); ++t) {
        std::ostringstream ss;
        write_transcript_jsonl(collision_transcript(inst, pt.Q, walk_seed, t), ss);
        out.files.push_back({"transcripts/grid" + std::to_string(gi) + "_Q" + std::to_string(pt.Q) + "_t" +
                                 std::to_string(t) + ".jsonl",
                             ss.str()});
      }
    }
  }
  out.tables.push_back(table);
  return out;
}

inline RunOutput run_classifier(const ExperimentConfig& c, unsigned threads) {
  const World world = parse_world(c.options.at("world").get<std::string>());
  const auto vertices = get_count(c.options.at("vertices"), "vertices");
  const auto min_level = get_count(c.options.at("min_level"), "min_level");
  auto detail = make_table("classifier_report", {"budget", "index", "vertex", "truth", "broken", "guess", "unknown",
                                                 "walks", "queries", "confidence", "correct"});
  auto summary = make_table("classifier_summary", {"world", "budget", "min_level", "vertices", "correct", "unknown",
                                                   "accuracy", "wilson_lo", "wilson_hi", "mean_queries"});
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    std::uint64_t budget = get_count(c.options.at("budget"), "budget");
    if (budget == 0)
      budget = classifier_budget(p.public_view(), get_number(c.options.at("budget_constant"), "budget_constant"),
                                 unsigned(get_count(c.options.at("budget_power"), "budget_power")));
    const auto inst = assemble_instance(p.with_world(world).with_seed(derive_seed(c.seed, "classifier-instance", gi)));
    const auto rep = classifier_experiment(inst, budget, vertices, std::uint32_t(min_level),
                                           derive_seed(c.seed, "classifier", gi), threads);
    for (const auto& t : rep.per_vertex)
      detail.add(row(p, {budget, t.index, std::uint64_t(t.vertex), t.truth.name(), t.broken,
                         t.guess.unknown ? std::string("unknown") : t.guess.label.name(), t.guess.unknown,
                         std::uint64_t(t.guess.walks), t.guess.queries_used, t.guess.confidence, t.correct}));
    summary.add(row(p, {to_string(world), budget, min_level, rep.vertices, rep.correct, rep.unknown, rep.accuracy,
                        rep.interval.lo, rep.interval.hi, rep.mean_queries}));
  }
  return {{detail, summary}, {}};
}

inline RunOutput run_distinguisher(const ExperimentConfig& c, unsigned threads) {
  std::vector<std::string> strategies;
  for (const auto& s : c.options.at("strategies")) strategies.push_back(get_string(s, "strategies"));
  for (const auto& s : strategies) make_strategy(s);  // reject unknown names before any work
  auto report = make_table("distinguisher_report",
                           {"strategy", "budget", "trials", "accuracy", "wilson_lo", "wilson_hi", "mean_queries"});
  auto detail = make_table("distinguisher_trials",
                           {"strategy", "budget", "trial", "truth", "guess", "queries_used", "budget_escaped"});
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    std::vector<std::uint64_t> budgets;
    for (const auto& b : c.options.at("budgets")) budgets.push_back(get_count(b, "budgets"));
    if (budgets.empty())
      for (const auto& pw : c.options.at("budget_powers"))
        budgets.push_back(classifier_budget(p.public_view(), get_number(c.options.at("budget_constant"), "budget_constant"),
                                            unsigned(get_count(pw, "budget_powers"))));
    DistinguisherOptions opt;
    opt.instance_pool = get_count(c.options.at("instance_pool"), "instance_pool");
    opt.threads = threads;
    for (const auto& name : strategies) {
      for (auto budget : budgets) {
        const auto rep = world_distinguisher(p, name, make_strategy(name), budget, c.trials,
                                             derive_seed(c.seed, "distinguisher", gi), opt);
        report.add(row(p, {name, budget, rep.trials, rep.accuracy, rep.wilson_lo, rep.wilson_hi, rep.mean_queries}));
        for (const auto& t : rep.per_trial)
          detail.add(row(p, {name, budget, t.trial, to_string(t.truth), to_string(t.guess), t.queries_used,
                             t.budget_escaped}));
      }
    }
  }
  return {{report, detail}, {}};
}

inline GameSetup game_setup(const ExperimentConfig& c, const ConstructionParams& p) {
  GameSetup s;
  s.params = p.public_view();
  s.policy = get_string(c.options.at("policy"), "policy");
  s.branching = std::uint32_t(get_count(c.options.at("branching"), "branching"));
  s.tree_size = get_count(c.options.at("tree_size"), "tree_size");
  if (s.tree_size < 1) throw InputError("tree_size must be >= 1");
  return s;
}

inline RunOutput run_mixer(const ExperimentConfig& c, unsigned threads) {
  auto summary = make_table("treegame_mixer_summary",
                            {"policy", "tree_size", "trials", "bad_path_trials", "bad_path_frequency", "wilson_lo",
                             "wilson_hi", "bad_path_bound", "conditioned_games", "flat_games", "flat_fraction",
                             "flat_wilson_lo", "flat_wilson_hi", "tolerance", "max_ratio", "median_ratio",
                             "planted_ratio"});
  auto detail = make_table("treegame_mixer_report", {"policy", "tree_size", "game", "ratio", "flat"});
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    const auto setup = game_setup(c, p);
    MixerOptions opt;
    opt.bound_constant = get_number(c.options.at("bound_constant"), "bound_constant");
    opt.tolerance = get_number(c.options.at("tolerance"), "tolerance");
    opt.min_conditioned = get_count(c.options.at("min_conditioned"), "min_conditioned");
    opt.threads = threads;
    const auto rep = mixer_hit_experiment(setup, make_game_policy(setup.policy, setup.branching), c.trials,
                                          derive_seed(c.seed, "treegame-mixer", gi), opt);
    const double planted = root_posterior(planted_s_path(setup.params)).ratio(top_level_labels(p.k));
    const auto wf = wilson(rep.flat_games, rep.conditioned_games);
    summary.add(row(p, {setup.policy, std::uint64_t(setup.tree_size), rep.trials, rep.bad_path_trials,
                        rep.bad_path_frequency, rep.bad_path_interval.lo, rep.bad_path_interval.hi, rep.bad_path_bound,
                        rep.conditioned_games, rep.flat_games, rep.flat_fraction, wf.lo, wf.hi, rep.tolerance,
                        rep.max_ratio, rep.median_ratio, planted}));
    for (std::size_t i = 0; i < rep.ratios.size(); ++i)
      detail.add(row(p, {setup.policy, std::uint64_t(setup.tree_size), std::uint64_t(i), rep.ratios[i],
                         rep.ratios[i] <= rep.tolerance}));
  }
  return {{summary, detail}, {}};
}

inline RunOutput run_badevent(const ExperimentConfig& c, unsigned threads) {
  auto summary = make_table("treegame_badevent_summary",
                            {"policy", "tree_size", "trials", "games_with_crucial", "bad_events", "frequency",
                             "wilson_lo", "wilson_hi", "bound", "tv_trials", "tv_yes_kept", "tv_no_kept",
                             "tv_distance"});
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    const auto setup = game_setup(c, p);
    BadEventOptions opt;
    opt.bound_constant = get_number(c.options.at("bound_constant"), "bound_constant");
    opt.tv_trials = get_count(c.options.at("tv_trials"), "tv_trials");
    opt.threads = threads;
    const auto rep = bad_event_experiment(setup, make_game_policy(setup.policy, setup.branching), c.trials,
                                          derive_seed(c.seed, "treegame-badevent", gi), opt);
    summary.add(row(p, {setup.policy, std::uint64_t(setup.tree_size), rep.trials, rep.games_with_crucial,
                        rep.bad_events, rep.frequency, rep.interval.lo, rep.interval.hi, rep.bound, rep.tv_trials,
                        rep.tv_yes_kept, rep.tv_no_kept, rep.tv_distance}));
  }
  return {{summary}, {}};
}

inline RunOutput run_audit(const ExperimentConfig& c, unsigned threads) {
  const World world = parse_world(c.options.at("world").get<std::string>());
  AuditOptions aopt;
  aopt.broken_constant = get_number(c.options.at("broken_constant"), "broken_constant");
  const bool save = c.options.at("save_instances").get<bool>();
  auto detail = make_table("audit_report", {"world", "instance", "seed", "n", "edges", "broken", "broken_bound",
                                            "extended_repairs", "ok", "violations"});
  auto summary = make_table("audit_summary", {"world", "instances", "clean", "clean_frequency", "wilson_lo",
                                              "wilson_hi", "max_broken", "broken_bound"});
  RunOutput out;
  for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
    const auto& p = c.grid[gi];
    struct One {
      std::uint64_t seed = 0;
      AuditReport audit;
      std::string bytes;
    };
    const auto results = parallel_map<One>(
        c.trials,
        [&](std::size_t i) {
          One r;
          r.seed = derive_seed(derive_seed(c.seed, "audit", gi), "instance", i);
          const auto inst = assemble_instance(p.with_world(world).with_seed(r.seed));
          r.audit = audit_instance(inst, aopt);
          if (save) r.bytes = encode_instance(inst);
          return r;
        },
        threads);
    std::uint64_t clean = 0, max_broken = 0;
    double bound = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& a = results[i].audit;
      std::string v;
      for (const auto& s : a.violations) v += (v.empty() ? "" : "; ") + s;
      clean += a.ok();
      max_broken = std::max(max_broken, a.broken);
      bound = a.broken_bound;
      detail.add(row(p, {to_string(world), std::uint64_t(i), results[i].seed, a.n, a.edges, a.broken, a.broken_bound,
                         std::uint64_t(a.extended_repairs), a.ok(), v}));
      if (save)
        out.files.push_back(
            {"instances/grid" + std::to_string(gi) + "_" + std::to_string(i) + ".lcam", results[i].bytes});
    }
    const auto w = wilson(clean, c.trials);
    summary.add(row(p, {to_string(world), c.trials, clean, double(clean) / double(c.trials), w.lo, w.hi, max_broken,
                        bound}));
  }
  out.tables = {detail, summary};
  return out;
}

}  // namespace detail

inline RunOutput run_experiment(const ExperimentConfig& c, unsigned threads = worker_count()) {
  switch (c.kind) {
    case ExperimentKind::gap:
      return detail::run_gap(c, threads);
    case ExperimentKind::collision:
      return detail::run_collision(c, threads);
    case ExperimentKind::classifier:
      return detail::run_classifier(c, threads);
    case ExperimentKind::distinguisher:
      return detail::run_distinguisher(c, threads);
    case ExperimentKind::treegame_mixer:
      return detail::run_mixer(c, threads);
    case ExperimentKind::treegame_badevent:
      return detail::run_badevent(c, threads);
    case ExperimentKind::audit:
      return detail::run_audit(c, threads);
  }
  throw InputError("unhandled experiment kind");
}

// ---------------------------------------------------------------------------
// Runs on disk: artifacts plus a manifest sufficient for replay.

struct RunResult {
  std::filesystem::path dir;
  std::vector<std::string> artifacts;  // relative to dir, in write order
  std::string config_hash;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the experiment described by `config_text` and writes every artifact
/// and manifest.json into `dir`.
inline RunResult run_to_directory(const std::string& config_text, const std::filesystem::path& dir,
                                  unsigned threads = worker_count()) {
  const auto cfg = parse_config_text(config_text);
  auto out = run_experiment(cfg, threads);
  RunResult res;
  res.dir = dir;
  res.config_hash = config_hash(cfg);
  std::filesystem::create_directories(dir);
  write_text(dir / "config.toml", config_text);
  for (const auto& t : out.tables)
    for (const auto& f : emit_report(t, dir)) res.artifacts.push_back(f);
  for (const auto& [path, bytes] : out.files) {
    write_text(dir / path, bytes);
    res.artifacts.push_back(path);
  }
  nlohmann::ordered_json m;
  m["lab_version"] = kLabVersion;
  m["lcam_version"] = kLcamVersion;
  m["compiler"] = __VERSION__;
  m["experiment"] = to_string(cfg.kind);
  m["seed"] = cfg.seed;
  m["config_hash"] = res.config_hash;
  m["config_text"] = config_text;
  m["threads"] = threads;
  auto arts = nlohmann::ordered_json::array();
  for (const auto& a : res.artifacts) {
    const auto bytes = slurp(dir / a);
    arts.push_back({{"path", a}, {"bytes", bytes.size()}, {"fnv1a", hex64(fnv1a(bytes))}});
  }
  m["artifacts"] = arts;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return res;
}

struct ReplayResult {
  std::filesystem::path dir;
  std::vector<std::string> compared;
  std::vector<std::string> mismatches;
  bool identical() const { return mismatches.empty(); }
};

/// Re-runs a manifest's config into `dir` and compares every artifact byte
/// for byte with the original run next to the manifest.
inline ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& dir,
                           unsigned threads = worker_count()) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(slurp(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  const auto original = manifest_path.parent_path();
  if (std::filesystem::weakly_canonical(dir) == std::filesystem::weakly_canonical(original))
    throw InputError("replay directory must differ from the original run");
  const auto cfg_text = m.at("config_text").get<std::string>();
  if (config_hash(parse_config_text(cfg_text)) != m.at("config_hash").get<std::string>())
    throw FormatError("manifest config does not match its hash");
  const auto res = run_to_directory(cfg_text, dir, threads);
  ReplayResult r;
  r.dir = dir;
  std::set<std::string> produced(res.artifacts.begin(), res.artifacts.end());
  for (const auto& a : m.at("artifacts")) {
    const auto path = a.at("path").get<std::string>();
    r.compared.push_back(path);
    if (!produced.count(path)) {
      r.mismatches.push_back(path + ": not produced by the replay");
      continue;
    }
    const auto replayed = slurp(dir / path);
    std::string before;
    try {
      before = slurp(original / path);
    } catch (const InputError&) {
      r.mismatches.push_back(path + ": missing from the original run");
      continue;
    }
    if (before != replayed) r.mismatches.push_back(path + ": bytes differ");
    if (hex64(fnv1a(replayed)) != a.at("fnv1a").get<std::string>())
      r.mismatches.push_back(path + ": hash differs from the manifest");
  }
  for (const auto& p : res.artifacts)
    if (std::none_of(r.compared.begin(), r.compared.end(), [&](const std::string& c) { return c == p; }))
      r.mismatches.push_back(p + ": not in the original manifest");
  return r;
}

/// Machine-readable error record for a failed command.
inline nlohmann::ordered_json error_report(const std::exception& e, const std::string& command) {
  std::string type = "Error";
  if (dynamic_cast<const ParamsRejected*>(&e)) {
    type = "ParamsRejected";
  } else if (dynamic_cast<const FormatError*>(&e)) {
    type = "FormatError";
  } else if (dynamic_cast<const InputError*>(&e)) {
    type = "InputError";
  } else if (dynamic_cast<const InfeasibleAfterRepair*>(&e)) {
    type = "InfeasibleAfterRepair";
  } else if (dynamic_cast<const BudgetExhausted*>(&e)) {
    type = "BudgetExhausted";
  } else if (dynamic_cast<const TooLarge*>(&e)) {
    type = "TooLarge";
  } else if (!dynamic_cast<const Error*>(&e)) {
    type = "InternalError";
  }
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["command"] = command;
  j["error"] = type;
  j["message"] = e.what();
  return j;
}

}  // namespace lcalab
