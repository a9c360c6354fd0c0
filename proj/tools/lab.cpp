// lab: command-line front end for generating, auditing and running experiments.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lcalab/harness.hpp"

namespace fs = std::filesystem;
using namespace lcalab;

namespace {

// Relative output paths live under --out; inputs are taken as given.
fs::path under(const fs::path& out, const fs::path& p) { return p.is_absolute() ? p : out / p; }

int fail(const std::exception& e, const std::string& command, const fs::path* dir) {
  const auto report = error_report(e, command);
  std::cerr << report.dump() << "\n";
  if (dir) {
    try {
      write_text(*dir / "error.json", report.dump(2) + "\n");
    } catch (const std::exception&) {
    }
  }
  return dynamic_cast<const InputError*>(&e) ? 2 : 1;
}

void print_table(const nlohmann::ordered_json& t) {
  const auto& cols = t.at("columns");
  std::vector<std::size_t> width;
  for (const auto& c : cols) width.push_back(c.get<std::string>().size());
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : t.at("rows")) {
    std::vector<std::string> line;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto& v = r.at(cols[i].get<std::string>());
      std::string s = v.is_string() ? v.get<std::string>() : v.dump();
      width[i] = std::max(width[i], s.size());
      line.push_back(std::move(s));
    }
    cells.push_back(std::move(line));
  }
  std::cout << t.at("name").get<std::string>() << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i)
    std::cout << (i ? "  " : "") << std::setw(int(width[i])) << cols[i].get<std::string>();
  std::cout << "\n";
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) std::cout << (i ? "  " : "") << std::setw(int(width[i])) << line[i];
    std::cout << "\n";
  }
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lower-bound construction lab: instances, attacks and tree-game experiments"};
  app.require_subcommand(1);
  std::string out = ".";
  app.add_option("--out", out, "Directory that every output path is relative to")->capture_default_str();

  auto* gen = app.add_subcommand("generate", "Generate one instance and write it as .lcam");
  std::int64_t N = 4096, k = 8, d = 64, s = 4;
  std::string variant = "full_hierarchy", world = "YES", name = "instance.lcam";
  std::uint64_t seed = 1;
  bool strict = false;
  gen->add_option("--N", N)->capture_default_str();
  gen->add_option("--k", k)->capture_default_str();
  gen->add_option("--d", d)->capture_default_str();
  gen->add_option("--s", s)->capture_default_str();
  gen->add_option("--variant", variant, "core_only | single_delusive | full_hierarchy")->capture_default_str();
  gen->add_option("--world", world, "YES | NO")->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--name", name, "Output file name")->capture_default_str();
  gen->add_flag("--strict", strict, "Enforce the asymptotic parameter regime");

  auto* audit = app.add_subcommand("audit", "Audit an instance file; exit 0 when clean");
  std::string instance_path;
  double broken_constant = 12.0;
  audit->add_option("--instance", instance_path, "Instance file (.lcam)")->required();
  audit->add_option("--broken-constant", broken_constant)->capture_default_str();
  std::string audit_name;
  audit->add_option("--report", audit_name, "Also write the audit JSON to this file under --out");

  auto* run = app.add_subcommand("run", "Run an experiment config (TOML)");
  std::string config_path;
  run->add_option("--config", config_path, "Experiment config")->required();

  auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare artifacts byte for byte");
  std::string manifest_path, replay_dir = "replay";
  rep->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  rep->add_option("--dir", replay_dir, "Replay directory under --out")->capture_default_str();

  auto* report = app.add_subcommand("report", "Print the summary tables of a run");
  std::string run_dir;
  std::string format = "table";
  report->add_option("--run", run_dir, "Run directory (holding manifest.json) under --out")->required();
  report->add_option("--format", format, "table | json")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  const fs::path out_dir(out);

  if (*gen) {
    try {
      const auto p = build_params(N, k, d, s, parse_variant(variant), parse_world(world), seed, strict);
      for (const auto& w : regime_warnings(p)) std::cerr << "warning: " << w << "\n";
      const auto inst = assemble_instance(p);
      const auto path = under(out_dir, name);
      save_instance(inst, path.string());
      nlohmann::ordered_json j;
      j["instance"] = path.string();
      j["n"] = inst.n();
      j["edges"] = inst.edge_count();
      j["broken"] = inst.broken.size();
      std::cout << j.dump() << "\n";
      return 0;
    } catch (const std::exception& e) {
      return fail(e, "generate", nullptr);
    }
  }

  if (*audit) {
    try {
      const auto inst = load_instance(instance_path);
      AuditOptions opt;
      opt.broken_constant = broken_constant;
      const auto a = audit_instance(inst, opt);
      const auto j = to_json(a);
      std::cout << j.dump(2) << "\n";
      if (!audit_name.empty()) write_text(under(out_dir, audit_name), j.dump(2) + "\n");
      return a.ok() ? 0 : 3;
    } catch (const std::exception& e) {
      return fail(e, "audit", nullptr);
    }
  }

  if (*run) {
    fs::path dir = out_dir;
    try {
      const auto text = slurp(config_path);
      const auto cfg = parse_config_text(text);
      dir = under(out_dir, cfg.output);
      const auto res = run_to_directory(text, dir);
      nlohmann::ordered_json j;
      j["status"] = "ok";
      j["dir"] = res.dir.string();
      j["config_hash"] = res.config_hash;
      j["artifacts"] = res.artifacts;
      std::cout << j.dump() << "\n";
      return 0;
    } catch (const std::exception& e) {
      return fail(e, "run", &dir);
    }
  }

  if (*rep) {
    try {
      const auto r = replay(manifest_path, under(out_dir, replay_dir));
      nlohmann::ordered_json j;
      j["status"] = r.identical() ? "identical" : "different";
      j["dir"] = r.dir.string();
      j["compared"] = r.compared;
      j["mismatches"] = r.mismatches;
      std::cout << j.dump() << "\n";
      return r.identical() ? 0 : 4;
    } catch (const std::exception& e) {
      return fail(e, "replay", nullptr);
    }
  }

  if (*report) {
    try {
      const auto dir = under(out_dir, run_dir);
      const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
      if (format != "table" && format != "json") throw InputError("format must be table or json");
      auto all = nlohmann::ordered_json::array();
      for (const auto& a : m.at("artifacts")) {
        const auto path = a.at("path").get<std::string>();
        if (fs::path(path).extension() != ".json" || fs::path(path).has_parent_path()) continue;
        const auto t = nlohmann::ordered_json::parse(slurp(dir / path));
        const auto tname = t.at("name").get<std::string>();
        // Per-trial tables can be long; the report shows summaries, or the
        // single table of experiments that have no separate summary.
        const bool is_summary = tname.find("summary") != std::string::npos || tname == "distinguisher_report" ||
                                tname == "collision_report";
        if (!is_summary) continue;
        if (format == "json") {
          all.push_back(t);
        } else {
          print_table(t);
        }
      }
      if (format == "json") std::cout << all.dump(2) << "\n";
      return 0;
    } catch (const std::exception& e) {
      return fail(e, "report", nullptr);
    }
  }
  return 0;
}
