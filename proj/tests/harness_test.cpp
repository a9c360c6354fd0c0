#include <gtest/gtest.h>

#include <filesystem>

#include "lcalab/harness.hpp"

namespace lcalab {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lcalab_harness_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Toml, ScalarsTablesAndArrays) {
  const auto j = toml::parse(R"(
# leading comment
title = "run one"   # trailing comment
count = 1_000
neg = -7
ratio = 2.5e-1
on = true
path = 'C:\raw'
[params]
k = [2, 4,
     8,]
"quoted key" = 1
nested.inner = { a = 1, b = "x" }
[[runs]]
id = 1
[[runs]]
id = 2
)");
  EXPECT_EQ(j.at("title"), "run one");
  EXPECT_EQ(j.at("count"), 1000);
  EXPECT_EQ(j.at("neg"), -7);
  EXPECT_DOUBLE_EQ(j.at("ratio").get<double>(), 0.25);
  EXPECT_EQ(j.at("on"), true);
  EXPECT_EQ(j.at("path"), "C:\\raw");
  EXPECT_EQ(j.at("params").at("k"), nlohmann::json({2, 4, 8}));
  EXPECT_EQ(j.at("params").at("quoted key"), 1);
  EXPECT_EQ(j.at("params").at("nested").at("inner").at("b"), "x");
  ASSERT_EQ(j.at("runs").size(), 2u);
  EXPECT_EQ(j.at("runs")[1].at("id"), 2);
}

TEST(Toml, RejectsMalformedInput) {
  for (const char* bad : {"a = 1\na = 2", "[t]\n[t]", "x = 01", "x = \"open", "x = 1 2", "x = [1 2]", "= 3",
                          "x = 1__0", "x = \"\\q\"", "x = nope", "x ="}) {
    EXPECT_THROW(toml::parse(bad), FormatError) << bad;
  }
}

TEST(Config, GridIsTheCartesianProductInAxisOrder) {
  const auto c = parse_config_text(R"(
experiment = "gap"
trials = 3
[params]
N = 4096
k = [2, 4]
d = [16, 64]
s = 2
variant = "core_only"
)");
  EXPECT_EQ(c.kind, ExperimentKind::gap);
  EXPECT_EQ(c.trials, 3u);
  ASSERT_EQ(c.grid.size(), 4u);
  EXPECT_EQ(c.grid[0].k, 2u);
  EXPECT_EQ(c.grid[0].d, 16u);
  EXPECT_EQ(c.grid[1].k, 2u);
  EXPECT_EQ(c.grid[1].d, 64u);
  EXPECT_EQ(c.grid[2].k, 4u);
  EXPECT_EQ(c.grid[3].variant, Variant::core_only);
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config_text(R"(
experiment = "collision"
lengths = [4]
[params]
N = 64
k = 2
d = 16
s = 2
)");
  EXPECT_EQ(c.options.at("lengths"), nlohmann::json({4}));
  EXPECT_EQ(c.options.at("world"), "YES");
  EXPECT_EQ(c.grid.at(0).variant, Variant::full_hierarchy);
  EXPECT_EQ(c.output, ".");
}

TEST(Config, Rejections) {
  const std::string params = "\n[params]\nN = 64\nk = 2\nd = 16\ns = 2\n";
  EXPECT_THROW(parse_config_text("trials = 1" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"plot\"" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\ntrials = 0" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\nbudgets = [1]" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"collision\"\nworld = 3" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\noutput = \"/abs\"" + params), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\n[params]\nN = 64\nk = 2\nd = 16"), InputError);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\n[params]\nN = 63\nk = 2\nd = 16\ns = 2"), ParamsRejected);
  EXPECT_THROW(parse_config_text("experiment = \"gap\"\n[params]\nN = 64\nk = 2\nd = 16\ns = 2\nq = 1"),
               InputError);
}

TEST(Config, HashCoversTheParsedConfig) {
  const std::string base = "experiment = \"gap\"\n[params]\nN = 64\nk = 2\nd = 16\ns = 2\n";
  const auto a = config_hash(parse_config_text(base));
  const auto b = config_hash(parse_config_text("# comment only\n" + base));
  const auto c = config_hash(parse_config_text("seed = 9\n" + base));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), 16u);
}

TEST(Report, EmptyTableIsHeaderOnly) {
  Table t;
  t.name = "empty";
  t.columns = {"a", "b"};
  EXPECT_EQ(to_csv(t), "a,b\n");
  EXPECT_TRUE(to_json(t).at("rows").empty());
}

TEST(Report, TwelveSignificantDigits) {
  EXPECT_EQ(format_double(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_double(123456789.123456789), "123456789.123");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-0.0), "0");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  Table t;
  t.name = "x";
  t.columns = {"v"};
  t.add({1.0 / 3.0});
  EXPECT_EQ(to_json(t).at("rows")[0].at("v").dump(), "0.333333333333");
}

TEST(Report, QuotingAndRowWidth) {
  Table t;
  t.name = "q";
  t.columns = {"s", "n"};
  t.add({std::string("a,\"b\""), std::uint64_t(3)});
  EXPECT_EQ(to_csv(t), "s,n\n\"a,\"\"b\"\"\",3\n");
  EXPECT_THROW(t.add({std::string("only one")}), InputError);
}

TEST(Report, SameResultsSameBytes) {
  Table t;
  t.name = "distinguisher_report";
  t.columns = {"strategy", "budget", "trials", "accuracy", "wilson_lo", "wilson_hi", "mean_queries"};
  t.add({std::string("coin"), std::uint64_t(100), std::uint64_t(10), 0.5, 0.2365931, 0.7634069, 0.0});
  const auto d1 = scratch("bytes1"), d2 = scratch("bytes2");
  emit_report(t, d1);
  emit_report(t, d2);
  for (const char* f : {"distinguisher_report.csv", "distinguisher_report.json"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  EXPECT_EQ(slurp(d1 / "distinguisher_report.csv"),
            "strategy,budget,trials,accuracy,wilson_lo,wilson_hi,mean_queries\n"
            "coin,100,10,0.5,0.2365931,0.7634069,0\n");
}

const char* kSmallParams = "\n[params]\nN = 256\nk = 2\nd = 16\ns = 2\n";

struct KindCase {
  std::string name;
  std::string body;
};

std::vector<KindCase> small_configs() {
  return {
      {"gap", "experiment = \"gap\"\nseed = 1\ntrials = 2"},
      {"collision", "experiment = \"collision\"\nseed = 2\ntrials = 50\nlengths = [4, 8]\nsave_transcripts = 1"},
      {"classifier",
       "experiment = \"classifier\"\nseed = 3\nvertices = 6\nbudget = 20000\nvariant_note = 1"},
      {"distinguisher",
       "experiment = \"distinguisher\"\nseed = 4\ntrials = 6\nstrategies = [\"coin\", \"referee_hk\"]\n"
       "budgets = [500]\ninstance_pool = 1"},
      {"mixer", "experiment = \"treegame-mixer\"\nseed = 5\ntrials = 30\ntree_size = 40"},
      {"badevent", "experiment = \"treegame-badevent\"\nseed = 6\ntrials = 30\ntree_size = 30\ntv_trials = 40"},
      {"audit", "experiment = \"audit\"\nseed = 7\ntrials = 2\nsave_instances = true"},
  };
}

TEST(Run, EveryKindReplaysByteForByte) {
  for (auto kc : small_configs()) {
    // The classifier case carries a deliberate typo to check rejection first.
    if (kc.name == "classifier") {
      EXPECT_THROW(parse_config_text(kc.body + kSmallParams), InputError);
      kc.body = kc.body.substr(0, kc.body.find("\nvariant_note"));
    }
    const auto text = kc.body + kSmallParams;
    const auto dir = scratch("run_" + kc.name);
    const auto res = run_to_directory(text, dir, 2);
    ASSERT_FALSE(res.artifacts.empty()) << kc.name;
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_EQ(slurp(dir / "config.toml"), text);
    const auto rep = replay(dir / "manifest.json", scratch("replay_" + kc.name), 1);
    EXPECT_TRUE(rep.identical()) << kc.name << ": " << (rep.mismatches.empty() ? "" : rep.mismatches[0]);
    EXPECT_EQ(rep.compared.size(), res.artifacts.size());
  }
}

TEST(Run, ManifestContents) {
  const auto dir = scratch("manifest");
  const std::string text = "experiment = \"treegame-mixer\"\nseed = 11\ntrials = 5\ntree_size = 10" +
                           std::string(kSmallParams);
  const auto res = run_to_directory(text, dir, 1);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m.at("experiment"), "treegame-mixer");
  EXPECT_EQ(m.at("seed"), 11);
  EXPECT_EQ(m.at("config_hash"), res.config_hash);
  EXPECT_EQ(m.at("config_text"), text);
  EXPECT_EQ(m.at("lab_version"), kLabVersion);
  ASSERT_EQ(m.at("artifacts").size(), res.artifacts.size());
  for (const auto& a : m.at("artifacts"))
    EXPECT_EQ(a.at("fnv1a"), hex64(fnv1a(slurp(dir / a.at("path").get<std::string>()))));
}

TEST(Run, ReplayDetectsTamperingAndRefusesToOverwrite) {
  const auto dir = scratch("tamper");
  run_to_directory("experiment = \"treegame-badevent\"\ntrials = 5\ntree_size = 10" + std::string(kSmallParams), dir,
                   1);
  EXPECT_THROW(replay(dir / "manifest.json", dir), InputError);
  write_text(dir / "treegame_badevent_summary.csv", "tampered\n");
  const auto rep = replay(dir / "manifest.json", scratch("tamper_replay"), 1);
  EXPECT_FALSE(rep.identical());
  ASSERT_EQ(rep.mismatches.size(), 1u);
  EXPECT_NE(rep.mismatches[0].find("treegame_badevent_summary.csv"), std::string::npos);
}

TEST(Run, ThreadCountDoesNotChangeReports) {
  const std::string text = "experiment = \"collision\"\nseed = 5\ntrials = 200\nlengths = [6]" +
                           std::string(kSmallParams);
  const auto a = scratch("threads1"), b = scratch("threads4");
  run_to_directory(text, a, 1);
  run_to_directory(text, b, 4);
  EXPECT_EQ(slurp(a / "collision_report.csv"), slurp(b / "collision_report.csv"));
}

TEST(Run, GapReportHasPerTrialMuAndBounds) {
  const auto dir = scratch("gapcols");
  run_to_directory("experiment = \"gap\"\ntrials = 2" + std::string(kSmallParams), dir, 1);
  const auto csv = slurp(dir / "gap_report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "N,k,d,s,variant,world,trial,seed,mu,bound,slack,within_bound,edges,broken,broken_bound,broken_within,"
            "extended_repairs");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Run, UnknownStrategyFailsBeforeWork) {
  EXPECT_THROW(run_experiment(parse_config_text("experiment = \"distinguisher\"\nstrategies = [\"oracle\"]" +
                                                std::string(kSmallParams))),
               InputError);
}

TEST(ErrorReport, NamesTheErrorType) {
  EXPECT_EQ(error_report(FormatError("x"), "run").at("error"), "FormatError");
  EXPECT_EQ(error_report(InputError("x"), "run").at("error"), "InputError");
  EXPECT_EQ(error_report(std::runtime_error("x"), "run").at("error"), "InternalError");
  EXPECT_EQ(error_report(BudgetExhausted("x"), "audit").at("command"), "audit");
}

}  // namespace
}  // namespace lcalab
