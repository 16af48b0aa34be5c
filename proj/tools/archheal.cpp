// Command-line front end: scenario runs, rule validation, utility inspection
// and the scale benchmark.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <archheal/model_io.hpp>
#include <archheal/oracle.hpp>
#include <archheal/simulator.hpp>

namespace {

using namespace archheal;
namespace fs = std::filesystem;

enum class LogLevel { Off = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("ARCHHEAL_LOG");
  if (!env) return LogLevel::Off;
  const std::string value(env);
  if (value == "debug") return LogLevel::Debug;
  if (value == "info") return LogLevel::Info;
  return LogLevel::Off;
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::Info) std::fprintf(stderr, "[archheal] %s\n", message.c_str());
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::Debug) std::fprintf(stderr, "[archheal] %s\n", message.c_str());
}

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;  // resolvable issues remained or cross-check mismatch
constexpr int kExitConfig = 2;
constexpr int kExitA1 = 3;
constexpr int kExitA2 = 4;

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << text;
}

bool cross_check(const ModelGraph& g, const PatternCatalog& catalog) {
  bool ok = true;
  auto check_pattern = [&](const Pattern& p) {
    const auto engine = find_matches(g, p).binding_keys();
    const auto brute = oracle::brute_force_matches(g, p).binding_keys();
    const bool equal = engine == brute;
    std::printf("oracle match check %-12s engine=%zu brute=%zu %s\n", p.id.c_str(), engine.size(),
                brute.size(), equal ? "OK" : "MISMATCH");
    ok = ok && equal;
  };
  for (const auto& p : catalog.positives) check_pattern(p);
  for (const auto& p : catalog.negatives) check_pattern(p);
  const double engineTotal = compute_utility(g, catalog).total;
  const double bruteTotal = oracle::brute_force_utility(g, catalog);
  const bool utilityOk = std::abs(engineTotal - bruteTotal) <= 1e-9;
  std::printf("oracle utility check engine=%s brute=%s %s\n", format_double(engineTotal).c_str(),
              format_double(bruteTotal).c_str(), utilityOk ? "OK" : "MISMATCH");
  return ok && utilityOk;
}

int cmd_run(const std::string& scenarioPath, std::vector<std::string> patternPaths,
            std::vector<std::string> rulePaths, bool seedSet, std::uint64_t seed, bool oracleCheck,
            const std::string& outDir, const std::string& traceFormat) {
  ScenarioConfig cfg;
  PatternCatalog catalog;
  try {
    cfg = load_scenario_file(scenarioPath);
    if (seedSet) cfg.seed = seed;
    if (!patternPaths.empty()) cfg.patternFiles = std::move(patternPaths);
    if (!rulePaths.empty()) cfg.ruleFiles = std::move(rulePaths);
    if (cfg.patternFiles.empty()) {
      std::fprintf(stderr, "error: no pattern files (scenario 'patterns' or --patterns)\n");
      return kExitConfig;
    }
    catalog = load_catalog(cfg.patternFiles);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  RuleSet rules;
  try {
    rules = load_rules(cfg.ruleFiles, catalog);
  } catch (const A1Error& e) {
    std::fprintf(stderr, "rule validation failed:\n%s\n", e.what());
    return kExitA1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  log_info("running scenario " + scenarioPath + " (seed " + std::to_string(cfg.seed) + ")");
  ModelGraph finalGraph;
  ScenarioReport report;
  try {
    report = run_scenario(cfg, catalog, rules, &finalGraph);
  } catch (const A2ViolationError& e) {
    std::fprintf(stderr, "execution aborted: %s\n", e.what());
    return kExitA2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  report.scenario = fs::path(scenarioPath).stem().string();

  try {
    const fs::path out(outDir);
    fs::create_directories(out);
    const std::string stem = report.scenario;
    write_text_file(out / (stem + ".report.json"), report.to_json().dump(2) + "\n");
    if (traceFormat == "json") {
      write_text_file(out / (stem + ".trace.json"), report.trace.rows_to_json().dump(2) + "\n");
    } else {
      write_text_file(out / (stem + ".trace.csv"), report.trace.rows_to_csv());
    }
    save_model_file(finalGraph, (out / (stem + ".model.json")).string());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  std::printf("scenario %s: initial=%s final=%s injected=%zu resolved=%zu unresolved=%zu\n",
              report.scenario.c_str(), format_double(report.initialUtility).c_str(),
              format_double(report.finalUtility).c_str(), report.issuesInjected,
              report.issuesResolved, report.issuesUnresolved);

  bool ok = true;
  if (oracleCheck) {
    log_info("running oracle cross-checks");
    ok = cross_check(finalGraph, catalog) && ok;
  }
  // Anything still outstanding must be unresolvable; a plannable leftover
  // means the loop under-delivered.
  const auto leftovers = analyze(finalGraph, catalog);
  const Plan leftoverPlan = build_plan(finalGraph, leftovers, rules, catalog);
  if (!leftoverPlan.steps.empty()) {
    std::fprintf(stderr, "error: %zu resolvable issue(s) remained after the run\n",
                 leftoverPlan.steps.size());
    ok = false;
  }
  return ok ? kExitOk : kExitRunFailed;
}

int cmd_validate(const std::vector<std::string>& rulePaths,
                 const std::vector<std::string>& patternPaths) {
  PatternCatalog catalog;
  try {
    catalog = load_catalog(patternPaths);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  if (rulePaths.empty()) {
    std::printf("warning: no rule files given; nothing to validate\n");
    return kExitOk;
  }
  bool allOk = true;
  for (const auto& path : rulePaths) {
    AdaptationRule rule;
    try {
      rule = parse_rule_file(path);
    } catch (const Error& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
    std::vector<A1Violation> violations;
    try {
      violations = validate_a1(rule, catalog);
    } catch (const Error& e) {
      std::printf("rule %-12s FAIL  %s\n", rule.id.c_str(), e.what());
      allOk = false;
      continue;
    }
    if (violations.empty()) {
      std::printf("rule %-12s OK    (linked to %s)\n", rule.id.c_str(),
                  rule.linkedNegative.c_str());
    } else {
      allOk = false;
      std::printf("rule %-12s FAIL\n", rule.id.c_str());
      for (const auto& v : violations) std::printf("    %s\n", v.detail.c_str());
    }
  }
  return allOk ? kExitOk : kExitA1;
}

int cmd_utility(const std::string& modelPath, const std::vector<std::string>& patternPaths) {
  try {
    const ModelGraph g = load_model_file(modelPath);
    const PatternCatalog catalog = load_catalog(patternPaths);
    const UtilityReport report = compute_utility(g, catalog);
    std::printf("%s\n", report.to_json().dump(2).c_str());
    return kExitOk;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

struct PhaseStats {
  std::vector<double> samples;

  void add(double ms) { samples.push_back(ms); }
  double median() const {
    auto sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n == 0 ? 0.0 : (n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]));
  }
  double max() const {
    double m = 0.0;
    for (double s : samples) m = std::max(m, s);
    return m;
  }
};

int cmd_bench(std::size_t shops, std::size_t injections, std::size_t repetitions,
              std::uint64_t seed, const std::string& dataDir) {
  if (repetitions == 0 || shops == 0) {
    std::fprintf(stderr, "error: shops and repetitions must be positive\n");
    return kExitConfig;
  }
  PatternCatalog catalog;
  RuleSet rules;
  try {
    const fs::path base(dataDir);
    catalog = load_catalog({(base / "patterns/p_plus_1.json").string(),
                            (base / "patterns/p_minus_1.json").string(),
                            (base / "patterns/p_minus_2_crashed.json").string(),
                            (base / "patterns/p_minus_3_unwired.json").string()});
    rules = load_rules({(base / "rules/restart.json").string(),
                        (base / "rules/redeploy.json").string(),
                        (base / "rules/replace.json").string()},
                       catalog);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  PhaseStats generate, analyzeStats, planStats, executeStats, utilityStats, cycleStats;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    ScenarioConfig cfg;
    cfg.seed = seed + rep;
    cfg.shops = shops;
    cfg.alternativesPerType = 1;
    cfg.connectorDensity = 0.15;

    auto t = Clock::now();
    ModelGraph g = generate_marketplace(cfg);
    generate.add(ms_since(t));

    if (injections > 0) {
      InjectionSpec spec;
      spec.kind = InjectionSpec::Kind::Random;
      spec.count = injections;
      SplitMix64 rng(cfg.seed ^ 0x5DEECE66Dull);
      inject(g, spec, rng, 0);
    }

    t = Clock::now();
    const std::vector<Issue> issues = analyze(g, catalog);
    const double analyzeMs = ms_since(t);
    analyzeStats.add(analyzeMs);

    t = Clock::now();
    const Plan plan = build_plan(g, issues, rules, catalog);
    const double planMs = ms_since(t);
    planStats.add(planMs);

    t = Clock::now();
    execute(g, plan, catalog, rules);
    const double executeMs = ms_since(t);
    executeStats.add(executeMs);

    t = Clock::now();
    compute_utility(g, catalog);
    utilityStats.add(ms_since(t));

    cycleStats.add(analyzeMs + planMs + executeMs);
    log_debug("rep " + std::to_string(rep) + ": " + std::to_string(issues.size()) + " issues, " +
              std::to_string(plan.steps.size()) + " steps");
  }

  std::printf("benchmark: shops=%zu components=%zu injections=%zu repetitions=%zu\n", shops,
              shops * 18, injections, repetitions);
  std::printf("%-10s %12s %12s\n", "phase", "median_ms", "max_ms");
  auto row = [](const char* name, const PhaseStats& s) {
    std::printf("%-10s %12.3f %12.3f\n", name, s.median(), s.max());
  };
  row("generate", generate);
  row("analyze", analyzeStats);
  row("plan", planStats);
  row("execute", executeStats);
  row("utility", utilityStats);
  row("cycle", cycleStats);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"utility-linked rule-based self-adaptation engine"};
  app.require_subcommand(1);

  std::string scenarioPath;
  std::vector<std::string> patternPaths;
  std::vector<std::string> rulePaths;
  std::uint64_t seed = 0;
  bool oracleCheck = false;
  std::string outDir = ".";
  std::string traceFormat = "csv";

  auto* run = app.add_subcommand("run", "run a scenario and write report and trace");
  run->add_option("scenario", scenarioPath, "scenario JSON file")->required();
  run->add_option("--patterns", patternPaths, "pattern files (override scenario list)");
  run->add_option("--rules", rulePaths, "rule files (override scenario list)");
  auto* seedOpt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_flag("--oracle", oracleCheck, "cross-check matcher and utility against brute force");
  run->add_option("--out", outDir, "output directory")->capture_default_str();
  run->add_option("--trace-format", traceFormat, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  std::vector<std::string> validateRules;
  std::vector<std::string> validatePatterns;
  auto* validate = app.add_subcommand("validate", "statically validate rules against the catalog");
  validate->add_option("rules", validateRules, "rule files");
  validate->add_option("--patterns", validatePatterns, "pattern files")->required();

  std::string modelPath;
  std::vector<std::string> utilityPatterns;
  auto* utility = app.add_subcommand("utility", "print the utility report of a model snapshot");
  utility->add_option("model", modelPath, "model snapshot JSON file")->required();
  utility->add_option("--patterns", utilityPatterns, "pattern files")->required();

  std::size_t shops = 100;
  std::size_t injections = 50;
  std::size_t repetitions = 3;
  std::uint64_t benchSeed = 1;
  std::string dataDir = ".";
  auto* bench = app.add_subcommand("bench", "per-phase timing of the feedback loop");
  bench->add_option("--shops", shops, "number of shops")->capture_default_str();
  bench->add_option("--injections", injections, "issues injected per cycle")
      ->capture_default_str();
  bench->add_option("--repetitions", repetitions, "number of repetitions")->capture_default_str();
  bench->add_option("--seed", benchSeed, "base seed")->capture_default_str();
  bench->add_option("--data-dir", dataDir, "directory containing patterns/ and rules/")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (run->parsed()) {
    return cmd_run(scenarioPath, patternPaths, rulePaths, seedOpt->count() > 0, seed, oracleCheck,
                   outDir, traceFormat);
  }
  if (validate->parsed()) return cmd_validate(validateRules, validatePatterns);
  if (utility->parsed()) return cmd_utility(modelPath, utilityPatterns);
  if (bench->parsed()) return cmd_bench(shops, injections, repetitions, benchSeed, dataDir);
  return kExitConfig;
}
