#pragma once

#include <charconv>
#include <chrono>
#include <string>
#include <vector>

#include <archheal/rule.hpp>

namespace archheal {

// Shortest round-trip decimal form; stable per platform.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// A negative-pattern match that should be addressed by a rule.
struct Issue {
  Match match;
  std::uint64_t detectedAt = 0;
  double value = 0.0;  // negative sub-utility at detection

  std::string key() const { return match.patternRef + "|" + match.binding_key(); }
};

struct PlanStep {
  std::string ruleId;
  Match matchUsed;
  double estimatedGain = 0.0;
};

struct Plan {
  std::vector<PlanStep> steps;
  double totalEstimatedGain = 0.0;
  std::vector<Issue> skippedIssues;  // no applicable rule
};

struct TraceRow {
  std::size_t cycle = 0;
  std::string event;
  std::uint64_t revision = 0;
  double utility = 0.0;
};

struct ExecutedStep {
  std::string ruleId;
  Match matchUsed;
  double estimatedGain = 0.0;
  double actualGain = 0.0;
  bool staleSkipped = false;
  std::uint64_t revisionAfter = 0;
  double utilityAfter = 0.0;
};

struct CycleRecord {
  std::size_t cycle = 0;
  std::uint64_t revisionStart = 0;
  std::uint64_t revisionEnd = 0;
  double utilityBefore = 0.0;
  double utilityAfter = 0.0;
  std::size_t issuesFound = 0;
  std::vector<ExecutedStep> steps;
  std::size_t executedCount = 0;
  std::size_t staleSkippedCount = 0;
  std::vector<Issue> unresolvedIssues;
  double monitorMs = 0.0;
  double analyzeMs = 0.0;
  double planMs = 0.0;
  double executeMs = 0.0;
  double durationMs = 0.0;
};

struct LoopTrace {
  double initialUtility = 0.0;
  double finalUtility = 0.0;
  std::vector<CycleRecord> cycles;
  std::vector<TraceRow> rows;

  std::size_t total_executed() const {
    std::size_t n = 0;
    for (const auto& c : cycles) n += c.executedCount;
    return n;
  }

  std::string rows_to_csv() const {
    std::string out = "cycle,event,revision,utility\n";
    for (const auto& r : rows) {
      out += std::to_string(r.cycle);
      out += ',';
      out += r.event;
      out += ',';
      out += std::to_string(r.revision);
      out += ',';
      out += format_double(r.utility);
      out += '\n';
    }
    return out;
  }

  Json rows_to_json() const {
    Json arr = Json::array();
    for (const auto& r : rows) {
      arr.push_back(Json{{"cycle", r.cycle},
                         {"event", r.event},
                         {"revision", r.revision},
                         {"utility", r.utility}});
    }
    return arr;
  }

  Json to_json(bool includeTimings = true) const {
    Json cyclesJson = Json::array();
    for (const auto& c : cycles) {
      Json steps = Json::array();
      for (const auto& s : c.steps) {
        steps.push_back(Json{{"actualGain", s.actualGain},
                             {"binding", s.matchUsed.binding},
                             {"estimatedGain", s.estimatedGain},
                             {"rule", s.ruleId},
                             {"staleSkipped", s.staleSkipped}});
      }
      Json unresolved = Json::array();
      for (const auto& issue : c.unresolvedIssues) {
        unresolved.push_back(Json{{"binding", issue.match.binding},
                                  {"pattern", issue.match.patternRef},
                                  {"value", issue.value}});
      }
      Json cj{{"cycle", c.cycle},
              {"executedSteps", c.executedCount},
              {"issuesFound", c.issuesFound},
              {"revisionEnd", c.revisionEnd},
              {"revisionStart", c.revisionStart},
              {"staleSkippedSteps", c.staleSkippedCount},
              {"steps", std::move(steps)},
              {"unresolvedIssues", std::move(unresolved)},
              {"utilityAfter", c.utilityAfter},
              {"utilityBefore", c.utilityBefore}};
      if (includeTimings) cj["durationMs"] = c.durationMs;
      cyclesJson.push_back(std::move(cj));
    }
    return Json{{"cycles", std::move(cyclesJson)},
                {"finalUtility", finalUtility},
                {"initialUtility", initialUtility}};
  }
};

// One issue per negative-pattern match, ordered by descending value, then
// binding order (catalog order breaks remaining ties).
inline std::vector<Issue> analyze(const ModelGraph& g, const PatternCatalog& catalog) {
  std::vector<Issue> issues;
  for (const auto& p : catalog.negatives) {
    MatchSet ms = find_matches(g, p);
    for (auto& m : ms.matches) {
      Issue issue;
      issue.value = eval_subutility(g, p, m);
      issue.match = std::move(m);
      issue.detectedAt = g.revision();
      issues.push_back(std::move(issue));
    }
  }
  std::stable_sort(issues.begin(), issues.end(), [](const Issue& a, const Issue& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.match.binding_key() < b.match.binding_key();
  });
  return issues;
}

// Greedy plan: for each issue, the applicable rule whose induced negative
// match equals the issue (maximal estimated impact, ties by rule order);
// steps ordered by descending estimated gain. Issues without an applicable
// rule are recorded as skipped, not errors.
inline Plan build_plan(const ModelGraph& g, const std::vector<Issue>& issues,
                       const RuleSet& rules, const PatternCatalog& catalog) {
  Plan plan;
  if (issues.empty()) return plan;

  struct Candidate {
    const AdaptationRule* rule;
    std::map<std::string, std::vector<const Match*>> byIssueKey;
  };
  std::vector<Candidate> candidates;
  std::vector<MatchSet> matchSets;
  matchSets.reserve(rules.rules.size());
  for (const auto& rule : rules.rules) {
    matchSets.push_back(applicable_matches(g, rule));
    Candidate c;
    c.rule = &rule;
    for (const auto& m : matchSets.back().matches) {
      const Match induced = induced_negative_match(rule, m);
      c.byIssueKey[induced.patternRef + "|" + induced.binding_key()].push_back(&m);
    }
    candidates.push_back(std::move(c));
  }

  for (const auto& issue : issues) {
    const AdaptationRule* bestRule = nullptr;
    const Match* bestMatch = nullptr;
    double bestEstimate = 0.0;
    for (const auto& c : candidates) {
      if (c.rule->linkedNegative != issue.match.patternRef) continue;
      auto it = c.byIssueKey.find(issue.key());
      if (it == c.byIssueKey.end() || it->second.empty()) continue;
      const Match* m = it->second.front();  // matches are sorted by binding
      const double estimate = estimate_impact(g, *c.rule, catalog, *m);
      if (!bestRule || estimate > bestEstimate) {
        bestRule = c.rule;
        bestMatch = m;
        bestEstimate = estimate;
      }
    }
    if (!bestRule) {
      plan.skippedIssues.push_back(issue);
      continue;
    }
    plan.steps.push_back({bestRule->id, *bestMatch, bestEstimate});
  }
  std::stable_sort(plan.steps.begin(), plan.steps.end(), [](const PlanStep& a, const PlanStep& b) {
    if (a.estimatedGain != b.estimatedGain) return a.estimatedGain > b.estimatedGain;
    return a.matchUsed.binding_key() < b.matchUsed.binding_key();
  });
  for (const auto& s : plan.steps) plan.totalEstimatedGain += s.estimatedGain;
  return plan;
}

// Applies the plan in order. Steps whose match went stale are skipped with a
// trace note; a step that fails to invalidate its negative match aborts the
// cycle (broken rule library).
inline CycleRecord execute(ModelGraph& g, const Plan& plan, const PatternCatalog& catalog,
                           const RuleSet& rules) {
  CycleRecord rec;
  rec.revisionStart = g.revision();
  rec.utilityBefore = compute_utility(g, catalog).total;
  rec.utilityAfter = rec.utilityBefore;
  for (const auto& step : plan.steps) {
    const AdaptationRule* rule = rules.find(step.ruleId);
    if (!rule) throw LookupError("plan references unknown rule '" + step.ruleId + "'");
    ExecutedStep es;
    es.ruleId = step.ruleId;
    es.matchUsed = step.matchUsed;
    es.estimatedGain = step.estimatedGain;
    if (!match_still_valid(g, rule->precondition, step.matchUsed)) {
      es.staleSkipped = true;
      ++rec.staleSkippedCount;
      rec.steps.push_back(std::move(es));
      continue;
    }
    ApplicationResult result = apply_rule(g, *rule, catalog, step.matchUsed);
    if (!result.a2Holds) {
      throw A2ViolationError(rule->id, result.embeddedMatch.binding_key());
    }
    es.actualGain = result.actualGain;
    es.revisionAfter = g.revision();
    es.utilityAfter = compute_utility(g, catalog).total;
    rec.utilityAfter = es.utilityAfter;
    ++rec.executedCount;
    rec.steps.push_back(std::move(es));
  }
  rec.revisionEnd = g.revision();
  rec.unresolvedIssues = plan.skippedIssues;
  return rec;
}

struct PlannerPolicy {
  // Resolving this many issues of the flag pattern on one component marks it
  // as a repeated offender at the start of the next cycle.
  std::string flagPatternId = "p_minus_1";
  std::size_t flagThreshold = 2;
  std::size_t maxDrainCycles = 100;
};

class InjectionSource {
public:
  virtual ~InjectionSource() = default;
  virtual bool has_next() const = 0;
  // Applies the next injection batch to the graph (the monitor phase).
  virtual void apply_next(ModelGraph& g, std::size_t cycle) = 0;
};

// The feedback loop: per batch, monitor (apply injections and pending offender
// flags), analyze, plan, execute. After the stream ends, extra cycles drain
// planner-generated issues until only unresolvable ones remain.
inline LoopTrace run_loop(ModelGraph& g, const PatternCatalog& catalog, const RuleSet& rules,
                          InjectionSource* source, PlannerPolicy policy = {}) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  LoopTrace trace;
  trace.initialUtility = compute_utility(g, catalog).total;
  std::map<std::string, std::size_t> resolutionCounts;
  std::vector<std::string> pendingFlags;

  auto run_cycle = [&](std::size_t cycle, bool withBatch) {
    const auto cycleStart = Clock::now();
    CycleRecord rec;

    const auto monitorStart = Clock::now();
    if (withBatch && source) source->apply_next(g, cycle);
    for (const auto& componentId : pendingFlags) {
      if (g.has_component(componentId)) g.set_repeated_offender(componentId, true);
    }
    pendingFlags.clear();
    const double monitorUtility = compute_utility(g, catalog).total;
    trace.rows.push_back({cycle, "monitor", g.revision(), monitorUtility});
    const double monitorMs = ms_since(monitorStart);

    const auto analyzeStart = Clock::now();
    std::vector<Issue> issues = analyze(g, catalog);
    const double analyzeMs = ms_since(analyzeStart);

    const auto planStart = Clock::now();
    Plan plan = build_plan(g, issues, rules, catalog);
    const double planMs = ms_since(planStart);

    const auto executeStart = Clock::now();
    rec = execute(g, plan, catalog, rules);
    rec.executeMs = ms_since(executeStart);

    rec.cycle = cycle;
    rec.issuesFound = issues.size();
    rec.monitorMs = monitorMs;
    rec.analyzeMs = analyzeMs;
    rec.planMs = planMs;
    for (const auto& es : rec.steps) {
      if (es.staleSkipped) continue;
      trace.rows.push_back({cycle, "step:" + es.ruleId, es.revisionAfter, es.utilityAfter});
      const AdaptationRule* rule = rules.find(es.ruleId);
      if (rule && rule->linkedNegative == policy.flagPatternId) {
        const Pattern* neg = catalog.find(rule->linkedNegative);
        if (neg) {
          const Match induced = induced_negative_match(*rule, es.matchUsed);
          for (const auto& spec : neg->nodes) {
            if (spec.kind != NodeKind::Component) continue;
            const std::string& componentId = induced.binding.at(spec.label);
            if (++resolutionCounts[componentId] == policy.flagThreshold) {
              pendingFlags.push_back(componentId);
            }
          }
        }
      }
    }
    trace.rows.push_back({cycle, "end", g.revision(), rec.utilityAfter});
    rec.durationMs = ms_since(cycleStart);
    trace.cycles.push_back(std::move(rec));
  };

  std::size_t cycle = 0;
  bool ranAny = false;
  while (source && source->has_next()) {
    run_cycle(cycle++, true);
    ranAny = true;
  }
  if (!ranAny) {
    run_cycle(cycle++, false);
  }
  for (std::size_t guard = 0; guard < policy.maxDrainCycles; ++guard) {
    if (pendingFlags.empty()) {
      std::vector<Issue> issues = analyze(g, catalog);
      if (issues.empty()) break;
      Plan plan = build_plan(g, issues, rules, catalog);
      if (plan.steps.empty()) break;
    }
    run_cycle(cycle++, false);
  }
  trace.finalUtility = compute_utility(g, catalog).total;
  return trace;
}

}  // namespace archheal
