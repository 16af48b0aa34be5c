#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <archheal/planner.hpp>
#include <archheal/rng.hpp>

namespace archheal {

struct InjectionSpec {
  enum class Kind { FailureBurst, Crash, Random };
  Kind kind = Kind::FailureBurst;
  std::string target;        // explicit element id; empty = seeded-random pick
  std::size_t count = 1;     // burst: records appended; random: injections
  double crashWeight = 0.5;  // random mix only
  std::size_t burstSize = 5; // random mix only
};

using InjectionBatch = std::vector<InjectionSpec>;

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t shops = 1;
  std::size_t componentsPerShop = 18;
  std::size_t typeCatalogSize = 18;
  std::size_t alternativesPerType = 0;
  double connectorDensity = 0.0;
  std::vector<double> criticalityWeights = {1.0, 1.0, 1.0};  // for criticality 1, 2, 3
  double reliabilityLo = 0.8;
  double reliabilityHi = 1.0;
  std::vector<InjectionBatch> injectionBatches;
  std::vector<std::string> patternFiles;  // resolved paths; optional
  std::vector<std::string> ruleFiles;
};

inline InjectionSpec parse_injection_spec(const Json& j) {
  InjectionSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "FAILURE_BURST") {
    spec.kind = InjectionSpec::Kind::FailureBurst;
  } else if (kind == "CRASH") {
    spec.kind = InjectionSpec::Kind::Crash;
  } else if (kind == "RANDOM") {
    spec.kind = InjectionSpec::Kind::Random;
  } else {
    throw ParseError("unknown injection kind '" + kind + "'");
  }
  spec.target = j.value("target", std::string{});
  spec.count = j.value("count", spec.kind == InjectionSpec::Kind::FailureBurst ? 5u : 1u);
  if (spec.count < 1) throw ParseError("injection count must be >= 1");
  spec.crashWeight = j.value("crashWeight", 0.5);
  if (spec.crashWeight < 0.0 || spec.crashWeight > 1.0) {
    throw ParseError("crashWeight must be in [0,1]");
  }
  spec.burstSize = j.value("burstSize", 5u);
  if (spec.burstSize < 1) throw ParseError("burstSize must be >= 1");
  return spec;
}

// `baseDir` resolves the optional pattern/rule file lists.
inline ScenarioConfig parse_scenario(const Json& doc, const std::string& baseDir = ".") {
  try {
    ScenarioConfig cfg;
    cfg.seed = doc.value("seed", 1ull);
    cfg.shops = doc.value("shops", 1u);
    cfg.componentsPerShop = doc.value("componentsPerShop", 18u);
    cfg.typeCatalogSize = doc.value("typeCatalogSize", 18u);
    cfg.alternativesPerType = doc.value("alternativesPerType", 0u);
    cfg.connectorDensity = doc.value("connectorDensity", 0.0);
    if (doc.contains("criticalityWeights")) {
      cfg.criticalityWeights = doc.at("criticalityWeights").get<std::vector<double>>();
    }
    if (doc.contains("reliabilityRange")) {
      const auto range = doc.at("reliabilityRange").get<std::vector<double>>();
      if (range.size() != 2) throw ParseError("reliabilityRange must be [lo, hi]");
      cfg.reliabilityLo = range[0];
      cfg.reliabilityHi = range[1];
    }
    if (cfg.shops == 0 || cfg.componentsPerShop == 0 || cfg.typeCatalogSize == 0) {
      throw ParseError("shops, componentsPerShop and typeCatalogSize must be positive");
    }
    if (cfg.connectorDensity < 0.0 || cfg.connectorDensity > 1.0) {
      throw ParseError("connectorDensity must be in [0,1]");
    }
    if (!(cfg.reliabilityLo > 0.0 && cfg.reliabilityLo <= cfg.reliabilityHi &&
          cfg.reliabilityHi <= 1.0)) {
      throw ParseError("reliabilityRange must satisfy 0 < lo <= hi <= 1");
    }
    if (cfg.criticalityWeights.empty()) throw ParseError("criticalityWeights must be non-empty");
    for (double w : cfg.criticalityWeights) {
      if (w < 0.0) throw ParseError("criticality weights must be >= 0");
    }
    for (const auto& bj : doc.value("injectionBatches", Json::array())) {
      InjectionBatch batch;
      if (bj.is_array()) {
        for (const auto& sj : bj) batch.push_back(parse_injection_spec(sj));
      } else {
        batch.push_back(parse_injection_spec(bj));
      }
      cfg.injectionBatches.push_back(std::move(batch));
    }
    auto resolve = [&baseDir](const std::string& p) {
      std::filesystem::path path(p);
      if (path.is_absolute()) return path.lexically_normal().string();
      return (std::filesystem::path(baseDir) / path).lexically_normal().string();
    };
    for (const auto& pj : doc.value("patterns", Json::array())) {
      cfg.patternFiles.push_back(resolve(pj.get<std::string>()));
    }
    for (const auto& rj : doc.value("rules", Json::array())) {
      cfg.ruleFiles.push_back(resolve(rj.get<std::string>()));
    }
    return cfg;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
  return parse_scenario(doc, std::filesystem::path(path).parent_path().string());
}

namespace detail {

inline std::string interface_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "if-%03zu", i);
  return buf;
}

inline double pick_criticality(const std::vector<double>& weights, SplitMix64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) return 1.0;
  double roll = rng.next_unit() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    roll -= weights[i];
    if (roll < 0.0) return static_cast<double>(i + 1);
  }
  return static_cast<double>(weights.size());
}

}  // namespace detail

// Deterministic marketplace generation. Type i provides interface i and
// requires interface i-1 (plus lower-indexed extras sampled by density), so
// wiring every required port inside a shop is always feasible and every
// component of a multi-component shop ends up with at least one connector.
inline ModelGraph generate_marketplace(const ScenarioConfig& cfg) {
  ModelGraph g;
  SplitMix64 rng(cfg.seed);

  std::vector<std::string> baseTypes;
  for (std::size_t i = 0; i < cfg.typeCatalogSize; ++i) {
    std::vector<std::string> provided = {detail::interface_id(i)};
    std::vector<std::string> required;
    if (i > 0) required.push_back(detail::interface_id(i - 1));
    for (std::size_t j = 0; j + 1 < i; ++j) {
      if (rng.next_unit() < cfg.connectorDensity) required.push_back(detail::interface_id(j));
    }
    const double reliability =
        cfg.reliabilityLo + (cfg.reliabilityHi - cfg.reliabilityLo) * rng.next_unit();
    char name[32];
    std::snprintf(name, sizeof(name), "type-%03zu", i);
    baseTypes.push_back(g.add_component_type(name, reliability, provided, required));
  }
  for (std::size_t i = 0; i < cfg.typeCatalogSize; ++i) {
    if (cfg.alternativesPerType == 0) continue;
    std::vector<std::string> group = {baseTypes[i]};
    const ComponentType& base = g.component_type(baseTypes[i]);
    const auto provided = base.providedInterfaceTypes;
    const auto required = base.requiredInterfaceTypes;
    for (std::size_t a = 0; a < cfg.alternativesPerType; ++a) {
      const double reliability =
          cfg.reliabilityLo + (cfg.reliabilityHi - cfg.reliabilityLo) * rng.next_unit();
      char name[40];
      std::snprintf(name, sizeof(name), "type-%03zu-alt-%zu", i, a + 1);
      group.push_back(g.add_component_type(name, reliability, provided, required));
    }
    g.mark_alternatives(group);
  }

  for (std::size_t s = 0; s < cfg.shops; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "shop-%03zu", s);
    const std::string shopId = g.add_shop(name);
    std::vector<std::string> members;
    for (std::size_t c = 0; c < cfg.componentsPerShop; ++c) {
      const std::string& typeId = baseTypes[c % cfg.typeCatalogSize];
      const double criticality = detail::pick_criticality(cfg.criticalityWeights, rng);
      members.push_back(
          g.add_component(shopId, typeId, criticality, ComponentState::Started));
    }
    // Providers per interface type, in creation order.
    std::map<std::string, std::vector<std::string>> providers;
    for (const auto& cid : members) {
      for (const auto& pid : g.ports_of(cid)) {
        const InterfacePort& p = g.port(pid);
        if (p.kind == PortKind::Provided) providers[p.interfaceType].push_back(pid);
      }
    }
    for (const auto& cid : members) {
      for (const auto& pid : g.ports_of(cid)) {
        const InterfacePort& p = g.port(pid);
        if (p.kind != PortKind::Required) continue;
        auto it = providers.find(p.interfaceType);
        if (it == providers.end() || it->second.empty()) {
          throw GenerationError("no provided interface of type '" + p.interfaceType +
                                "' available in shop '" + shopId + "'");
        }
        const auto& pool = it->second;
        g.connect(pid, pool[rng.next_below(pool.size())]);
      }
    }
  }
  return g;
}

// Applies one injection spec; returns the number of injection events.
inline std::size_t inject(ModelGraph& g, const InjectionSpec& spec, SplitMix64& rng,
                          std::int64_t logicalStep) {
  auto started_components = [&g]() {
    std::vector<std::string> out;
    for (const auto& [id, c] : g.components()) {
      if (c.state == ComponentState::Started) out.push_back(id);
    }
    return out;
  };
  auto healthy_provided_port = [&g, &rng](const std::string& componentId) -> std::string {
    std::vector<std::string> pool;
    for (const auto& pid : g.ports_of(componentId)) {
      const InterfacePort& p = g.port(pid);
      if (p.kind == PortKind::Provided && p.failureRecords.size() < 5) pool.push_back(pid);
    }
    if (pool.empty()) return {};
    return pool[rng.next_below(pool.size())];
  };

  switch (spec.kind) {
    case InjectionSpec::Kind::FailureBurst: {
      std::string portId = spec.target;
      if (portId.empty()) {
        std::vector<std::string> pool;
        for (const auto& cid : started_components()) {
          for (const auto& pid : g.ports_of(cid)) {
            const InterfacePort& p = g.port(pid);
            if (p.kind == PortKind::Provided && p.failureRecords.size() < 5) pool.push_back(pid);
          }
        }
        if (pool.empty()) throw GenerationError("no eligible port for failure burst");
        portId = pool[rng.next_below(pool.size())];
      }
      for (std::size_t i = 0; i < spec.count; ++i) {
        g.record_failure(portId, logicalStep, "injected exception");
      }
      return 1;
    }
    case InjectionSpec::Kind::Crash: {
      std::string componentId = spec.target;
      if (componentId.empty()) {
        auto pool = started_components();
        if (pool.empty()) throw GenerationError("no started component to crash");
        componentId = pool[rng.next_below(pool.size())];
      }
      g.set_state(componentId, ComponentState::NotStarted);
      return 1;
    }
    case InjectionSpec::Kind::Random: {
      auto pool = started_components();
      if (pool.size() < spec.count) {
        throw GenerationError("not enough started components for " + std::to_string(spec.count) +
                              " injections");
      }
      // Distinct components per batch keep the injected issues independent.
      std::vector<std::string> targets;
      for (std::size_t i = 0; i < spec.count; ++i) {
        const std::size_t at = rng.next_below(pool.size());
        targets.push_back(pool[at]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
      }
      for (const auto& componentId : targets) {
        if (rng.next_unit() < spec.crashWeight) {
          g.set_state(componentId, ComponentState::NotStarted);
          continue;
        }
        const std::string portId = healthy_provided_port(componentId);
        if (portId.empty()) {
          g.set_state(componentId, ComponentState::NotStarted);
          continue;
        }
        for (std::size_t i = 0; i < spec.burstSize; ++i) {
          g.record_failure(portId, logicalStep, "injected exception");
        }
      }
      return spec.count;
    }
  }
  return 0;
}

// Feeds scenario batches into the feedback loop.
class BatchInjectionSource final : public InjectionSource {
public:
  BatchInjectionSource(std::vector<InjectionBatch> batches, SplitMix64 rng)
      : batches_(std::move(batches)), rng_(rng) {}

  bool has_next() const override { return next_ < batches_.size(); }

  void apply_next(ModelGraph& g, std::size_t cycle) override {
    const InjectionBatch& batch = batches_.at(next_++);
    for (const auto& spec : batch) {
      events_ += inject(g, spec, rng_, static_cast<std::int64_t>(cycle));
    }
  }

  std::size_t events() const { return events_; }

private:
  std::vector<InjectionBatch> batches_;
  SplitMix64 rng_;
  std::size_t next_ = 0;
  std::size_t events_ = 0;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double initialUtility = 0.0;
  double finalUtility = 0.0;
  std::size_t issuesInjected = 0;
  std::size_t issuesResolved = 0;
  std::size_t issuesUnresolved = 0;
  LoopTrace trace;
  double generateMs = 0.0;
  double totalMs = 0.0;

  Json to_json(bool includeTimings = true) const {
    Json j{{"finalUtility", finalUtility},
           {"initialUtility", initialUtility},
           {"issuesInjected", issuesInjected},
           {"issuesResolved", issuesResolved},
           {"issuesUnresolved", issuesUnresolved},
           {"scenario", scenario},
           {"seed", seed},
           {"trace", trace.to_json(includeTimings)}};
    if (includeTimings) {
      double analyzeMs = 0.0, planMs = 0.0, executeMs = 0.0, monitorMs = 0.0;
      for (const auto& c : trace.cycles) {
        analyzeMs += c.analyzeMs;
        planMs += c.planMs;
        executeMs += c.executeMs;
        monitorMs += c.monitorMs;
      }
      j["timings"] = Json{{"analyzeMs", analyzeMs},   {"executeMs", executeMs},
                          {"generateMs", generateMs}, {"monitorMs", monitorMs},
                          {"planMs", planMs},         {"totalMs", totalMs}};
    }
    return j;
  }
};

// Generates the marketplace, runs the loop over all injection batches, and
// returns the report together with the final graph.
inline ScenarioReport run_scenario(const ScenarioConfig& cfg, const PatternCatalog& catalog,
                                   const RuleSet& rules, ModelGraph* finalGraph = nullptr,
                                   PlannerPolicy policy = {}) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  ScenarioReport report;
  report.seed = cfg.seed;

  ModelGraph g = generate_marketplace(cfg);
  report.generateMs = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  // Injection randomness is a separate stream so that generation stays
  // reproducible regardless of the batch list.
  BatchInjectionSource source(cfg.injectionBatches, SplitMix64(cfg.seed ^ 0x5DEECE66Dull));
  report.trace = run_loop(g, catalog, rules, &source, policy);
  report.initialUtility = report.trace.initialUtility;
  report.finalUtility = report.trace.finalUtility;
  report.issuesInjected = source.events();
  report.issuesResolved = report.trace.total_executed();
  report.issuesUnresolved = analyze(g, catalog).size();
  report.totalMs = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (finalGraph) *finalGraph = std::move(g);
  return report;
}

}  // namespace archheal
