#pragma once

// Shared fixtures for the test suites: shipped-file loading, small graph
// builders, and seeded random graphs/mutations for property tests.

#include <string>
#include <vector>

#include <archheal/model_io.hpp>
#include <archheal/oracle.hpp>
#include <archheal/simulator.hpp>

namespace testsupport {

using namespace archheal;

inline std::string source_dir() {
#ifdef ARCHHEAL_SOURCE_DIR
  return ARCHHEAL_SOURCE_DIR;
#else
  return ".";
#endif
}

inline std::string data_path(const std::string& rel) { return source_dir() + "/" + rel; }

inline std::vector<std::string> shipped_pattern_files() {
  return {data_path("patterns/p_plus_1.json"), data_path("patterns/p_minus_1.json"),
          data_path("patterns/p_minus_2_crashed.json"),
          data_path("patterns/p_minus_3_unwired.json")};
}

inline std::vector<std::string> shipped_rule_files() {
  return {data_path("rules/restart.json"), data_path("rules/redeploy.json"),
          data_path("rules/replace.json")};
}

inline PatternCatalog shipped_catalog() { return load_catalog(shipped_pattern_files()); }

inline RuleSet shipped_rules(const PatternCatalog& catalog) {
  return load_rules(shipped_rule_files(), catalog);
}

// One shop with two components of the same 1-provided/1-required type pair,
// wired into a chain: comp0 provides to comp1. Both have connectivity 1.
struct TinyShop {
  ModelGraph g;
  std::string shopId;
  std::string typeA, typeB;
  std::string compA, compB;         // compA provides if-a, compB requires it
  std::string providedA, requiredB; // the wired pair
};

inline TinyShop make_tiny_shop(double reliabilityA = 1.0, double reliabilityB = 1.0,
                               double criticalityA = 1.0, double criticalityB = 1.0) {
  TinyShop t;
  t.typeA = t.g.add_component_type("provider", reliabilityA, {"if-a"}, {});
  t.typeB = t.g.add_component_type("consumer", reliabilityB, {}, {"if-a"});
  t.shopId = t.g.add_shop("tiny");
  t.compA = t.g.add_component(t.shopId, t.typeA, criticalityA, ComponentState::Started);
  t.compB = t.g.add_component(t.shopId, t.typeB, criticalityB, ComponentState::Started);
  t.providedA = t.g.ports_of(t.compA).front();
  t.requiredB = t.g.ports_of(t.compB).front();
  t.g.connect(t.requiredB, t.providedA);
  return t;
}

inline std::string provided_port_of(const ModelGraph& g, const std::string& componentId) {
  for (const auto& pid : g.ports_of(componentId)) {
    if (g.port(pid).kind == PortKind::Provided) return pid;
  }
  throw LookupError("component has no provided port");
}

// A marketplace-shaped graph with randomized states, failures and offender
// flags; always valid, frequently matching every shipped pattern.
inline ModelGraph random_graph(std::uint64_t seed, std::size_t maxShops = 3,
                               std::size_t maxComponentsPerShop = 8) {
  SplitMix64 rng(seed);
  ScenarioConfig cfg;
  cfg.seed = rng.next();
  cfg.shops = 1 + rng.next_below(maxShops);
  cfg.componentsPerShop = 1 + rng.next_below(maxComponentsPerShop);
  cfg.typeCatalogSize = 1 + rng.next_below(maxComponentsPerShop);
  cfg.alternativesPerType = rng.next_below(2);
  cfg.connectorDensity = rng.next_unit();
  ModelGraph g = generate_marketplace(cfg);

  std::vector<std::string> componentIds;
  for (const auto& [id, c] : g.components()) componentIds.push_back(id);
  for (const auto& id : componentIds) {
    const double roll = rng.next_unit();
    if (roll < 0.2) g.set_state(id, ComponentState::NotStarted);
    if (rng.next_unit() < 0.15) g.set_repeated_offender(id, true);
  }
  std::vector<std::string> providedPorts;
  for (const auto& [id, p] : g.ports()) {
    if (p.kind == PortKind::Provided) providedPorts.push_back(id);
  }
  for (const auto& id : providedPorts) {
    const double roll = rng.next_unit();
    if (roll < 0.35) {
      const std::size_t failures = 1 + rng.next_below(7);
      for (std::size_t i = 0; i < failures; ++i) g.record_failure(id, 0, "x");
    }
  }
  return g;
}

// Applies one random valid mutation; returns false if nothing was applicable.
inline bool random_mutation(ModelGraph& g, SplitMix64& rng) {
  std::vector<std::string> componentIds;
  for (const auto& [id, c] : g.components()) componentIds.push_back(id);
  std::vector<std::string> providedPorts;
  for (const auto& [id, p] : g.ports()) {
    if (p.kind == PortKind::Provided) providedPorts.push_back(id);
  }
  for (int attempt = 0; attempt < 8; ++attempt) {
    switch (rng.next_below(7)) {
      case 0: {  // toggle state
        if (componentIds.empty()) break;
        const auto& id = componentIds[rng.next_below(componentIds.size())];
        const auto state = g.component(id).state == ComponentState::Started
                               ? ComponentState::NotStarted
                               : ComponentState::Started;
        g.set_state(id, state);
        return true;
      }
      case 1: {  // record a failure
        if (providedPorts.empty()) break;
        g.record_failure(providedPorts[rng.next_below(providedPorts.size())], 0, "x");
        return true;
      }
      case 2: {  // clear failures (only counts as a mutation when non-empty)
        std::vector<std::string> loaded;
        for (const auto& pid : providedPorts) {
          if (g.failure_count(pid) > 0) loaded.push_back(pid);
        }
        if (loaded.empty()) break;
        g.clear_failures(loaded[rng.next_below(loaded.size())]);
        return true;
      }
      case 3: {  // flip the offender flag
        if (componentIds.empty()) break;
        const auto& id = componentIds[rng.next_below(componentIds.size())];
        g.set_repeated_offender(id, !g.component(id).repeatedOffender);
        return true;
      }
      case 4: {  // add an extra connector between matching ports
        std::vector<std::pair<std::string, std::string>> pairs;
        for (const auto& [rid, rp] : g.ports()) {
          if (rp.kind != PortKind::Required) continue;
          const std::string shopR = g.component(rp.ownerComponent).shopRef;
          for (const auto& [pid, pp] : g.ports()) {
            if (pp.kind != PortKind::Provided || pp.interfaceType != rp.interfaceType) continue;
            if (g.component(pp.ownerComponent).shopRef != shopR) continue;
            pairs.emplace_back(rid, pid);
          }
        }
        if (pairs.empty()) break;
        const auto& [rid, pid] = pairs[rng.next_below(pairs.size())];
        g.connect(rid, pid);
        return true;
      }
      case 5: {  // remove a component
        if (componentIds.size() < 2 || rng.next_below(4) != 0) break;
        g.remove_component(componentIds[rng.next_below(componentIds.size())]);
        return true;
      }
      case 6: {  // grow: new component of an existing type
        if (componentIds.empty() || rng.next_below(4) != 0) break;
        const auto& base = g.component(componentIds[rng.next_below(componentIds.size())]);
        const std::string typeId = base.typeRef;
        if (!g.component_type(typeId).requiredInterfaceTypes.empty()) break;
        g.add_component(base.shopRef, typeId, 1.0 + rng.next_below(3), ComponentState::Started);
        return true;
      }
    }
  }
  return false;
}

}  // namespace testsupport
