#pragma once

#include <set>
#include <string>
#include <vector>

#include <archheal/planner.hpp>

// Brute-force reference implementations used by tests, the acceptance suite
// and the CLI's cross-check mode. They deliberately avoid the engine's
// indices, shop scoping and evaluation helpers.

namespace archheal::oracle {

namespace detail {

inline std::vector<std::string> all_of_kind(const ModelGraph& g, NodeKind kind) {
  std::vector<std::string> out;
  switch (kind) {
    case NodeKind::Shop:
      for (const auto& [id, e] : g.shops()) out.push_back(id);
      break;
    case NodeKind::Component:
      for (const auto& [id, e] : g.components()) out.push_back(id);
      break;
    case NodeKind::Port:
      for (const auto& [id, e] : g.ports()) out.push_back(id);
      break;
    case NodeKind::Connector:
      for (const auto& [id, e] : g.connectors()) out.push_back(id);
      break;
  }
  return out;
}

// Connector count by scanning the whole connector table.
inline std::size_t scan_connectivity(const ModelGraph& g, const std::string& componentId) {
  std::size_t n = 0;
  for (const auto& [id, conn] : g.connectors()) {
    const bool touches = g.ports().at(conn.requiredPort).ownerComponent == componentId ||
                         g.ports().at(conn.providedPort).ownerComponent == componentId;
    if (touches) ++n;
  }
  return n;
}

inline std::size_t scan_count(const ModelGraph& g, NodeKind kind, const std::string& id,
                              const std::string& relation) {
  if (kind == NodeKind::Component) {
    if (relation == "connectors") return scan_connectivity(g, id);
    if (relation == "alternatives") {
      return g.component_types().at(g.components().at(id).typeRef).alternatives.size();
    }
    if (relation == "ports") {
      std::size_t n = 0;
      for (const auto& [pid, p] : g.ports()) {
        if (p.ownerComponent == id) ++n;
      }
      return n;
    }
  } else if (kind == NodeKind::Port) {
    if (relation == "failureRecords") return g.ports().at(id).failureRecords.size();
    if (relation == "connectors") {
      std::size_t n = 0;
      for (const auto& [cid, conn] : g.connectors()) {
        if (conn.requiredPort == id || conn.providedPort == id) ++n;
      }
      return n;
    }
  }
  throw EvalError("oracle: no countable relation '" + relation + "'");
}

inline Json scan_attribute(const ModelGraph& g, NodeKind kind, const std::string& id,
                           const std::string& attr) {
  if (kind == NodeKind::Shop && attr == "name") return g.shops().at(id).name;
  if (kind == NodeKind::Component) {
    const Component& c = g.components().at(id);
    if (attr == "state") return to_string(c.state);
    if (attr == "criticality") return c.criticality;
    if (attr == "reliability") return g.component_types().at(c.typeRef).reliability;
    if (attr == "repeatedOffender") return c.repeatedOffender;
    if (attr == "typeId") return c.typeRef;
  }
  if (kind == NodeKind::Port) {
    const InterfacePort& p = g.ports().at(id);
    if (attr == "kind") return to_string(p.kind);
    if (attr == "interfaceType") return p.interfaceType;
  }
  throw EvalError("oracle: no attribute '" + attr + "'");
}

inline bool scan_compare(const Json& lhs, Cmp op, const Json& rhs) {
  if (lhs.is_number() && rhs.is_number()) {
    const double a = lhs.get<double>();
    const double b = rhs.get<double>();
    switch (op) {
      case Cmp::Lt: return a < b;
      case Cmp::Le: return a <= b;
      case Cmp::Eq: return a == b;
      case Cmp::Ge: return a >= b;
      case Cmp::Gt: return a > b;
      case Cmp::Ne: return a != b;
    }
  }
  if (op == Cmp::Eq) return lhs == rhs;
  if (op == Cmp::Ne) return lhs != rhs;
  return false;
}

inline bool scan_edge(const ModelGraph& g, const EdgeSpec& e, const std::string& fromId,
                      const std::string& toId) {
  switch (e.relation) {
    case Relation::Owns: return g.components().at(toId).shopRef == fromId;
    case Relation::HasPort: return g.ports().at(toId).ownerComponent == fromId;
    case Relation::RequiredEnd: return g.connectors().at(fromId).requiredPort == toId;
    case Relation::ProvidedEnd: return g.connectors().at(fromId).providedPort == toId;
  }
  return false;
}

inline bool assignment_satisfies(const ModelGraph& g, const Pattern& p,
                                 const std::map<std::string, std::string>& binding) {
  for (const auto& spec : p.nodes) {
    const std::string& id = binding.at(spec.label);
    if (!spec.typeConstraint.empty()) {
      if (spec.kind == NodeKind::Component &&
          g.components().at(id).typeRef != spec.typeConstraint) {
        return false;
      }
      if (spec.kind == NodeKind::Port &&
          g.ports().at(id).interfaceType != spec.typeConstraint) {
        return false;
      }
    }
  }
  for (const auto& e : p.edges) {
    if (!scan_edge(g, e, binding.at(e.from), binding.at(e.to))) return false;
  }
  for (const auto& c : p.attrConstraints) {
    const NodeKind kind = p.find_node(c.node)->kind;
    if (!scan_compare(scan_attribute(g, kind, binding.at(c.node), c.attr), c.op, c.value)) {
      return false;
    }
  }
  for (const auto& c : p.aggConstraints) {
    const NodeKind kind = p.find_node(c.node)->kind;
    const double count = static_cast<double>(scan_count(g, kind, binding.at(c.node), c.relation));
    if (!scan_compare(count, c.op, Json(c.value))) return false;
  }
  return true;
}

inline double scan_expr(const ModelGraph& g, const Pattern& p, const UtilityExpr& e,
                        const std::map<std::string, std::string>& binding) {
  switch (e.op) {
    case UtilityExpr::Op::Const: return e.value;
    case UtilityExpr::Op::Attr: {
      const Json v = scan_attribute(g, p.find_node(e.node)->kind, binding.at(e.node), e.name);
      return v.get<double>();
    }
    case UtilityExpr::Op::Connectivity:
      return static_cast<double>(scan_connectivity(g, binding.at(e.node)));
    case UtilityExpr::Op::Count:
      return static_cast<double>(
          scan_count(g, p.find_node(e.node)->kind, binding.at(e.node), e.name));
    case UtilityExpr::Op::Product: {
      double acc = 1.0;
      for (const auto& child : e.children) acc *= scan_expr(g, p, child, binding);
      return acc;
    }
    case UtilityExpr::Op::Sum: {
      double acc = 0.0;
      for (const auto& child : e.children) acc += scan_expr(g, p, child, binding);
      return acc;
    }
  }
  throw EvalError("oracle: unreachable expression op");
}

}  // namespace detail

// Enumerates all injective assignments of pattern labels to elements of the
// matching kind, with no shop scoping and no indices, and keeps those that
// satisfy every constraint.
inline MatchSet brute_force_matches(const ModelGraph& g, const Pattern& p) {
  MatchSet ms;
  ms.patternRef = p.id;
  const std::size_t n = p.nodes.size();
  std::vector<std::vector<std::string>> candidates(n);
  for (std::size_t i = 0; i < n; ++i) candidates[i] = detail::all_of_kind(g, p.nodes[i].kind);

  std::map<std::string, std::string> binding;
  std::set<std::string> used;
  std::function<void(std::size_t)> descend = [&](std::size_t level) {
    if (level == n) {
      if (detail::assignment_satisfies(g, p, binding)) {
        Match m;
        m.patternRef = p.id;
        m.binding = binding;
        m.revisionSeen = g.revision();
        if (!m.binding.empty()) {
          const NodeSpec& spec = p.nodes.front();
          const std::string& id = m.binding.at(spec.label);
          m.shopRef = g.shop_of(spec.kind == NodeKind::Shop        ? ElementKind::Shop
                                : spec.kind == NodeKind::Component ? ElementKind::Component
                                : spec.kind == NodeKind::Port      ? ElementKind::Port
                                                                   : ElementKind::Connector,
                                id);
        }
        ms.matches.push_back(std::move(m));
      }
      return;
    }
    // Early pruning keeps the enumeration feasible at larger scales without
    // touching the engine's search order or indices.
    for (const auto& id : candidates[level]) {
      if (used.count(id)) continue;
      binding[p.nodes[level].label] = id;
      bool viable = true;
      for (const auto& e : p.edges) {
        const bool fromBound = binding.count(e.from) > 0;
        const bool toBound = binding.count(e.to) > 0;
        if (fromBound && toBound && !detail::scan_edge(g, e, binding.at(e.from), binding.at(e.to))) {
          viable = false;
          break;
        }
      }
      if (viable) {
        used.insert(id);
        descend(level + 1);
        used.erase(id);
      }
      binding.erase(p.nodes[level].label);
    }
  };
  descend(0);
  sort_matches(ms.matches);
  ms.revision = g.revision();
  return ms;
}

// Direct transcription of the overall-utility sum over brute-force matches.
inline double brute_force_utility(const ModelGraph& g, const PatternCatalog& catalog) {
  double total = 0.0;
  for (const auto& p : catalog.positives) {
    for (const auto& m : brute_force_matches(g, p).matches) {
      total += detail::scan_expr(g, p, p.utility, m.binding);
    }
  }
  for (const auto& p : catalog.negatives) {
    for (const auto& m : brute_force_matches(g, p).matches) {
      total -= detail::scan_expr(g, p, p.utility, m.binding);
    }
  }
  return total;
}

// Depth-first enumeration of every rule/match application sequence up to
// maxDepth on copies of the graph; returns the best reachable utility.
// Doing nothing is always an option, so the result is never below U(g).
inline double exhaustive_plan(const ModelGraph& g, const RuleSet& rules,
                              const PatternCatalog& catalog, std::size_t maxDepth) {
  double best = compute_utility(g, catalog).total;
  if (maxDepth == 0) return best;
  for (const auto& rule : rules.rules) {
    const MatchSet ms = applicable_matches(g, rule);
    for (const auto& m : ms.matches) {
      ModelGraph copy = g;
      try {
        apply_rule(copy, rule, catalog, m);
      } catch (const Error&) {
        continue;  // inapplicable in this branch
      }
      best = std::max(best, exhaustive_plan(copy, rules, catalog, maxDepth - 1));
    }
  }
  return best;
}

}  // namespace archheal::oracle
