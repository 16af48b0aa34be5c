#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <archheal/utility.hpp>

namespace archheal {

enum class EffectKind { SetState, ClearFailures, RemoveComponent, CreateComponent, Rewire };
enum class TypeSelectorKind { SameType, AlternativeOf };

struct Effect {
  EffectKind kind = EffectKind::SetState;
  std::string node;                 // SET_STATE / CLEAR_FAILURES / REMOVE_COMPONENT
  ComponentState state = ComponentState::Started;
  std::string shop;                 // CREATE_COMPONENT
  TypeSelectorKind selector = TypeSelectorKind::SameType;
  std::string of;                   // CREATE_COMPONENT base component label
  std::string as;                   // CREATE_COMPONENT introduced label
  std::string oldNode;              // REWIRE
  std::string newNode;              // REWIRE
};

// An event-condition-action adaptation rule. The precondition pattern embeds
// the linked negative pattern, so every rule match contains a negative match
// and applying the rule resolves it.
struct AdaptationRule {
  std::string id;
  std::string name;
  Pattern precondition;
  std::string linkedNegative;
  std::map<std::string, std::string> embedding;  // negative label -> precondition label
  std::vector<Effect> action;
  double costHint = 0.0;  // carried, unused by the default planner
};

struct RuleSet {
  std::vector<AdaptationRule> rules;

  const AdaptationRule* find(const std::string& id) const {
    for (const auto& r : rules) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
};

struct A1Violation {
  std::string ruleId;
  std::string detail;
};

class A1Error : public Error {
public:
  explicit A1Error(std::vector<A1Violation> violations)
      : Error(ErrorCode::Validation, format(violations)), violations_(std::move(violations)) {}

  const std::vector<A1Violation>& violations() const noexcept { return violations_; }

private:
  static std::string format(const std::vector<A1Violation>& vs) {
    std::string msg = "rule set fails the embedding check:";
    for (const auto& v : vs) msg += "\n  [" + v.ruleId + "] " + v.detail;
    return msg;
  }
  std::vector<A1Violation> violations_;
};

// ---- parsing -----------------------------------------------------------------

inline Effect parse_effect(const Json& j) {
  Effect e;
  const std::string kind = j.at("effect").get<std::string>();
  if (kind == "SET_STATE") {
    e.kind = EffectKind::SetState;
    e.node = j.at("node").get<std::string>();
    e.state = component_state_from_string(j.at("state").get<std::string>());
  } else if (kind == "CLEAR_FAILURES") {
    e.kind = EffectKind::ClearFailures;
    e.node = j.at("node").get<std::string>();
  } else if (kind == "REMOVE_COMPONENT") {
    e.kind = EffectKind::RemoveComponent;
    e.node = j.at("node").get<std::string>();
  } else if (kind == "CREATE_COMPONENT") {
    e.kind = EffectKind::CreateComponent;
    e.shop = j.at("shop").get<std::string>();
    const Json& sel = j.at("selector");
    const std::string selKind = sel.at("kind").get<std::string>();
    if (selKind == "SAME_TYPE") {
      e.selector = TypeSelectorKind::SameType;
    } else if (selKind == "ALTERNATIVE_OF") {
      e.selector = TypeSelectorKind::AlternativeOf;
    } else {
      throw ParseError("unknown type selector '" + selKind + "'");
    }
    e.of = sel.at("of").get<std::string>();
    e.as = j.at("as").get<std::string>();
  } else if (kind == "REWIRE") {
    e.kind = EffectKind::Rewire;
    e.oldNode = j.at("old").get<std::string>();
    e.newNode = j.at("new").get<std::string>();
  } else {
    throw ParseError("unknown effect '" + kind + "'");
  }
  return e;
}

// `baseDir` resolves pattern-file references in `precondition`.
inline AdaptationRule parse_rule(const Json& doc, const std::string& baseDir = ".") {
  try {
    AdaptationRule r;
    r.id = doc.at("id").get<std::string>();
    r.name = doc.value("name", r.id);
    r.linkedNegative = doc.at("linkedNegative").get<std::string>();
    const Json& pre = doc.at("precondition");
    if (pre.is_string()) {
      const std::filesystem::path path =
          std::filesystem::path(baseDir) / pre.get<std::string>();
      std::ifstream in(path);
      if (!in) throw ParseError("cannot open pattern file '" + path.string() + "'");
      Json pdoc = Json::parse(in);
      r.precondition = parse_pattern(pdoc, false, r.id + ":pre");
    } else {
      r.precondition = parse_pattern(pre, false, r.id + ":pre");
    }
    const Json embeddingDoc = doc.value("embedding", Json::object());
    for (const auto& [neg, prec] : embeddingDoc.items()) {
      r.embedding[neg] = prec.get<std::string>();
    }
    if (!doc.contains("action") || !doc.at("action").is_array() || doc.at("action").empty()) {
      throw ParseError("rule '" + r.id + "' needs a non-empty 'action' array");
    }
    std::set<std::string> known;
    for (const auto& n : r.precondition.nodes) known.insert(n.label);
    for (const auto& ej : doc.at("action")) {
      Effect e = parse_effect(ej);
      auto requireKnown = [&](const std::string& label) {
        if (!known.count(label)) {
          throw ParseError("effect references unknown label '" + label + "' in rule '" + r.id +
                           "'");
        }
      };
      switch (e.kind) {
        case EffectKind::SetState:
        case EffectKind::ClearFailures:
        case EffectKind::RemoveComponent: requireKnown(e.node); break;
        case EffectKind::CreateComponent:
          requireKnown(e.shop);
          requireKnown(e.of);
          if (!known.insert(e.as).second) {
            throw ParseError("effect label '" + e.as + "' already in use in rule '" + r.id + "'");
          }
          break;
        case EffectKind::Rewire:
          requireKnown(e.oldNode);
          requireKnown(e.newNode);
          break;
      }
      r.action.push_back(std::move(e));
    }
    r.costHint = doc.value("costHint", 0.0);
    if (r.costHint < 0) throw ParseError("costHint must be >= 0");
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed rule document: ") + e.what());
  }
}

inline AdaptationRule parse_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open rule file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
  return parse_rule(doc, std::filesystem::path(path).parent_path().string());
}

// ---- static embedding validation ----------------------------------------------

namespace detail {

// Does "x op1 bound1" imply "x op2 bound2"? Over the integers when
// `integral` (counts), over the reals otherwise.
inline bool comparison_implies(Cmp op1, double v1, Cmp op2, double v2, bool integral) {
  if (op1 == Cmp::Eq) {
    if (integral && std::floor(v1) != v1) return true;  // empty premise
    Json lhs = v1;
    return compare_values(lhs, op2, Json(v2));
  }
  if (op1 == Cmp::Ne || op2 == Cmp::Ne || op2 == Cmp::Eq) {
    return false;  // half-lines never pin a point or a hole
  }
  // Normalize to closed half-lines: lower bounds (Ge) and upper bounds (Le).
  auto normalize = [integral](Cmp op, double v, bool& isLower, double& bound) {
    switch (op) {
      case Cmp::Ge: isLower = true; bound = integral ? std::ceil(v) : v; return true;
      case Cmp::Gt: isLower = true; bound = integral ? std::floor(v) + 1 : v; return true;
      case Cmp::Le: isLower = false; bound = integral ? std::floor(v) : v; return true;
      case Cmp::Lt: isLower = false; bound = integral ? std::ceil(v) - 1 : v; return true;
      default: return false;
    }
  };
  bool lower1 = false, lower2 = false;
  double b1 = 0, b2 = 0;
  if (!normalize(op1, v1, lower1, b1) || !normalize(op2, v2, lower2, b2)) return false;
  if (lower1 != lower2) return false;
  if (integral) {
    return lower1 ? b1 >= b2 : b1 <= b2;
  }
  // Real half-lines: strictness matters only when the bounds coincide.
  const bool strict1 = op1 == Cmp::Gt || op1 == Cmp::Lt;
  const bool strict2 = op2 == Cmp::Gt || op2 == Cmp::Lt;
  if (lower1) {
    if (b1 > b2) return true;
    if (b1 < b2) return false;
    return strict1 || !strict2;
  }
  if (b1 < b2) return true;
  if (b1 > b2) return false;
  return strict1 || !strict2;
}

inline bool value_constraint_implies(const AttrConstraint& pre, const AttrConstraint& neg) {
  if (pre.attr != neg.attr) return false;
  if (pre.value.is_number() && neg.value.is_number()) {
    return comparison_implies(pre.op, pre.value.get<double>(), neg.op, neg.value.get<double>(),
                              false);
  }
  // Strings and booleans: equality reasoning only.
  if (pre.op == Cmp::Eq && neg.op == Cmp::Eq) return pre.value == neg.value;
  if (pre.op == Cmp::Eq && neg.op == Cmp::Ne) return pre.value != neg.value;
  if (pre.op == Cmp::Ne && neg.op == Cmp::Ne) return pre.value == neg.value;
  return false;
}

}  // namespace detail

// Static check that the precondition syntactically subsumes the linked
// negative pattern under the embedding: same node kinds and type constraints,
// every edge present, every attribute and aggregate constraint implied.
inline std::vector<A1Violation> validate_a1(const AdaptationRule& rule,
                                            const PatternCatalog& catalog) {
  std::vector<A1Violation> out;
  auto flag = [&](const std::string& detail) { out.push_back({rule.id, detail}); };
  const Pattern* neg = catalog.find(rule.linkedNegative);
  if (!neg) {
    throw LookupError("rule '" + rule.id + "' links unknown pattern '" + rule.linkedNegative +
                      "'");
  }
  if (neg->polarity != Polarity::Negative) {
    flag("linked pattern '" + neg->id + "' is not NEGATIVE");
    return out;
  }
  std::map<std::string, std::string> mapped;  // precondition label -> negative label
  for (const auto& negNode : neg->nodes) {
    auto it = rule.embedding.find(negNode.label);
    if (it == rule.embedding.end()) {
      flag("embedding has no entry for negative label '" + negNode.label + "'");
      continue;
    }
    const NodeSpec* preNode = rule.precondition.find_node(it->second);
    if (!preNode) {
      flag("embedding maps '" + negNode.label + "' to undeclared precondition label '" +
           it->second + "'");
      continue;
    }
    auto [pos, inserted] = mapped.emplace(it->second, negNode.label);
    if (!inserted) {
      flag("embedding is not injective: precondition label '" + it->second +
           "' used for both '" + pos->second + "' and '" + negNode.label + "'");
      continue;
    }
    if (preNode->kind != negNode.kind) {
      flag("label '" + negNode.label + "' has kind " + to_string(negNode.kind) +
           " but its precondition image has kind " + to_string(preNode->kind));
    }
    if (!negNode.typeConstraint.empty() && preNode->typeConstraint != negNode.typeConstraint) {
      flag("type constraint '" + negNode.typeConstraint + "' on label '" + negNode.label +
           "' is not enforced by the precondition");
    }
  }
  if (!out.empty()) return out;  // structural gaps make the rest unreliable

  for (const auto& e : neg->edges) {
    const std::string from = rule.embedding.at(e.from);
    const std::string to = rule.embedding.at(e.to);
    bool found = false;
    for (const auto& pe : rule.precondition.edges) {
      if (pe.relation == e.relation && pe.from == from && pe.to == to) {
        found = true;
        break;
      }
    }
    if (!found) {
      flag("edge " + to_string(e.relation) + "(" + e.from + ", " + e.to +
           ") is not present in the precondition");
    }
  }
  for (const auto& c : neg->attrConstraints) {
    const std::string image = rule.embedding.at(c.node);
    bool implied = false;
    for (const auto& pc : rule.precondition.attrConstraints) {
      if (pc.node == image && detail::value_constraint_implies(pc, c)) {
        implied = true;
        break;
      }
    }
    if (!implied) {
      flag("attribute constraint " + c.node + "." + c.attr + " " + to_string(c.op) + " " +
           c.value.dump() + " is not implied by the precondition");
    }
  }
  for (const auto& c : neg->aggConstraints) {
    const std::string image = rule.embedding.at(c.node);
    bool implied = false;
    for (const auto& pc : rule.precondition.aggConstraints) {
      if (pc.node == image && pc.relation == c.relation &&
          detail::comparison_implies(pc.op, pc.value, c.op, c.value, true)) {
        implied = true;
        break;
      }
    }
    if (!implied) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", c.value);
      flag("aggregate COUNT(" + c.relation + ") " + to_string(c.op) + " " + buf + " on label '" +
           c.node + "' is not implied by the precondition");
    }
  }
  return out;
}

// Parses and A1-validates a rule library; throws A1Error on any violation.
inline RuleSet load_rules(const std::vector<std::string>& paths, const PatternCatalog& catalog) {
  RuleSet set;
  std::vector<A1Violation> violations;
  for (const auto& path : paths) {
    AdaptationRule r = parse_rule_file(path);
    if (set.find(r.id)) throw ParseError("duplicate rule id '" + r.id + "'");
    auto vs = validate_a1(r, catalog);
    violations.insert(violations.end(), vs.begin(), vs.end());
    set.rules.push_back(std::move(r));
  }
  if (!violations.empty()) throw A1Error(std::move(violations));
  return set;
}

// ---- application ----------------------------------------------------------------

struct ApplicationResult {
  std::string ruleRef;
  Match matchUsed;      // match of the precondition
  Match embeddedMatch;  // induced match of the linked negative pattern
  std::vector<ModelDelta> deltas;
  bool a2Holds = false;  // the embedded match is invalid after application
  double estimatedGain = 0.0;
  double actualGain = 0.0;
};

inline MatchSet applicable_matches(const ModelGraph& g, const AdaptationRule& rule) {
  return find_matches(g, rule.precondition);
}

// Projects a precondition match onto the linked negative pattern.
inline Match induced_negative_match(const AdaptationRule& rule, const Match& matchUsed) {
  Match m;
  m.patternRef = rule.linkedNegative;
  for (const auto& [negLabel, preLabel] : rule.embedding) {
    auto it = matchUsed.binding.find(preLabel);
    if (it == matchUsed.binding.end()) {
      throw LookupError("match lacks binding for precondition label '" + preLabel + "'");
    }
    m.binding[negLabel] = it->second;
  }
  m.revisionSeen = matchUsed.revisionSeen;
  m.shopRef = matchUsed.shopRef;
  return m;
}

// Utility regained by resolving the induced negative match. Positive matches
// are assumed unaffected, so this is the negative sub-utility of the issue.
inline double estimate_impact(const ModelGraph& g, const AdaptationRule& rule,
                              const PatternCatalog& catalog, const Match& matchUsed) {
  if (!match_still_valid(g, rule.precondition, matchUsed)) {
    throw StalenessError("match " + matchUsed.binding_key() + " is no longer valid");
  }
  const Pattern* neg = catalog.find(rule.linkedNegative);
  if (!neg) throw LookupError("unknown pattern '" + rule.linkedNegative + "'");
  return eval_subutility(g, *neg, induced_negative_match(rule, matchUsed));
}

namespace detail {

struct RemovedComponentInfo {
  std::string typeRef;
  std::string shopRef;
  double criticality = 0.0;
  struct Link {
    std::string connectorId;
    std::string requiredPort;
    std::string providedPort;
    std::string interfaceType;
    bool requiredOwned = false;  // endpoint belonged to the removed component
    bool providedOwned = false;
  };
  std::vector<Link> links;
};

struct EffectContext {
  std::map<std::string, std::string> bindings;
  std::map<std::string, RemovedComponentInfo> removed;

  const std::string& id_of(const std::string& label) const {
    auto it = bindings.find(label);
    if (it == bindings.end()) throw EffectError("no binding for label '" + label + "'");
    return it->second;
  }
};

inline std::string port_of_kind(const ModelGraph& g, const std::string& componentId, PortKind kind,
                                const std::string& iface) {
  for (const auto& pid : g.ports_of(componentId)) {
    const InterfacePort& p = g.port(pid);
    if (p.kind == kind && p.interfaceType == iface) return pid;
  }
  throw EffectError("component '" + componentId + "' has no " + to_string(kind) +
                    " port of interface type '" + iface + "'");
}

inline void run_effect(ModelGraph& g, const Effect& e, EffectContext& ctx) {
  switch (e.kind) {
    case EffectKind::SetState: g.set_state(ctx.id_of(e.node), e.state); break;
    case EffectKind::ClearFailures: g.clear_failures(ctx.id_of(e.node)); break;
    case EffectKind::RemoveComponent: {
      const std::string id = ctx.id_of(e.node);
      const Component& c = g.component(id);
      RemovedComponentInfo info;
      info.typeRef = c.typeRef;
      info.shopRef = c.shopRef;
      info.criticality = c.criticality;
      std::set<std::string> seen;
      for (const auto& pid : g.ports_of(id)) {
        for (const auto& cid : g.connectors_of_port(pid)) {
          if (!seen.insert(cid).second) continue;
          const Connector& conn = g.connector(cid);
          RemovedComponentInfo::Link link;
          link.connectorId = cid;
          link.requiredPort = conn.requiredPort;
          link.providedPort = conn.providedPort;
          link.interfaceType = g.port(conn.requiredPort).interfaceType;
          link.requiredOwned = g.port(conn.requiredPort).ownerComponent == id;
          link.providedOwned = g.port(conn.providedPort).ownerComponent == id;
          info.links.push_back(std::move(link));
        }
      }
      std::sort(info.links.begin(), info.links.end(),
                [](const auto& a, const auto& b) { return a.connectorId < b.connectorId; });
      g.remove_component(id);
      ctx.removed[e.node] = std::move(info);
      break;
    }
    case EffectKind::CreateComponent: {
      const std::string shopId = ctx.id_of(e.shop);
      std::string baseType;
      double criticality = 0.0;
      auto removedIt = ctx.removed.find(e.of);
      if (removedIt != ctx.removed.end()) {
        baseType = removedIt->second.typeRef;
        criticality = removedIt->second.criticality;
      } else {
        const Component& base = g.component(ctx.id_of(e.of));
        baseType = base.typeRef;
        criticality = base.criticality;
      }
      std::string typeId = baseType;
      if (e.selector == TypeSelectorKind::AlternativeOf) {
        const auto& alts = g.component_type(baseType).alternatives;
        if (alts.empty()) {
          throw EffectError("type '" + baseType + "' has no alternative to switch to");
        }
        typeId = alts.front();  // sorted; deterministic choice
      }
      const std::string fresh = g.add_component(shopId, typeId, criticality,
                                                ComponentState::Started);
      ctx.bindings[e.as] = fresh;
      break;
    }
    case EffectKind::Rewire: {
      auto it = ctx.removed.find(e.oldNode);
      if (it == ctx.removed.end()) {
        throw EffectError("REWIRE source '" + e.oldNode + "' was not removed in this action");
      }
      const std::string freshId = ctx.id_of(e.newNode);
      for (const auto& link : it->second.links) {
        const std::string required =
            link.requiredOwned ? port_of_kind(g, freshId, PortKind::Required, link.interfaceType)
                               : link.requiredPort;
        const std::string provided =
            link.providedOwned ? port_of_kind(g, freshId, PortKind::Provided, link.interfaceType)
                               : link.providedPort;
        g.connect(required, provided);
      }
      break;
    }
  }
}

}  // namespace detail

// Applies the rule's effects atomically in list order. On any effect error the
// graph is left untouched. a2Holds reports whether the induced negative match
// became invalid; actualGain is the exact change in overall utility.
inline ApplicationResult apply_rule(ModelGraph& g, const AdaptationRule& rule,
                                    const PatternCatalog& catalog, const Match& matchUsed) {
  if (!match_still_valid(g, rule.precondition, matchUsed)) {
    throw StalenessError("match " + matchUsed.binding_key() + " is no longer valid");
  }
  const Pattern* neg = catalog.find(rule.linkedNegative);
  if (!neg) throw LookupError("unknown pattern '" + rule.linkedNegative + "'");

  ApplicationResult result;
  result.ruleRef = rule.id;
  result.matchUsed = matchUsed;
  result.embeddedMatch = induced_negative_match(rule, matchUsed);
  result.estimatedGain = eval_subutility(g, *neg, result.embeddedMatch);
  const double before = compute_utility(g, catalog).total;
  const std::uint64_t startRevision = g.revision();

  ModelGraph work = g;
  detail::EffectContext ctx;
  ctx.bindings = matchUsed.binding;
  for (const auto& e : rule.action) detail::run_effect(work, e, ctx);

  result.a2Holds = !match_still_valid(work, *neg, result.embeddedMatch);
  result.actualGain = compute_utility(work, catalog).total - before;
  result.deltas = work.deltas_since(startRevision);
  g = std::move(work);
  return result;
}

}  // namespace archheal
