#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <archheal/model.hpp>

namespace archheal {

enum class Polarity { Positive, Negative };
enum class NodeKind { Shop, Component, Port, Connector };
enum class Relation { Owns, HasPort, RequiredEnd, ProvidedEnd };
enum class Cmp { Lt, Le, Eq, Ge, Gt, Ne };

inline std::string to_string(Polarity p) {
  return p == Polarity::Positive ? "POSITIVE" : "NEGATIVE";
}

inline std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Shop: return "SHOP";
    case NodeKind::Component: return "COMPONENT";
    case NodeKind::Port: return "PORT";
    default: return "CONNECTOR";
  }
}

inline NodeKind node_kind_from_string(const std::string& s) {
  if (s == "SHOP") return NodeKind::Shop;
  if (s == "COMPONENT") return NodeKind::Component;
  if (s == "PORT") return NodeKind::Port;
  if (s == "CONNECTOR") return NodeKind::Connector;
  throw ParseError("unknown node kind '" + s + "'");
}

inline std::string to_string(Relation r) {
  switch (r) {
    case Relation::Owns: return "owns";
    case Relation::HasPort: return "has_port";
    case Relation::RequiredEnd: return "required_end";
    default: return "provided_end";
  }
}

inline Relation relation_from_string(const std::string& s) {
  if (s == "owns") return Relation::Owns;
  if (s == "has_port") return Relation::HasPort;
  if (s == "required_end") return Relation::RequiredEnd;
  if (s == "provided_end") return Relation::ProvidedEnd;
  throw ParseError("unknown edge relation '" + s + "'");
}

inline std::string to_string(Cmp c) {
  switch (c) {
    case Cmp::Lt: return "<";
    case Cmp::Le: return "<=";
    case Cmp::Eq: return "==";
    case Cmp::Ge: return ">=";
    case Cmp::Gt: return ">";
    default: return "!=";
  }
}

inline Cmp cmp_from_string(const std::string& s) {
  if (s == "<") return Cmp::Lt;
  if (s == "<=") return Cmp::Le;
  if (s == "==" || s == "=") return Cmp::Eq;
  if (s == ">=") return Cmp::Ge;
  if (s == ">") return Cmp::Gt;
  if (s == "!=") return Cmp::Ne;
  throw ParseError("unknown comparator '" + s + "'");
}

struct NodeSpec {
  std::string label;
  NodeKind kind = NodeKind::Component;
  std::string typeConstraint;  // component type id or port interface type; empty = none
};

struct EdgeSpec {
  Relation relation = Relation::Owns;
  std::string from;
  std::string to;
};

struct AttrConstraint {
  std::string node;
  std::string attr;
  Cmp op = Cmp::Eq;
  Json value;
};

// COUNT over a named relation of the bound element.
struct AggConstraint {
  std::string node;
  std::string relation;
  Cmp op = Cmp::Ge;
  double value = 0;
};

struct UtilityExpr {
  enum class Op { Const, Attr, Connectivity, Count, Product, Sum };
  Op op = Op::Const;
  double value = 0;
  std::string node;
  std::string name;  // attribute or relation name
  std::vector<UtilityExpr> children;
};

struct Pattern {
  std::string id;
  std::string name;
  Polarity polarity = Polarity::Positive;
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::vector<AttrConstraint> attrConstraints;
  std::vector<AggConstraint> aggConstraints;
  UtilityExpr utility;
  bool hasUtility = false;

  const NodeSpec* find_node(const std::string& label) const {
    for (const auto& n : nodes) {
      if (n.label == label) return &n;
    }
    return nullptr;
  }
};

struct PatternCatalog {
  std::vector<Pattern> positives;
  std::vector<Pattern> negatives;

  void add(Pattern p) {
    if (find(p.id)) throw ParseError("duplicate pattern id '" + p.id + "'");
    (p.polarity == Polarity::Positive ? positives : negatives).push_back(std::move(p));
  }

  const Pattern* find(const std::string& id) const {
    for (const auto& p : positives) {
      if (p.id == id) return &p;
    }
    for (const auto& p : negatives) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }
};

// Injective binding of pattern node labels to model element ids.
struct Match {
  std::string patternRef;
  std::map<std::string, std::string> binding;  // label -> element id
  std::uint64_t revisionSeen = 0;
  std::string shopRef;

  std::string binding_key() const {
    std::string key;
    for (const auto& [label, id] : binding) {
      key += label;
      key += '=';
      key += id;
      key += ';';
    }
    return key;
  }
};

struct MatchSet {
  std::string patternRef;
  std::vector<Match> matches;  // sorted by binding_key, unique
  std::uint64_t revision = 0;

  std::set<std::string> binding_keys() const {
    std::set<std::string> keys;
    for (const auto& m : matches) keys.insert(m.binding_key());
    return keys;
  }
};

// ---- attribute and relation access -----------------------------------------

namespace detail {

inline const std::set<std::string>& attr_names(NodeKind kind) {
  static const std::set<std::string> shopAttrs = {"name"};
  static const std::set<std::string> componentAttrs = {"state", "criticality", "reliability",
                                                       "repeatedOffender", "typeId"};
  static const std::set<std::string> portAttrs = {"kind", "interfaceType"};
  static const std::set<std::string> none;
  switch (kind) {
    case NodeKind::Shop: return shopAttrs;
    case NodeKind::Component: return componentAttrs;
    case NodeKind::Port: return portAttrs;
    default: return none;
  }
}

inline const std::set<std::string>& relation_names(NodeKind kind) {
  static const std::set<std::string> componentRels = {"connectors", "alternatives", "ports"};
  static const std::set<std::string> portRels = {"failureRecords", "connectors"};
  static const std::set<std::string> none;
  switch (kind) {
    case NodeKind::Component: return componentRels;
    case NodeKind::Port: return portRels;
    default: return none;
  }
}

}  // namespace detail

inline bool element_exists(const ModelGraph& g, NodeKind kind, const std::string& id) {
  switch (kind) {
    case NodeKind::Shop: return g.has_shop(id);
    case NodeKind::Component: return g.has_component(id);
    case NodeKind::Port: return g.has_port(id);
    default: return g.has_connector(id);
  }
}

inline Json attribute_value(const ModelGraph& g, NodeKind kind, const std::string& id,
                            const std::string& attr) {
  switch (kind) {
    case NodeKind::Shop: {
      if (attr == "name") return g.shop(id).name;
      break;
    }
    case NodeKind::Component: {
      const Component& c = g.component(id);
      if (attr == "state") return to_string(c.state);
      if (attr == "criticality") return c.criticality;
      if (attr == "reliability") return g.component_type(c.typeRef).reliability;
      if (attr == "repeatedOffender") return c.repeatedOffender;
      if (attr == "typeId") return c.typeRef;
      break;
    }
    case NodeKind::Port: {
      const InterfacePort& p = g.port(id);
      if (attr == "kind") return to_string(p.kind);
      if (attr == "interfaceType") return p.interfaceType;
      break;
    }
    default: break;
  }
  throw EvalError("no attribute '" + attr + "' on " + to_string(kind) + " elements");
}

inline std::size_t relation_count(const ModelGraph& g, NodeKind kind, const std::string& id,
                                  const std::string& relation) {
  if (kind == NodeKind::Component) {
    if (relation == "connectors") return static_cast<std::size_t>(g.connectivity(id));
    if (relation == "alternatives") {
      return g.component_type(g.component(id).typeRef).alternatives.size();
    }
    if (relation == "ports") return g.ports_of(id).size();
  } else if (kind == NodeKind::Port) {
    if (relation == "failureRecords") return g.failure_count(id);
    if (relation == "connectors") return g.connectors_of_port(id).size();
  }
  throw EvalError("no countable relation '" + relation + "' on " + to_string(kind) + " elements");
}

inline bool compare_values(const Json& lhs, Cmp op, const Json& rhs) {
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
  return false;  // ordering comparators only apply to numbers
}

// ---- parsing ----------------------------------------------------------------

inline UtilityExpr parse_utility_expr(const Json& j, const Pattern& owner) {
  if (!j.is_object() || !j.contains("op")) {
    throw ParseError("utility expression must be an object with an 'op' field");
  }
  const std::string op = j.at("op").get<std::string>();
  UtilityExpr e;
  if (op == "const") {
    e.op = UtilityExpr::Op::Const;
    if (!j.contains("value") || !j.at("value").is_number()) {
      throw ParseError("const expression needs a numeric 'value'");
    }
    e.value = j.at("value").get<double>();
  } else if (op == "attr" || op == "connectivity" || op == "count") {
    e.node = j.at("node").get<std::string>();
    const NodeSpec* spec = owner.find_node(e.node);
    if (!spec) throw ParseError("utility expression references undeclared label '" + e.node + "'");
    if (op == "attr") {
      e.op = UtilityExpr::Op::Attr;
      e.name = j.at("attr").get<std::string>();
      static const std::set<std::string> numericAttrs = {"criticality", "reliability"};
      if (!numericAttrs.count(e.name) || spec->kind != NodeKind::Component) {
        throw ParseError("attr expression supports numeric component attributes, got '" + e.name +
                         "' on " + to_string(spec->kind));
      }
    } else if (op == "connectivity") {
      e.op = UtilityExpr::Op::Connectivity;
      if (spec->kind != NodeKind::Component) {
        throw ParseError("connectivity applies to COMPONENT labels");
      }
    } else {
      e.op = UtilityExpr::Op::Count;
      e.name = j.at("relation").get<std::string>();
      if (!detail::relation_names(spec->kind).count(e.name)) {
        throw ParseError("no countable relation '" + e.name + "' on " + to_string(spec->kind));
      }
    }
  } else if (op == "product" || op == "sum") {
    e.op = op == "product" ? UtilityExpr::Op::Product : UtilityExpr::Op::Sum;
    if (!j.contains("args") || !j.at("args").is_array()) {
      throw ParseError("'" + op + "' expression needs an 'args' array");
    }
    for (const auto& child : j.at("args")) e.children.push_back(parse_utility_expr(child, owner));
  } else {
    throw ParseError("unknown utility expression op '" + op + "'");
  }
  return e;
}

// Parses a pattern document. Catalog patterns require polarity and a utility
// expression; rule preconditions (requirePolarity=false) carry neither.
inline Pattern parse_pattern(const Json& doc, bool requirePolarity = true,
                             const std::string& fallbackId = {}) {
  try {
    Pattern p;
    p.id = doc.value("id", fallbackId);
    if (p.id.empty()) throw ParseError("pattern needs an 'id'");
    p.name = doc.value("name", std::string{});
    if (requirePolarity) {
      const std::string pol = doc.at("polarity").get<std::string>();
      if (pol == "POSITIVE") {
        p.polarity = Polarity::Positive;
      } else if (pol == "NEGATIVE") {
        p.polarity = Polarity::Negative;
      } else {
        throw ParseError("unknown polarity '" + pol + "'");
      }
    }
    if (!doc.contains("nodes") || !doc.at("nodes").is_array() || doc.at("nodes").empty()) {
      throw ParseError("pattern '" + p.id + "' needs a non-empty 'nodes' array");
    }
    std::set<std::string> labels;
    for (const auto& nj : doc.at("nodes")) {
      NodeSpec n;
      n.label = nj.at("label").get<std::string>();
      n.kind = node_kind_from_string(nj.at("kind").get<std::string>());
      n.typeConstraint = nj.value("typeConstraint", std::string{});
      if (!labels.insert(n.label).second) {
        throw ParseError("duplicate node label '" + n.label + "' in pattern '" + p.id + "'");
      }
      if (!n.typeConstraint.empty() && n.kind != NodeKind::Component &&
          n.kind != NodeKind::Port) {
        throw ParseError("typeConstraint applies to COMPONENT or PORT labels only");
      }
      p.nodes.push_back(std::move(n));
    }
    auto requireLabel = [&](const std::string& label, const char* where) {
      if (!labels.count(label)) {
        throw ParseError(std::string(where) + " references undeclared label '" + label +
                         "' in pattern '" + p.id + "'");
      }
    };
    for (const auto& ej : doc.value("edges", Json::array())) {
      EdgeSpec e;
      e.relation = relation_from_string(ej.at("relation").get<std::string>());
      e.from = ej.at("from").get<std::string>();
      e.to = ej.at("to").get<std::string>();
      requireLabel(e.from, "edge");
      requireLabel(e.to, "edge");
      const NodeKind fromKind = p.find_node(e.from)->kind;
      const NodeKind toKind = p.find_node(e.to)->kind;
      const bool ok = (e.relation == Relation::Owns && fromKind == NodeKind::Shop &&
                       toKind == NodeKind::Component) ||
                      (e.relation == Relation::HasPort && fromKind == NodeKind::Component &&
                       toKind == NodeKind::Port) ||
                      ((e.relation == Relation::RequiredEnd ||
                        e.relation == Relation::ProvidedEnd) &&
                       fromKind == NodeKind::Connector && toKind == NodeKind::Port);
      if (!ok) {
        throw ParseError("edge relation '" + to_string(e.relation) +
                         "' does not fit node kinds in pattern '" + p.id + "'");
      }
      p.edges.push_back(std::move(e));
    }
    for (const auto& wj : doc.value("where", Json::array())) {
      const std::string node = wj.at("node").get<std::string>();
      requireLabel(node, "constraint");
      const NodeKind kind = p.find_node(node)->kind;
      const Cmp op = cmp_from_string(wj.at("op").get<std::string>());
      if (wj.contains("attr")) {
        AttrConstraint c;
        c.node = node;
        c.attr = wj.at("attr").get<std::string>();
        c.op = op;
        c.value = wj.at("value");
        if (!detail::attr_names(kind).count(c.attr)) {
          throw ParseError("no attribute '" + c.attr + "' on " + to_string(kind) + " labels");
        }
        if (c.attr == "state" && c.value.is_string()) {
          component_state_from_string(c.value.get<std::string>());
        }
        if (c.attr == "kind" && c.value.is_string()) {
          port_kind_from_string(c.value.get<std::string>());
        }
        p.attrConstraints.push_back(std::move(c));
      } else if (wj.contains("count")) {
        AggConstraint c;
        c.node = node;
        c.relation = wj.at("count").get<std::string>();
        c.op = op;
        if (c.op == Cmp::Ne) throw ParseError("aggregate comparators are <, <=, ==, >=, >");
        if (!wj.at("value").is_number()) throw ParseError("aggregate value must be numeric");
        c.value = wj.at("value").get<double>();
        if (!detail::relation_names(kind).count(c.relation)) {
          throw ParseError("no countable relation '" + c.relation + "' on " + to_string(kind) +
                           " labels");
        }
        p.aggConstraints.push_back(std::move(c));
      } else {
        throw ParseError("constraint needs either 'attr' or 'count'");
      }
    }
    // Multi-node patterns must be edge-connected so per-shop matching is
    // equivalent to a global search.
    if (p.nodes.size() > 1) {
      std::map<std::string, std::string> parent;
      for (const auto& n : p.nodes) parent[n.label] = n.label;
      std::function<std::string(const std::string&)> find = [&](const std::string& x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
      };
      for (const auto& e : p.edges) parent[find(e.from)] = find(e.to);
      const std::string root = find(p.nodes.front().label);
      for (const auto& n : p.nodes) {
        if (find(n.label) != root) {
          throw ParseError("pattern '" + p.id + "' is disconnected: label '" + n.label +
                           "' is not linked by any edge");
        }
      }
    }
    if (doc.contains("utility")) {
      p.utility = parse_utility_expr(doc.at("utility"), p);
      p.hasUtility = true;
    } else if (requirePolarity) {
      throw ParseError("pattern '" + p.id + "' needs a 'utility' expression");
    }
    return p;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed pattern document: ") + e.what());
  }
}

inline Pattern parse_pattern_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pattern file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
  return parse_pattern(doc);
}

inline PatternCatalog load_catalog(const std::vector<std::string>& paths) {
  PatternCatalog catalog;
  for (const auto& path : paths) catalog.add(parse_pattern_file(path));
  return catalog;
}

// ---- matching ----------------------------------------------------------------

namespace detail {

inline bool node_ok(const ModelGraph& g, const NodeSpec& spec, const std::string& id) {
  if (spec.typeConstraint.empty()) return true;
  if (spec.kind == NodeKind::Component) return g.component(id).typeRef == spec.typeConstraint;
  if (spec.kind == NodeKind::Port) return g.port(id).interfaceType == spec.typeConstraint;
  return true;
}

inline bool edge_ok(const ModelGraph& g, const EdgeSpec& e, const std::string& fromId,
                    const std::string& toId) {
  switch (e.relation) {
    case Relation::Owns: return g.component(toId).shopRef == fromId;
    case Relation::HasPort: return g.port(toId).ownerComponent == fromId;
    case Relation::RequiredEnd: return g.connector(fromId).requiredPort == toId;
    case Relation::ProvidedEnd: return g.connector(fromId).providedPort == toId;
  }
  return false;
}

inline bool attr_ok(const ModelGraph& g, NodeKind kind, const AttrConstraint& c,
                    const std::string& id) {
  return compare_values(attribute_value(g, kind, id, c.attr), c.op, c.value);
}

inline bool agg_ok(const ModelGraph& g, NodeKind kind, const AggConstraint& c,
                   const std::string& id) {
  const double count = static_cast<double>(relation_count(g, kind, id, c.relation));
  return compare_values(count, c.op, c.value);
}

// Candidate element ids for a node spec, restricted to one shop; sorted.
inline std::vector<std::string> shop_candidates(const ModelGraph& g, const NodeSpec& spec,
                                                const std::string& shopId) {
  std::vector<std::string> out;
  switch (spec.kind) {
    case NodeKind::Shop: out.push_back(shopId); break;
    case NodeKind::Component: out = g.shop(shopId).componentRefs; break;
    case NodeKind::Port: {
      for (const auto& cid : g.shop(shopId).componentRefs) {
        const auto& pids = g.ports_of(cid);
        out.insert(out.end(), pids.begin(), pids.end());
      }
      std::sort(out.begin(), out.end());
      break;
    }
    case NodeKind::Connector: {
      std::set<std::string> seen;
      for (const auto& cid : g.shop(shopId).componentRefs) {
        for (const auto& pid : g.ports_of(cid)) {
          const auto& conns = g.connectors_of_port(pid);
          seen.insert(conns.begin(), conns.end());
        }
      }
      out.assign(seen.begin(), seen.end());
      break;
    }
  }
  return out;
}

struct MatchPlan {
  // Per node index: constraints on that node and edges whose endpoints are
  // both assigned once this node is bound.
  std::vector<std::vector<const AttrConstraint*>> attrs;
  std::vector<std::vector<const AggConstraint*>> aggs;
  std::vector<std::vector<const EdgeSpec*>> edges;

  explicit MatchPlan(const Pattern& p) {
    attrs.resize(p.nodes.size());
    aggs.resize(p.nodes.size());
    edges.resize(p.nodes.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) index[p.nodes[i].label] = i;
    for (const auto& c : p.attrConstraints) attrs[index.at(c.node)].push_back(&c);
    for (const auto& c : p.aggConstraints) aggs[index.at(c.node)].push_back(&c);
    for (const auto& e : p.edges) {
      edges[std::max(index.at(e.from), index.at(e.to))].push_back(&e);
    }
  }
};

inline std::size_t find_index(const Pattern& p, const std::string& label) {
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    if (p.nodes[i].label == label) return i;
  }
  throw LookupError("label '" + label + "' not in pattern '" + p.id + "'");
}

inline void match_in_shop(const ModelGraph& g, const Pattern& p, const MatchPlan& plan,
                          const std::string& shopId, std::vector<Match>& out) {
  const std::size_t n = p.nodes.size();
  std::vector<std::vector<std::string>> candidates(n);
  for (std::size_t i = 0; i < n; ++i) candidates[i] = shop_candidates(g, p.nodes[i], shopId);
  std::vector<std::string> bound(n);
  std::set<std::string> used;

  std::function<void(std::size_t)> descend = [&](std::size_t level) {
    if (level == n) {
      Match m;
      m.patternRef = p.id;
      for (std::size_t i = 0; i < n; ++i) m.binding[p.nodes[i].label] = bound[i];
      m.shopRef = shopId;
      out.push_back(std::move(m));
      return;
    }
    const NodeSpec& spec = p.nodes[level];
    for (const auto& id : candidates[level]) {
      if (used.count(id)) continue;
      if (!node_ok(g, spec, id)) continue;
      bool ok = true;
      for (const auto* c : plan.attrs[level]) {
        if (!attr_ok(g, spec.kind, *c, id)) { ok = false; break; }
      }
      if (ok) {
        for (const auto* c : plan.aggs[level]) {
          if (!agg_ok(g, spec.kind, *c, id)) { ok = false; break; }
        }
      }
      if (ok) {
        bound[level] = id;
        for (const auto* e : plan.edges[level]) {
          const std::string& fromId = bound[find_index(p, e->from)];
          const std::string& toId = bound[find_index(p, e->to)];
          if (!edge_ok(g, *e, fromId, toId)) { ok = false; break; }
        }
      }
      if (!ok) continue;
      used.insert(id);
      descend(level + 1);
      used.erase(id);
    }
  };
  descend(0);
}

}  // namespace detail

inline void sort_matches(std::vector<Match>& matches) {
  std::sort(matches.begin(), matches.end(),
            [](const Match& a, const Match& b) { return a.binding_key() < b.binding_key(); });
}

// All injective bindings of the pattern in the graph; deterministic order
// (sorted by binding ids). Matching is shop-scoped: connectors never cross
// shops, so each match lives entirely inside one shop.
inline MatchSet find_matches(const ModelGraph& g, const Pattern& p) {
  MatchSet ms;
  ms.patternRef = p.id;
  detail::MatchPlan plan(p);
  for (const auto& [shopId, shop] : g.shops()) {
    detail::match_in_shop(g, p, plan, shopId, ms.matches);
  }
  sort_matches(ms.matches);
  ms.revision = g.revision();
  for (auto& m : ms.matches) m.revisionSeen = ms.revision;
  return ms;
}

// True iff all bound elements still exist and every pattern constraint holds
// under the binding at the current revision.
inline bool match_still_valid(const ModelGraph& g, const Pattern& p, const Match& m) {
  if (m.binding.size() != p.nodes.size()) return false;
  std::set<std::string> used;
  for (const auto& spec : p.nodes) {
    auto it = m.binding.find(spec.label);
    if (it == m.binding.end()) return false;
    const std::string& id = it->second;
    if (!used.insert(id).second) return false;  // injectivity
    if (!element_exists(g, spec.kind, id)) return false;
    if (!detail::node_ok(g, spec, id)) return false;
  }
  for (const auto& c : p.attrConstraints) {
    const NodeSpec* spec = p.find_node(c.node);
    if (!detail::attr_ok(g, spec->kind, c, m.binding.at(c.node))) return false;
  }
  for (const auto& c : p.aggConstraints) {
    const NodeSpec* spec = p.find_node(c.node);
    if (!detail::agg_ok(g, spec->kind, c, m.binding.at(c.node))) return false;
  }
  for (const auto& e : p.edges) {
    if (!detail::edge_ok(g, e, m.binding.at(e.from), m.binding.at(e.to))) return false;
  }
  return true;
}

namespace detail {

// Checks that `deltas` is the complete ordered stream between the two
// revisions: groups share a revision, consecutive groups step by one.
inline void check_delta_stream(std::uint64_t fromRevision, std::uint64_t toRevision,
                               const std::vector<ModelDelta>& deltas) {
  if (deltas.empty()) {
    if (fromRevision != toRevision) {
      throw StalenessError("empty delta stream but revision moved from " +
                           std::to_string(fromRevision) + " to " + std::to_string(toRevision));
    }
    return;
  }
  std::uint64_t expected = fromRevision + 1;
  bool first = true;
  for (const auto& d : deltas) {
    if (!first && d.revision == expected + 1) ++expected;
    if (d.revision != expected) {
      throw StalenessError("gap in delta stream: expected revision " + std::to_string(expected) +
                           ", got " + std::to_string(d.revision));
    }
    first = false;
  }
  if (expected != toRevision) {
    throw StalenessError("delta stream ends at revision " + std::to_string(expected) +
                         " but graph is at " + std::to_string(toRevision));
  }
}

}  // namespace detail

// Incremental re-evaluation: rescans only the shops touched by the deltas.
// The result is indistinguishable from a full find_matches call.
inline MatchSet refresh_matches(const ModelGraph& g, const Pattern& p, const MatchSet& ms,
                                const std::vector<ModelDelta>& deltas) {
  if (ms.patternRef != p.id) {
    throw LookupError("match set belongs to pattern '" + ms.patternRef + "', not '" + p.id + "'");
  }
  detail::check_delta_stream(ms.revision, g.revision(), deltas);
  if (deltas.empty()) {
    return ms;
  }
  bool fullRescan = false;
  std::set<std::string> affected;
  for (const auto& d : deltas) {
    if (d.elementKind == ElementKind::ComponentType || d.shopRef.empty()) {
      fullRescan = true;
      break;
    }
    affected.insert(d.shopRef);
  }
  if (fullRescan) return find_matches(g, p);

  MatchSet next;
  next.patternRef = p.id;
  for (const auto& m : ms.matches) {
    if (!affected.count(m.shopRef)) next.matches.push_back(m);
  }
  detail::MatchPlan plan(p);
  for (const auto& shopId : affected) {
    if (!g.has_shop(shopId)) continue;
    detail::match_in_shop(g, p, plan, shopId, next.matches);
  }
  sort_matches(next.matches);
  next.revision = g.revision();
  for (auto& m : next.matches) m.revisionSeen = next.revision;
  return next;
}

}  // namespace archheal
