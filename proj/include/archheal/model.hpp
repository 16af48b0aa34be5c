#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <archheal/errors.hpp>

namespace archheal {

using Json = nlohmann::json;

enum class ComponentState { Started, NotStarted };
enum class PortKind { Provided, Required };

inline std::string to_string(ComponentState s) {
  return s == ComponentState::Started ? "STARTED" : "NOT_STARTED";
}

inline ComponentState component_state_from_string(const std::string& s) {
  if (s == "STARTED") return ComponentState::Started;
  if (s == "NOT_STARTED") return ComponentState::NotStarted;
  throw ParseError("unknown component state '" + s + "'");
}

inline std::string to_string(PortKind k) {
  return k == PortKind::Provided ? "PROVIDED" : "REQUIRED";
}

inline PortKind port_kind_from_string(const std::string& s) {
  if (s == "PROVIDED") return PortKind::Provided;
  if (s == "REQUIRED") return PortKind::Required;
  throw ParseError("unknown port kind '" + s + "'");
}

struct ComponentType {
  std::string id;
  std::string name;
  double reliability = 1.0;
  std::vector<std::string> providedInterfaceTypes;  // sorted, unique
  std::vector<std::string> requiredInterfaceTypes;  // sorted, unique
  std::vector<std::string> alternatives;            // sorted, excludes self
};

struct Component {
  std::string id;
  std::string typeRef;
  std::string shopRef;
  ComponentState state = ComponentState::Started;
  double criticality = 0.0;
  bool repeatedOffender = false;
};

struct Shop {
  std::string id;
  std::string name;
  std::vector<std::string> componentRefs;  // sorted
};

struct FailureRecord {
  std::string id;
  std::int64_t timestamp = 0;
  std::string description;
};

struct InterfacePort {
  std::string id;
  PortKind kind = PortKind::Provided;
  std::string interfaceType;
  std::string ownerComponent;
  std::vector<FailureRecord> failureRecords;  // insertion order; provided ports only
};

struct Connector {
  std::string id;
  std::string requiredPort;
  std::string providedPort;
};

enum class DeltaKind { ElementAdded, ElementRemoved, AttributeChanged };
enum class ElementKind { Shop, ComponentType, Component, Port, Connector, Failure };

inline std::string to_string(DeltaKind k) {
  switch (k) {
    case DeltaKind::ElementAdded: return "ELEMENT_ADDED";
    case DeltaKind::ElementRemoved: return "ELEMENT_REMOVED";
    default: return "ATTRIBUTE_CHANGED";
  }
}

inline std::string to_string(ElementKind k) {
  switch (k) {
    case ElementKind::Shop: return "SHOP";
    case ElementKind::ComponentType: return "COMPONENT_TYPE";
    case ElementKind::Component: return "COMPONENT";
    case ElementKind::Port: return "PORT";
    case ElementKind::Connector: return "CONNECTOR";
    default: return "FAILURE";
  }
}

// One observable change to the graph. ELEMENT_ADDED/REMOVED carry the full
// element snapshot in `payload`; replaying a complete stream from the empty
// graph reconstructs the live graph element by element.
struct ModelDelta {
  DeltaKind kind = DeltaKind::ElementAdded;
  ElementKind elementKind = ElementKind::Shop;
  std::string elementRef;
  std::string shopRef;  // owning shop; empty for component types
  std::string attribute;
  Json oldValue;
  Json newValue;
  Json payload;
  std::uint64_t revision = 0;
};

struct Violation {
  std::string invariant;
  std::string elementRef;
  std::string message;
};

inline Json to_json(const ComponentType& t) {
  return Json{{"alternatives", t.alternatives},
              {"id", t.id},
              {"name", t.name},
              {"providedInterfaceTypes", t.providedInterfaceTypes},
              {"reliability", t.reliability},
              {"requiredInterfaceTypes", t.requiredInterfaceTypes}};
}

inline Json to_json(const Component& c) {
  return Json{{"criticality", c.criticality}, {"id", c.id},
              {"repeatedOffender", c.repeatedOffender}, {"shopRef", c.shopRef},
              {"state", to_string(c.state)},  {"typeRef", c.typeRef}};
}

inline Json to_json(const Shop& s) {
  return Json{{"componentRefs", s.componentRefs}, {"id", s.id}, {"name", s.name}};
}

inline Json to_json(const InterfacePort& p) {
  return Json{{"id", p.id},
              {"interfaceType", p.interfaceType},
              {"kind", to_string(p.kind)},
              {"ownerComponent", p.ownerComponent}};
}

inline Json to_json(const Connector& c) {
  return Json{{"id", c.id}, {"providedPort", c.providedPort}, {"requiredPort", c.requiredPort}};
}

inline Json failure_to_json(const std::string& portId, const FailureRecord& f) {
  return Json{{"description", f.description}, {"id", f.id}, {"port", portId},
              {"timestamp", f.timestamp}};
}

inline ComponentType component_type_from_json(const Json& j) {
  ComponentType t;
  t.id = j.at("id").get<std::string>();
  t.name = j.value("name", std::string{});
  t.reliability = j.at("reliability").get<double>();
  t.providedInterfaceTypes = j.at("providedInterfaceTypes").get<std::vector<std::string>>();
  t.requiredInterfaceTypes = j.at("requiredInterfaceTypes").get<std::vector<std::string>>();
  t.alternatives = j.value("alternatives", std::vector<std::string>{});
  std::sort(t.providedInterfaceTypes.begin(), t.providedInterfaceTypes.end());
  std::sort(t.requiredInterfaceTypes.begin(), t.requiredInterfaceTypes.end());
  std::sort(t.alternatives.begin(), t.alternatives.end());
  return t;
}

inline Component component_from_json(const Json& j) {
  Component c;
  c.id = j.at("id").get<std::string>();
  c.typeRef = j.at("typeRef").get<std::string>();
  c.shopRef = j.at("shopRef").get<std::string>();
  c.state = component_state_from_string(j.at("state").get<std::string>());
  c.criticality = j.at("criticality").get<double>();
  c.repeatedOffender = j.value("repeatedOffender", false);
  return c;
}

inline Shop shop_from_json(const Json& j) {
  Shop s;
  s.id = j.at("id").get<std::string>();
  s.name = j.value("name", std::string{});
  s.componentRefs = j.value("componentRefs", std::vector<std::string>{});
  std::sort(s.componentRefs.begin(), s.componentRefs.end());
  return s;
}

inline InterfacePort port_from_json(const Json& j) {
  InterfacePort p;
  p.id = j.at("id").get<std::string>();
  p.kind = port_kind_from_string(j.at("kind").get<std::string>());
  p.interfaceType = j.at("interfaceType").get<std::string>();
  p.ownerComponent = j.at("ownerComponent").get<std::string>();
  return p;
}

inline Connector connector_from_json(const Json& j) {
  Connector c;
  c.id = j.at("id").get<std::string>();
  c.requiredPort = j.at("requiredPort").get<std::string>();
  c.providedPort = j.at("providedPort").get<std::string>();
  return c;
}

// The architectural runtime model: a typed attributed graph of shops,
// components, interface ports, connectors and failure records. All mutations
// are atomic, bump the revision counter once, and append deltas to the log.
class ModelGraph {
public:
  ModelGraph() = default;

  // ---- mutation primitives ------------------------------------------------

  std::string add_component_type(const std::string& name, double reliability,
                                 std::vector<std::string> provided,
                                 std::vector<std::string> required) {
    if (!(reliability > 0.0 && reliability <= 1.0)) {
      throw ValidationError("reliability must be in (0,1], got " + std::to_string(reliability));
    }
    std::sort(provided.begin(), provided.end());
    provided.erase(std::unique(provided.begin(), provided.end()), provided.end());
    std::sort(required.begin(), required.end());
    required.erase(std::unique(required.begin(), required.end()), required.end());
    ComponentType t;
    t.id = fresh_id("ct", nextType_);
    t.name = name;
    t.reliability = reliability;
    t.providedInterfaceTypes = std::move(provided);
    t.requiredInterfaceTypes = std::move(required);
    bump();
    types_.emplace(t.id, t);
    log_added(ElementKind::ComponentType, t.id, "", to_json(t));
    return t.id;
  }

  // Cross-links a group of types as mutual alternatives. All members must
  // share identical provided/required interface-type sets.
  void mark_alternatives(std::vector<std::string> typeIds) {
    std::sort(typeIds.begin(), typeIds.end());
    typeIds.erase(std::unique(typeIds.begin(), typeIds.end()), typeIds.end());
    if (typeIds.size() < 2) {
      throw ValidationError("alternative group needs at least two types");
    }
    const ComponentType* first = nullptr;
    for (const auto& id : typeIds) {
      const ComponentType& t = component_type(id);
      if (!first) {
        first = &types_.at(id);
      } else if (t.providedInterfaceTypes != first->providedInterfaceTypes ||
                 t.requiredInterfaceTypes != first->requiredInterfaceTypes) {
        throw ValidationError("alternative types must share interface-type sets: " + id +
                              " differs from " + first->id);
      }
    }
    bump();
    for (const auto& id : typeIds) {
      ComponentType& t = types_.at(id);
      std::vector<std::string> next;
      for (const auto& other : typeIds) {
        if (other != id) next.push_back(other);
      }
      Json oldVal = t.alternatives;
      t.alternatives = std::move(next);
      log_attr(ElementKind::ComponentType, id, "", "alternatives", oldVal, t.alternatives);
    }
  }

  std::string add_shop(const std::string& name) {
    Shop s;
    s.id = fresh_id("shop", nextShop_);
    s.name = name;
    bump();
    shops_.emplace(s.id, s);
    log_added(ElementKind::Shop, s.id, s.id, to_json(s));
    return s.id;
  }

  // Creates the component plus one port per provided/required interface type
  // of its component type.
  std::string add_component(const std::string& shopId, const std::string& typeId,
                            double criticality, ComponentState state) {
    Shop& s = mutable_shop(shopId);
    const ComponentType& t = component_type(typeId);
    if (criticality < 0.0) {
      throw ValidationError("criticality must be >= 0, got " + std::to_string(criticality));
    }
    Component c;
    c.id = fresh_id("c", nextComponent_);
    c.typeRef = typeId;
    c.shopRef = shopId;
    c.state = state;
    c.criticality = criticality;
    bump();
    components_.emplace(c.id, c);
    insert_sorted(s.componentRefs, c.id);
    portsByComponent_.emplace(c.id, std::vector<std::string>{});
    log_added(ElementKind::Component, c.id, shopId, to_json(c));
    for (const auto& iface : t.providedInterfaceTypes) {
      add_port_internal(c.id, shopId, PortKind::Provided, iface);
    }
    for (const auto& iface : t.requiredInterfaceTypes) {
      add_port_internal(c.id, shopId, PortKind::Required, iface);
    }
    return c.id;
  }

  std::string connect(const std::string& requiredPortId, const std::string& providedPortId) {
    const InterfacePort& req = port(requiredPortId);
    const InterfacePort& prov = port(providedPortId);
    if (req.kind != PortKind::Required) {
      throw ValidationError("first connect argument must be a REQUIRED port: " + requiredPortId,
                            ErrorCode::KindMismatch);
    }
    if (prov.kind != PortKind::Provided) {
      throw ValidationError("second connect argument must be a PROVIDED port: " + providedPortId,
                            ErrorCode::KindMismatch);
    }
    if (req.interfaceType != prov.interfaceType) {
      throw ValidationError("interface types differ: " + req.interfaceType + " vs " +
                                prov.interfaceType,
                            ErrorCode::InterfaceMismatch);
    }
    const std::string shopA = component(req.ownerComponent).shopRef;
    const std::string shopB = component(prov.ownerComponent).shopRef;
    if (shopA != shopB) {
      throw ValidationError("connectors may not cross shops: " + shopA + " vs " + shopB,
                            ErrorCode::CrossShop);
    }
    Connector conn;
    conn.id = fresh_id("conn", nextConnector_);
    conn.requiredPort = requiredPortId;
    conn.providedPort = providedPortId;
    bump();
    connectors_.emplace(conn.id, conn);
    connectorsByPort_[requiredPortId].push_back(conn.id);
    connectorsByPort_[providedPortId].push_back(conn.id);
    log_added(ElementKind::Connector, conn.id, shopA, to_json(conn));
    return conn.id;
  }

  // Idempotent writes still emit a delta.
  ModelDelta set_state(const std::string& componentId, ComponentState state) {
    Component& c = mutable_component(componentId);
    const Json oldVal = to_string(c.state);
    c.state = state;
    bump();
    log_attr(ElementKind::Component, componentId, c.shopRef, "state", oldVal, to_string(state));
    return log_.back();
  }

  ModelDelta set_repeated_offender(const std::string& componentId, bool flag) {
    Component& c = mutable_component(componentId);
    const Json oldVal = c.repeatedOffender;
    c.repeatedOffender = flag;
    bump();
    log_attr(ElementKind::Component, componentId, c.shopRef, "repeatedOffender", oldVal, flag);
    return log_.back();
  }

  std::string record_failure(const std::string& portId, std::int64_t timestamp,
                             const std::string& description = "") {
    InterfacePort& p = mutable_port(portId);
    if (p.kind != PortKind::Provided) {
      throw ValidationError("failures attach to PROVIDED ports only: " + portId,
                            ErrorCode::KindMismatch);
    }
    if (timestamp < 0) {
      throw ValidationError("failure timestamp must be >= 0");
    }
    FailureRecord f;
    f.id = fresh_id("f", nextFailure_);
    f.timestamp = timestamp;
    f.description = description;
    bump();
    p.failureRecords.push_back(f);
    log_added(ElementKind::Failure, f.id, component(p.ownerComponent).shopRef,
              failure_to_json(portId, f));
    return f.id;
  }

  // Removing nothing is a successful no-op: no deltas, no revision bump.
  std::size_t clear_failures(const std::string& portId) {
    InterfacePort& p = mutable_port(portId);
    if (p.kind != PortKind::Provided) {
      throw ValidationError("failures attach to PROVIDED ports only: " + portId,
                            ErrorCode::KindMismatch);
    }
    if (p.failureRecords.empty()) return 0;
    const std::string shopId = component(p.ownerComponent).shopRef;
    std::vector<FailureRecord> removed;
    removed.swap(p.failureRecords);
    bump();
    for (const auto& f : removed) {
      log_removed(ElementKind::Failure, f.id, shopId, failure_to_json(portId, f));
    }
    return removed.size();
  }

  // Removes the component, its ports, and every connector touching those
  // ports; deltas in dependency order (connectors, ports, component).
  std::vector<ModelDelta> remove_component(const std::string& componentId) {
    const Component c = component(componentId);
    const auto portIds = portsByComponent_.at(componentId);
    std::set<std::string> connIds;
    for (const auto& pid : portIds) {
      auto it = connectorsByPort_.find(pid);
      if (it == connectorsByPort_.end()) continue;
      connIds.insert(it->second.begin(), it->second.end());
    }
    bump();
    const std::size_t logStart = log_.size();
    for (const auto& cid : connIds) {
      const Connector conn = connectors_.at(cid);
      detach_connector(conn);
      connectors_.erase(cid);
      log_removed(ElementKind::Connector, cid, c.shopRef, to_json(conn));
    }
    for (const auto& pid : portIds) {
      const InterfacePort p = ports_.at(pid);
      ports_.erase(pid);
      connectorsByPort_.erase(pid);
      log_removed(ElementKind::Port, pid, c.shopRef, to_json(p));
    }
    portsByComponent_.erase(componentId);
    components_.erase(componentId);
    erase_sorted(shops_.at(c.shopRef).componentRefs, componentId);
    log_removed(ElementKind::Component, componentId, c.shopRef, to_json(c));
    return std::vector<ModelDelta>(log_.begin() + static_cast<std::ptrdiff_t>(logStart),
                                   log_.end());
  }

  // ---- validation ----------------------------------------------------------

  // Reports invariant violations; never throws.
  std::vector<Violation> validate() const {
    std::vector<Violation> out;
    auto flag = [&out](const std::string& inv, const std::string& ref, const std::string& msg) {
      out.push_back({inv, ref, msg});
    };
    for (const auto& [id, t] : types_) {
      if (!(t.reliability > 0.0 && t.reliability <= 1.0)) {
        flag("reliability-range", id, "reliability outside (0,1]");
      }
      for (const auto& alt : t.alternatives) {
        auto it = types_.find(alt);
        if (it == types_.end()) {
          flag("ref-integrity", id, "alternative '" + alt + "' does not resolve");
        } else if (it->second.providedInterfaceTypes != t.providedInterfaceTypes ||
                   it->second.requiredInterfaceTypes != t.requiredInterfaceTypes) {
          flag("alternatives-interfaces", id,
               "alternative '" + alt + "' has different interface-type sets");
        }
      }
    }
    std::map<std::string, std::string> owningShop;
    for (const auto& [id, s] : shops_) {
      for (const auto& cid : s.componentRefs) {
        if (!components_.count(cid)) {
          flag("ref-integrity", id, "component '" + cid + "' does not resolve");
          continue;
        }
        auto [it, inserted] = owningShop.emplace(cid, id);
        if (!inserted) {
          flag("shop-disjoint", cid, "component listed by shops " + it->second + " and " + id);
        }
      }
    }
    for (const auto& [id, c] : components_) {
      if (!types_.count(c.typeRef)) flag("ref-integrity", id, "type does not resolve");
      auto it = shops_.find(c.shopRef);
      if (it == shops_.end()) {
        flag("ref-integrity", id, "shop does not resolve");
      } else if (!std::binary_search(it->second.componentRefs.begin(),
                                     it->second.componentRefs.end(), id)) {
        flag("shop-disjoint", id, "owning shop does not list the component");
      }
      if (c.criticality < 0.0) flag("criticality-nonnegative", id, "criticality < 0");
    }
    for (const auto& [id, p] : ports_) {
      if (!components_.count(p.ownerComponent)) {
        flag("port-owner", id, "owner component does not resolve");
      }
      if (p.kind == PortKind::Required && !p.failureRecords.empty()) {
        flag("required-port-failures", id, "REQUIRED port carries failure records");
      }
      for (const auto& f : p.failureRecords) {
        if (f.timestamp < 0) flag("failure-timestamp", f.id, "timestamp < 0");
      }
    }
    for (const auto& [id, conn] : connectors_) {
      auto reqIt = ports_.find(conn.requiredPort);
      auto provIt = ports_.find(conn.providedPort);
      if (reqIt == ports_.end() || provIt == ports_.end()) {
        flag("ref-integrity", id, "connector endpoint does not resolve");
        continue;
      }
      if (reqIt->second.kind != PortKind::Required || provIt->second.kind != PortKind::Provided) {
        flag("connector-kind", id, "endpoint kinds are not REQUIRED/PROVIDED");
      }
      if (reqIt->second.interfaceType != provIt->second.interfaceType) {
        flag("connector-interface", id, "endpoint interface types differ");
      }
      auto reqOwner = components_.find(reqIt->second.ownerComponent);
      auto provOwner = components_.find(provIt->second.ownerComponent);
      if (reqOwner != components_.end() && provOwner != components_.end() &&
          reqOwner->second.shopRef != provOwner->second.shopRef) {
        flag("connector-shop", id, "connector crosses shops");
      }
    }
    return out;
  }

  // ---- accessors ----------------------------------------------------------

  const std::map<std::string, ComponentType>& component_types() const { return types_; }
  const std::map<std::string, Shop>& shops() const { return shops_; }
  const std::map<std::string, Component>& components() const { return components_; }
  const std::map<std::string, InterfacePort>& ports() const { return ports_; }
  const std::map<std::string, Connector>& connectors() const { return connectors_; }

  const ComponentType& component_type(const std::string& id) const {
    auto it = types_.find(id);
    if (it == types_.end()) throw LookupError("unknown component type '" + id + "'");
    return it->second;
  }
  const Shop& shop(const std::string& id) const {
    auto it = shops_.find(id);
    if (it == shops_.end()) throw LookupError("unknown shop '" + id + "'");
    return it->second;
  }
  const Component& component(const std::string& id) const {
    auto it = components_.find(id);
    if (it == components_.end()) throw LookupError("unknown component '" + id + "'");
    return it->second;
  }
  const InterfacePort& port(const std::string& id) const {
    auto it = ports_.find(id);
    if (it == ports_.end()) throw LookupError("unknown port '" + id + "'");
    return it->second;
  }
  const Connector& connector(const std::string& id) const {
    auto it = connectors_.find(id);
    if (it == connectors_.end()) throw LookupError("unknown connector '" + id + "'");
    return it->second;
  }

  bool has_shop(const std::string& id) const { return shops_.count(id) > 0; }
  bool has_component(const std::string& id) const { return components_.count(id) > 0; }
  bool has_port(const std::string& id) const { return ports_.count(id) > 0; }
  bool has_connector(const std::string& id) const { return connectors_.count(id) > 0; }
  bool has_component_type(const std::string& id) const { return types_.count(id) > 0; }

  // Ports in creation order (provided first, then required).
  const std::vector<std::string>& ports_of(const std::string& componentId) const {
    auto it = portsByComponent_.find(componentId);
    if (it == portsByComponent_.end()) {
      throw LookupError("unknown component '" + componentId + "'");
    }
    return it->second;
  }

  const std::vector<std::string>& connectors_of_port(const std::string& portId) const {
    static const std::vector<std::string> empty;
    auto it = connectorsByPort_.find(portId);
    return it == connectorsByPort_.end() ? empty : it->second;
  }

  // Number of distinct connectors incident to any port of the component.
  int connectivity(const std::string& componentId) const {
    std::set<std::string> seen;
    for (const auto& pid : ports_of(componentId)) {
      const auto& conns = connectors_of_port(pid);
      seen.insert(conns.begin(), conns.end());
    }
    return static_cast<int>(seen.size());
  }

  std::size_t failure_count(const std::string& portId) const {
    return port(portId).failureRecords.size();
  }

  // Owning shop of any shop-scoped element; empty for component types.
  std::string shop_of(ElementKind kind, const std::string& id) const {
    switch (kind) {
      case ElementKind::Shop: return id;
      case ElementKind::ComponentType: return {};
      case ElementKind::Component: return component(id).shopRef;
      case ElementKind::Port: return component(port(id).ownerComponent).shopRef;
      case ElementKind::Connector:
        return component(port(connector(id).requiredPort).ownerComponent).shopRef;
      case ElementKind::Failure: return {};
    }
    return {};
  }

  std::uint64_t revision() const { return revision_; }
  const std::vector<ModelDelta>& delta_log() const { return log_; }

  // All deltas with revision strictly greater than `sinceRevision`.
  std::vector<ModelDelta> deltas_since(std::uint64_t sinceRevision) const {
    std::vector<ModelDelta> out;
    for (const auto& d : log_) {
      if (d.revision > sinceRevision) out.push_back(d);
    }
    return out;
  }

  // ---- replay ---------------------------------------------------------------

  // Applies a single delta without logging it; used by incremental consumers
  // and by the replay check. Sets the revision to the delta's revision.
  void apply_delta(const ModelDelta& d) {
    switch (d.kind) {
      case DeltaKind::ElementAdded: replay_add(d); break;
      case DeltaKind::ElementRemoved: replay_remove(d); break;
      case DeltaKind::AttributeChanged: replay_attr(d); break;
    }
    revision_ = d.revision;
  }

  static ModelGraph replay(const std::vector<ModelDelta>& deltas) {
    ModelGraph g;
    for (const auto& d : deltas) g.apply_delta(d);
    return g;
  }

  // Assembles a graph from parsed parts, checking referential integrity.
  static ModelGraph from_parts(std::vector<ComponentType> types, std::vector<Shop> shops,
                               std::vector<Component> components,
                               std::vector<InterfacePort> ports,
                               std::vector<Connector> connectors, std::uint64_t revision) {
    ModelGraph g;
    for (auto& t : types) {
      g.note_id(t.id, "ct", g.nextType_);
      g.types_.emplace(t.id, std::move(t));
    }
    for (auto& s : shops) {
      g.note_id(s.id, "shop", g.nextShop_);
      g.shops_.emplace(s.id, std::move(s));
    }
    for (auto& c : components) {
      if (!g.types_.count(c.typeRef)) {
        throw ParseError("component '" + c.id + "' references unknown type '" + c.typeRef + "'");
      }
      if (!g.shops_.count(c.shopRef)) {
        throw ParseError("component '" + c.id + "' references unknown shop '" + c.shopRef + "'");
      }
      g.note_id(c.id, "c", g.nextComponent_);
      g.portsByComponent_.emplace(c.id, std::vector<std::string>{});
      g.components_.emplace(c.id, std::move(c));
    }
    for (auto& s : g.shops_) {
      for (const auto& cid : s.second.componentRefs) {
        if (!g.components_.count(cid)) {
          throw ParseError("shop '" + s.first + "' lists unknown component '" + cid + "'");
        }
      }
    }
    for (auto& p : ports) {
      auto owner = g.portsByComponent_.find(p.ownerComponent);
      if (owner == g.portsByComponent_.end()) {
        throw ParseError("port '" + p.id + "' references unknown component '" + p.ownerComponent +
                         "'");
      }
      owner->second.push_back(p.id);
      g.note_id(p.id, "port", g.nextPort_);
      g.ports_.emplace(p.id, std::move(p));
    }
    for (auto& c : connectors) {
      if (!g.ports_.count(c.requiredPort) || !g.ports_.count(c.providedPort)) {
        throw ParseError("connector '" + c.id + "' references an unknown port");
      }
      g.connectorsByPort_[c.requiredPort].push_back(c.id);
      g.connectorsByPort_[c.providedPort].push_back(c.id);
      g.note_id(c.id, "conn", g.nextConnector_);
      g.connectors_.emplace(c.id, std::move(c));
    }
    g.revision_ = revision;
    return g;
  }

  // Called by snapshot loading for failure entries (ports must exist already).
  void attach_failure_raw(const std::string& portId, FailureRecord f) {
    auto it = ports_.find(portId);
    if (it == ports_.end()) {
      throw ParseError("failure '" + f.id + "' references unknown port '" + portId + "'");
    }
    note_id(f.id, "f", nextFailure_);
    it->second.failureRecords.push_back(std::move(f));
  }

private:
  void bump() { ++revision_; }

  Shop& mutable_shop(const std::string& id) {
    auto it = shops_.find(id);
    if (it == shops_.end()) throw LookupError("unknown shop '" + id + "'");
    return it->second;
  }
  Component& mutable_component(const std::string& id) {
    auto it = components_.find(id);
    if (it == components_.end()) throw LookupError("unknown component '" + id + "'");
    return it->second;
  }
  InterfacePort& mutable_port(const std::string& id) {
    auto it = ports_.find(id);
    if (it == ports_.end()) throw LookupError("unknown port '" + id + "'");
    return it->second;
  }

  void add_port_internal(const std::string& componentId, const std::string& shopId, PortKind kind,
                         const std::string& iface) {
    InterfacePort p;
    p.id = fresh_id("port", nextPort_);
    p.kind = kind;
    p.interfaceType = iface;
    p.ownerComponent = componentId;
    ports_.emplace(p.id, p);
    portsByComponent_[componentId].push_back(p.id);
    log_added(ElementKind::Port, p.id, shopId, to_json(p));
  }

  void detach_connector(const Connector& conn) {
    for (const auto& pid : {conn.requiredPort, conn.providedPort}) {
      auto it = connectorsByPort_.find(pid);
      if (it == connectorsByPort_.end()) continue;
      auto& vec = it->second;
      vec.erase(std::remove(vec.begin(), vec.end(), conn.id), vec.end());
    }
  }

  static void insert_sorted(std::vector<std::string>& vec, const std::string& value) {
    vec.insert(std::lower_bound(vec.begin(), vec.end(), value), value);
  }
  static void erase_sorted(std::vector<std::string>& vec, const std::string& value) {
    auto it = std::lower_bound(vec.begin(), vec.end(), value);
    if (it != vec.end() && *it == value) vec.erase(it);
  }

  std::string fresh_id(const char* prefix, std::uint64_t& counter) {
    char buf[32];
    for (;;) {
      std::snprintf(buf, sizeof(buf), "%s-%06llu", prefix,
                    static_cast<unsigned long long>(counter));
      ++counter;
      std::string id(buf);
      if (!id_taken(id)) return id;
    }
  }

  bool id_taken(const std::string& id) const {
    if (types_.count(id) || shops_.count(id) || components_.count(id) || ports_.count(id) ||
        connectors_.count(id)) {
      return true;
    }
    return false;  // failure ids share the "f-" prefix space with nothing else
  }

  // Keeps the per-prefix counter ahead of externally supplied ids.
  void note_id(const std::string& id, const std::string& prefix, std::uint64_t& counter) {
    const std::string lead = prefix + "-";
    if (id.rfind(lead, 0) != 0) return;
    const std::string tail = id.substr(lead.size());
    if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) return;
    const std::uint64_t n = std::strtoull(tail.c_str(), nullptr, 10);
    if (n + 1 > counter) counter = n + 1;
  }

  void log_added(ElementKind kind, const std::string& ref, const std::string& shopRef,
                 Json payload) {
    ModelDelta d;
    d.kind = DeltaKind::ElementAdded;
    d.elementKind = kind;
    d.elementRef = ref;
    d.shopRef = shopRef;
    d.payload = std::move(payload);
    d.revision = revision_;
    log_.push_back(std::move(d));
  }

  void log_removed(ElementKind kind, const std::string& ref, const std::string& shopRef,
                   Json payload) {
    ModelDelta d;
    d.kind = DeltaKind::ElementRemoved;
    d.elementKind = kind;
    d.elementRef = ref;
    d.shopRef = shopRef;
    d.payload = std::move(payload);
    d.revision = revision_;
    log_.push_back(std::move(d));
  }

  void log_attr(ElementKind kind, const std::string& ref, const std::string& shopRef,
                const std::string& attribute, Json oldValue, Json newValue) {
    ModelDelta d;
    d.kind = DeltaKind::AttributeChanged;
    d.elementKind = kind;
    d.elementRef = ref;
    d.shopRef = shopRef;
    d.attribute = attribute;
    d.oldValue = std::move(oldValue);
    d.newValue = std::move(newValue);
    d.revision = revision_;
    log_.push_back(std::move(d));
  }

  void replay_add(const ModelDelta& d) {
    switch (d.elementKind) {
      case ElementKind::ComponentType: {
        auto t = component_type_from_json(d.payload);
        note_id(t.id, "ct", nextType_);
        types_[t.id] = std::move(t);
        break;
      }
      case ElementKind::Shop: {
        auto s = shop_from_json(d.payload);
        note_id(s.id, "shop", nextShop_);
        shops_[s.id] = std::move(s);
        break;
      }
      case ElementKind::Component: {
        auto c = component_from_json(d.payload);
        note_id(c.id, "c", nextComponent_);
        portsByComponent_.emplace(c.id, std::vector<std::string>{});
        insert_sorted(shops_.at(c.shopRef).componentRefs, c.id);
        components_[c.id] = std::move(c);
        break;
      }
      case ElementKind::Port: {
        auto p = port_from_json(d.payload);
        note_id(p.id, "port", nextPort_);
        portsByComponent_[p.ownerComponent].push_back(p.id);
        ports_[p.id] = std::move(p);
        break;
      }
      case ElementKind::Connector: {
        auto c = connector_from_json(d.payload);
        note_id(c.id, "conn", nextConnector_);
        connectorsByPort_[c.requiredPort].push_back(c.id);
        connectorsByPort_[c.providedPort].push_back(c.id);
        connectors_[c.id] = std::move(c);
        break;
      }
      case ElementKind::Failure: {
        FailureRecord f;
        f.id = d.payload.at("id").get<std::string>();
        f.timestamp = d.payload.at("timestamp").get<std::int64_t>();
        f.description = d.payload.value("description", std::string{});
        attach_failure_raw(d.payload.at("port").get<std::string>(), std::move(f));
        break;
      }
    }
  }

  void replay_remove(const ModelDelta& d) {
    switch (d.elementKind) {
      case ElementKind::ComponentType: types_.erase(d.elementRef); break;
      case ElementKind::Shop: shops_.erase(d.elementRef); break;
      case ElementKind::Component: {
        auto it = components_.find(d.elementRef);
        if (it != components_.end()) {
          erase_sorted(shops_.at(it->second.shopRef).componentRefs, d.elementRef);
          portsByComponent_.erase(d.elementRef);
          components_.erase(it);
        }
        break;
      }
      case ElementKind::Port: {
        auto it = ports_.find(d.elementRef);
        if (it != ports_.end()) {
          auto owner = portsByComponent_.find(it->second.ownerComponent);
          if (owner != portsByComponent_.end()) {
            auto& vec = owner->second;
            vec.erase(std::remove(vec.begin(), vec.end(), d.elementRef), vec.end());
          }
          connectorsByPort_.erase(d.elementRef);
          ports_.erase(it);
        }
        break;
      }
      case ElementKind::Connector: {
        auto it = connectors_.find(d.elementRef);
        if (it != connectors_.end()) {
          detach_connector(it->second);
          connectors_.erase(it);
        }
        break;
      }
      case ElementKind::Failure: {
        const std::string portId = d.payload.at("port").get<std::string>();
        auto it = ports_.find(portId);
        if (it != ports_.end()) {
          auto& recs = it->second.failureRecords;
          recs.erase(std::remove_if(recs.begin(), recs.end(),
                                    [&](const FailureRecord& f) { return f.id == d.elementRef; }),
                     recs.end());
        }
        break;
      }
    }
  }

  void replay_attr(const ModelDelta& d) {
    if (d.elementKind == ElementKind::Component) {
      Component& c = mutable_component(d.elementRef);
      if (d.attribute == "state") {
        c.state = component_state_from_string(d.newValue.get<std::string>());
      } else if (d.attribute == "repeatedOffender") {
        c.repeatedOffender = d.newValue.get<bool>();
      } else if (d.attribute == "criticality") {
        c.criticality = d.newValue.get<double>();
      } else {
        throw ParseError("unknown component attribute in delta: " + d.attribute);
      }
    } else if (d.elementKind == ElementKind::ComponentType && d.attribute == "alternatives") {
      auto it = types_.find(d.elementRef);
      if (it == types_.end()) throw LookupError("unknown component type '" + d.elementRef + "'");
      it->second.alternatives = d.newValue.get<std::vector<std::string>>();
    } else {
      throw ParseError("unsupported attribute delta: " + to_string(d.elementKind) + "." +
                       d.attribute);
    }
  }

  std::map<std::string, ComponentType> types_;
  std::map<std::string, Shop> shops_;
  std::map<std::string, Component> components_;
  std::map<std::string, InterfacePort> ports_;
  std::map<std::string, Connector> connectors_;
  std::map<std::string, std::vector<std::string>> portsByComponent_;
  std::map<std::string, std::vector<std::string>> connectorsByPort_;
  std::uint64_t revision_ = 0;
  std::vector<ModelDelta> log_;
  std::uint64_t nextType_ = 1, nextShop_ = 1, nextComponent_ = 1, nextPort_ = 1,
                nextConnector_ = 1, nextFailure_ = 1;
};

}  // namespace archheal
