#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <archheal/model.hpp>

namespace archheal {

// Canonical snapshot: top-level arrays sorted by id, keys in lexicographic
// order. Re-serializing an unmodified model is byte-stable.
inline Json model_to_json(const ModelGraph& g) {
  Json doc;
  Json types = Json::array();
  for (const auto& [id, t] : g.component_types()) types.push_back(to_json(t));
  Json shops = Json::array();
  for (const auto& [id, s] : g.shops()) shops.push_back(to_json(s));
  Json components = Json::array();
  for (const auto& [id, c] : g.components()) components.push_back(to_json(c));
  Json ports = Json::array();
  Json failures = Json::array();
  for (const auto& [id, p] : g.ports()) {
    ports.push_back(to_json(p));
    for (const auto& f : p.failureRecords) failures.push_back(failure_to_json(id, f));
  }
  Json connectors = Json::array();
  for (const auto& [id, c] : g.connectors()) connectors.push_back(to_json(c));
  doc["componentTypes"] = std::move(types);
  doc["shops"] = std::move(shops);
  doc["components"] = std::move(components);
  doc["ports"] = std::move(ports);
  doc["connectors"] = std::move(connectors);
  doc["failures"] = std::move(failures);
  doc["revision"] = g.revision();
  return doc;
}

inline std::string save_model(const ModelGraph& g) { return model_to_json(g).dump(2) + "\n"; }

inline ModelGraph model_from_json(const Json& doc) {
  try {
    std::vector<ComponentType> types;
    for (const auto& j : doc.value("componentTypes", Json::array())) {
      types.push_back(component_type_from_json(j));
    }
    std::vector<Shop> shops;
    for (const auto& j : doc.value("shops", Json::array())) shops.push_back(shop_from_json(j));
    std::vector<Component> components;
    for (const auto& j : doc.value("components", Json::array())) {
      components.push_back(component_from_json(j));
    }
    std::vector<InterfacePort> ports;
    for (const auto& j : doc.value("ports", Json::array())) ports.push_back(port_from_json(j));
    std::vector<Connector> connectors;
    for (const auto& j : doc.value("connectors", Json::array())) {
      connectors.push_back(connector_from_json(j));
    }
    ModelGraph g = ModelGraph::from_parts(std::move(types), std::move(shops),
                                          std::move(components), std::move(ports),
                                          std::move(connectors), doc.value("revision", 0ull));
    for (const auto& j : doc.value("failures", Json::array())) {
      FailureRecord f;
      f.id = j.at("id").get<std::string>();
      f.timestamp = j.at("timestamp").get<std::int64_t>();
      f.description = j.value("description", std::string{});
      g.attach_failure_raw(j.at("port").get<std::string>(), std::move(f));
    }
    return g;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed model snapshot: ") + e.what());
  }
}

inline ModelGraph load_model(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

inline ModelGraph load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

inline void save_model_file(const ModelGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write model file '" + path + "'");
  out << save_model(g);
}

// Element-by-element equality over the canonical snapshot (includes revision).
inline bool structural_equal(const ModelGraph& a, const ModelGraph& b) {
  return model_to_json(a) == model_to_json(b);
}

}  // namespace archheal
