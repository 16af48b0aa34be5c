#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace archheal;
using testsupport::make_tiny_shop;

TEST_CASE("add_shop creates empty shops with distinct ids") {
  ModelGraph g;
  const std::string s1 = g.add_shop("shop-1");
  REQUIRE(g.shops().size() == 1);
  REQUIRE(g.shop(s1).componentRefs.empty());

  for (int i = 0; i < 98; ++i) g.add_shop("bulk");
  REQUIRE(g.shops().size() == 99);
  g.add_shop("one-more");
  REQUIRE(g.shops().size() == 100);

  ModelGraph h;
  const std::string a = h.add_shop("same-name");
  const std::string b = h.add_shop("same-name");
  REQUIRE(a != b);
  REQUIRE(h.shops().size() == 2);
}

TEST_CASE("add_component creates one port per interface type") {
  ModelGraph g;
  const std::string type = g.add_component_type("t", 0.9, {"if-p"}, {"if-r"});
  const std::string shop = g.add_shop("s");
  for (int i = 0; i < 17; ++i) g.add_component(shop, type, 1.0, ComponentState::Started);
  REQUIRE(g.shop(shop).componentRefs.size() == 17);
  const std::string c = g.add_component(shop, type, 2.0, ComponentState::Started);
  REQUIRE(g.shop(shop).componentRefs.size() == 18);

  REQUIRE(g.ports_of(c).size() == 2);
  int provided = 0, required = 0;
  for (const auto& pid : g.ports_of(c)) {
    (g.port(pid).kind == PortKind::Provided ? provided : required) += 1;
  }
  REQUIRE(provided == 1);
  REQUIRE(required == 1);

  REQUIRE_THROWS_AS(g.add_component(shop, type, -1.0, ComponentState::Started), ValidationError);
  REQUIRE_THROWS_AS(g.add_component("nope", type, 1.0, ComponentState::Started), LookupError);
  REQUIRE_THROWS_AS(g.add_component(shop, "nope", 1.0, ComponentState::Started), LookupError);
}

TEST_CASE("connect validates kinds, interface types and shop isolation") {
  ModelGraph g;
  const std::string tp = g.add_component_type("p", 1.0, {"if-a"}, {});
  const std::string tr = g.add_component_type("r", 1.0, {}, {"if-a"});
  const std::string tq = g.add_component_type("q", 1.0, {}, {"if-b"});
  const std::string s1 = g.add_shop("s1");
  const std::string s2 = g.add_shop("s2");
  const std::string provider = g.add_component(s1, tp, 1.0, ComponentState::Started);
  const std::string consumer = g.add_component(s1, tr, 1.0, ComponentState::Started);
  const std::string other = g.add_component(s2, tr, 1.0, ComponentState::Started);
  const std::string mismatched = g.add_component(s1, tq, 1.0, ComponentState::Started);
  const std::string prov = g.ports_of(provider).front();
  const std::string req = g.ports_of(consumer).front();

  SECTION("matching pair in one shop connects") {
    const std::string conn = g.connect(req, prov);
    REQUIRE(g.connector(conn).requiredPort == req);
    REQUIRE(g.connectivity(provider) == 1);
    REQUIRE(g.connectivity(consumer) == 1);
  }
  SECTION("cross-shop link is rejected") {
    try {
      g.connect(g.ports_of(other).front(), prov);
      FAIL("expected cross-shop error");
    } catch (const ValidationError& e) {
      REQUIRE(e.code() == ErrorCode::CrossShop);
    }
  }
  SECTION("kind mismatch is rejected") {
    try {
      g.connect(prov, prov);
      FAIL("expected kind mismatch");
    } catch (const ValidationError& e) {
      REQUIRE(e.code() == ErrorCode::KindMismatch);
    }
  }
  SECTION("interface type mismatch is rejected") {
    try {
      g.connect(g.ports_of(mismatched).front(), prov);
      FAIL("expected interface mismatch");
    } catch (const ValidationError& e) {
      REQUIRE(e.code() == ErrorCode::InterfaceMismatch);
    }
  }
}

TEST_CASE("set_state emits attribute deltas, including idempotent writes") {
  auto t = make_tiny_shop();
  const ModelDelta d = t.g.set_state(t.compA, ComponentState::NotStarted);
  REQUIRE(d.kind == DeltaKind::AttributeChanged);
  REQUIRE(d.oldValue.get<std::string>() == "STARTED");
  REQUIRE(d.newValue.get<std::string>() == "NOT_STARTED");

  const std::uint64_t before = t.g.revision();
  const ModelDelta d2 = t.g.set_state(t.compA, ComponentState::NotStarted);
  REQUIRE(t.g.revision() == before + 1);
  REQUIRE(d2.oldValue == d2.newValue);

  REQUIRE_THROWS_AS(t.g.set_state("missing", ComponentState::Started), LookupError);
}

TEST_CASE("record_failure appends in order and rejects required ports") {
  auto t = make_tiny_shop();
  for (int i = 0; i < 4; ++i) t.g.record_failure(t.providedA, i);
  REQUIRE(t.g.failure_count(t.providedA) == 4);
  t.g.record_failure(t.providedA, 4);
  REQUIRE(t.g.failure_count(t.providedA) == 5);

  REQUIRE_THROWS_AS(t.g.record_failure(t.requiredB, 0), ValidationError);
  REQUIRE_THROWS_AS(t.g.record_failure(t.providedA, -1), ValidationError);

  auto u = make_tiny_shop();
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(u.g.record_failure(u.providedA, i));
  const auto& records = u.g.port(u.providedA).failureRecords;
  REQUIRE(records.size() == 10);
  for (int i = 0; i < 10; ++i) {
    REQUIRE(records[i].id == ids[i]);
    REQUIRE(records[i].timestamp == i);
  }
}

TEST_CASE("clear_failures removes everything and is a no-op on empty ports") {
  auto t = make_tiny_shop();
  for (int i = 0; i < 7; ++i) t.g.record_failure(t.providedA, i);
  const std::uint64_t before = t.g.revision();
  REQUIRE(t.g.clear_failures(t.providedA) == 7);
  REQUIRE(t.g.failure_count(t.providedA) == 0);
  REQUIRE(t.g.revision() == before + 1);
  REQUIRE(t.g.deltas_since(before).size() == 7);

  const std::uint64_t after = t.g.revision();
  REQUIRE(t.g.clear_failures(t.providedA) == 0);
  REQUIRE(t.g.revision() == after);
  REQUIRE(t.g.deltas_since(after).empty());

  REQUIRE_THROWS_AS(t.g.clear_failures(t.requiredB), ValidationError);
}

TEST_CASE("remove_component drops ports and connectors in dependency order") {
  ModelGraph g;
  const std::string tp = g.add_component_type("hub", 1.0, {"if-a"}, {"if-b"});
  const std::string tz = g.add_component_type("peer", 1.0, {"if-b"}, {"if-a"});
  const std::string s = g.add_shop("s");
  const std::string hub = g.add_component(s, tp, 1.0, ComponentState::Started);
  const std::string p1 = g.add_component(s, tz, 1.0, ComponentState::Started);
  const std::string p2 = g.add_component(s, tz, 1.0, ComponentState::Started);

  auto port_of = [&g](const std::string& c, PortKind k) {
    for (const auto& pid : g.ports_of(c)) {
      if (g.port(pid).kind == k) return pid;
    }
    throw LookupError("port not found");
  };
  // three connectors touch the hub: its provided port twice, its required once
  g.connect(port_of(p1, PortKind::Required), port_of(hub, PortKind::Provided));
  g.connect(port_of(p2, PortKind::Required), port_of(hub, PortKind::Provided));
  g.connect(port_of(hub, PortKind::Required), port_of(p1, PortKind::Provided));
  REQUIRE(g.connectivity(hub) == 3);

  const auto deltas = g.remove_component(hub);
  REQUIRE(deltas.size() == 6);  // 3 connectors + 2 ports + 1 component
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(deltas[i].elementKind == ElementKind::Connector);
  REQUIRE(deltas[3].elementKind == ElementKind::Port);
  REQUIRE(deltas[4].elementKind == ElementKind::Port);
  REQUIRE(deltas[5].elementKind == ElementKind::Component);
  for (const auto& d : deltas) REQUIRE(d.kind == DeltaKind::ElementRemoved);
  REQUIRE(g.validate().empty());

  SECTION("isolated component emits only port and component removals") {
    ModelGraph h;
    const std::string ti = h.add_component_type("iso", 1.0, {"if-x"}, {"if-y"});
    const std::string hs = h.add_shop("s");
    const std::string c = h.add_component(hs, ti, 1.0, ComponentState::Started);
    const auto ds = h.remove_component(c);
    REQUIRE(ds.size() == 3);
    REQUIRE(h.validate().empty());
    REQUIRE_THROWS_AS(h.remove_component(c), LookupError);
  }
}

TEST_CASE("validate reports broken invariants from hand-built snapshots") {
  SECTION("freshly built graph is clean") {
    auto t = make_tiny_shop();
    REQUIRE(t.g.validate().empty());
  }
  SECTION("cross-shop connector") {
    auto t = make_tiny_shop();
    // forge a snapshot that moves the consumer to a second shop
    Json doc = model_to_json(t.g);
    doc["shops"].push_back({{"componentRefs", Json::array({t.compB})},
                            {"id", "shop-999999"},
                            {"name", "forged"}});
    for (auto& c : doc["components"]) {
      if (c["id"] == t.compB) c["shopRef"] = "shop-999999";
    }
    for (auto& s : doc["shops"]) {
      if (s["id"] == t.shopId) s["componentRefs"] = Json::array({t.compA});
    }
    ModelGraph forged = model_from_json(doc);
    bool found = false;
    for (const auto& v : forged.validate()) found = found || v.invariant == "connector-shop";
    REQUIRE(found);
  }
  SECTION("reliability out of range") {
    auto t = make_tiny_shop();
    Json doc = model_to_json(t.g);
    doc["componentTypes"][0]["reliability"] = 0.0;
    ModelGraph forged = model_from_json(doc);
    bool found = false;
    for (const auto& v : forged.validate()) found = found || v.invariant == "reliability-range";
    REQUIRE(found);
  }
}

TEST_CASE("mark_alternatives links groups and rejects mismatched interfaces") {
  ModelGraph g;
  const std::string a = g.add_component_type("a", 0.9, {"if-a"}, {});
  const std::string b = g.add_component_type("b", 0.8, {"if-a"}, {});
  const std::string c = g.add_component_type("c", 0.8, {"if-c"}, {});
  g.mark_alternatives({a, b});
  REQUIRE(g.component_type(a).alternatives == std::vector<std::string>{b});
  REQUIRE(g.component_type(b).alternatives == std::vector<std::string>{a});
  REQUIRE_THROWS_AS(g.mark_alternatives({a, c}), ValidationError);
  REQUIRE_THROWS_AS(g.add_component_type("bad", 0.0, {}, {}), ValidationError);
  REQUIRE_THROWS_AS(g.add_component_type("bad", 1.5, {}, {}), ValidationError);
}

TEST_CASE("failed operations leave the graph untouched") {
  auto t = make_tiny_shop();
  t.g.record_failure(t.providedA, 0);
  const Json before = model_to_json(t.g);
  const std::size_t logBefore = t.g.delta_log().size();

  REQUIRE_THROWS(t.g.connect(t.providedA, t.providedA));
  REQUIRE_THROWS(t.g.add_component(t.shopId, t.typeA, -2.0, ComponentState::Started));
  REQUIRE_THROWS(t.g.record_failure(t.requiredB, 1));
  REQUIRE_THROWS(t.g.remove_component("c-404"));
  REQUIRE_THROWS(t.g.set_state("c-404", ComponentState::Started));

  REQUIRE(model_to_json(t.g) == before);
  REQUIRE(t.g.delta_log().size() == logBefore);
}

TEST_CASE("revision strictly increases with every successful mutation") {
  SplitMix64 rng(11);
  ModelGraph g = testsupport::random_graph(11);
  std::uint64_t last = g.revision();
  for (int i = 0; i < 200; ++i) {
    if (!testsupport::random_mutation(g, rng)) continue;
    REQUIRE(g.revision() == last + 1);
    last = g.revision();
    REQUIRE(g.validate().empty());
  }
}

TEST_CASE("replaying the delta stream reconstructs the graph") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    ModelGraph g = testsupport::random_graph(seed);
    SplitMix64 rng(seed ^ 0xabcdef);
    for (int i = 0; i < 120; ++i) testsupport::random_mutation(g, rng);
    const ModelGraph replayed = ModelGraph::replay(g.delta_log());
    REQUIRE(structural_equal(g, replayed));
  }
}
