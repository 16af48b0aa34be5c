#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <archheal/pattern.hpp>

namespace archheal {

struct PatternUtilitySummary {
  std::string patternId;
  std::size_t matchCount = 0;
  double subtotal = 0.0;
};

// Overall utility: the sum of positive sub-utilities over all matches of
// positive patterns minus the sum of negative sub-utilities over all matches
// of negative patterns, accumulated in catalog order.
struct UtilityReport {
  double total = 0.0;
  std::vector<PatternUtilitySummary> perPattern;  // catalog order
  std::uint64_t revision = 0;

  Json to_json() const {
    Json per = Json::array();
    for (const auto& s : perPattern) {
      per.push_back(Json{{"matchCount", s.matchCount},
                         {"patternId", s.patternId},
                         {"subtotal", s.subtotal}});
    }
    return Json{{"perPattern", std::move(per)}, {"revision", revision}, {"total", total}};
  }
};

inline double eval_expr(const ModelGraph& g, const Pattern& p, const UtilityExpr& e,
                        const std::map<std::string, std::string>& binding) {
  switch (e.op) {
    case UtilityExpr::Op::Const: return e.value;
    case UtilityExpr::Op::Attr: {
      const Json v = attribute_value(g, p.find_node(e.node)->kind, binding.at(e.node), e.name);
      if (!v.is_number()) throw EvalError("attribute '" + e.name + "' is not numeric");
      return v.get<double>();
    }
    case UtilityExpr::Op::Connectivity: return static_cast<double>(g.connectivity(binding.at(e.node)));
    case UtilityExpr::Op::Count:
      return static_cast<double>(
          relation_count(g, p.find_node(e.node)->kind, binding.at(e.node), e.name));
    case UtilityExpr::Op::Product: {
      double acc = 1.0;
      for (const auto& child : e.children) acc *= eval_expr(g, p, child, binding);
      return acc;
    }
    case UtilityExpr::Op::Sum: {
      double acc = 0.0;
      for (const auto& child : e.children) acc += eval_expr(g, p, child, binding);
      return acc;
    }
  }
  throw EvalError("unreachable utility expression op");
}

// Sub-utility of one match under its pattern's utility expression.
inline double eval_subutility(const ModelGraph& g, const Pattern& p, const Match& m) {
  if (!p.hasUtility) throw EvalError("pattern '" + p.id + "' has no utility expression");
  if (!match_still_valid(g, p, m)) {
    throw StalenessError("match " + m.binding_key() + " is no longer valid");
  }
  return eval_expr(g, p, p.utility, m.binding);
}

namespace detail {

inline double subtotal_for(const ModelGraph& g, const Pattern& p,
                           const std::vector<Match>& matches) {
  double acc = 0.0;
  for (const auto& m : matches) acc += eval_expr(g, p, p.utility, m.binding);
  return acc;
}

}  // namespace detail

inline UtilityReport compute_utility(const ModelGraph& g, const PatternCatalog& catalog) {
  UtilityReport report;
  report.revision = g.revision();
  for (const auto& p : catalog.positives) {
    MatchSet ms = find_matches(g, p);
    const double sub = detail::subtotal_for(g, p, ms.matches);
    report.perPattern.push_back({p.id, ms.matches.size(), sub});
    report.total += sub;
  }
  for (const auto& p : catalog.negatives) {
    MatchSet ms = find_matches(g, p);
    const double sub = detail::subtotal_for(g, p, ms.matches);
    report.perPattern.push_back({p.id, ms.matches.size(), sub});
    report.total -= sub;
  }
  return report;
}

// Cached matches and per-match values for incremental re-evaluation.
struct UtilityCache {
  struct PatternCache {
    MatchSet matches;
    std::vector<double> values;  // aligned with matches
  };
  std::uint64_t revision = 0;
  std::vector<PatternCache> positives;  // catalog order
  std::vector<PatternCache> negatives;
  double total = 0.0;

  UtilityReport report() const {
    UtilityReport r;
    r.revision = revision;
    r.total = total;
    for (const auto& pc : positives) {
      double sub = 0.0;
      for (double v : pc.values) sub += v;
      r.perPattern.push_back({pc.matches.patternRef, pc.matches.matches.size(), sub});
    }
    for (const auto& pc : negatives) {
      double sub = 0.0;
      for (double v : pc.values) sub += v;
      r.perPattern.push_back({pc.matches.patternRef, pc.matches.matches.size(), sub});
    }
    return r;
  }
};

namespace detail {

inline UtilityCache::PatternCache fresh_pattern_cache(const ModelGraph& g, const Pattern& p) {
  UtilityCache::PatternCache pc;
  pc.matches = find_matches(g, p);
  pc.values.reserve(pc.matches.matches.size());
  for (const auto& m : pc.matches.matches) pc.values.push_back(eval_expr(g, p, p.utility, m.binding));
  return pc;
}

inline double cache_total(const UtilityCache& cache) {
  double total = 0.0;
  for (const auto& pc : cache.positives) {
    double sub = 0.0;
    for (double v : pc.values) sub += v;
    total += sub;
  }
  for (const auto& pc : cache.negatives) {
    double sub = 0.0;
    for (double v : pc.values) sub += v;
    total -= sub;
  }
  return total;
}

// Re-evaluates one pattern cache after the given deltas; values of matches in
// untouched shops are reused (they cannot change without a delta in their
// shop or a component-type delta, which forces a full rebuild upstream).
inline UtilityCache::PatternCache refresh_pattern_cache(const ModelGraph& g, const Pattern& p,
                                                        const UtilityCache::PatternCache& old,
                                                        const std::vector<ModelDelta>& deltas,
                                                        const std::set<std::string>& affected) {
  UtilityCache::PatternCache next;
  next.matches = refresh_matches(g, p, old.matches, deltas);
  std::map<std::string, double> known;
  for (std::size_t i = 0; i < old.matches.matches.size(); ++i) {
    known.emplace(old.matches.matches[i].binding_key(), old.values[i]);
  }
  next.values.reserve(next.matches.matches.size());
  for (const auto& m : next.matches.matches) {
    if (!affected.count(m.shopRef)) {
      auto it = known.find(m.binding_key());
      if (it != known.end()) {
        next.values.push_back(it->second);
        continue;
      }
    }
    next.values.push_back(eval_expr(g, p, p.utility, m.binding));
  }
  return next;
}

}  // namespace detail

inline UtilityCache build_utility_cache(const ModelGraph& g, const PatternCatalog& catalog) {
  UtilityCache cache;
  cache.revision = g.revision();
  for (const auto& p : catalog.positives) {
    cache.positives.push_back(detail::fresh_pattern_cache(g, p));
  }
  for (const auto& p : catalog.negatives) {
    cache.negatives.push_back(detail::fresh_pattern_cache(g, p));
  }
  cache.total = detail::cache_total(cache);
  return cache;
}

// Incremental utility update. Returns the refreshed cache and the change in
// total utility; cache.total + delta equals a fresh computation.
inline std::pair<UtilityCache, double> utility_delta(const ModelGraph& g,
                                                     const PatternCatalog& catalog,
                                                     const UtilityCache& cache,
                                                     const std::vector<ModelDelta>& deltas) {
  detail::check_delta_stream(cache.revision, g.revision(), deltas);
  bool fullRebuild = false;
  std::set<std::string> affected;
  for (const auto& d : deltas) {
    if (d.elementKind == ElementKind::ComponentType || d.shopRef.empty()) {
      fullRebuild = true;
      break;
    }
    affected.insert(d.shopRef);
  }
  UtilityCache next;
  if (fullRebuild) {
    next = build_utility_cache(g, catalog);
  } else {
    next.revision = g.revision();
    for (std::size_t i = 0; i < catalog.positives.size(); ++i) {
      next.positives.push_back(detail::refresh_pattern_cache(g, catalog.positives[i],
                                                             cache.positives.at(i), deltas,
                                                             affected));
    }
    for (std::size_t i = 0; i < catalog.negatives.size(); ++i) {
      next.negatives.push_back(detail::refresh_pattern_cache(g, catalog.negatives[i],
                                                             cache.negatives.at(i), deltas,
                                                             affected));
    }
    next.total = detail::cache_total(next);
  }
  const double delta = next.total - cache.total;
  return {std::move(next), delta};
}

}  // namespace archheal
