#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cmlab/buffer.hpp"
#include "cmlab/optimizers.hpp"

namespace cmlab {

inline nlohmann::json to_json(const OptimizerConfig& cfg) {
  return nlohmann::json{{"algorithm", algorithm_name(cfg.algorithm)},
                        {"lr", cfg.alpha},
                        {"beta1", cfg.beta1},
                        {"beta2", cfg.beta2},
                        {"epsilon", cfg.epsilon},
                        {"capacity", cfg.capacity},
                        {"decay", cfg.decay},
                        {"sam", cfg.sam_enabled},
                        {"sam_rho", cfg.sam_rho},
                        {"beta", cfg.beta}};
}

inline OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  OptimizerConfig cfg;
  if (j.contains("algorithm")) cfg.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  cfg.alpha = j.value("lr", cfg.alpha);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.capacity = j.value("capacity", cfg.capacity);
  cfg.decay = j.value("decay", cfg.decay);
  cfg.sam_enabled = j.value("sam", cfg.sam_enabled);
  cfg.sam_rho = j.value("sam_rho", cfg.sam_rho);
  cfg.beta = j.value("beta", cfg.beta);
  return cfg;
}

inline nlohmann::json to_json(const CriticalBuffer& buf) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : buf.entries())
    entries.push_back({{"priority", e.priority},
                       {"payload", e.payload},
                       {"insertion_index", e.insertion_index}});
  return nlohmann::json{{"capacity", buf.capacity()},
                        {"decay", buf.decay_factor()},
                        {"entries", entries}};
}

// Entries are re-inserted in insertion-index order, so priorities, payloads
// and the relative order that drives tie-breaking all survive a round trip
// (absolute indices restart from zero).
inline CriticalBuffer buffer_from_json(const nlohmann::json& j) {
  CriticalBuffer buf(j.at("capacity").get<int>(), j.at("decay").get<double>());
  std::vector<std::pair<std::uint64_t, std::pair<double, Vec>>> items;
  for (const auto& e : j.at("entries"))
    items.push_back({e.at("insertion_index").get<std::uint64_t>(),
                     {e.at("priority").get<double>(), e.at("payload").get<Vec>()}});
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, pv] : items) buf.maybe_insert(pv.first, pv.second);
  return buf;
}

}  // namespace cmlab
