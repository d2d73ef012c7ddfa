#include "crashcast/service/recommendations.hpp"

#include <fstream>

#include "crashcast/error.hpp"

namespace crashcast::service {

using features::FactorGroup;

RiskTier risk_tier(double risk_score) noexcept {
  if (risk_score < 0.3) return RiskTier::kLow;
  if (risk_score < 0.6) return RiskTier::kMedium;
  return RiskTier::kHigh;
}

std::string_view risk_tier_name(RiskTier t) noexcept {
  switch (t) {
    case RiskTier::kLow: return "low";
    case RiskTier::kMedium: return "medium";
    case RiskTier::kHigh: return "high";
  }
  return "unknown";
}

RecommendationTable RecommendationTable::defaults() {
  RecommendationTable t;
  const auto set = [&](RiskTier tier, FactorGroup g, std::vector<std::string> actions) {
    t.rows_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(g)] = std::move(actions);
  };
  for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
    set(RiskTier::kLow, static_cast<FactorGroup>(g), {"Low risk: continue routine monitoring"});
  }
  set(RiskTier::kMedium, FactorGroup::kWeather,
      {"Issue a weather advisory for the area", "Schedule road treatment ahead of the next shift"});
  set(RiskTier::kMedium, FactorGroup::kTemporal,
      {"Increase patrol visibility during the coming peak hours", "Post travel-time advisories on message signs"});
  set(RiskTier::kMedium, FactorGroup::kHistorical,
      {"Review recent crash history at this location", "Add the location to the next patrol rotation"});
  set(RiskTier::kMedium, FactorGroup::kBehavioral,
      {"Run targeted enforcement for impaired and distracted driving", "Publish a driver-behavior safety message"});
  set(RiskTier::kMedium, FactorGroup::kGeometry,
      {"Check signage and lane markings at this location", "Lower advisory speed through the segment"});
  set(RiskTier::kHigh, FactorGroup::kWeather,
      {"Pre-position plows and salt trucks", "Deploy patrols to the affected corridor",
       "Activate weather warnings on dynamic message signs"});
  set(RiskTier::kHigh, FactorGroup::kTemporal,
      {"Stage incident response units before the peak period", "Deploy patrols to the affected corridor"});
  set(RiskTier::kHigh, FactorGroup::kHistorical,
      {"Station an incident response unit near the hotspot", "Deploy patrols to the affected corridor"});
  set(RiskTier::kHigh, FactorGroup::kBehavioral,
      {"Deploy impaired-driving enforcement checkpoints", "Deploy patrols to the affected corridor"});
  set(RiskTier::kHigh, FactorGroup::kGeometry,
      {"Close or restrict the hazardous segment if conditions persist", "Dispatch a road maintenance crew"});
  return t;
}

RecommendationTable RecommendationTable::from_json(const nlohmann::json& doc) {
  RecommendationTable t;
  try {
    for (std::size_t tier = 0; tier < kRiskTierCount; ++tier) {
      const auto& row = doc.at(std::string(risk_tier_name(static_cast<RiskTier>(tier))));
      for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
        auto actions = row.at(std::string(features::factor_group_name(static_cast<FactorGroup>(g))))
                           .get<std::vector<std::string>>();
        if (actions.empty()) throw Error(ErrorCode::kMalformedDocument, "empty recommendation row");
        t.rows_[tier][g] = std::move(actions);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("recommendation table: ") + e.what());
  }
  return t;
}

RecommendationTable RecommendationTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open recommendation table " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("recommendation table: ") + e.what());
  }
  return from_json(doc);
}

const std::vector<std::string>& RecommendationTable::actions(RiskTier tier, FactorGroup group) const {
  return rows_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(group)];
}

nlohmann::json to_json(const RecommendationTable& table) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t tier = 0; tier < kRiskTierCount; ++tier) {
    auto& row = doc[std::string(risk_tier_name(static_cast<RiskTier>(tier)))];
    for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
      const auto group = static_cast<FactorGroup>(g);
      row[std::string(features::factor_group_name(group))] = table.actions(static_cast<RiskTier>(tier), group);
    }
  }
  return doc;
}

}  // namespace crashcast::service
