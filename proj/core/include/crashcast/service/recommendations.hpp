#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/features/feature_vector.hpp"

namespace crashcast::service {

enum class RiskTier { kLow, kMedium, kHigh };
inline constexpr std::size_t kRiskTierCount = 3;

// low < 0.3 <= medium < 0.6 <= high
RiskTier risk_tier(double risk_score) noexcept;
std::string_view risk_tier_name(RiskTier t) noexcept;

// Fixed action strings per (tier, dominant factor group).
class RecommendationTable {
 public:
  static RecommendationTable defaults();
  // {"low": {"weather": [..], ...}, "medium": {...}, "high": {...}} with every
  // tier and group present. Throws kMalformedDocument.
  static RecommendationTable from_json(const nlohmann::json& doc);
  static RecommendationTable load(const std::string& path);  // throws kUnreadableFile too

  const std::vector<std::string>& actions(RiskTier tier, features::FactorGroup group) const;
  std::vector<std::string> recommend(double risk_score, features::FactorGroup group) const {
    return actions(risk_tier(risk_score), group);
  }

 private:
  std::array<std::array<std::vector<std::string>, features::kFactorGroupCount>, kRiskTierCount> rows_;
};

nlohmann::json to_json(const RecommendationTable& table);

}  // namespace crashcast::service
