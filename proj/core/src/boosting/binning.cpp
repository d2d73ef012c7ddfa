#include <algorithm>
#include <cmath>

#include "crashcast/boosting/booster.hpp"
#include "crashcast/error.hpp"

namespace crashcast::boosting {

namespace {

constexpr std::size_t kMaxSampleRows = 200000;

}  // namespace

FeatureBinner FeatureBinner::fit(const Matrix& x, std::size_t max_bins) {
  if (max_bins < 2 || max_bins > 255) throw Error(ErrorCode::kInvalidArgument, "max_bins must be in [2, 255]");
  FeatureBinner binner;
  binner.edges_.resize(x.cols());
  const std::size_t stride = std::max<std::size_t>(1, (x.rows() + kMaxSampleRows - 1) / kMaxSampleRows);
  std::vector<double> values;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    values.clear();
    for (std::size_t r = 0; r < x.rows(); r += stride) {
      if (const double v = x(r, f); !std::isnan(v)) values.push_back(v);
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    auto& edges = binner.edges_[f];
    // max_bins finite bins need max_bins - 1 edges.
    const std::size_t max_edges = max_bins - 1;
    if (values.size() <= max_edges + 1) {
      for (std::size_t i = 0; i + 1 < values.size(); ++i) edges.push_back(values[i] + (values[i + 1] - values[i]) / 2);
    } else {
      for (std::size_t i = 1; i <= max_edges; ++i) {
        const std::size_t at = i * values.size() / (max_edges + 1);
        edges.push_back(values[at - 1] + (values[at] - values[at - 1]) / 2);
      }
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
  }
  return binner;
}

std::uint8_t FeatureBinner::bin(std::size_t feature, double v) const {
  if (std::isnan(v)) return 0;
  const auto& e = edges_[feature];
  return static_cast<std::uint8_t>(1 + (std::lower_bound(e.begin(), e.end(), v) - e.begin()));
}

std::vector<std::uint8_t> FeatureBinner::transform(const Matrix& x) const {
  if (x.cols() != edges_.size()) throw Error(ErrorCode::kLengthMismatch, "binner feature count mismatch");
  std::vector<std::uint8_t> out(x.rows() * x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t f = 0; f < x.cols(); ++f) out[r * x.cols() + f] = bin(f, x(r, f));
  }
  return out;
}

}  // namespace crashcast::boosting
