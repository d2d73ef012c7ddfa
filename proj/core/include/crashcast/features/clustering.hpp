#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "crashcast/cell_index.hpp"
#include "crashcast/record.hpp"

namespace crashcast::features {

inline constexpr int kNoise = -1;

struct ClusterParams {
  double eps_km = 1.0;
  int min_samples = 3;
  bool adaptive = false;
  double adapt_min = 0.5;
  double adapt_max = 2.0;
  int density_resolution = 9;  // cell size used to measure local density when adaptive

  void validate() const;  // kInvalidArgument
};

// Density-based clustering with the haversine metric. The neighborhood of p is
// {q : d(p, q) <= eps_p} (self included); p is a core point when it has at
// least min_samples neighbors. Core points within max(eps_p, eps_q) of each
// other share a cluster. A non-core point joins the cluster of the nearest core
// point whose neighborhood contains it, and is otherwise noise. Labels are
// numbered by the smallest member index, so they are stable under input
// permutation up to renaming.
std::vector<int> dbscan_haversine(std::span<const GeoPoint> points, const ClusterParams& params);

// Same semantics with explicit per-point radii.
std::vector<int> dbscan_haversine(std::span<const GeoPoint> points, std::span<const double> eps_km, int min_samples);

// eps_i = base * clamp(sqrt(rho_median / rho_cell(i)), lo, hi), with rho the
// point count of the point's cell and the median over non-empty cells.
std::vector<double> adaptive_eps(std::span<const GeoPoint> points, double base_eps_km, int cell_resolution,
                                 double lo = 0.5, double hi = 2.0);

struct Circle {
  GeoPoint center;
  double radius_km = 0.0;
};

// Smallest circle enclosing the points, computed on a local equirectangular
// projection around their centroid.
Circle minimal_enclosing_circle(std::span<const GeoPoint> points);

// Members per km^2: cluster size / max(enclosing-circle area, pi * eps^2).
// Noise points get 0.
std::vector<double> cluster_density(std::span<const GeoPoint> points, std::span<const int> labels, double eps_km);

struct ClusterSummary {
  int label = 0;
  GeoPoint center;
  double radius_km = 0.0;
  std::size_t size = 0;
  double density = 0.0;
};

std::vector<ClusterSummary> summarize_clusters(std::span<const GeoPoint> points, std::span<const int> labels,
                                               double eps_km);

// Answers "density of the cluster covering this point" for points that were not
// part of the fit: the cluster whose enclosing circle grown by eps contains the
// point (the deepest one when several do), else 0.
class ClusterLookup {
 public:
  ClusterLookup() = default;
  ClusterLookup(std::vector<ClusterSummary> clusters, double eps_km);

  double density_at(const GeoPoint& p) const;
  const std::vector<ClusterSummary>& clusters() const noexcept { return clusters_; }
  double eps_km() const noexcept { return eps_km_; }

 private:
  static constexpr int kResolution = 8;
  std::vector<ClusterSummary> clusters_;
  double eps_km_ = 1.0;
  std::unordered_map<CellId, std::vector<std::size_t>> by_cell_;
};

}  // namespace crashcast::features
