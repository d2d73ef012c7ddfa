#include "crashcast/features/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include "crashcast/error.hpp"

namespace crashcast::features {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Uniform lat/lon bucketing for radius queries.
class PointGrid {
 public:
  PointGrid(std::span<const GeoPoint> points, double cell_deg) : points_(points), h_(cell_deg) {
    rows_ = static_cast<long>(std::ceil(180.0 / h_)) + 1;
    cols_ = static_cast<long>(std::ceil(360.0 / h_));
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(row_of(points[i].lat()), col_of(points[i].lon()))].push_back(i);
  }

  // Indices of points within radius_km of p (exact haversine test).
  template <class Fn>
  void for_each_within(const GeoPoint& p, double radius_km, Fn&& fn) const {
    const double delta = radius_km / kEarthRadiusKm;
    const double dlat = delta * kRadToDeg + 1e-9;
    const double cos_lat = std::cos(p.lat() * kDegToRad);
    const bool all_cols = std::abs(p.lat()) + dlat >= 90.0 || std::sin(delta) >= cos_lat;
    const double dlon = all_cols ? 180.0 : std::asin(std::sin(delta) / cos_lat) * kRadToDeg + 1e-9;
    const long c_lo = col_of_unwrapped(p.lon() - dlon), c_hi = col_of_unwrapped(p.lon() + dlon);
    if (all_cols || c_hi - c_lo + 1 >= cols_) {
      for (std::size_t i = 0; i < points_.size(); ++i) {
        if (haversine_km(p, points_[i]) <= radius_km) fn(i);
      }
      return;
    }
    const long r_lo = std::max(0L, row_of(p.lat() - dlat)), r_hi = std::min(rows_ - 1, row_of(p.lat() + dlat));
    for (long r = r_lo; r <= r_hi; ++r) {
      for (long c = c_lo; c <= c_hi; ++c) {
        auto it = cells_.find(key(r, ((c % cols_) + cols_) % cols_));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) {
          if (haversine_km(p, points_[i]) <= radius_km) fn(i);
        }
      }
    }
  }

 private:
  long row_of(double lat) const { return static_cast<long>(std::floor((lat + 90.0) / h_)); }
  long col_of_unwrapped(double lon) const { return static_cast<long>(std::floor((lon + 180.0) / h_)); }
  long col_of(double lon) const { return std::min(cols_ - 1, col_of_unwrapped(lon)); }
  std::uint64_t key(long r, long c) const { return static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(cols_) + static_cast<std::uint64_t>(c); }

  std::span<const GeoPoint> points_;
  double h_;
  long rows_ = 0, cols_ = 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

struct Projected {
  double x, y;
};

struct PlaneCircle {
  double x = 0.0, y = 0.0, r = 0.0;
  bool contains(const Projected& p) const { return std::hypot(p.x - x, p.y - y) <= r * (1.0 + 1e-12) + 1e-12; }
};

PlaneCircle circle_two(const Projected& a, const Projected& b) {
  return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0, std::hypot(a.x - b.x, a.y - b.y) / 2.0};
}

PlaneCircle circle_three(const Projected& a, const Projected& b, const Projected& c) {
  const double bx = b.x - a.x, by = b.y - a.y, cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-18) {  // collinear: widest pair
    PlaneCircle best = circle_two(a, b);
    for (const auto& cand : {circle_two(a, c), circle_two(b, c)}) {
      if (cand.r > best.r) best = cand;
    }
    return best;
  }
  const double ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d;
  const double uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d;
  return {a.x + ux, a.y + uy, std::hypot(ux, uy)};
}

// Welzl's algorithm in its iterative move-to-front form over a shuffled copy.
PlaneCircle welzl(std::vector<Projected> pts) {
  std::mt19937_64 rng(0x5eed);
  std::shuffle(pts.begin(), pts.end(), rng);
  PlaneCircle c{pts[0].x, pts[0].y, 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (c.contains(pts[i])) continue;
    c = {pts[i].x, pts[i].y, 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (c.contains(pts[j])) continue;
      c = circle_two(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!c.contains(pts[k])) c = circle_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

std::map<int, std::vector<std::size_t>> members_by_label(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kNoise) m[labels[i]].push_back(i);
  }
  return m;
}

}  // namespace

void ClusterParams::validate() const {
  if (!(eps_km > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps_km must be positive");
  if (min_samples < 1) throw Error(ErrorCode::kInvalidArgument, "min_samples must be at least 1");
  if (!(adapt_min > 0.0 && adapt_min <= adapt_max)) throw Error(ErrorCode::kInvalidArgument, "bad adapt bounds");
}

std::vector<int> dbscan_haversine(std::span<const GeoPoint> points, const ClusterParams& params) {
  params.validate();
  std::vector<double> eps;
  if (params.adaptive) {
    eps = adaptive_eps(points, params.eps_km, params.density_resolution, params.adapt_min, params.adapt_max);
  } else {
    eps.assign(points.size(), params.eps_km);
  }
  return dbscan_haversine(points, eps, params.min_samples);
}

std::vector<int> dbscan_haversine(std::span<const GeoPoint> points, std::span<const double> eps_km, int min_samples) {
  const std::size_t n = points.size();
  if (eps_km.size() != n) throw Error(ErrorCode::kLengthMismatch, "one eps per point required");
  if (n == 0) return {};
  const double max_eps = *std::max_element(eps_km.begin(), eps_km.end());
  if (!(max_eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  const PointGrid grid(points, std::max(max_eps / kEarthRadiusKm * kRadToDeg, 1e-6));

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.for_each_within(points[i], eps_km[i], [&](std::size_t j) { neighbors[i].push_back(j); });
  }
  std::vector<char> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= static_cast<std::size_t>(min_samples);

  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : neighbors[i]) {
      if (core[j]) uf.unite(i, j);
    }
  }

  // Border points attach to the nearest reaching core point; ties are broken
  // by the core point's coordinates so the choice ignores input order.
  std::vector<std::ptrdiff_t> owner(n, -1);
  std::vector<double> owner_dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : neighbors[i]) {
      if (core[j]) continue;
      const double d = haversine_km(points[i], points[j]);
      if (owner[j] < 0) {
        owner[j] = static_cast<std::ptrdiff_t>(i);
        owner_dist[j] = d;
        continue;
      }
      const auto& cur = points[static_cast<std::size_t>(owner[j])];
      const bool better = d < owner_dist[j] ||
                          (d == owner_dist[j] && std::pair(points[i].lat(), points[i].lon()) < std::pair(cur.lat(), cur.lon()));
      if (better) {
        owner[j] = static_cast<std::ptrdiff_t>(i);
        owner_dist[j] = d;
      }
    }
  }

  std::vector<std::ptrdiff_t> root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) root[i] = static_cast<std::ptrdiff_t>(uf.find(i));
    else if (owner[i] >= 0) root[i] = static_cast<std::ptrdiff_t>(uf.find(static_cast<std::size_t>(owner[i])));
  }
  std::unordered_map<std::ptrdiff_t, int> label_of_root;
  std::vector<int> labels(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] < 0) continue;
    auto [it, inserted] = label_of_root.try_emplace(root[i], static_cast<int>(label_of_root.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::vector<double> adaptive_eps(std::span<const GeoPoint> points, double base_eps_km, int cell_resolution, double lo,
                                 double hi) {
  if (!(base_eps_km > 0.0)) throw Error(ErrorCode::kInvalidArgument, "base eps must be positive");
  std::unordered_map<CellId, std::size_t> counts;
  std::vector<CellId> cell(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    cell[i] = cell_of(points[i], cell_resolution);
    ++counts[cell[i]];
  }
  if (counts.empty()) return {};
  std::vector<double> rho;
  rho.reserve(counts.size());
  for (const auto& [_, c] : counts) rho.push_back(static_cast<double>(c));
  std::sort(rho.begin(), rho.end());
  const std::size_t m = rho.size();
  const double median = m % 2 == 1 ? rho[m / 2] : (rho[m / 2 - 1] + rho[m / 2]) / 2.0;
  std::vector<double> eps(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double ratio = std::sqrt(median / static_cast<double>(counts[cell[i]]));
    eps[i] = base_eps_km * std::clamp(ratio, lo, hi);
  }
  return eps;
}

Circle minimal_enclosing_circle(std::span<const GeoPoint> points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no points");
  double lat0 = 0.0, sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    lat0 += p.lat();
    sx += std::cos(p.lon() * kDegToRad);
    sy += std::sin(p.lon() * kDegToRad);
  }
  lat0 /= static_cast<double>(points.size());
  const double lon0 = std::atan2(sy, sx) * kRadToDeg;
  const double kx = kEarthRadiusKm * kDegToRad * std::cos(lat0 * kDegToRad);
  const double ky = kEarthRadiusKm * kDegToRad;
  std::vector<Projected> proj;
  proj.reserve(points.size());
  for (const auto& p : points) {
    double dlon = p.lon() - lon0;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    proj.push_back({dlon * kx, (p.lat() - lat0) * ky});
  }
  const PlaneCircle c = welzl(std::move(proj));
  double lat = std::clamp(lat0 + c.y / ky, -90.0, 90.0);
  double lon = kx > 0.0 ? lon0 + c.x / kx : lon0;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return {GeoPoint(lat, lon), c.r};
}

std::vector<ClusterSummary> summarize_clusters(std::span<const GeoPoint> points, std::span<const int> labels,
                                               double eps_km) {
  if (points.size() != labels.size()) throw Error(ErrorCode::kLengthMismatch, "one label per point required");
  std::vector<ClusterSummary> out;
  const double floor_area = std::numbers::pi * eps_km * eps_km;
  for (const auto& [label, members] : members_by_label(labels)) {
    std::vector<GeoPoint> pts;
    pts.reserve(members.size());
    for (std::size_t i : members) pts.push_back(points[i]);
    const Circle c = minimal_enclosing_circle(pts);
    ClusterSummary s;
    s.label = label;
    s.center = c.center;
    s.radius_km = c.radius_km;
    s.size = members.size();
    s.density = static_cast<double>(members.size()) / std::max(std::numbers::pi * c.radius_km * c.radius_km, floor_area);
    out.push_back(s);
  }
  return out;
}

std::vector<double> cluster_density(std::span<const GeoPoint> points, std::span<const int> labels, double eps_km) {
  std::vector<double> density(points.size(), 0.0);
  const auto summaries = summarize_clusters(points, labels, eps_km);
  std::unordered_map<int, double> by_label;
  for (const auto& s : summaries) by_label[s.label] = s.density;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != kNoise) density[i] = by_label.at(labels[i]);
  }
  return density;
}

ClusterLookup::ClusterLookup(std::vector<ClusterSummary> clusters, double eps_km)
    : clusters_(std::move(clusters)), eps_km_(eps_km) {
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& c = clusters_[i];
    const double reach_deg = (c.radius_km + eps_km_) / kEarthRadiusKm * kRadToDeg;
    const double cos_lat = std::max(std::cos(c.center.lat() * kDegToRad), 1e-6);
    const double dlon = std::min(180.0, reach_deg / cos_lat);
    const BoundingBox box{std::max(-90.0, c.center.lat() - reach_deg), std::max(-180.0, c.center.lon() - dlon),
                          std::min(90.0, c.center.lat() + reach_deg), std::min(180.0, c.center.lon() + dlon)};
    for (const auto& cell : cells_covering(box, kResolution)) by_cell_[cell].push_back(i);
  }
}

double ClusterLookup::density_at(const GeoPoint& p) const {
  auto it = by_cell_.find(cell_of(p, kResolution));
  if (it == by_cell_.end()) return 0.0;
  double best_depth = 0.0, density = 0.0;
  bool found = false;
  for (std::size_t i : it->second) {
    const auto& c = clusters_[i];
    const double d = haversine_km(p, c.center);
    if (d > c.radius_km + eps_km_) continue;
    const double depth = d - c.radius_km;
    if (!found || depth < best_depth) {
      best_depth = depth;
      density = c.density;
      found = true;
    }
  }
  return density;
}

}  // namespace crashcast::features
