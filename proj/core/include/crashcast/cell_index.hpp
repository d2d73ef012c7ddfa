#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crashcast/record.hpp"

namespace crashcast {

inline constexpr int kMaxCellResolution = 12;

// Hierarchical lat/lon grid: resolution r has 2^r latitude rows over [-90, 90]
// and 2^(r+1) longitude columns over [-180, 180], so cells are square in
// degrees and each cell splits into exactly four children at r + 1.
// Intervals are half-open [lo, hi); the closing edges (lat 90, lon 180) belong
// to the last row/column.
struct CellId {
  int resolution = 0;
  std::uint32_t row = 0;  // latitude index, 0 at the south pole
  std::uint32_t col = 0;  // longitude index, 0 at -180

  static std::uint32_t rows_at(int resolution) { return 1u << resolution; }
  static std::uint32_t cols_at(int resolution) { return 2u << resolution; }
  static double span_degrees(int resolution) { return 180.0 / static_cast<double>(rows_at(resolution)); }

  bool valid() const noexcept;
  CellId parent() const;
  std::vector<CellId> children() const;
  GeoPoint center() const;
  double min_lat() const { return -90.0 + row * span_degrees(resolution); }
  double max_lat() const { return min_lat() + span_degrees(resolution); }
  double min_lon() const { return -180.0 + col * span_degrees(resolution); }
  double max_lon() const { return min_lon() + span_degrees(resolution); }

  // Packs into a single integer: resolution in the top byte.
  std::uint64_t key() const noexcept;
  static CellId from_key(std::uint64_t key);
  std::string to_string() const;  // "r/row/col"
  static CellId parse(const std::string& text);

  friend bool operator==(const CellId&, const CellId&) = default;
  friend auto operator<=>(const CellId&, const CellId&) = default;
};

CellId cell_of(const GeoPoint& p, int resolution);

// Moore neighborhood: longitude wraps around, latitude is clipped at the poles.
// Never contains the cell itself or duplicates.
std::vector<CellId> cell_neighbors(const CellId& cell);

struct BoundingBox {
  double min_lat = -90.0;
  double min_lon = -180.0;
  double max_lat = 90.0;
  double max_lon = 180.0;

  bool valid() const noexcept;
  bool contains(const GeoPoint& p) const noexcept {
    return p.lat() >= min_lat && p.lat() <= max_lat && p.lon() >= min_lon && p.lon() <= max_lon;
  }
  bool intersects(const CellId& c) const noexcept {
    return c.min_lat() <= max_lat && c.max_lat() >= min_lat && c.min_lon() <= max_lon && c.max_lon() >= min_lon;
  }
};

// All cells at `resolution` whose extent intersects the box.
std::vector<CellId> cells_covering(const BoundingBox& box, int resolution);

}  // namespace crashcast

template <>
struct std::hash<crashcast::CellId> {
  std::size_t operator()(const crashcast::CellId& c) const noexcept { return std::hash<std::uint64_t>{}(c.key()); }
};
