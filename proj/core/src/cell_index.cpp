#include "crashcast/cell_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace crashcast {

namespace {

std::uint32_t index_along(double value, double origin, double span, std::uint32_t count) {
  const double idx = std::floor((value - origin) / span);
  if (idx < 0.0) return 0;
  if (idx >= static_cast<double>(count)) return count - 1;
  return static_cast<std::uint32_t>(idx);
}

void check_resolution(int resolution) {
  if (resolution < 0 || resolution > kMaxCellResolution) {
    throw Error(ErrorCode::kInvalidArgument, "cell resolution must be in [0, 12]");
  }
}

}  // namespace

bool CellId::valid() const noexcept {
  return resolution >= 0 && resolution <= kMaxCellResolution && row < rows_at(resolution) &&
         col < cols_at(resolution);
}

CellId CellId::parent() const {
  if (resolution == 0) throw Error(ErrorCode::kInvalidArgument, "resolution-0 cell has no parent");
  return CellId{resolution - 1, row / 2, col / 2};
}

std::vector<CellId> CellId::children() const {
  if (resolution >= kMaxCellResolution) return {};
  std::vector<CellId> out;
  for (std::uint32_t dr = 0; dr < 2; ++dr) {
    for (std::uint32_t dc = 0; dc < 2; ++dc) out.push_back(CellId{resolution + 1, row * 2 + dr, col * 2 + dc});
  }
  return out;
}

GeoPoint CellId::center() const {
  const double half = span_degrees(resolution) / 2.0;
  return GeoPoint(min_lat() + half, min_lon() + half);
}

std::uint64_t CellId::key() const noexcept {
  return (static_cast<std::uint64_t>(resolution) << 56) | (static_cast<std::uint64_t>(row) << 28) |
         static_cast<std::uint64_t>(col);
}

CellId CellId::from_key(std::uint64_t key) {
  CellId c{static_cast<int>(key >> 56), static_cast<std::uint32_t>((key >> 28) & 0xFFFFFFFu),
           static_cast<std::uint32_t>(key & 0xFFFFFFFu)};
  if (!c.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid cell key");
  return c;
}

std::string CellId::to_string() const {
  return std::to_string(resolution) + "/" + std::to_string(row) + "/" + std::to_string(col);
}

CellId CellId::parse(const std::string& text) {
  CellId c;
  unsigned row = 0, col = 0;
  if (std::sscanf(text.c_str(), "%d/%u/%u", &c.resolution, &row, &col) != 3) {
    throw Error(ErrorCode::kInvalidArgument, "malformed cell id: " + text);
  }
  c.row = row;
  c.col = col;
  if (!c.valid()) throw Error(ErrorCode::kInvalidArgument, "cell id out of range: " + text);
  return c;
}

CellId cell_of(const GeoPoint& p, int resolution) {
  check_resolution(resolution);
  const double span = CellId::span_degrees(resolution);
  return CellId{resolution, index_along(p.lat(), -90.0, span, CellId::rows_at(resolution)),
                index_along(p.lon(), -180.0, span, CellId::cols_at(resolution))};
}

std::vector<CellId> cell_neighbors(const CellId& cell) {
  std::vector<CellId> out;
  const auto rows = static_cast<std::int64_t>(CellId::rows_at(cell.resolution));
  const auto cols = static_cast<std::int64_t>(CellId::cols_at(cell.resolution));
  for (int dr = -1; dr <= 1; ++dr) {
    const std::int64_t r = static_cast<std::int64_t>(cell.row) + dr;
    if (r < 0 || r >= rows) continue;
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const std::int64_t c = ((static_cast<std::int64_t>(cell.col) + dc) % cols + cols) % cols;
      const CellId n{cell.resolution, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
      if (n == cell || std::find(out.begin(), out.end(), n) != out.end()) continue;
      out.push_back(n);
    }
  }
  return out;
}

bool BoundingBox::valid() const noexcept {
  return GeoPoint::valid(min_lat, min_lon) && GeoPoint::valid(max_lat, max_lon) && min_lat <= max_lat &&
         min_lon <= max_lon;
}

std::vector<CellId> cells_covering(const BoundingBox& box, int resolution) {
  check_resolution(resolution);
  if (!box.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid bounding box");
  const CellId lo = cell_of(GeoPoint(box.min_lat, box.min_lon), resolution);
  const CellId hi = cell_of(GeoPoint(box.max_lat, box.max_lon), resolution);
  std::vector<CellId> out;
  out.reserve(static_cast<std::size_t>(hi.row - lo.row + 1) * (hi.col - lo.col + 1));
  for (std::uint32_t r = lo.row; r <= hi.row; ++r) {
    for (std::uint32_t c = lo.col; c <= hi.col; ++c) out.push_back(CellId{resolution, r, c});
  }
  return out;
}

}  // namespace crashcast
