#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ssc3od/geometry.hpp"
#include "ssc3od/tensor.hpp"

namespace ssc3od::pillars {

/// Bird's-eye-view discretization. A pillar spans the full z range, so the
/// grid is purely 2D: nx() cells along x, ny() along y, half-open cell
/// intervals [lo, hi).
struct GridConfig {
  double x_min = -32.0, x_max = 32.0;
  double y_min = -32.0, y_max = 32.0;
  double v_w = 0.4, v_h = 0.4;  // pillar footprint along x / y
  double z_min = -1.0, z_max = 3.0;

  int nx() const;
  int ny() const;
  void validate() const;  // throws if extents are not divisible by the footprint

  double cell_cx(int ix) const { return x_min + (ix + 0.5) * v_w; }
  double cell_cy(int iy) const { return y_min + (iy + 0.5) * v_h; }

  // Cell index of a coordinate, or nullopt when out of range. Points exactly
  // on an interior boundary go to the higher cell.
  std::optional<std::pair<int, int>> index_of(double x, double y) const;

  // Same extents, footprint multiplied by `stride` (feature-map geometry
  // after a strided encoder). nx/ny must be divisible by stride.
  GridConfig scaled(int stride) const;

  bool operator==(const GridConfig&) const = default;
};

/// Point cloud bucketed into pillars. `cells` holds per-pillar indices into
/// `pts`; `dropped` counts out-of-range points.
struct PillarGrid {
  GridConfig cfg;
  geom::PointCloud pts;
  std::vector<std::vector<int>> cells;  // flat index iy * nx + ix
  std::int64_t dropped = 0;

  int n_v() const;  // number of non-empty pillars
  bool cell_empty(int flat) const { return cells[static_cast<std::size_t>(flat)].empty(); }
};

/// Binary occupancy target, same dims as the pillar grid: values(iy, ix).
struct OccupancyGrid {
  Eigen::ArrayXXd values;  // ny rows, nx cols, entries in {0, 1}
};

struct MaskSpec {
  double r_m = 0.0;
  std::vector<int> masked;  // flat cell indices, ascending, all non-empty
};

PillarGrid pillarize(const geom::PointCloud& pc, const GridConfig& cfg);

OccupancyGrid occupancy_label(const PillarGrid& grid);

/// Empties round(r_m * n_v) non-empty pillars chosen uniformly without
/// replacement (round half up). Deterministic per seed.
std::pair<PillarGrid, MaskSpec> mask_pillars(const PillarGrid& grid, double r_m,
                                             std::uint64_t seed);

inline constexpr int kPillarFeatureChannels = 6;

/// Dense C x H x W array of per-pillar aggregates; empty cells stay zero.
/// Channels: log1p(count), mean x offset from the cell center, mean y offset,
/// mean z, max z, mean intensity.
nn::Tensor to_pseudo_image(const PillarGrid& grid);

}  // namespace ssc3od::pillars
