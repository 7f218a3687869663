#include "ssc3od/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ssc3od/rng.hpp"

namespace ssc3od::pillars {

namespace {

int axis_cells(double lo, double hi, double step, const char* axis) {
  if (step <= 0.0) throw std::invalid_argument("grid: non-positive cell size");
  const double q = (hi - lo) / step;
  const int n = static_cast<int>(std::llround(q));
  if (n < 1 || std::abs(q - n) > 1e-9) {
    throw std::invalid_argument(std::string("grid: extent not divisible by cell size on ") + axis);
  }
  return n;
}

// Half-open [lo, hi) bucketing with an edge fixup so that coordinates equal
// to an interior boundary land in the higher cell regardless of rounding.
int axis_index(double v, double lo, double step) {
  int i = static_cast<int>(std::floor((v - lo) / step));
  if (v < lo + i * step) --i;
  else if (v >= lo + (i + 1) * step) ++i;
  return i;
}

}  // namespace

int GridConfig::nx() const { return axis_cells(x_min, x_max, v_w, "x"); }
int GridConfig::ny() const { return axis_cells(y_min, y_max, v_h, "y"); }

void GridConfig::validate() const {
  nx();
  ny();
  if (z_max <= z_min) throw std::invalid_argument("grid: empty z span");
}

std::optional<std::pair<int, int>> GridConfig::index_of(double x, double y) const {
  const int ix = axis_index(x, x_min, v_w);
  const int iy = axis_index(y, y_min, v_h);
  if (ix < 0 || ix >= nx() || iy < 0 || iy >= ny()) return std::nullopt;
  return std::make_pair(ix, iy);
}

GridConfig GridConfig::scaled(int stride) const {
  if (stride < 1 || nx() % stride != 0 || ny() % stride != 0) {
    throw std::invalid_argument("grid: dims not divisible by stride");
  }
  GridConfig g = *this;
  g.v_w *= stride;
  g.v_h *= stride;
  return g;
}

int PillarGrid::n_v() const {
  int n = 0;
  for (const auto& c : cells) {
    if (!c.empty()) ++n;
  }
  return n;
}

PillarGrid pillarize(const geom::PointCloud& pc, const GridConfig& cfg) {
  cfg.validate();
  PillarGrid grid;
  grid.cfg = cfg;
  const int nx = cfg.nx(), ny = cfg.ny();
  grid.cells.assign(static_cast<std::size_t>(nx) * ny, {});

  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(pc.rows()));
  for (Eigen::Index r = 0; r < pc.rows(); ++r) {
    const auto idx = cfg.index_of(pc(r, 0), pc(r, 1));
    if (!idx) {
      ++grid.dropped;
      continue;
    }
    keep.push_back(static_cast<int>(r));
  }
  grid.pts.resize(static_cast<Eigen::Index>(keep.size()), 4);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    grid.pts.row(static_cast<Eigen::Index>(i)) = pc.row(keep[i]);
    const auto idx = cfg.index_of(grid.pts(static_cast<Eigen::Index>(i), 0),
                                  grid.pts(static_cast<Eigen::Index>(i), 1));
    grid.cells[static_cast<std::size_t>(idx->second) * nx + idx->first].push_back(
        static_cast<int>(i));
  }
  return grid;
}

OccupancyGrid occupancy_label(const PillarGrid& grid) {
  const int nx = grid.cfg.nx(), ny = grid.cfg.ny();
  OccupancyGrid occ;
  occ.values = Eigen::ArrayXXd::Zero(ny, nx);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      if (!grid.cells[static_cast<std::size_t>(iy) * nx + ix].empty()) {
        occ.values(iy, ix) = 1.0;
      }
    }
  }
  return occ;
}

std::pair<PillarGrid, MaskSpec> mask_pillars(const PillarGrid& grid, double r_m,
                                             std::uint64_t seed) {
  if (r_m < 0.0 || r_m > 1.0) throw std::invalid_argument("mask ratio outside [0, 1]");
  std::vector<int> occupied;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (!grid.cells[i].empty()) occupied.push_back(static_cast<int>(i));
  }
  const int n_v = static_cast<int>(occupied.size());
  const int k = static_cast<int>(std::floor(r_m * n_v + 0.5));  // round half up

  Rng rng(seed);
  const std::vector<int> pick = rng.sample_without_replacement(n_v, k);

  MaskSpec spec;
  spec.r_m = r_m;
  spec.masked.reserve(pick.size());
  for (int p : pick) spec.masked.push_back(occupied[static_cast<std::size_t>(p)]);

  PillarGrid visible = grid;
  for (int flat : spec.masked) visible.cells[static_cast<std::size_t>(flat)].clear();
  return {std::move(visible), std::move(spec)};
}

nn::Tensor to_pseudo_image(const PillarGrid& grid) {
  const int nx = grid.cfg.nx(), ny = grid.cfg.ny();
  nn::Tensor img = nn::Tensor::zeros({kPillarFeatureChannels, ny, nx});
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const auto& cell = grid.cells[static_cast<std::size_t>(iy) * nx + ix];
      if (cell.empty()) continue;
      const double cx = grid.cfg.cell_cx(ix);
      const double cy = grid.cfg.cell_cy(iy);
      double sx = 0, sy = 0, sz = 0, si = 0;
      double zmax = -std::numeric_limits<double>::infinity();
      for (int p : cell) {
        sx += grid.pts(p, 0) - cx;
        sy += grid.pts(p, 1) - cy;
        sz += grid.pts(p, 2);
        si += grid.pts(p, 3);
        zmax = std::max(zmax, grid.pts(p, 2));
      }
      const double inv = 1.0 / static_cast<double>(cell.size());
      img.at(0, iy, ix) = std::log1p(static_cast<double>(cell.size()));
      img.at(1, iy, ix) = sx * inv;
      img.at(2, iy, ix) = sy * inv;
      img.at(3, iy, ix) = sz * inv;
      img.at(4, iy, ix) = zmax;
      img.at(5, iy, ix) = si * inv;
    }
  }
  return img;
}

}  // namespace ssc3od::pillars
