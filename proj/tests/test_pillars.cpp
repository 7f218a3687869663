#include <doctest.h>

#include <cmath>

#include "ssc3od/grid.hpp"
#include "ssc3od/rng.hpp"

using namespace ssc3od;
using pillars::GridConfig;

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.x_min = -4;
  g.x_max = 4;
  g.y_min = -4;
  g.y_max = 4;
  g.v_w = 0.5;
  g.v_h = 0.5;
  return g;
}

geom::PointCloud random_cloud(Rng& rng, int n, double span) {
  geom::PointCloud pc(n, 4);
  for (int i = 0; i < n; ++i) {
    pc(i, 0) = rng.uniform(-span, span);
    pc(i, 1) = rng.uniform(-span, span);
    pc(i, 2) = rng.uniform(0, 2);
    pc(i, 3) = rng.uniform01();
  }
  return pc;
}

}  // namespace

TEST_CASE("grid config validates divisibility") {
  GridConfig g = small_grid();
  CHECK(g.nx() == 16);
  CHECK(g.ny() == 16);
  g.v_w = 0.3;
  CHECK_THROWS(g.validate());
}

TEST_CASE("grid scaled by encoder stride") {
  GridConfig g;
  g.x_min = -32;
  g.x_max = 32;
  g.y_min = -32;
  g.y_max = 32;
  g.v_w = 0.4;
  g.v_h = 0.4;
  const GridConfig s = g.scaled(2);
  CHECK(s.nx() == 80);
  CHECK(s.ny() == 80);
  CHECK(s.v_w == doctest::Approx(0.8));
}

TEST_CASE("pillarize: empty cloud, single point, boundary rule") {
  const GridConfig g = small_grid();

  const auto empty = pillars::pillarize(geom::PointCloud(0, 4), g);
  CHECK(empty.n_v() == 0);

  geom::PointCloud one(1, 4);
  one << g.cell_cx(3), g.cell_cy(5), 1.0, 0.5;
  const auto grid = pillars::pillarize(one, g);
  CHECK(grid.n_v() == 1);
  CHECK(grid.cells[5 * g.nx() + 3].size() == 1);

  // exactly on the first interior x boundary -> higher cell
  geom::PointCloud edge(1, 4);
  edge << g.x_min + g.v_w, g.cell_cy(0), 0.0, 0.0;
  const auto eg = pillars::pillarize(edge, g);
  CHECK(eg.cells[1].size() == 1);
  CHECK(eg.cells[0].empty());

  // out of range points are dropped and counted
  geom::PointCloud out(1, 4);
  out << g.x_max + 1.0, 0.0, 0.0, 0.0;
  const auto og = pillars::pillarize(out, g);
  CHECK(og.n_v() == 0);
  CHECK(og.dropped == 1);
}

TEST_CASE("occupancy label is the non-empty indicator") {
  const GridConfig g = small_grid();
  const auto none = pillars::occupancy_label(pillars::pillarize(geom::PointCloud(0, 4), g));
  CHECK(none.values.sum() == 0.0);

  Rng rng(31);
  const auto cloud = random_cloud(rng, 120, 3.9);
  const auto grid = pillars::pillarize(cloud, g);
  const auto occ = pillars::occupancy_label(grid);
  CHECK(occ.values.sum() == doctest::Approx(grid.n_v()));
  CHECK(((occ.values == 0.0) || (occ.values == 1.0)).all());
}

TEST_CASE("mask_pillars: endpoints and count rule") {
  const GridConfig g = small_grid();
  Rng rng(32);
  const auto grid = pillars::pillarize(random_cloud(rng, 200, 3.9), g);
  const int n_v = grid.n_v();
  REQUIRE(n_v > 5);

  const auto [vis0, spec0] = pillars::mask_pillars(grid, 0.0, 7);
  CHECK(spec0.masked.empty());
  CHECK(vis0.n_v() == n_v);

  const auto [vis1, spec1] = pillars::mask_pillars(grid, 1.0, 7);
  CHECK(static_cast<int>(spec1.masked.size()) == n_v);
  CHECK(vis1.n_v() == 0);

  const auto [vis, spec] = pillars::mask_pillars(grid, 0.7, 7);
  CHECK(static_cast<int>(spec.masked.size()) == static_cast<int>(std::floor(0.7 * n_v + 0.5)));
  CHECK(vis.n_v() == n_v - static_cast<int>(spec.masked.size()));
  for (int flat : spec.masked) {
    CHECK(!grid.cells[static_cast<std::size_t>(flat)].empty());  // masked subset of non-empty
    CHECK(vis.cells[static_cast<std::size_t>(flat)].empty());
  }
}

TEST_CASE("mask_pillars: ten pillars at 0.7 masks exactly seven") {
  GridConfig g = small_grid();
  geom::PointCloud pc(10, 4);
  for (int i = 0; i < 10; ++i) pc.row(i) << g.cell_cx(i), g.cell_cy(i), 0.5, 0.1;
  const auto grid = pillars::pillarize(pc, g);
  REQUIRE(grid.n_v() == 10);
  const auto [vis, spec] = pillars::mask_pillars(grid, 0.7, 123);
  CHECK(spec.masked.size() == 7);
  CHECK(vis.n_v() == 3);
}

TEST_CASE("mask_pillars is deterministic per seed") {
  const GridConfig g = small_grid();
  Rng rng(33);
  const auto grid = pillars::pillarize(random_cloud(rng, 150, 3.9), g);
  const auto a = pillars::mask_pillars(grid, 0.5, 99);
  const auto b = pillars::mask_pillars(grid, 0.5, 99);
  const auto c = pillars::mask_pillars(grid, 0.5, 100);
  CHECK(a.second.masked == b.second.masked);
  CHECK(a.second.masked != c.second.masked);
}

TEST_CASE("occupancy of visible grid never exceeds the original") {
  const GridConfig g = small_grid();
  Rng rng(34);
  for (int iter = 0; iter < 20; ++iter) {
    const auto grid = pillars::pillarize(random_cloud(rng, 100, 3.9), g);
    const auto [vis, spec] =
        pillars::mask_pillars(grid, rng.uniform01(), rng.next_u64());
    const auto full = pillars::occupancy_label(grid);
    const auto cut = pillars::occupancy_label(vis);
    CHECK((cut.values <= full.values).all());
    CHECK(vis.n_v() == grid.n_v() - static_cast<int>(spec.masked.size()));
  }
}

TEST_CASE("to_pseudo_image: zeros, single pillar, masking commutes") {
  const GridConfig g = small_grid();

  const auto zeros = pillars::to_pseudo_image(pillars::pillarize(geom::PointCloud(0, 4), g));
  CHECK(zeros.shape == std::vector<int>{pillars::kPillarFeatureChannels, 16, 16});
  CHECK(zeros.data.abs().maxCoeff() == 0.0);

  geom::PointCloud one(1, 4);
  one << g.cell_cx(2) + 0.1, g.cell_cy(9) - 0.05, 1.3, 0.8;
  const auto img = pillars::to_pseudo_image(pillars::pillarize(one, g));
  int nonzero_locations = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      double mag = 0;
      for (int c = 0; c < pillars::kPillarFeatureChannels; ++c) mag += std::abs(img.at(c, y, x));
      if (mag > 0) {
        ++nonzero_locations;
        CHECK(x == 2);
        CHECK(y == 9);
        CHECK(img.at(0, y, x) == doctest::Approx(std::log1p(1.0)));
        CHECK(img.at(1, y, x) == doctest::Approx(0.1));
        CHECK(img.at(2, y, x) == doctest::Approx(-0.05));
        CHECK(img.at(3, y, x) == doctest::Approx(1.3));
        CHECK(img.at(4, y, x) == doctest::Approx(1.3));
        CHECK(img.at(5, y, x) == doctest::Approx(0.8));
      }
    }
  }
  CHECK(nonzero_locations == 1);

  // mask-then-render equals render-then-zero
  Rng rng(35);
  const auto grid = pillars::pillarize(random_cloud(rng, 90, 3.9), g);
  const auto [vis, spec] = pillars::mask_pillars(grid, 0.4, 5);
  auto rendered = pillars::to_pseudo_image(grid);
  for (int flat : spec.masked) {
    const int y = flat / g.nx(), x = flat % g.nx();
    for (int c = 0; c < pillars::kPillarFeatureChannels; ++c) rendered.at(c, y, x) = 0.0;
  }
  const auto direct = pillars::to_pseudo_image(vis);
  CHECK((rendered.data - direct.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("pillar features are point-order invariant") {
  const GridConfig g = small_grid();
  Rng rng(36);
  geom::PointCloud pc = random_cloud(rng, 60, 3.9);
  const auto img = pillars::to_pseudo_image(pillars::pillarize(pc, g));

  // reverse the row order
  geom::PointCloud rev(pc.rows(), 4);
  for (Eigen::Index i = 0; i < pc.rows(); ++i) rev.row(i) = pc.row(pc.rows() - 1 - i);
  const auto img2 = pillars::to_pseudo_image(pillars::pillarize(rev, g));
  CHECK((img.data - img2.data).abs().maxCoeff() < 1e-12);
}
