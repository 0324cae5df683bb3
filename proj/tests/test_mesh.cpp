#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "bscch/mesh.hpp"

using namespace bscch;

TEST(DiskMesh, Counts) {
  const auto m = generate_disk_mesh(8, 2);
  EXPECT_EQ(m.num_vertices(), 17u);
  EXPECT_EQ(m.num_triangles(), 24u);
  EXPECT_EQ(m.num_boundary(), 8u);
  EXPECT_NO_THROW(validate(m));
  for (int nb : {8, 12, 32}) {
    for (int nr : {1, 3, 5}) {
      const auto g = generate_disk_mesh(nb, nr);
      EXPECT_EQ(g.num_vertices(), static_cast<std::size_t>(1 + nb * nr));
      EXPECT_EQ(g.num_triangles(), static_cast<std::size_t>(nb * (2 * nr - 1)));
      EXPECT_NO_THROW(validate(g));
    }
  }
}

TEST(DiskMesh, BoundaryOnUnitCircle) {
  const auto m = generate_disk_mesh(64, 16);
  for (int v : m.boundary_loop) EXPECT_NEAR(std::hypot(m.vertices[v].x, m.vertices[v].y), 1.0, 1e-14);
}

TEST(DiskMesh, RejectsBadArguments) {
  EXPECT_THROW(generate_disk_mesh(6, 2), InvalidArgument);
  EXPECT_THROW(generate_disk_mesh(9, 2), InvalidArgument);
  EXPECT_THROW(generate_disk_mesh(8, 0), InvalidArgument);
}

TEST(MeshStats, InscribedPolygon) {
  EXPECT_NEAR(mesh_stats(generate_disk_mesh(8, 1)).area, 4.0 * std::sin(std::numbers::pi / 4), 1e-14);
  EXPECT_NEAR(mesh_stats(generate_disk_mesh(8, 2)).perimeter, 16.0 * std::sin(std::numbers::pi / 8), 1e-14);
  EXPECT_NEAR(mesh_stats(generate_disk_mesh(8, 2)).perimeter, 6.12293, 1e-5);
  const auto s = mesh_stats(generate_disk_mesh(64, 16));
  EXPECT_NEAR(s.area, 32.0 * std::sin(2.0 * std::numbers::pi / 64), 1e-12);
  EXPECT_LT(std::abs(s.area - std::numbers::pi) / std::numbers::pi, 0.005);
}

TEST(MeshStats, QualityAndEdges) {
  for (auto [nb, nr] : {std::pair{8, 1}, {16, 4}, {64, 16}}) {
    const auto m = generate_disk_mesh(nb, nr);
    const auto s = mesh_stats(m);
    double longest = 0.0;
    for (std::size_t e = 0; e < m.num_boundary(); ++e) longest = std::max(longest, m.boundary_edge_length(e));
    EXPECT_GE(s.h_max, longest);
    EXPECT_GT(s.min_angle, 0.0);
    EXPECT_LT(s.min_angle, 60.0);
    EXPECT_GT(s.area, 0.0);
    EXPECT_GT(s.perimeter, 0.0);
  }
}

TEST(MeshStats, RefinementHalvesMeshSize) {
  const double h1 = mesh_stats(generate_disk_mesh(32, 8)).h_max;
  const double h2 = mesh_stats(generate_disk_mesh(64, 16)).h_max;
  const double h3 = mesh_stats(generate_disk_mesh(128, 32)).h_max;
  EXPECT_NEAR(h1 / h2, 2.0, 0.2);
  EXPECT_NEAR(h2 / h3, 2.0, 0.2);
}

TEST(MeshStats, MonotoneApproachToCircle) {
  double area = 0.0, perim = 0.0;
  for (int nb = 8; nb <= 256; nb *= 2) {
    const auto s = mesh_stats(generate_disk_mesh(nb, 2));
    EXPECT_GT(s.area, area);
    EXPECT_GT(s.perimeter, perim);
    EXPECT_LT(s.area, std::numbers::pi);
    EXPECT_LT(s.perimeter, 2.0 * std::numbers::pi);
    area = s.area;
    perim = s.perimeter;
  }
}

TEST(MeshIO, RoundTrip) {
  for (auto [nb, nr] : {std::pair{8, 1}, {16, 3}}) {
    const auto m = generate_disk_mesh(nb, nr);
    std::stringstream ss;
    write_mesh(m, ss);
    const auto back = read_mesh(ss);
    EXPECT_EQ(back, m);
    std::stringstream again;
    write_mesh(back, again);
    std::stringstream first;
    write_mesh(m, first);
    EXPECT_EQ(again.str(), first.str());
  }
}

namespace {

std::string square_mesh(const std::string& triangles, const std::string& loop, int T = 2, int B = 4) {
  std::ostringstream os;
  os << "bscch-mesh 1\n4 " << T << ' ' << B << "\n0 0\n1 0\n1 1\n0 1\n" << triangles << loop;
  return os.str();
}

}  // namespace

TEST(MeshIO, AcceptsValidSquare) {
  std::istringstream is(square_mesh("0 1 2\n0 2 3\n", "0\n1\n2\n3\n"));
  EXPECT_EQ(read_mesh(is).num_triangles(), 2u);
}

TEST(MeshIO, RejectsClockwiseTriangle) {
  std::istringstream is(square_mesh("0 2 1\n0 2 3\n", "0\n1\n2\n3\n"));
  EXPECT_THROW(read_mesh(is), ValidationError);
}

TEST(MeshIO, RejectsOpenBoundaryChain) {
  // A loop that skips a boundary edge does not close over the true boundary.
  std::istringstream is(square_mesh("0 1 2\n0 2 3\n", "0\n1\n2\n", 2, 3));
  EXPECT_THROW(read_mesh(is), ValidationError);
}

TEST(MeshIO, RejectsClockwiseLoop) {
  std::istringstream is(square_mesh("0 1 2\n0 2 3\n", "3\n2\n1\n0\n"));
  EXPECT_THROW(read_mesh(is), ValidationError);
}

TEST(MeshIO, ParseErrorsCarryLineNumbers) {
  {
    std::istringstream is("bscch-mesh 2\n");
    EXPECT_THROW(read_mesh(is), ParseError);
  }
  {
    std::istringstream is(square_mesh("0 1 x\n0 2 3\n", "0\n1\n2\n3\n"));
    try {
      read_mesh(is);
      FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 7);
    }
  }
  {
    std::istringstream is("bscch-mesh 1\n4 2 4\n0 0\n");
    try {
      read_mesh(is);
      FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 4);
    }
  }
}

TEST(MeshIO, RejectsOutOfRangeIndex) {
  std::istringstream is(square_mesh("0 1 7\n0 2 3\n", "0\n1\n2\n3\n"));
  EXPECT_THROW(read_mesh(is), ValidationError);
}
