#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "vv/geometry/io.hpp"
#include "vv/geometry/view_selection.hpp"

namespace vv::geo {
namespace {

View pinhole_view(int w, int h, double f, const Pose& pose, float depth_fill) {
  View v;
  v.intrinsics = Intrinsics{f, f, w / 2.0, h / 2.0, w, h};
  v.pose = pose;
  v.depth.assign(static_cast<std::size_t>(w) * h, depth_fill);
  v.color.assign(static_cast<std::size_t>(w) * h * 3, 0.5f);
  return v;
}

// Grid whose voxel (0,0,0) is centered at `center` (meters).
WorldToGrid grid_centered_at(double voxel, const Vec3& center) {
  return WorldToGrid(voxel, center - Vec3::Constant(voxel / 2));
}

TEST(ProjectVoxel, PrincipalPointMapsToDownsampledCenter) {
  View view = pinhole_view(320, 256, 100.0, Pose(), 1.0f);
  view.intrinsics.cx = 160;
  view.intrinsics.cy = 128;
  const auto w2g = grid_centered_at(0.048, Vec3(0, 0, 1));
  const auto frame = VoxelFrame::whole({1, 1, 1}, w2g);
  const auto p = project_voxel(0, 0, 0, frame, view, 8, 0.048);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(*p, (Pixel{20, 16}));
}

TEST(ProjectVoxel, DepthPruningAtVoxelSize) {
  View view = pinhole_view(320, 256, 100.0, Pose(), 1.10f);
  const auto frame = VoxelFrame::whole({1, 1, 1}, grid_centered_at(0.048, Vec3(0, 0, 1)));
  EXPECT_FALSE(project_voxel(0, 0, 0, frame, view, 8, 0.048).has_value());
  // 4.7 cm off is still inside the threshold.
  std::fill(view.depth.begin(), view.depth.end(), 1.047f);
  EXPECT_TRUE(project_voxel(0, 0, 0, frame, view, 8, 0.048).has_value());
  std::fill(view.depth.begin(), view.depth.end(), 0.0f);
  EXPECT_FALSE(project_voxel(0, 0, 0, frame, view, 8, 0.048).has_value());
}

TEST(ProjectVoxel, BehindCameraRejected) {
  View view = pinhole_view(320, 256, 100.0, Pose(), 1.0f);
  const auto frame = VoxelFrame::whole({1, 1, 1}, grid_centered_at(0.048, Vec3(0, 0, -1)));
  EXPECT_FALSE(project_voxel(0, 0, 0, frame, view, 8, 0.048).has_value());
}

TEST(ProjectVoxel, InvalidArguments) {
  View view = pinhole_view(8, 8, 10.0, Pose(), 1.0f);
  const auto frame = VoxelFrame::whole({1, 1, 1}, grid_centered_at(0.048, Vec3(0, 0, 1)));
  EXPECT_THROW(project_voxel(0, 0, 0, frame, view, 0, 0.048), GeometryError);
  EXPECT_THROW(project_voxel(0, 0, 0, frame, view, 1, 0.0), GeometryError);
}

TEST(Pose, RejectsNonRigid) {
  Mat4 m = Mat4::Identity();
  m(0, 0) = 1.01;
  EXPECT_THROW(Pose{m}, GeometryError);
  m = Mat4::Identity();
  m(2, 2) = -1;
  EXPECT_THROW(Pose{m}, GeometryError);
  m = Mat4::Identity();
  m(3, 0) = 0.5;
  EXPECT_THROW(Pose{m}, GeometryError);
}

// Independent per-voxel projection used as the oracle for association maps.
std::optional<Pixel> oracle_project(int i, int j, int k, const Mat4& w2g, const View& view, int ds,
                                    double threshold) {
  const Eigen::Vector4d g(i + 0.5, j + 0.5, k + 0.5, 1.0);
  const Eigen::Vector4d world = w2g.inverse() * g;
  const Eigen::Matrix3d r = view.pose.camera_to_world().block<3, 3>(0, 0);
  const Vec3 t = view.pose.camera_to_world().block<3, 1>(0, 3);
  const Vec3 cam = r.transpose() * (world.head<3>() - t);
  if (!(cam.z() > 0)) return std::nullopt;
  const double u = view.intrinsics.fx * (cam.x() / cam.z()) + view.intrinsics.cx;
  const double v = view.intrinsics.fy * (cam.y() / cam.z()) + view.intrinsics.cy;
  if (u < 0 || v < 0 || u >= view.width() || v >= view.height()) return std::nullopt;
  const int px = static_cast<int>(u), py = static_cast<int>(v);
  const double d = view.depth[static_cast<std::size_t>(py) * view.width() + px];
  if (d == 0.0 || std::abs(cam.z() - d) > threshold) return std::nullopt;
  return Pixel{px / ds, py / ds};
}

struct RandomCase {
  GridDims dims;
  WorldToGrid w2g;
  View view;
};

RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> extent(1, 8);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RandomCase c;
  c.dims = {extent(rng), extent(rng), extent(rng)};
  const double voxel = 0.048;
  c.w2g = WorldToGrid(voxel, Vec3(unit(rng), unit(rng), unit(rng)) * 0.2);
  const Vec3 center = (c.w2g.grid_to_world() *
                       Eigen::Vector4d(c.dims.x / 2.0, c.dims.y / 2.0, c.dims.z / 2.0, 1.0))
                          .head<3>();
  const Vec3 eye = center + Vec3(unit(rng), unit(rng), unit(rng)).normalized() * (0.4 + 0.3 * (unit(rng) + 1));
  Vec3 up(unit(rng), unit(rng), unit(rng));
  std::uniform_int_distribution<int> size(4, 40);
  const int w = size(rng), h = size(rng);
  c.view = pinhole_view(w, h, w * (0.6 + 0.2 * (unit(rng) + 1)), Pose::look_at(eye, center, up), 0.0f);
  c.view.intrinsics.cx = (0.3 + 0.2 * (unit(rng) + 1)) * w;
  c.view.intrinsics.cy = (0.3 + 0.2 * (unit(rng) + 1)) * h;
  // A tilted plane through the grid center, with holes, so that pruning on
  // both sides of the 4.8 cm threshold is exercised.
  const double dist = (center - eye).norm();
  const double slope_u = 0.02 * unit(rng), slope_v = 0.02 * unit(rng);
  std::uniform_real_distribution<double> hole(0.0, 1.0);
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const double d = dist + slope_u * (px - w / 2.0) + slope_v * (py - h / 2.0);
      c.view.depth[static_cast<std::size_t>(py) * w + px] = hole(rng) < 0.1 ? 0.0f : static_cast<float>(d);
    }
  }
  return c;
}

TEST(AssociationMap, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  std::size_t associated = 0, pruned = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_case(rng);
    for (const int ds : {1, 4}) {
      const auto map = compute_association_map(VoxelFrame::whole(c.dims, c.w2g), c.view, ds, 0.048);
      for (int i = 0; i < c.dims.x; ++i)
        for (int j = 0; j < c.dims.y; ++j)
          for (int k = 0; k < c.dims.z; ++k) {
            const auto expected = oracle_project(i, j, k, c.w2g.matrix(), c.view, ds, 0.048);
            ASSERT_EQ(map.at(c.dims.index(i, j, k)), expected) << "trial " << trial;
            if (ds == 1) {
              if (expected) {
                ++associated;
              } else if (oracle_project(i, j, k, c.w2g.matrix(), c.view, ds, 1e9)) {
                ++pruned;
              }
            }
          }
    }
  }
  EXPECT_GT(associated, 0u);
  EXPECT_GT(pruned, 0u);
}

TEST(AssociationMap, FrustumMissIsEmpty) {
  View view = pinhole_view(32, 24, 30.0, Pose(), 1.0f);
  const auto frame = VoxelFrame::whole({4, 4, 4}, grid_centered_at(0.048, Vec3(0, 0, -2)));
  EXPECT_EQ(compute_association_map(frame, view, 8, 0.048).associated_count(), 0u);
}

TEST(AssociationMap, DefaultChunkIndicesStayInFeatureImage) {
  const Vec3 eye(0.75, -0.6, 1.4);
  const Vec3 target(0.75, 0.75, 0.6);
  View view = pinhole_view(328, 256, 250.0, Pose::look_at(eye, target, Vec3(0, 0, 1)), 0.0f);
  // Depth that matches the chunk's own voxels along each ray: a plane at the
  // target distance.
  std::fill(view.depth.begin(), view.depth.end(), static_cast<float>((target - eye).norm()));
  const auto frame = VoxelFrame::whole({31, 31, 62}, WorldToGrid(0.048, Vec3::Zero()));
  const auto map = compute_association_map(frame, view, 8, 0.048);
  EXPECT_EQ(map.feature_width(), 41);
  EXPECT_EQ(map.feature_height(), 32);
  EXPECT_GT(map.associated_count(), 0u);
  for (std::size_t v = 0; v < frame.dims.count(); ++v) {
    if (const auto p = map.at(v)) {
      EXPECT_LT(p->u, 41);
      EXPECT_LT(p->v, 32);
    }
  }
}

TEST(Fusion, NoViewsLeavesEverythingUnknown) {
  const auto grid = fuse_views_to_occupancy({}, {3, 3, 3}, WorldToGrid(0.1, Vec3::Zero()));
  EXPECT_TRUE(std::all_of(grid.known.begin(), grid.known.end(), [](auto v) { return v == 0; }));
  EXPECT_TRUE(std::all_of(grid.occupied.begin(), grid.occupied.end(), [](auto v) { return v == 0; }));
}

TEST(Fusion, SingleRayMatchesAnalyticMarch) {
  const double voxel = 0.048;
  View view = pinhole_view(1, 1, 1.0, Pose(), 1.0f);
  view.intrinsics.cx = 0.5;
  view.intrinsics.cy = 0.5;
  const GridDims dims{1, 1, 40};
  const WorldToGrid w2g(voxel, Vec3(-voxel / 2, -voxel / 2, 0.0));
  const auto grid = fuse_views_to_occupancy({view}, dims, w2g);
  EXPECT_TRUE(grid.consistent());
  int n_occupied = 0;
  for (int k = 0; k < dims.z; ++k) {
    const double lo = k * voxel, hi = (k + 1) * voxel, mid = 0.5 * (lo + hi);
    // Analytic classification of cell [lo, hi) along the optical axis.
    const bool expect_free = mid < 1.0 - voxel;
    const bool expect_occupied = std::abs(mid - 1.0) <= voxel;
    EXPECT_EQ(grid.is_occupied(0, 0, k), expect_occupied) << "voxel " << k;
    EXPECT_EQ(grid.is_known(0, 0, k), expect_free || expect_occupied) << "voxel " << k;
    if (hi <= 1.0 - voxel) {
      EXPECT_FALSE(grid.is_occupied(0, 0, k));
    }
    if (lo > 1.0 + voxel) {
      EXPECT_FALSE(grid.is_known(0, 0, k));
    }
    n_occupied += expect_occupied;
  }
  const int surface = static_cast<int>(1.0 / voxel);
  EXPECT_TRUE(grid.is_occupied(0, 0, surface));
  EXPECT_GE(n_occupied, 1);
}

TEST(Fusion, OccupiedWinsOverFree) {
  const double voxel = 0.05;
  // View A sees a wall at 1.0; view B, looking the same way, sees past it to 2.0.
  View a = pinhole_view(1, 1, 1.0, Pose(), 1.0f);
  a.intrinsics.cx = a.intrinsics.cy = 0.5;
  View b = a;
  std::fill(b.depth.begin(), b.depth.end(), 2.0f);
  const GridDims dims{1, 1, 50};
  const WorldToGrid w2g(voxel, Vec3(-voxel / 2, -voxel / 2, 0.0));
  const auto grid = fuse_views_to_occupancy({a, b}, dims, w2g);
  EXPECT_TRUE(grid.is_occupied(0, 0, 20));
  EXPECT_TRUE(grid.is_occupied(0, 0, 40));
  EXPECT_TRUE(grid.consistent());
}

CoverageSet set_of(int id, std::initializer_list<int> members, int n = 13) {
  CoverageSet s{id, std::vector<std::uint8_t>(n, 0)};
  for (const int m : members) s.covered[m] = 1;
  return s;
}

std::size_t union_size(const std::vector<CoverageSet>& sets, const std::vector<std::size_t>& pick) {
  std::size_t n = 0;
  for (std::size_t v = 0; v < sets[0].covered.size(); ++v) {
    bool any = false;
    for (const auto p : pick) any = any || sets[p].covered[v];
    n += any;
  }
  return n;
}

TEST(GreedySelection, PicksLargestThenLargestMarginal) {
  const std::vector<CoverageSet> sets{set_of(0, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}),
                                      set_of(1, {1, 2, 3, 4, 5, 6}),
                                      set_of(2, {7, 8, 9, 10, 11, 12})};
  const auto pick = greedy_select(sets, 2);
  ASSERT_EQ(pick, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(union_size(sets, {0}), 10u);
  EXPECT_EQ(union_size(sets, pick) - union_size(sets, {0}), 2u);
  // Exhaustive search over all 2-subsets.
  std::size_t best = 0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) best = std::max(best, union_size(sets, {a, b}));
  EXPECT_EQ(union_size(sets, pick), best);
}

TEST(GreedySelection, EdgeCases) {
  EXPECT_TRUE(greedy_select({}, 3).empty());
  EXPECT_EQ(greedy_select({set_of(5, {3})}, 3), (std::vector<std::size_t>{0}));
  // Duplicate coverage adds nothing, so selection stops early.
  EXPECT_EQ(greedy_select({set_of(0, {1, 2}), set_of(1, {1, 2})}, 2).size(), 1u);
  EXPECT_THROW(greedy_select({set_of(0, {1})}, 0), GeometryError);
}

TEST(GreedySelection, InvariantToCandidateOrder) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CoverageSet> sets;
    for (int id = 0; id < 6; ++id) {
      CoverageSet s{id * 3 + 1, std::vector<std::uint8_t>(20)};
      for (auto& c : s.covered) c = coin(rng);
      sets.push_back(s);
    }
    auto ids = [&](const std::vector<CoverageSet>& cs) {
      std::vector<int> out;
      for (const auto p : greedy_select(cs, 4)) out.push_back(cs[p].view_id);
      return out;
    };
    const auto reference = ids(sets);
    std::shuffle(sets.begin(), sets.end(), rng);
    EXPECT_EQ(ids(sets), reference);
  }
}

TEST(Coverage, BoundsMonotonicityAndErrors) {
  const GridDims dims{2, 2, 2};
  LabelGrid labels(dims);
  labels.labels[0] = 1;
  labels.labels[3] = 0;
  labels.labels[5] = 2;
  AssociationMap a(dims, 1, 4, 4), b(dims, 1, 4, 4);
  a.set(0, Pixel{1, 1});
  b.set(3, Pixel{0, 0});
  b.set(5, Pixel{2, 0});
  EXPECT_EQ(compute_coverage(std::span<const AssociationMap>{}, labels), 0.0);
  const std::vector<AssociationMap> one{a}, both{a, b};
  EXPECT_NEAR(compute_coverage(one, labels), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(compute_coverage(both, labels), 1.0);
  EXPECT_THROW(compute_coverage(one, LabelGrid(dims)), GeometryError);
}

TEST(SceneIo, RoundTripAndBitLayout) {
  const auto dir = std::filesystem::temp_directory_path() / "vv_geo_io";
  std::filesystem::create_directories(dir);
  const GridDims dims{3, 2, 5};
  OccupancyGrid grid(dims, WorldToGrid(0.048, Vec3(0.1, -0.2, 0.0)));
  LabelGrid labels(dims);
  grid.occupied[0] = grid.known[0] = 1;
  grid.known[9] = 1;
  grid.occupied[29] = grid.known[29] = 1;
  labels.labels[0] = 4;
  labels.labels[29] = 0;
  const auto path = dir / "s.vvscn";
  save_scene(path, grid, labels);
  const auto loaded = load_scene(path);
  EXPECT_EQ(loaded.grid.dims, dims);
  EXPECT_EQ(loaded.grid.occupied, grid.occupied);
  EXPECT_EQ(loaded.grid.known, grid.known);
  EXPECT_EQ(loaded.labels.labels, labels.labels);
  EXPECT_EQ(loaded.grid.world_to_grid.matrix(), grid.world_to_grid.matrix());
  // 7 magic + 24 dims + 8 voxel + 128 matrix + 2 * 4 bitset bytes + 30 labels.
  EXPECT_EQ(std::filesystem::file_size(path), 7u + 24 + 8 + 128 + 8 + 30);

  View view = pinhole_view(4, 3, 5.0, Pose::look_at(Vec3(1, 0, 0), Vec3::Zero(), Vec3(0, 0, 1)), 1.5f);
  view.color[4] = 0.2f;
  quantize_colors(view);
  save_scene_views(path, {view, view});
  const auto views = load_scene_views(path);
  ASSERT_EQ(views.size(), 2u);
  EXPECT_EQ(views[1].id, 1);
  EXPECT_EQ(views[0].color, view.color);
  EXPECT_EQ(views[0].depth, view.depth);
  EXPECT_TRUE(views[0].pose.camera_to_world().isApprox(view.pose.camera_to_world(), 0.0));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace vv::geo
