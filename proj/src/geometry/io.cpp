#include "vv/geometry/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vv/common/binary_io.hpp"
#include "vv/common/fs.hpp"

namespace vv::geo {
namespace {

constexpr std::string_view kSceneMagic = "VVSCN1\n";
constexpr std::string_view kViewMagic = "VVVIEW1\n";

void put_bits(std::ostream& out, const std::vector<std::uint8_t>& bits) {
  std::vector<char> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) bytes[i / 8] = static_cast<char>(bytes[i / 8] | (1 << (i % 8)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> get_bits(std::istream& in, std::size_t n) {
  std::vector<unsigned char> bytes((n + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw binio::FormatError("scene: truncated bitset");
  }
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (bytes[i / 8] >> (i % 8)) & 1;
  return bits;
}

void put_matrix(std::ostream& out, const Mat4& m) {
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) binio::put_f64(out, m(r, c));
}

Mat4 get_matrix(std::istream& in) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = binio::get_f64(in);
  return m;
}

std::uint8_t to_byte(float c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void save_scene(const std::filesystem::path& path, const OccupancyGrid& grid,
                const LabelGrid& labels) {
  if (!(labels.dims == grid.dims)) throw GeometryError("save_scene: label grid dims mismatch");
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kSceneMagic.data(), static_cast<std::streamsize>(kSceneMagic.size()));
    binio::put_u64(out, static_cast<std::uint64_t>(grid.dims.x));
    binio::put_u64(out, static_cast<std::uint64_t>(grid.dims.y));
    binio::put_u64(out, static_cast<std::uint64_t>(grid.dims.z));
    binio::put_f64(out, grid.voxel_size());
    put_matrix(out, grid.world_to_grid.matrix());
    put_bits(out, grid.occupied);
    put_bits(out, grid.known);
    out.write(reinterpret_cast<const char*>(labels.labels.data()),
              static_cast<std::streamsize>(labels.labels.size()));
  });
}

SceneVolume load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scene " + path.string());
  binio::expect_magic(in, kSceneMagic);
  GridDims dims;
  dims.x = static_cast<int>(binio::get_u64(in));
  dims.y = static_cast<int>(binio::get_u64(in));
  dims.z = static_cast<int>(binio::get_u64(in));
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0 || dims.count() > (1ull << 32)) {
    throw binio::FormatError("scene: implausible grid dims");
  }
  const double voxel_size = binio::get_f64(in);
  const Mat4 m = get_matrix(in);
  SceneVolume scene;
  scene.grid = OccupancyGrid(dims, WorldToGrid(m, voxel_size));
  scene.grid.occupied = get_bits(in, dims.count());
  scene.grid.known = get_bits(in, dims.count());
  scene.labels = LabelGrid(dims);
  if (!in.read(reinterpret_cast<char*>(scene.labels.labels.data()),
               static_cast<std::streamsize>(dims.count()))) {
    throw binio::FormatError("scene: truncated label array");
  }
  return scene;
}

void quantize_colors(View& view) {
  for (auto& c : view.color) c = static_cast<float>(to_byte(c)) / 255.0f;
}

void save_view(const std::filesystem::path& path, const View& view) {
  view.validate();
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kViewMagic.data(), static_cast<std::streamsize>(kViewMagic.size()));
    const auto& in = view.intrinsics;
    for (const double v : {in.fx, in.fy, in.cx, in.cy, 0.0, view.depth_max}) binio::put_f64(out, v);
    binio::put_i32(out, in.width);
    binio::put_i32(out, in.height);
    put_matrix(out, view.pose.camera_to_world());
    for (const float d : view.depth) binio::put_f32(out, d);
    std::vector<char> rgb(view.color.size());
    std::transform(view.color.begin(), view.color.end(), rgb.begin(),
                   [](float c) { return static_cast<char>(to_byte(c)); });
    out.write(rgb.data(), static_cast<std::streamsize>(rgb.size()));
  });
}

View load_view(const std::filesystem::path& path, int id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open view " + path.string());
  binio::expect_magic(in, kViewMagic);
  View view;
  view.id = id;
  auto& intr = view.intrinsics;
  intr.fx = binio::get_f64(in);
  intr.fy = binio::get_f64(in);
  intr.cx = binio::get_f64(in);
  intr.cy = binio::get_f64(in);
  (void)binio::get_f64(in);  // depth_min, informational
  view.depth_max = binio::get_f64(in);
  intr.width = binio::get_i32(in);
  intr.height = binio::get_i32(in);
  intr.validate();
  view.pose = Pose(get_matrix(in));
  const auto n = static_cast<std::size_t>(intr.width) * static_cast<std::size_t>(intr.height);
  view.depth.resize(n);
  for (auto& d : view.depth) d = binio::get_f32(in);
  std::vector<unsigned char> rgb(3 * n);
  if (!in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()))) {
    throw binio::FormatError("view: truncated color image");
  }
  view.color.resize(3 * n);
  std::transform(rgb.begin(), rgb.end(), view.color.begin(),
                 [](unsigned char b) { return static_cast<float>(b) / 255.0f; });
  view.validate();
  return view;
}

std::filesystem::path scene_view_path(const std::filesystem::path& scene_path, int index) {
  char suffix[16];
  std::snprintf(suffix, sizeof(suffix), ".view%03d", index);
  std::filesystem::path p = scene_path;
  p += suffix;
  return p;
}

void save_scene_views(const std::filesystem::path& scene_path, const std::vector<View>& views) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    save_view(scene_view_path(scene_path, static_cast<int>(i)), views[i]);
  }
}

std::vector<View> load_scene_views(const std::filesystem::path& scene_path) {
  std::vector<View> views;
  for (int i = 0;; ++i) {
    const auto p = scene_view_path(scene_path, i);
    if (!std::filesystem::exists(p)) break;
    views.push_back(load_view(p, i));
  }
  return views;
}

}  // namespace vv::geo
