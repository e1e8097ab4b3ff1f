#include "vv/datagen/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vv/geometry/io.hpp"
#include "vv/geometry/ray_impl.hpp"

namespace vv::data {
namespace {

struct Footprint {
  int x0, y0, w;  // square footprint [x0, x0 + w) x [y0, y0 + w)
};

int footprint_of(const SceneSpec& s, ClassId c) {
  switch ((c - 2) / 2) {
    case 0: return s.cube_size;
    case 1: return 2 * s.cylinder_radius;
    default: return s.slab_size;
  }
}

void fill_object(const SceneSpec& s, ClassId c, const Footprint& f, const geo::GridDims& dims,
                 std::vector<ClassId>& solid) {
  const int shape = (c - 2) / 2;
  int z0 = 1, z1 = 1;
  if (shape == 0) {
    z1 = 1 + s.cube_size;
  } else if (shape == 1) {
    z1 = 1 + s.cylinder_height;
  } else {
    z0 = s.slab_elevation;
    z1 = s.slab_elevation + s.slab_thickness;
  }
  const double r = s.cylinder_radius;
  for (int i = f.x0; i < f.x0 + f.w; ++i) {
    for (int j = f.y0; j < f.y0 + f.w; ++j) {
      if (shape == 1) {
        const double dx = i + 0.5 - (f.x0 + r), dy = j + 0.5 - (f.y0 + r);
        if (dx * dx + dy * dy > r * r) continue;
      }
      for (int k = z0; k < z1; ++k) solid[dims.index(i, j, k)] = c;
    }
  }
}

}  // namespace

const std::array<std::string, kNumClasses>& class_names() {
  static const std::array<std::string, kNumClasses> names{
      "wall", "floor", "cube_a", "cube_b", "cylinder_a", "cylinder_b", "slab_a", "slab_b"};
  return names;
}

const std::array<std::array<float, 3>, kNumClasses>& class_albedo() {
  static const std::array<std::array<float, 3>, kNumClasses> albedo{{{0.75f, 0.75f, 0.72f},
                                                                     {0.50f, 0.38f, 0.25f},
                                                                     {0.85f, 0.15f, 0.15f},
                                                                     {0.15f, 0.30f, 0.85f},
                                                                     {0.20f, 0.75f, 0.20f},
                                                                     {0.80f, 0.20f, 0.75f},
                                                                     {0.90f, 0.80f, 0.10f},
                                                                     {0.10f, 0.75f, 0.80f}}};
  return albedo;
}

bool is_structural(ClassId c) { return c == kWall || c == kFloor; }

ClassId color_twin(ClassId c) {
  if (is_structural(c) || c >= kNumClasses) return c;
  return static_cast<ClassId>(c % 2 == 0 ? c + 1 : c - 1);
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("scene spec: " + m); };
  if (size_x < 2 * chunk_x || size_y < 2 * chunk_y) {
    fail("room must span at least two chunks in x and y");
  }
  if (size_z < 4) fail("size_z too small");
  if (!(voxel_size > 0.0)) fail("voxel_size must be positive");
  if (n_objects < 0) fail("n_objects must be non-negative");
  if (n_objects > 0 && object_classes.empty()) fail("object_classes is empty");
  for (int c : object_classes) {
    if (c < 2 || c >= kNumClasses) fail("object class " + std::to_string(c) + " is not an object");
  }
  if (cube_size < 1 || cylinder_radius < 1 || cylinder_height < 1 || slab_size < 1 ||
      slab_thickness < 1 || slab_elevation < 1) {
    fail("object sizes must be positive");
  }
  if (1 + cube_size >= size_z || 1 + cylinder_height >= size_z ||
      slab_elevation + slab_thickness >= size_z) {
    fail("objects taller than the room");
  }
  if (n_views < 1) fail("at least one camera is required");
  if (image_width < 1 || image_height < 1) fail("image extents must be positive");
  if (!(fov_x_deg > 0.0 && fov_x_deg < 180.0)) fail("fov_x_deg out of range");
  if (!(unannotated_fraction >= 0.0 && unannotated_fraction <= 1.0)) {
    fail("unannotated_fraction must lie in [0, 1]");
  }
}

SceneSpec SceneSpec::from_config(const KeyValueConfig& cfg) {
  SceneSpec s;
  auto i = [&](const char* key, int& v) { v = static_cast<int>(cfg.get_int(key, v)); };
  auto d = [&](const char* key, double& v) { v = cfg.get_double(key, v); };
  i("scene.size_x", s.size_x);
  i("scene.size_y", s.size_y);
  i("scene.size_z", s.size_z);
  d("scene.voxel_size", s.voxel_size);
  i("scene.n_objects", s.n_objects);
  s.object_classes = cfg.get_int_list("scene.object_classes", s.object_classes);
  i("scene.cube_size", s.cube_size);
  i("scene.cylinder_radius", s.cylinder_radius);
  i("scene.cylinder_height", s.cylinder_height);
  i("scene.slab_size", s.slab_size);
  i("scene.slab_thickness", s.slab_thickness);
  i("scene.slab_elevation", s.slab_elevation);
  i("scene.min_gap", s.min_gap);
  i("scene.n_views", s.n_views);
  i("scene.image_width", s.image_width);
  i("scene.image_height", s.image_height);
  d("scene.fov_x_deg", s.fov_x_deg);
  d("scene.orbit_fraction", s.orbit_fraction);
  d("scene.camera_height_fraction", s.camera_height_fraction);
  d("scene.target_height_fraction", s.target_height_fraction);
  d("scene.jitter", s.jitter);
  d("scene.unannotated_fraction", s.unannotated_fraction);
  // The chunk footprint is shared with the network.
  i("net.chunk_x", s.chunk_x);
  i("net.chunk_y", s.chunk_y);
  s.validate();
  return s;
}

void render_view(const std::vector<ClassId>& solid, const geo::GridDims& dims,
                 const geo::WorldToGrid& w2g, geo::View& view) {
  const int w = view.width(), h = view.height();
  view.depth.assign(static_cast<std::size_t>(w) * h, 0.0f);
  view.color.assign(static_cast<std::size_t>(w) * h * 3, 0.0f);
  static constexpr float kShade[3] = {0.8f, 0.65f, 1.0f};  // by face axis x, y, z
  const auto& albedo = class_albedo();
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      geo::Vec3 origin, dir;
      geo::pixel_ray_in_grid(view, px + 0.5, py + 0.5, w2g.matrix(), origin, dir);
      int prev[3] = {-1, -1, -1};
      bool have_prev = false;
      double depth = 0.0;
      ClassId hit = kUnannotated;
      int face = 2;
      geo::traverse_ray(dims, origin, dir, 0.0, view.depth_max, [&](const geo::RayCell& c) {
        const ClassId s = solid[dims.index(c.i, c.j, c.k)];
        if (s != kUnannotated) {
          hit = s;
          depth = c.t_enter;
          if (have_prev) {
            face = prev[0] != c.i ? 0 : prev[1] != c.j ? 1 : 2;
          }
          return false;
        }
        prev[0] = c.i;
        prev[1] = c.j;
        prev[2] = c.k;
        have_prev = true;
        return true;
      });
      if (hit == kUnannotated || !(depth > 0.0)) continue;
      const auto p = static_cast<std::size_t>(py) * w + px;
      view.depth[p] = static_cast<float>(depth);
      for (int ch = 0; ch < 3; ++ch) view.color[3 * p + ch] = albedo[hit][ch] * kShade[face];
    }
  }
}

geo::LabelGrid label_occupied_voxels(const geo::OccupancyGrid& grid,
                                     const std::vector<ClassId>& solid) {
  const auto& dims = grid.dims;
  geo::LabelGrid labels(dims);
  auto neighbor_label = [&](int i, int j, int k, bool faces_only) -> ClassId {
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int dk = -1; dk <= 1; ++dk) {
          const int manhattan = std::abs(di) + std::abs(dj) + std::abs(dk);
          if (manhattan == 0 || (faces_only && manhattan != 1)) continue;
          if (!dims.contains(i + di, j + dj, k + dk)) continue;
          const ClassId s = solid[dims.index(i + di, j + dj, k + dk)];
          if (s != kUnannotated) return s;
        }
      }
    }
    return kUnannotated;
  };
  for (int i = 0; i < dims.x; ++i) {
    for (int j = 0; j < dims.y; ++j) {
      for (int k = 0; k < dims.z; ++k) {
        const auto idx = dims.index(i, j, k);
        if (!grid.occupied[idx]) continue;
        ClassId c = solid[idx];
        if (c == kUnannotated) c = neighbor_label(i, j, k, true);
        if (c == kUnannotated) c = neighbor_label(i, j, k, false);
        labels.labels[idx] = c;
      }
    }
  }
  return labels;
}

std::vector<ClassId> proxy_labels(const geo::View& view, const geo::LabelGrid& labels,
                                  const geo::WorldToGrid& w2g, int downsample) {
  if (downsample < 1) throw std::invalid_argument("proxy_labels: downsample must be >= 1");
  const int w = view.width(), h = view.height();
  const int fw = (w + downsample - 1) / downsample, fh = (h + downsample - 1) / downsample;
  std::vector<int> counts(static_cast<std::size_t>(fw) * fh * kNumClasses, 0);
  const auto& dims = labels.dims;
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const double d = view.depth_at(px, py);
      if (!(d > 0.0)) continue;
      geo::Vec3 origin, dir;
      geo::pixel_ray_in_grid(view, px + 0.5, py + 0.5, w2g.matrix(), origin, dir);
      // A quarter voxel past the surface lands inside the voxel that was hit.
      const geo::Vec3 p = origin + (d + 0.25 / dir.norm()) * dir;
      const int i = static_cast<int>(std::floor(p.x())), j = static_cast<int>(std::floor(p.y())),
                k = static_cast<int>(std::floor(p.z()));
      if (!dims.contains(i, j, k)) continue;
      const ClassId c = labels.at(i, j, k);
      if (c >= kNumClasses) continue;
      const auto cell = static_cast<std::size_t>(py / downsample) * fw + px / downsample;
      ++counts[cell * kNumClasses + c];
    }
  }
  std::vector<ClassId> out(static_cast<std::size_t>(fw) * fh, kUnannotated);
  for (std::size_t cell = 0; cell < out.size(); ++cell) {
    int best = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      const int n = counts[cell * kNumClasses + static_cast<std::size_t>(c)];
      if (n > best) {
        best = n;
        out[cell] = static_cast<ClassId>(c);
      }
    }
  }
  return out;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  SyntheticScene out;
  out.seed = seed;
  out.spec = spec;
  std::mt19937_64 rng(seed);
  const geo::GridDims dims{spec.size_x, spec.size_y, spec.size_z};
  const geo::WorldToGrid w2g(spec.voxel_size, geo::Vec3::Zero());
  auto& solid = out.solid;
  solid.assign(dims.count(), kUnannotated);

  for (int i = 0; i < dims.x; ++i) {
    for (int j = 0; j < dims.y; ++j) {
      const bool boundary = i == 0 || j == 0 || i == dims.x - 1 || j == dims.y - 1;
      solid[dims.index(i, j, 0)] = kFloor;
      if (!boundary) continue;
      for (int k = 1; k < dims.z; ++k) solid[dims.index(i, j, k)] = kWall;
    }
  }

  // Classes are dealt from shuffled rounds of the class list so counts stay
  // balanced across the pairs.
  std::vector<ClassId> deck;
  while (static_cast<int>(deck.size()) < spec.n_objects) {
    std::vector<ClassId> round(spec.object_classes.begin(), spec.object_classes.end());
    std::shuffle(round.begin(), round.end(), rng);
    deck.insert(deck.end(), round.begin(), round.end());
  }
  std::vector<Footprint> placed;
  for (int n = 0; n < spec.n_objects; ++n) {
    const ClassId c = deck[static_cast<std::size_t>(n)];
    const int w = footprint_of(spec, c);
    const int lo = 1 + spec.min_gap;
    const int hi_x = dims.x - 1 - spec.min_gap - w, hi_y = dims.y - 1 - spec.min_gap - w;
    if (hi_x < lo || hi_y < lo) throw std::invalid_argument("scene spec: room too small for objects");
    std::uniform_int_distribution<int> ux(lo, hi_x), uy(lo, hi_y);
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const Footprint f{ux(rng), uy(rng), w};
      ok = true;
      for (const auto& o : placed) {
        const int g = spec.min_gap;
        if (f.x0 < o.x0 + o.w + g && o.x0 < f.x0 + f.w + g && f.y0 < o.y0 + o.w + g &&
            o.y0 < f.y0 + f.w + g) {
          ok = false;
          break;
        }
      }
      if (ok) {
        placed.push_back(f);
        fill_object(spec, c, f, dims, solid);
      }
    }
    if (!ok) {
      throw std::invalid_argument("scene spec: could not place object " + std::to_string(n) +
                                  " of " + std::to_string(spec.n_objects));
    }
  }

  const double fx = 0.5 * spec.image_width / std::tan(0.5 * spec.fov_x_deg * std::numbers::pi / 180.0);
  const geo::Intrinsics intr{fx, fx, 0.5 * spec.image_width, 0.5 * spec.image_height,
                             spec.image_width, spec.image_height};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double cx = 0.5 * dims.x, cy = 0.5 * dims.y;
  const double radius = spec.orbit_fraction * 0.5 * std::min(dims.x, dims.y);
  for (int v = 0; v < spec.n_views; ++v) {
    const double angle = 2.0 * std::numbers::pi * (v + 0.5 * spec.jitter * unit(rng)) / spec.n_views;
    const double r = radius * (1.0 + 0.2 * spec.jitter * unit(rng));
    const double z = spec.size_z * spec.camera_height_fraction * (1.0 + 0.2 * spec.jitter * unit(rng));
    const geo::Vec3 eye(cx + r * std::cos(angle), cy + r * std::sin(angle), z);
    const geo::Vec3 target(cx + 0.2 * radius * spec.jitter * unit(rng),
                           cy + 0.2 * radius * spec.jitter * unit(rng),
                           spec.size_z * spec.target_height_fraction);
    geo::View view;
    view.id = v;
    view.intrinsics = intr;
    view.pose = geo::Pose::look_at(eye * spec.voxel_size, target * spec.voxel_size,
                                   geo::Vec3::UnitZ());
    render_view(solid, dims, w2g, view);
    geo::quantize_colors(view);
    out.scene.views.push_back(std::move(view));
  }

  out.scene.grid = geo::fuse_views_to_occupancy(out.scene.views, dims, w2g);
  out.scene.labels = label_occupied_voxels(out.scene.grid, solid);
  if (spec.unannotated_fraction > 0.0) {
    std::bernoulli_distribution drop(spec.unannotated_fraction);
    for (auto& l : out.scene.labels.labels) {
      if (l != kUnannotated && drop(rng)) l = kUnannotated;
    }
  }
  return out;
}

}  // namespace vv::data
