#include "vv/inference/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "vv/common/binary_io.hpp"
#include "vv/common/fs.hpp"
#include "vv/geometry/view_selection.hpp"

namespace vv::infer {

namespace {

data::ChunkSpec chunk_of(const nn::Model& model) {
  const auto& c = model.config();
  return {c.chunk_x, c.chunk_y, c.chunk_z};
}

data::Sample column_sample(const data::Scene& scene, const data::ChunkSpec& chunk, int ci, int cj) {
  data::Sample s;
  s.origin_x = ci - chunk.center_x();
  s.origin_y = cj - chunk.center_y();
  data::materialize(scene, chunk, s);
  return s;
}

bool chunk_fits(const geo::GridDims& scene, const data::ChunkSpec& chunk, int ci, int cj) {
  const int ox = ci - chunk.center_x(), oy = cj - chunk.center_y();
  return ox >= 0 && oy >= 0 && ox + chunk.x <= scene.x && oy + chunk.y <= scene.y;
}

// Columns visited by the sliding window, in (i, j) order.
std::vector<std::pair<int, int>> window_columns(const geo::GridDims& scene,
                                                const data::ChunkSpec& chunk, bool pad) {
  if (scene.x < chunk.x || scene.y < chunk.y) {
    throw std::invalid_argument("sliding window: scene is smaller than one chunk in x or y");
  }
  std::vector<std::pair<int, int>> cols;
  for (int i = 0; i < scene.x; ++i) {
    for (int j = 0; j < scene.y; ++j) {
      if (pad || chunk_fits(scene, chunk, i, j)) cols.emplace_back(i, j);
    }
  }
  return cols;
}

// Center-column voxel index inside a chunk.
std::size_t center_voxel(const data::ChunkSpec& chunk, int k) {
  return chunk.dims().index(chunk.center_x(), chunk.center_y(), k);
}

struct ColumnCoverage {
  std::size_t covered = 0;
  std::size_t annotated = 0;
};

ColumnCoverage coverage_in_column(const data::Scene& scene, const data::ChunkSpec& chunk, int ci,
                                  int cj, std::span<const geo::AssociationMap> maps) {
  ColumnCoverage out;
  const int zmax = std::min(chunk.z, scene.grid.dims.z);
  for (int k = 0; k < zmax; ++k) {
    if (!is_annotated(scene.labels.at(ci, cj, k))) continue;
    ++out.annotated;
    const auto v = center_voxel(chunk, k);
    for (const auto& m : maps) {
      if (m.flat(v) >= 0) {
        ++out.covered;
        break;
      }
    }
  }
  return out;
}

void run_parallel(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<int> select_column_views(const data::Scene& scene, const data::ChunkSpec& chunk,
                                     int ci, int cj, const ViewPolicy& policy) {
  const auto s = column_sample(scene, chunk, ci, cj);
  return geo::greedy_view_selection(scene.views, s.frame, policy.k_views, policy.downsample,
                                    policy.depth_threshold)
      .view_ids;
}

SlidingWindowResult sliding_window_predict(const data::Scene& scene, const nn::Model& model,
                                           const SlidingWindowOptions& options) {
  const auto chunk = chunk_of(model);
  const auto& sd = scene.grid.dims;
  const auto cols = window_columns(sd, chunk, options.pad_boundary);
  const auto& cfg = model.config();
  const bool needs_views = cfg.uses_rgb_features() || cfg.input_mode == nn::InputMode::GeoPlusVoxelColor;
  const int zmax = std::min(chunk.z, sd.z);

  SlidingWindowResult out;
  out.grid = PredictionGrid(sd);
  out.writes.assign(static_cast<std::size_t>(sd.x) * sd.y, 0);
  std::vector<ColumnCoverage> cover(cols.size());
  train::SceneCache cache;
  train::PipelineOptions popts;
  popts.depth_threshold = options.views.depth_threshold;
  popts.cached_features = true;

  run_parallel(cols.size(), options.threads, [&](std::size_t c) {
    const auto [ci, cj] = cols[c];
    auto s = column_sample(scene, chunk, ci, cj);
    const auto sel = geo::greedy_view_selection(scene.views, s.frame, options.views.k_views,
                                                options.views.downsample,
                                                options.views.depth_threshold);
    cover[c] = coverage_in_column(scene, chunk, ci, cj, sel.maps);
    if (needs_views) s.view_ids = sel.view_ids;
    const auto logits = train::forward_sample(nullptr, model, scene, 0, s, cache, popts).column_logits;
    const auto d = logits.data();
    const int nc = cfg.n_classes;
    for (int k = 0; k < zmax; ++k) {
      int best = 0;
      for (int q = 1; q < nc; ++q) {
        if (d[static_cast<std::size_t>(k) * nc + q] > d[static_cast<std::size_t>(k) * nc + best]) best = q;
      }
      out.grid.labels[sd.index(ci, cj, k)] = static_cast<ClassId>(best);
    }
    ++out.writes[static_cast<std::size_t>(ci) * sd.y + cj];
  });
  for (const auto& c : cover) {
    out.covered_annotated += c.covered;
    out.total_annotated += c.annotated;
  }
  return out;
}

double column_coverage(const data::Scene& scene, const data::ChunkSpec& chunk,
                       const ViewPolicy& policy) {
  const auto cols = window_columns(scene.grid.dims, chunk, true);
  ColumnCoverage total;
  for (const auto& [ci, cj] : cols) {
    const auto s = column_sample(scene, chunk, ci, cj);
    const auto sel = geo::greedy_view_selection(scene.views, s.frame, policy.k_views,
                                                policy.downsample, policy.depth_threshold);
    const auto c = coverage_in_column(scene, chunk, ci, cj, sel.maps);
    total.covered += c.covered;
    total.annotated += c.annotated;
  }
  if (total.annotated == 0) throw std::invalid_argument("column_coverage: no annotated voxels");
  return static_cast<double>(total.covered) / static_cast<double>(total.annotated);
}

std::vector<ClassId> project_labels_to_2d(const PredictionGrid& pred, const geo::View& view,
                                          const geo::WorldToGrid& w2g) {
  const int w = view.width(), h = view.height();
  std::vector<ClassId> out(static_cast<std::size_t>(w) * h, kUnpredicted);
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const double d = view.depth_at(px, py);
      if (!(d > 0.0)) continue;
      geo::Vec3 origin, dir;
      geo::pixel_ray_in_grid(view, px + 0.5, py + 0.5, w2g.matrix(), origin, dir);
      const geo::Vec3 p = origin + (d + 0.25 / dir.norm()) * dir;
      const int i = static_cast<int>(std::floor(p.x())), j = static_cast<int>(std::floor(p.y())),
                k = static_cast<int>(std::floor(p.z()));
      if (!pred.dims.contains(i, j, k)) continue;
      out[static_cast<std::size_t>(py) * w + px] = pred.at(i, j, k);
    }
  }
  return out;
}

std::vector<ClassId> predict_2d_labels(const nn::Model& model, const geo::View& view) {
  const auto logits = model.encode(nullptr, train::image_tensor(view)).proxy_logits;
  const auto& shape = logits.shape();
  const int nc = shape[0];
  const auto plane = static_cast<std::size_t>(shape[1]) * shape[2];
  const auto d = logits.data();
  std::vector<ClassId> out(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int c = 1; c < nc; ++c) {
      if (d[static_cast<std::size_t>(c) * plane + p] > d[static_cast<std::size_t>(best) * plane + p]) best = c;
    }
    out[p] = static_cast<ClassId>(best);
  }
  return out;
}

std::vector<ClassId> vote_labels(const geo::VoxelFrame& frame,
                                 std::span<const geo::View* const> views,
                                 std::span<const std::vector<ClassId>* const> label_images,
                                 int downsample, double depth_threshold) {
  if (views.size() != label_images.size()) {
    throw std::invalid_argument("vote_labels: one label image per view required");
  }
  const auto n = frame.dims.count();
  constexpr int kSlots = 256;
  std::vector<std::vector<std::uint16_t>> votes(n);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto map = geo::compute_association_map(frame, *views[v], downsample, depth_threshold);
    const auto& img = *label_images[v];
    if (img.size() != static_cast<std::size_t>(map.feature_width()) * map.feature_height()) {
      throw std::invalid_argument("vote_labels: label image size does not match the view");
    }
    for (std::size_t x = 0; x < n; ++x) {
      const auto p = map.flat(x);
      if (p < 0) continue;
      const ClassId c = img[static_cast<std::size_t>(p)];
      if (c == kUnpredicted) continue;
      if (votes[x].empty()) votes[x].assign(kSlots, 0);
      ++votes[x][c];
    }
  }
  std::vector<ClassId> out(n, kUnpredicted);
  for (std::size_t x = 0; x < n; ++x) {
    if (votes[x].empty()) continue;
    const auto best = std::max_element(votes[x].begin(), votes[x].end());  // first max: lowest id
    out[x] = static_cast<ClassId>(best - votes[x].begin());
  }
  return out;
}

PredictionGrid label_backprojection_baseline(const data::Scene& scene,
                                             std::span<const geo::View* const> views,
                                             std::span<const std::vector<ClassId>* const> label_images,
                                             int downsample, double depth_threshold) {
  if (views.empty()) throw std::invalid_argument("label backprojection: no views");
  PredictionGrid out(scene.grid.dims);
  out.labels = vote_labels(geo::VoxelFrame::whole(scene.grid.dims, scene.grid.world_to_grid),
                           views, label_images, downsample, depth_threshold);
  return out;
}

PredictionGrid column_label_backprojection(const data::Scene& scene, const data::ChunkSpec& chunk,
                                           const ViewPolicy& policy,
                                           std::span<const std::vector<ClassId>> label_images,
                                           int threads) {
  if (label_images.size() != scene.views.size()) {
    throw std::invalid_argument("column label backprojection: one label image per view required");
  }
  const auto& sd = scene.grid.dims;
  const auto cols = window_columns(sd, chunk, true);
  PredictionGrid out(sd);
  run_parallel(cols.size(), threads, [&](std::size_t c) {
    const auto [ci, cj] = cols[c];
    const auto ids = select_column_views(scene, chunk, ci, cj, policy);
    std::vector<const geo::View*> views;
    std::vector<const std::vector<ClassId>*> images;
    for (int id : ids) {
      for (std::size_t v = 0; v < scene.views.size(); ++v) {
        if (scene.views[v].id != id) continue;
        views.push_back(&scene.views[v]);
        images.push_back(&label_images[v]);
      }
    }
    const auto frame = geo::VoxelFrame::offset(geo::GridDims{1, 1, sd.z}, scene.grid.world_to_grid,
                                               ci, cj, 0);
    const auto votes = vote_labels(frame, views, images, policy.downsample, policy.depth_threshold);
    for (int k = 0; k < sd.z; ++k) out.labels[sd.index(ci, cj, k)] = votes[static_cast<std::size_t>(k)];
  });
  return out;
}

namespace {

void finish_report(MetricsReport& r) {
  const int n = r.n_classes;
  r.class_accuracy.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  r.class_total.assign(static_cast<std::size_t>(n), 0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < n; ++c) {
    std::size_t total = 0;
    for (auto v : r.confusion[static_cast<std::size_t>(c)]) total += v;
    r.class_total[static_cast<std::size_t>(c)] = total;
    if (total == 0) continue;
    const double acc = static_cast<double>(r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
                       static_cast<double>(total);
    r.class_accuracy[static_cast<std::size_t>(c)] = acc;
    sum += acc;
    ++present;
  }
  if (present == 0) throw std::invalid_argument("evaluate_segmentation: no annotated voxels");
  r.mean_accuracy = sum / present;
}

}  // namespace

MetricsReport evaluate_segmentation(const PredictionGrid& pred, const geo::LabelGrid& gt, int n_classes) {
  if (pred.dims != gt.dims) throw std::invalid_argument("evaluate_segmentation: dims differ");
  if (n_classes < 1) throw std::invalid_argument("evaluate_segmentation: n_classes < 1");
  MetricsReport r;
  r.n_classes = n_classes;
  r.confusion.assign(static_cast<std::size_t>(n_classes),
                     std::vector<std::size_t>(static_cast<std::size_t>(n_classes) + 1, 0));
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    const ClassId g = gt.labels[v];
    if (!is_annotated(g)) continue;
    if (g >= n_classes) throw std::invalid_argument("evaluate_segmentation: label out of range");
    const ClassId p = pred.labels[v];
    const auto col = p < n_classes ? p : static_cast<std::size_t>(n_classes);
    ++r.confusion[g][col];
  }
  finish_report(r);
  return r;
}

MetricsReport merge_reports(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("merge_reports: nothing to merge");
  MetricsReport r;
  r.n_classes = reports[0].n_classes;
  r.confusion = reports[0].confusion;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].n_classes != r.n_classes) throw std::invalid_argument("merge_reports: class counts differ");
    for (std::size_t g = 0; g < r.confusion.size(); ++g) {
      for (std::size_t p = 0; p < r.confusion[g].size(); ++p) r.confusion[g][p] += reports[i].confusion[g][p];
    }
  }
  finish_report(r);
  return r;
}

std::string report_csv(const MetricsReport& report, const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "metric,value\n";
  out << "mean_accuracy," << report.mean_accuracy << "\n";
  for (int c = 0; c < report.n_classes; ++c) {
    const auto name = c < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(c)]
                                                               : "class" + std::to_string(c);
    const double a = report.class_accuracy[static_cast<std::size_t>(c)];
    out << "accuracy_" << name << ",";
    if (std::isnan(a)) out << "nan"; else out << a;
    out << "\n";
  }
  for (const auto& [k, cov] : report.coverage) out << "coverage_" << k << "_views," << cov << "\n";
  return out.str();
}

namespace {
constexpr std::string_view kPredMagic = "VVPRED1\n";
}

void save_prediction(const std::filesystem::path& path, const PredictionGrid& pred) {
  if (pred.labels.size() != pred.dims.count()) throw std::invalid_argument("save_prediction: size mismatch");
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kPredMagic.data(), static_cast<std::streamsize>(kPredMagic.size()));
    binio::put_u64(out, static_cast<std::uint64_t>(pred.dims.x));
    binio::put_u64(out, static_cast<std::uint64_t>(pred.dims.y));
    binio::put_u64(out, static_cast<std::uint64_t>(pred.dims.z));
    out.write(reinterpret_cast<const char*>(pred.labels.data()), static_cast<std::streamsize>(pred.labels.size()));
  });
}

PredictionGrid load_prediction(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prediction file " + path.string());
  binio::expect_magic(in, kPredMagic);
  geo::GridDims d;
  const auto read_dim = [&] {
    const auto v = binio::get_u64(in);
    if (v == 0 || v > 1u << 16) throw binio::FormatError("prediction file: bad dimension");
    return static_cast<int>(v);
  };
  d.x = read_dim();
  d.y = read_dim();
  d.z = read_dim();
  PredictionGrid pred(d);
  if (!in.read(reinterpret_cast<char*>(pred.labels.data()), static_cast<std::streamsize>(pred.labels.size()))) {
    throw binio::FormatError("prediction file: truncated");
  }
  return pred;
}

std::array<std::uint8_t, 3> class_color(ClassId c) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette{{
      {174, 199, 232}, {152, 223, 138}, {31, 119, 180}, {255, 187, 120},
      {188, 189, 34},  {140, 86, 75},   {255, 152, 150}, {214, 39, 40},
      {197, 176, 213}, {148, 103, 189}, {196, 156, 148}, {23, 190, 207},
  }};
  if (c == kUnpredicted) return {128, 128, 128};
  return kPalette[c % kPalette.size()];
}

void export_ply(const std::filesystem::path& path, const geo::OccupancyGrid& grid,
                const PredictionGrid& pred) {
  if (grid.dims != pred.dims) throw std::invalid_argument("export_ply: dims differ");
  const auto frame = geo::VoxelFrame::whole(grid.dims, grid.world_to_grid);
  std::size_t n = 0;
  for (auto o : grid.occupied) n += o != 0;
  write_file_atomic(path, [&](std::ostream& out) {
    out << "ply\nformat ascii 1.0\nelement vertex " << n
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    char line[128];
    for (int i = 0; i < grid.dims.x; ++i) {
      for (int j = 0; j < grid.dims.y; ++j) {
        for (int k = 0; k < grid.dims.z; ++k) {
          if (!grid.is_occupied(i, j, k)) continue;
          const auto p = frame.voxel_center_world(i, j, k);
          const auto col = class_color(pred.at(i, j, k));
          std::snprintf(line, sizeof line, "%.5f %.5f %.5f %u %u %u\n", p.x(), p.y(), p.z(),
                        col[0], col[1], col[2]);
          out << line;
        }
      }
    }
  });
}

}  // namespace vv::infer
