#include "vv/training/pipeline.hpp"

#include <stdexcept>

#include "vv/backprojection/backprojection.hpp"

namespace vv::train {

Tensor image_tensor(const geo::View& view) {
  const int w = view.width(), h = view.height();
  Tensor t(Shape{3, h, w});
  auto d = t.data();
  const auto plane = static_cast<std::size_t>(w) * h;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) d[c * plane + p] = view.color[3 * p + c];
  }
  return t;
}

Tensor geometry_tensor(const geo::GridDims& dims, std::span<const std::uint8_t> occupied,
                       std::span<const std::uint8_t> known) {
  if (occupied.size() != dims.count() || known.size() != dims.count()) {
    throw ShapeError("geometry_tensor: channel sizes do not match the chunk");
  }
  Tensor t(Shape{2, dims.x, dims.y, dims.z});
  auto d = t.data();
  for (std::size_t i = 0; i < dims.count(); ++i) {
    d[i] = occupied[i];
    d[dims.count() + i] = known[i];
  }
  return t;
}

Tensor voxel_color(const geo::VoxelFrame& frame, std::span<const geo::View* const> views,
                   double depth_threshold) {
  const auto n = frame.dims.count();
  Tensor t(Shape{3, frame.dims.x, frame.dims.y, frame.dims.z});
  auto d = t.data();
  std::vector<int> hits(n, 0);
  for (const auto* view : views) {
    const auto map = geo::compute_association_map(frame, *view, 1, depth_threshold);
    for (std::size_t v = 0; v < n; ++v) {
      const auto p = map.flat(v);
      if (p < 0) continue;
      ++hits[v];
      for (std::size_t c = 0; c < 3; ++c) d[c * n + v] += view->color[3 * static_cast<std::size_t>(p) + c];
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (hits[v] == 0) continue;
    for (std::size_t c = 0; c < 3; ++c) d[c * n + v] /= hits[v];
  }
  return t;
}

const geo::View& find_view(const data::Scene& scene, int view_id) {
  if (view_id >= 0 && view_id < static_cast<int>(scene.views.size()) &&
      scene.views[static_cast<std::size_t>(view_id)].id == view_id) {
    return scene.views[static_cast<std::size_t>(view_id)];
  }
  for (const auto& v : scene.views) {
    if (v.id == view_id) return v;
  }
  throw std::out_of_range("scene has no view with id " + std::to_string(view_id));
}

const std::vector<ClassId>& SceneCache::proxy_labels(const data::Scene& scene, int scene_index,
                                                     int view_id, int downsample) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(scene_index, view_id);
  auto it = proxy_.find(key);
  if (it == proxy_.end()) {
    it = proxy_.emplace(key, data::proxy_labels(find_view(scene, view_id), scene.labels,
                                                scene.grid.world_to_grid, downsample))
             .first;
  }
  return it->second;
}

const Tensor& SceneCache::features(const nn::Model& model, const data::Scene& scene,
                                   int scene_index, int view_id) {
  const auto key = std::make_pair(scene_index, view_id);
  {
    std::lock_guard lock(mutex_);
    const auto it = features_.find(key);
    if (it != features_.end()) return it->second;
  }
  Tensor f = model.encode(nullptr, image_tensor(find_view(scene, view_id))).features;
  std::lock_guard lock(mutex_);
  return features_.emplace(key, std::move(f)).first->second;
}

SampleOutput forward_sample(Graph* graph, const nn::Model& model, const data::Scene& scene,
                            int scene_index, const data::Sample& sample, SceneCache& cache,
                            const PipelineOptions& options) {
  const auto& cfg = model.config();
  const auto& dims = sample.frame.dims;
  if (dims != geo::GridDims{cfg.chunk_x, cfg.chunk_y, cfg.chunk_z}) {
    throw ShapeError("forward_sample: sample chunk does not match the network's chunk extents");
  }
  SampleOutput out;
  nn::ChunkInput input;
  if (cfg.uses_geometry()) input.geometry = geometry_tensor(dims, sample.occupied, sample.known);

  std::vector<const geo::View*> views;
  for (int id : sample.view_ids) views.push_back(&find_view(scene, id));

  if (cfg.input_mode == nn::InputMode::GeoPlusVoxelColor) {
    input.voxel_color = voxel_color(sample.frame, views, options.depth_threshold);
  }
  if (cfg.uses_rgb_features()) {
    const int ds = 1 << cfg.encoder_widths.size();
    std::vector<Tensor> volumes;
    std::vector<std::vector<std::uint8_t>> masks;
    for (const auto* view : views) {
      if (view->width() != cfg.image_width || view->height() != cfg.image_height) {
        throw ShapeError("forward_sample: view image size does not match the network");
      }
      Tensor features;
      if (options.cached_features) {
        features = cache.features(model, scene, scene_index, view->id);
      } else {
        auto enc = model.encode(graph, image_tensor(*view));
        features = enc.features;
        out.proxy_logits.push_back(enc.proxy_logits);
        out.proxy_labels.push_back(cache.proxy_labels(scene, scene_index, view->id, ds));
      }
      const auto map = geo::compute_association_map(sample.frame, *view, ds, options.depth_threshold);
      volumes.push_back(bp::backproject(graph, features, map));
      masks.push_back(bp::contribution_mask(map));
    }
    if (volumes.empty()) {
      input.rgb_features = Tensor(Shape{cfg.n_feat_2d, dims.x, dims.y, dims.z});
    } else {
      input.rgb_features = bp::multiview_maxpool(graph, volumes, masks).features;
    }
  }
  out.column_logits = model.forward(graph, input, options.forward);
  return out;
}

}  // namespace vv::train
