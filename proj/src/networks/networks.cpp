#include "vv/networks/networks.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vv/tensor/ops.hpp"

namespace vv::nn {
namespace {

const char* kFusionNames[] = {"begin", "one_third", "two_thirds", "end"};
const char* kModeNames[] = {"fused", "geo_only", "rgb_feat_only", "geo_voxel_color"};

std::string conv_name(const char* stream, int index) {
  return std::string(stream) + ".conv" + std::to_string(index);
}

}  // namespace

std::string to_string(FusionPoint f) { return kFusionNames[static_cast<int>(f)]; }
std::string to_string(InputMode m) { return kModeNames[static_cast<int>(m)]; }

FusionPoint parse_fusion_point(const std::string& s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kFusionNames[i]) return static_cast<FusionPoint>(i);
  }
  if (s == "1/3") return FusionPoint::OneThird;
  if (s == "2/3") return FusionPoint::TwoThirds;
  throw ConfigError("unknown fusion point '" + s + "' (begin, one_third, two_thirds, end)");
}

InputMode parse_input_mode(const std::string& s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kModeNames[i]) return static_cast<InputMode>(i);
  }
  throw ConfigError("unknown input mode '" + s +
                    "' (fused, geo_only, rgb_feat_only, geo_voxel_color)");
}

int NetworkConfig::fusion_index() const {
  static constexpr double kFraction[] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  return static_cast<int>(std::lround(kFraction[static_cast<int>(fusion_point)] * n_3d_convs));
}

bool NetworkConfig::uses_rgb_features() const {
  return input_mode == InputMode::Fused || input_mode == InputMode::RgbFeatOnly;
}

bool NetworkConfig::uses_geometry() const { return input_mode != InputMode::RgbFeatOnly; }

int NetworkConfig::geometry_channels() const {
  return input_mode == InputMode::GeoPlusVoxelColor ? 5 : 2;
}

int NetworkConfig::feature_width() const { return image_width >> encoder_widths.size(); }
int NetworkConfig::feature_height() const { return image_height >> encoder_widths.size(); }

void NetworkConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("network config: " + m); };
  if (n_classes < 2) fail("n_classes must be at least 2");
  if (n_feat_2d < 1) fail("n_feat_2d must be positive");
  if (n_3d_convs < 1) fail("n_3d_convs must be positive");
  if (static_cast<int>(widths_3d.size()) != n_3d_convs) fail("widths_3d needs n_3d_convs entries");
  for (int w : widths_3d) {
    if (w < 1) fail("widths_3d entries must be positive");
  }
  for (int s : xy_stride_convs) {
    if (s < 1 || s > n_3d_convs) fail("xy_stride_convs entry out of range");
  }
  if (encoder_widths.empty()) fail("encoder_widths must not be empty");
  for (int w : encoder_widths) {
    if (w < 1) fail("encoder_widths entries must be positive");
  }
  const int factor = 1 << encoder_widths.size();
  if (image_width % factor != 0 || image_height % factor != 0) {
    fail("image extents must be divisible by " + std::to_string(factor));
  }
  if (head_hidden < 1) fail("head_hidden must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (chunk_x < 1 || chunk_y < 1 || chunk_z < 1) fail("chunk extents must be positive");
}

NetworkConfig NetworkConfig::from_config(const KeyValueConfig& cfg) {
  NetworkConfig c;
  c.n_classes = static_cast<int>(cfg.get_int("net.n_classes", c.n_classes));
  c.n_feat_2d = static_cast<int>(cfg.get_int("net.n_feat_2d", c.n_feat_2d));
  c.fusion_point = parse_fusion_point(cfg.get_string("net.fusion_point", to_string(c.fusion_point)));
  c.input_mode = parse_input_mode(cfg.get_string("net.input_mode", to_string(c.input_mode)));
  c.n_3d_convs = static_cast<int>(cfg.get_int("net.n_3d_convs", c.n_3d_convs));
  c.widths_3d = cfg.get_int_list("net.widths_3d", c.widths_3d);
  c.xy_stride_convs = cfg.get_int_list("net.xy_stride_convs", c.xy_stride_convs);
  c.encoder_widths = cfg.get_int_list("net.encoder_widths", c.encoder_widths);
  c.head_hidden = static_cast<int>(cfg.get_int("net.head_hidden", c.head_hidden));
  c.dropout_p = cfg.get_double("net.dropout_p", c.dropout_p);
  c.image_width = static_cast<int>(cfg.get_int("net.image_width", c.image_width));
  c.image_height = static_cast<int>(cfg.get_int("net.image_height", c.image_height));
  c.chunk_x = static_cast<int>(cfg.get_int("net.chunk_x", c.chunk_x));
  c.chunk_y = static_cast<int>(cfg.get_int("net.chunk_y", c.chunk_y));
  c.chunk_z = static_cast<int>(cfg.get_int("net.chunk_z", c.chunk_z));
  const auto init = cfg.get_string("net.init", "fan_in");
  if (init == "fan_in") {
    c.init = InitScheme::FanIn;
  } else if (init == "kaiming") {
    c.init = InitScheme::Kaiming;
  } else {
    throw ConfigError("unknown init scheme '" + init + "' (fan_in, kaiming)");
  }
  c.validate();
  return c;
}

KeyValueConfig NetworkConfig::to_config() const {
  KeyValueConfig cfg;
  auto list = [](const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
  };
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", dropout_p);
  cfg.set("net.n_classes", std::to_string(n_classes));
  cfg.set("net.n_feat_2d", std::to_string(n_feat_2d));
  cfg.set("net.fusion_point", to_string(fusion_point));
  cfg.set("net.input_mode", to_string(input_mode));
  cfg.set("net.n_3d_convs", std::to_string(n_3d_convs));
  cfg.set("net.widths_3d", list(widths_3d));
  cfg.set("net.xy_stride_convs", list(xy_stride_convs));
  cfg.set("net.encoder_widths", list(encoder_widths));
  cfg.set("net.head_hidden", std::to_string(head_hidden));
  cfg.set("net.dropout_p", buf);
  cfg.set("net.image_width", std::to_string(image_width));
  cfg.set("net.image_height", std::to_string(image_height));
  cfg.set("net.chunk_x", std::to_string(chunk_x));
  cfg.set("net.chunk_y", std::to_string(chunk_y));
  cfg.set("net.chunk_z", std::to_string(chunk_z));
  cfg.set("net.init", init == InitScheme::Kaiming ? "kaiming" : "fan_in");
  return cfg;
}

Model::Model(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.validate();
  const auto& c = config_;
  if (c.uses_rgb_features()) {
    int in = 3;
    for (std::size_t s = 0; s < c.encoder_widths.size(); ++s) {
      const int out = c.encoder_widths[s];
      add_parameter("enc.conv" + std::to_string(s + 1), Shape{out, in, 3, 3}, in * 9);
      in = out;
    }
    add_parameter("enc.feat", Shape{c.n_feat_2d, in, 3, 3}, in * 9);
    add_parameter("enc.proxy", Shape{c.n_classes, c.n_feat_2d, 1, 1}, c.n_feat_2d);
  }

  const int fuse = c.fusion_index();
  int geo_in = c.geometry_channels(), feat_in = c.n_feat_2d;
  for (int i = 1; i <= fuse; ++i) {
    const int out = c.widths_3d[static_cast<std::size_t>(i - 1)];
    if (c.uses_geometry()) {
      add_parameter(conv_name("geo", i), Shape{out, geo_in, 3, 3, 3}, geo_in * 27);
      geo_in = out;
    }
    if (c.uses_rgb_features()) {
      add_parameter(conv_name("feat", i), Shape{out, feat_in, 3, 3, 3}, feat_in * 27);
      feat_in = out;
    }
  }
  int in = (c.uses_geometry() ? geo_in : 0) + (c.uses_rgb_features() ? feat_in : 0);
  int x = c.chunk_x, y = c.chunk_y;
  for (int i = 1; i <= c.n_3d_convs; ++i) {
    const int out = c.widths_3d[static_cast<std::size_t>(i - 1)];
    if (i > fuse) {
      add_parameter(conv_name("joint", i), Shape{out, in, 3, 3, 3}, in * 27);
      in = out;
    }
    for (int s : c.xy_stride_convs) {
      if (s == i) {
        x = (x - 1) / 2 + 1;
        y = (y - 1) / 2 + 1;
      }
    }
  }
  const int row = in * x * y;
  add_parameter("head.fc1", Shape{c.head_hidden, row}, row);
  add_parameter("head.fc2", Shape{c.n_classes, c.head_hidden}, c.head_hidden);
}

void Model::add_parameter(const std::string& name, Shape shape, std::int64_t fan_in) {
  // Each layer draws from its own stream keyed by its position.
  const auto layer = static_cast<std::uint64_t>(params_.size() / 2);
  const std::uint64_t base = seed_ * 0x9E3779B97F4A7C15ULL + (layer + 1) * 0xBF58476D1CE4E5B9ULL;
  Tensor w = uniform_fan_in(shape, fan_in, base);
  if (config_.init == InitScheme::Kaiming) {
    for (auto& v : w.data()) v *= std::sqrt(6.0);
  }
  Tensor b = uniform_fan_in(Shape{shape[0]}, fan_in, base + 1);
  index_[name + ".weight"] = params_.size();
  params_.emplace_back(name + ".weight", std::move(w));
  index_[name + ".bias"] = params_.size();
  params_.emplace_back(name + ".bias", std::move(b));
}

const Tensor& Model::weight(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second].value;
}

bool Model::is_encoder_parameter(const std::string& name) { return name.rfind("enc.", 0) == 0; }

Tensor Model::conv_layer(Graph* graph, const Tensor& x, const std::string& name, int spatial_rank,
                         int stride_xy) const {
  const Tensor& w = weight(name + ".weight");
  const int pad = static_cast<int>(w.dim(2) / 2);
  ops::ConvSpec spec{spatial_rank, {}, std::vector<int>(static_cast<std::size_t>(spatial_rank), pad)};
  if (stride_xy != 1) spec.stride = {stride_xy, stride_xy, 1};
  return ops::conv(graph, x, w, weight(name + ".bias"), spec);
}

EncoderOutput Model::encode(Graph* graph, const Tensor& image) const {
  const auto& c = config_;
  if (!c.uses_rgb_features()) {
    throw std::logic_error("encode: input mode " + to_string(c.input_mode) + " has no 2D encoder");
  }
  if (image.shape() != Shape{3, c.image_height, c.image_width}) {
    throw ShapeError("encode: expected image [3, " + std::to_string(c.image_height) + ", " +
                     std::to_string(c.image_width) + "], got " + shape_string(image.shape()));
  }
  Tensor x = image;
  for (std::size_t s = 0; s < c.encoder_widths.size(); ++s) {
    x = ops::relu(graph, conv_layer(graph, x, "enc.conv" + std::to_string(s + 1), 2, 1));
    x = ops::maxpool(graph, x, 2, {2, 2});
  }
  EncoderOutput out;
  out.features = ops::relu(graph, conv_layer(graph, x, "enc.feat", 2, 1));
  out.proxy_logits = conv_layer(graph, out.features, "enc.proxy", 2, 1);
  return out;
}

Tensor Model::forward(Graph* graph, const ChunkInput& input, const ForwardOptions& opts) const {
  const auto& c = config_;
  const Shape grid{c.chunk_x, c.chunk_y, c.chunk_z};
  auto check = [&](const Tensor& t, int channels, const char* what) {
    if (!t.defined()) {
      throw std::invalid_argument(std::string("forward: mode ") + to_string(c.input_mode) +
                                  " requires " + what);
    }
    const Shape want{channels, grid[0], grid[1], grid[2]};
    if (t.shape() != want) {
      throw ShapeError(std::string("forward: ") + what + " must be " + shape_string(want) +
                       ", got " + shape_string(t.shape()));
    }
  };
  auto forbid = [&](const Tensor& t, const char* what) {
    if (t.defined()) {
      throw std::invalid_argument(std::string("forward: mode ") + to_string(c.input_mode) +
                                  " does not take " + what);
    }
  };

  Tensor geo, feat;
  if (c.uses_geometry()) {
    check(input.geometry, 2, "geometry");
    geo = input.geometry;
    if (c.input_mode == InputMode::GeoPlusVoxelColor) {
      check(input.voxel_color, 3, "voxel color");
      geo = ops::concat_channels(graph, geo, input.voxel_color);
    } else {
      forbid(input.voxel_color, "voxel color");
    }
  } else {
    forbid(input.voxel_color, "voxel color");
  }
  if (c.uses_rgb_features()) {
    check(input.rgb_features, c.n_feat_2d, "rgb features");
    feat = input.rgb_features;
  } else {
    forbid(input.rgb_features, "rgb features");
  }

  auto stride_of = [&](int i) {
    for (int s : c.xy_stride_convs) {
      if (s == i) return 2;
    }
    return 1;
  };
  const int fuse = c.fusion_index();
  for (int i = 1; i <= fuse; ++i) {
    if (geo.defined()) geo = ops::relu(graph, conv_layer(graph, geo, conv_name("geo", i), 3, stride_of(i)));
    if (feat.defined()) {
      feat = ops::relu(graph, conv_layer(graph, feat, conv_name("feat", i), 3, stride_of(i)));
    }
  }
  Tensor x;
  if (geo.defined() && feat.defined()) {
    x = ops::concat_channels(graph, geo, feat);
  } else {
    x = geo.defined() ? geo : feat;
  }
  for (int i = fuse + 1; i <= c.n_3d_convs; ++i) {
    x = ops::relu(graph, conv_layer(graph, x, conv_name("joint", i), 3, stride_of(i)));
  }
  x = ops::dropout(graph, x, ops::DropoutSpec{c.dropout_p, opts.training, opts.dropout_seed});
  x = ops::height_rows(graph, x);
  x = ops::relu(graph, ops::linear(graph, x, weight("head.fc1.weight"), weight("head.fc1.bias")));
  return ops::linear(graph, x, weight("head.fc2.weight"), weight("head.fc2.bias"));
}

std::vector<NamedTensor> Model::state() const {
  std::vector<NamedTensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back({p.name, p.value});
  return out;
}

void Model::load_state(std::span<const NamedTensor> tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  for (auto& p : params_) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint lacks parameter " + p.name);
    if (it->second->shape() != p.value.shape()) {
      throw ShapeError("checkpoint parameter " + p.name + " has shape " +
                       shape_string(it->second->shape()) + ", model expects " +
                       shape_string(p.value.shape()));
    }
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), p.value.data().begin());
  }
}

LossTerms total_loss(Graph* graph, const Tensor& column_logits,
                     std::span<const ClassId> column_labels, std::span<const Tensor> proxy_logits,
                     std::span<const std::vector<ClassId>> proxy_labels,
                     std::span<const Real> class_weights, Real proxy_weight) {
  if (!(proxy_weight >= 0.0)) throw std::invalid_argument("total_loss: proxy_weight must be >= 0");
  if (proxy_logits.size() != proxy_labels.size()) {
    throw std::invalid_argument("total_loss: one proxy label image per view required");
  }
  LossTerms terms;
  auto column = ops::masked_weighted_cross_entropy(graph, column_logits, column_labels, class_weights);
  if (column) terms.column = column->item();

  std::optional<Tensor> proxy_sum;
  int proxy_views = 0;
  if (proxy_weight > 0.0) {
    for (std::size_t v = 0; v < proxy_logits.size(); ++v) {
      auto rows = ops::channels_last_rows(graph, proxy_logits[v]);
      auto term = ops::masked_weighted_cross_entropy(graph, rows, proxy_labels[v], class_weights);
      if (!term) continue;
      proxy_sum = proxy_sum ? ops::add(graph, *proxy_sum, *term) : *term;
      ++proxy_views;
    }
  }
  std::optional<Tensor> proxy;
  if (proxy_sum) {
    proxy = ops::scale(graph, *proxy_sum, 1.0 / proxy_views);
    terms.proxy = proxy->item();
    proxy = ops::scale(graph, *proxy, proxy_weight);
  }
  if (column && proxy) {
    terms.total = ops::add(graph, *column, *proxy);
  } else if (column) {
    terms.total = column;
  } else {
    terms.total = proxy;
  }
  return terms;
}

}  // namespace vv::nn
