#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vv/common/config.hpp"
#include "vv/common/labels.hpp"
#include "vv/tensor/checkpoint.hpp"
#include "vv/tensor/graph.hpp"
#include "vv/tensor/optim.hpp"

namespace vv::nn {

enum class FusionPoint { Begin, OneThird, TwoThirds, End };
enum class InputMode { Fused, GeoOnly, RgbFeatOnly, GeoPlusVoxelColor };
enum class InitScheme { FanIn, Kaiming };

std::string to_string(FusionPoint f);
std::string to_string(InputMode m);
FusionPoint parse_fusion_point(const std::string& s);
InputMode parse_input_mode(const std::string& s);

struct NetworkConfig {
  int n_classes = 8;
  int n_feat_2d = 128;
  FusionPoint fusion_point = FusionPoint::TwoThirds;
  InputMode input_mode = InputMode::Fused;
  int n_3d_convs = 9;
  std::vector<int> widths_3d{16, 32, 32, 64, 64, 64, 128, 128, 128};
  std::vector<int> xy_stride_convs{2, 4};  ///< 1-based conv indices with stride 2 in x and y
  std::vector<int> encoder_widths{32, 64, 128};  ///< one conv + 2x pool per entry
  int head_hidden = 256;
  double dropout_p = 0.1;
  int image_width = 328;
  int image_height = 256;
  int chunk_x = 31;
  int chunk_y = 31;
  int chunk_z = 62;
  InitScheme init = InitScheme::FanIn;

  /// Number of leading 3D convs run separately per stream.
  int fusion_index() const;
  bool uses_rgb_features() const;
  bool uses_geometry() const;
  int geometry_channels() const;
  int feature_width() const;
  int feature_height() const;
  void validate() const;

  /// Reads the `net.*` keys; unset keys keep their defaults.
  static NetworkConfig from_config(const KeyValueConfig& cfg);
  /// Every `net.*` key, so from_config(to_config()) reproduces this config.
  KeyValueConfig to_config() const;
};

struct EncoderOutput {
  Tensor features;      ///< [n_feat, H/8, W/8], after ReLU
  Tensor proxy_logits;  ///< [n_classes, H/8, W/8]
};

/// Per-chunk network input. Which fields must be set depends on the mode.
struct ChunkInput {
  Tensor geometry;      ///< [2, X, Y, Z] occupied, known
  Tensor rgb_features;  ///< [n_feat, X, Y, Z] pooled backprojected features
  Tensor voxel_color;   ///< [3, X, Y, Z] averaged pixel colors
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

/// Weights of the 2D encoder and the 3D network. Parameter tensors are shared
/// handles, so forward passes read them without copying.
class Model {
 public:
  Model(NetworkConfig config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Tensor& weight(const std::string& name) const;
  bool has_weight(const std::string& name) const { return index_.count(name) != 0; }
  static bool is_encoder_parameter(const std::string& name);

  /// image [3, H, W] with values in [0, 1].
  EncoderOutput encode(Graph* graph, const Tensor& image) const;

  /// Returns [Z, n_classes] logits for the chunk's center column.
  Tensor forward(Graph* graph, const ChunkInput& input, const ForwardOptions& opts = {}) const;

  std::vector<NamedTensor> state() const;
  /// Copies values by name; every parameter must be present with its shape.
  void load_state(std::span<const NamedTensor> tensors);

 private:
  void add_parameter(const std::string& name, Shape shape, std::int64_t fan_in);
  Tensor conv_layer(Graph* graph, const Tensor& x, const std::string& name, int spatial_rank,
                    int stride_xy) const;

  NetworkConfig config_;
  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct LossTerms {
  std::optional<Tensor> total;  ///< nullopt is the empty-loss signal
  Real column = 0.0;            ///< value of the 3D term, 0 when masked out
  Real proxy = 0.0;             ///< mean proxy loss before weighting
};

/// Column cross entropy plus proxy_weight times the mean proxy loss over the
/// views whose proxy labels are not fully masked.
LossTerms total_loss(Graph* graph, const Tensor& column_logits,
                                 std::span<const ClassId> column_labels,
                                 std::span<const Tensor> proxy_logits,
                                 std::span<const std::vector<ClassId>> proxy_labels,
                                 std::span<const Real> class_weights, Real proxy_weight);

}  // namespace vv::nn
