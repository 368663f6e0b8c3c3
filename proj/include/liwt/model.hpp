#pragma once

// The local implicit wavelet transformer: an EDSR-style encoder, the wavelet
// enhancement residual module (WERM), wavelet mutual projected fusion (WMPF),
// wavelet-aware implicit attention (WIA) over the 3x3 local grid, and the MLP
// decoder that predicts an RGB residual on top of bilinear upsampling.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "liwt/coords.hpp"
#include "liwt/nn.hpp"
#include "liwt/tensor.hpp"

namespace liwt {

struct ModelConfig {
  int features = 32;        // C
  int encoder_blocks = 4;   // residual blocks in the encoder
  int werb_blocks = 4;      // n
  int heads = 8;            // attention heads
  int pe_levels = 10;       // L, positional encoding levels
  int decoder_hidden = 256;
  int decoder_layers = 5;
  int wmpf_reduction = 4;

  // Throws ConfigError naming the first inconsistent field.
  void validate() const;
  int decoder_input() const { return kGridPoints * features + 2; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig full_model_config();

template <typename T>
struct EncoderParams {
  Conv2dParams<T> head;
  std::vector<std::pair<Conv2dParams<T>, Conv2dParams<T>>> blocks;
  Conv2dParams<T> tail;
};

template <typename T>
struct WhferbParams {
  Conv2dParams<T> local;  // WLFE 3x3
  Conv2dParams<T> high;   // WHFE 3x3 after max-pooling
  Conv2dParams<T> fuse;   // 1x1, 2C -> C
};

template <typename T>
struct WerbParams {
  WhferbParams<T> whferb;
  Conv2dParams<T> refine1;
  Conv2dParams<T> refine2;
  Conv2dParams<T> fuse;  // 3x3, 2C -> C
};

template <typename T>
struct WermParams {
  Conv2dParams<T> pre_low;   // 3x3, C -> C
  Conv2dParams<T> pre_high;  // 3x3, 3C -> C
  std::vector<WerbParams<T>> blocks;
  Conv2dParams<T> fuse;  // 3x3, 2C -> C
};

template <typename T>
struct WmpfParams {
  LinearParams<T> squeeze;  // 2C -> 2C/r
  LinearParams<T> excite;   // 2C/r -> 2C
  Conv2dParams<T> out;      // 1x1, 2C -> C
};

template <typename T>
struct WiaParams {
  Conv2dParams<T> query;  // on the upsampled prior
  Conv2dParams<T> key;    // on Z
  Conv2dParams<T> value;  // on Z
  LinearParams<T> value_fuse;  // 2C -> C
  LinearParams<T> bias_head;   // 4L -> heads
};

template <typename T>
struct DecoderParams {
  std::vector<LinearParams<T>> layers;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
class LiwtModel {
 public:
  LiwtModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  // Every trainable tensor with a stable dotted name, in a fixed order.
  std::vector<NamedTensor<T>> parameters() const;
  void zero_grad();
  // Sets the last decoder layer to zero so the output equals the bilinear base.
  void zero_decoder_output();

  EncoderParams<T> encoder;
  WermParams<T> werm;
  WmpfParams<T> wmpf;
  WiaParams<T> wia;
  DecoderParams<T> decoder;

 private:
  ModelConfig config_;
};

template <typename T>
Tensor<T> encode(const Tensor<T>& img_lr, const EncoderParams<T>& p);

template <typename T>
Tensor<T> whferb(const Tensor<T>& f_low, const WhferbParams<T>& p);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> werb(const Tensor<T>& f_low, const Tensor<T>& f_high, const WerbParams<T>& p);

template <typename T>
Tensor<T> werm(const Tensor<T>& f_low, const Tensor<T>& f_high, const WermParams<T>& p);

template <typename T>
Tensor<T> wmpf(const Tensor<T>& f_w_up, const Tensor<T>& z, const WmpfParams<T>& p);

// Attention coefficients of the WMPF gate, exposed for inspection.
template <typename T>
Tensor<T> wmpf_gate(const Tensor<T>& f_w_up, const Tensor<T>& z, const WmpfParams<T>& p);

template <typename T>
struct WiaOutput {
  Tensor<T> embeddings;  // [Q*9 x C], rows grouped per query
  Tensor<T> attention;   // [Q x 9 x heads]
};

// Cross-attention over each query's local grid. The query vector is taken at
// the grid center; keys, values and fused features at the 9 grid points.
template <typename T>
WiaOutput<T> wia(std::span<const LocalGrid> grids, const Tensor<T>& q_map, const Tensor<T>& k_map,
                 const Tensor<T>& v_map, const Tensor<T>& f_map, const WiaParams<T>& p, int heads, int pe_levels);

template <typename T>
struct FeatureMaps {
  Tensor<T> z;         // encoder output, H x W x C
  Tensor<T> prior;     // F_W, H/2 x W/2 x C
  Tensor<T> prior_up;  // bicubic F_W, H x W x C
  Tensor<T> fused;     // F_WMPF
  Tensor<T> q_map, k_map, v_map;
};

template <typename T>
FeatureMaps<T> compute_features(const LiwtModel<T>& model, const Tensor<T>& img_lr);

template <typename T>
struct QueryOutput {
  Tensor<T> rgb;        // [Q x 3], residual plus bilinear base, unclamped
  Tensor<T> residual;   // [Q x 3]
  Tensor<T> attention;  // [Q x 9 x heads]
};

// `cells` holds one entry shared by all queries or one per query.
template <typename T>
QueryOutput<T> query_features(const LiwtModel<T>& model, const FeatureMaps<T>& features, const Tensor<T>& img_lr,
                              std::span<const Point2> queries, std::span<const Cell> cells);

template <typename T>
Tensor<T> forward(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::span<const Point2> queries,
                  std::span<const Cell> cells);

// RGB at arbitrary points of img_lr's coordinate space, [N x 3], without
// graph recording. Queries are evaluated in chunks.
template <typename T>
Tensor<T> predict_points(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::span<const Point2> points,
                         const Cell& cell, std::int64_t chunk = 4096);

// Full-image inference without graph recording: H x W x 3 -> out_h x out_w x 3
// (unclamped). Queries are evaluated in chunks.
template <typename T>
Tensor<T> super_resolve(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::int64_t out_h, std::int64_t out_w,
                        std::int64_t chunk = 4096);

// ---- checkpoints ---------------------------------------------------------

// Tagged tensors plus free-form key/value metadata.
template <typename T>
struct Checkpoint {
  ModelConfig config;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor<T>> tensors;
};

template <typename T>
void write_checkpoint(std::ostream& out, const Checkpoint<T>& ckpt);
template <typename T>
Checkpoint<T> read_checkpoint(std::istream& in);

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt);
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

template <typename T>
Checkpoint<T> model_checkpoint(const LiwtModel<T>& model);

// Copies parameters from a checkpoint after checking every name and shape.
template <typename T>
void restore_parameters(LiwtModel<T>& model, const Checkpoint<T>& ckpt);

// Config lines "key = value" as used in checkpoint manifests.
std::vector<std::pair<std::string, std::string>> model_config_fields(const ModelConfig& config);
void set_model_config_field(ModelConfig& config, const std::string& key, const std::string& value);

}  // namespace liwt
