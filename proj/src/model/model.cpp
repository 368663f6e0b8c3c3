#include "liwt/model.hpp"

#include <algorithm>
#include <cmath>

#include "liwt/ops.hpp"
#include "liwt/wavelet.hpp"

namespace liwt {

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (features < 1) fail("features", "must be positive");
  if (encoder_blocks < 0) fail("encoder_blocks", "must be non-negative");
  if (werb_blocks < 1) fail("werb_blocks", "must be at least 1");
  if (heads < 1) fail("heads", "must be positive");
  if (features % heads != 0) {
    fail("heads", "feature width " + std::to_string(features) + " is not divisible by " + std::to_string(heads));
  }
  if (pe_levels < 1 || pe_levels > 30) fail("pe_levels", "must lie in [1, 30]");
  if (decoder_hidden < 1) fail("decoder_hidden", "must be positive");
  if (decoder_layers < 2) fail("decoder_layers", "must be at least 2");
  if (wmpf_reduction < 1 || (2 * features) % wmpf_reduction != 0) {
    fail("wmpf_reduction", "must divide 2 * features = " + std::to_string(2 * features));
  }
}

ModelConfig full_model_config() {
  ModelConfig c;
  c.features = 64;
  c.encoder_blocks = 16;
  c.werb_blocks = 4;
  c.heads = 8;
  c.pe_levels = 10;
  return c;
}

template <typename T>
LiwtModel<T>::LiwtModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::int64_t c = config_.features;

  encoder.head = make_conv2d<T>(3, 3, c, rng);
  for (int b = 0; b < config_.encoder_blocks; ++b) {
    auto first = make_conv2d<T>(3, c, c, rng);
    auto second = make_conv2d<T>(3, c, c, rng);
    encoder.blocks.emplace_back(std::move(first), std::move(second));
  }
  encoder.tail = make_conv2d<T>(3, c, c, rng);

  werm.pre_low = make_conv2d<T>(3, c, c, rng);
  werm.pre_high = make_conv2d<T>(3, 3 * c, c, rng);
  for (int b = 0; b < config_.werb_blocks; ++b) {
    WerbParams<T> blk;
    blk.whferb.local = make_conv2d<T>(3, c, c, rng);
    blk.whferb.high = make_conv2d<T>(3, c, c, rng);
    blk.whferb.fuse = make_conv2d<T>(1, 2 * c, c, rng);
    blk.refine1 = make_conv2d<T>(3, c, c, rng);
    blk.refine2 = make_conv2d<T>(3, c, c, rng);
    blk.fuse = make_conv2d<T>(3, 2 * c, c, rng);
    werm.blocks.push_back(std::move(blk));
  }
  werm.fuse = make_conv2d<T>(3, 2 * c, c, rng);

  const std::int64_t squeezed = 2 * c / config_.wmpf_reduction;
  wmpf.squeeze = make_linear<T>(2 * c, squeezed, rng);
  wmpf.excite = make_linear<T>(squeezed, 2 * c, rng);
  wmpf.out = make_conv2d<T>(1, 2 * c, c, rng);

  wia.query = make_conv2d<T>(3, c, c, rng);
  wia.key = make_conv2d<T>(3, c, c, rng);
  wia.value = make_conv2d<T>(3, c, c, rng);
  wia.value_fuse = make_linear<T>(2 * c, c, rng);
  wia.bias_head = make_linear<T>(4 * config_.pe_levels, config_.heads, rng);

  std::int64_t din = config_.decoder_input();
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const bool last = l + 1 == config_.decoder_layers;
    const std::int64_t dout = last ? 3 : config_.decoder_hidden;
    decoder.layers.push_back(make_linear<T>(din, dout, rng, last ? T(0.1) : T(1)));
    din = dout;
  }
}

template <typename T>
std::vector<NamedTensor<T>> LiwtModel<T>::parameters() const {
  std::vector<NamedTensor<T>> out;
  auto conv = [&out](const std::string& name, const Conv2dParams<T>& p) {
    out.push_back({name + ".weight", p.weight});
    out.push_back({name + ".bias", p.bias});
  };
  auto lin = [&out](const std::string& name, const LinearParams<T>& p) {
    out.push_back({name + ".weight", p.weight});
    out.push_back({name + ".bias", p.bias});
  };
  conv("encoder.head", encoder.head);
  for (std::size_t b = 0; b < encoder.blocks.size(); ++b) {
    conv("encoder.blocks." + std::to_string(b) + ".conv1", encoder.blocks[b].first);
    conv("encoder.blocks." + std::to_string(b) + ".conv2", encoder.blocks[b].second);
  }
  conv("encoder.tail", encoder.tail);
  conv("werm.pre_low", werm.pre_low);
  conv("werm.pre_high", werm.pre_high);
  for (std::size_t b = 0; b < werm.blocks.size(); ++b) {
    const std::string prefix = "werm.blocks." + std::to_string(b);
    conv(prefix + ".whferb.local", werm.blocks[b].whferb.local);
    conv(prefix + ".whferb.high", werm.blocks[b].whferb.high);
    conv(prefix + ".whferb.fuse", werm.blocks[b].whferb.fuse);
    conv(prefix + ".refine1", werm.blocks[b].refine1);
    conv(prefix + ".refine2", werm.blocks[b].refine2);
    conv(prefix + ".fuse", werm.blocks[b].fuse);
  }
  conv("werm.fuse", werm.fuse);
  lin("wmpf.squeeze", wmpf.squeeze);
  lin("wmpf.excite", wmpf.excite);
  conv("wmpf.out", wmpf.out);
  conv("wia.query", wia.query);
  conv("wia.key", wia.key);
  conv("wia.value", wia.value);
  lin("wia.value_fuse", wia.value_fuse);
  lin("wia.bias_head", wia.bias_head);
  for (std::size_t l = 0; l < decoder.layers.size(); ++l) lin("decoder." + std::to_string(l), decoder.layers[l]);
  return out;
}

template <typename T>
void LiwtModel<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename T>
void LiwtModel<T>::zero_decoder_output() {
  auto& last = decoder.layers.back();
  std::ranges::fill(last.weight.mutable_data(), T(0));
  std::ranges::fill(last.bias.mutable_data(), T(0));
}

template <typename T>
Tensor<T> encode(const Tensor<T>& img_lr, const EncoderParams<T>& p) {
  if (img_lr.rank() != 3 || img_lr.dim(2) != 3) {
    throw InvalidArgument("encode: expected H x W x 3 image, got " + shape_str(img_lr.shape()));
  }
  const auto head = conv2d(img_lr, p.head);
  auto x = head;
  for (const auto& [first, second] : p.blocks) x = add(x, conv2d(relu(conv2d(x, first)), second));
  return add(conv2d(x, p.tail), head);
}

template <typename T>
Tensor<T> whferb(const Tensor<T>& f_low, const WhferbParams<T>& p) {
  const auto local = relu(conv2d(f_low, p.local));
  const auto high = relu(conv2d(maxpool2d(f_low), p.high));
  return conv2d(concat(std::vector<Tensor<T>>{local, high}, 2), p.fuse);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> werb(const Tensor<T>& f_low, const Tensor<T>& f_high, const WerbParams<T>& p) {
  if (f_low.shape() != f_high.shape()) {
    throw InvalidArgument("werb: branch shapes differ " + shape_str(f_low.shape()) + " vs " + shape_str(f_high.shape()));
  }
  auto a = whferb(f_low, p.whferb);
  auto b = conv2d(relu(conv2d(f_high, p.refine1)), p.refine2);
  const auto fused = conv2d(concat(std::vector<Tensor<T>>{a, b}, 2), p.fuse);
  return {add(a, fused), add(b, fused)};
}

template <typename T>
Tensor<T> werm(const Tensor<T>& f_low, const Tensor<T>& f_high, const WermParams<T>& p) {
  auto low = conv2d(f_low, p.pre_low);
  const auto high_conv = conv2d(f_high, p.pre_high);
  auto high = high_conv;
  for (const auto& blk : p.blocks) std::tie(low, high) = werb(low, high, blk);
  return add(conv2d(concat(std::vector<Tensor<T>>{low, high}, 2), p.fuse), high_conv);
}

namespace {

template <typename T>
Tensor<T> channel_gate(const Tensor<T>& u, const WmpfParams<T>& p) {
  return sigmoid(linear(relu(linear(global_avg_pool(u), p.squeeze)), p.excite));
}

}  // namespace

template <typename T>
Tensor<T> wmpf_gate(const Tensor<T>& f_w_up, const Tensor<T>& z, const WmpfParams<T>& p) {
  return channel_gate(concat(std::vector<Tensor<T>>{f_w_up, z}, 2), p);
}

template <typename T>
Tensor<T> wmpf(const Tensor<T>& f_w_up, const Tensor<T>& z, const WmpfParams<T>& p) {
  if (f_w_up.shape() != z.shape()) {
    throw InvalidArgument("wmpf: input shapes differ " + shape_str(f_w_up.shape()) + " vs " + shape_str(z.shape()));
  }
  const auto u = concat(std::vector<Tensor<T>>{f_w_up, z}, 2);
  return conv2d(add(scale_channels(u, channel_gate(u, p)), u), p.out);
}

template <typename T>
WiaOutput<T> wia(std::span<const LocalGrid> grids, const Tensor<T>& q_map, const Tensor<T>& k_map,
                 const Tensor<T>& v_map, const Tensor<T>& f_map, const WiaParams<T>& p, int heads, int pe_levels) {
  if (grids.empty()) throw InvalidArgument("wia: no queries");
  const std::int64_t c = q_map.dim(-1);
  if (heads < 1 || c % heads != 0) {
    throw ConfigError("wia: feature width " + std::to_string(c) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  for (const auto* m : {&k_map, &v_map, &f_map}) {
    if (m->shape() != q_map.shape()) throw InvalidArgument("wia: feature maps must share one shape");
  }
  const auto q_count = static_cast<std::int64_t>(grids.size());
  const std::int64_t rows9 = q_count * kGridPoints;
  const std::int64_t hw = q_map.dim(0) * q_map.dim(1);
  const std::int64_t head_dim = c / heads;

  std::vector<std::int64_t> centers(static_cast<std::size_t>(q_count));
  std::vector<std::int64_t> neighbours(static_cast<std::size_t>(rows9));
  std::vector<std::int64_t> owner(static_cast<std::size_t>(rows9));
  std::vector<T> encoding(static_cast<std::size_t>(rows9 * 4 * pe_levels));
  std::vector<double> buf(static_cast<std::size_t>(4 * pe_levels));
  const std::int64_t w = q_map.dim(1);
  for (std::int64_t qi = 0; qi < q_count; ++qi) {
    const auto& g = grids[qi];
    centers[qi] = g.center.i * w + g.center.j;
    for (int r = 0; r < kGridPoints; ++r) {
      const auto row = qi * kGridPoints + r;
      neighbours[row] = g.rows[r];
      owner[row] = qi;
      gamma_into(g.deltas[r], pe_levels, buf);
      std::copy(buf.begin(), buf.end(), encoding.begin() + row * 4 * pe_levels);
    }
  }

  const Shape flat{hw, c};
  const auto q = gather_rows(reshape(q_map, flat), centers);
  const auto k = gather_rows(reshape(k_map, flat), neighbours);
  const auto v = gather_rows(reshape(v_map, flat), neighbours);
  const auto f = gather_rows(reshape(f_map, flat), neighbours);
  const auto v_fused = add(linear(concat(std::vector<Tensor<T>>{v, f}, 1), p.value_fuse), v);

  auto scores = mul(gather_rows(q, owner), k);
  scores = sum_last(reshape(scores, Shape{rows9 * heads, head_dim}));
  scores = scale(reshape(scores, Shape{rows9, heads}), static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
  const Tensor<T> pe(Shape{rows9, 4 * static_cast<std::int64_t>(pe_levels)}, std::move(encoding));
  scores = add(scores, linear(pe, p.bias_head));

  const auto attention = softmax(reshape(scores, Shape{q_count, kGridPoints, heads}), 1);
  const auto weights = repeat_interleave(reshape(attention, Shape{rows9, heads}), head_dim);
  return {mul(weights, v_fused), attention};
}

template <typename T>
FeatureMaps<T> compute_features(const LiwtModel<T>& model, const Tensor<T>& img_lr) {
  if (img_lr.rank() != 3 || img_lr.dim(2) != 3) {
    throw InvalidArgument("forward: expected H x W x 3 image, got " + shape_str(img_lr.shape()));
  }
  const std::int64_t h = img_lr.dim(0), w = img_lr.dim(1);
  if (h % 2 != 0 || w % 2 != 0) {
    throw InvalidArgument("forward: LR extents must be even (pad or crop upstream), got " + shape_str(img_lr.shape()));
  }
  FeatureMaps<T> f;
  f.z = encode(img_lr, model.encoder);
  const auto split = split_freq(dwt(f.z));
  f.prior = werm(split.low, split.high, model.werm);
  f.prior_up = resample(f.prior, h, w, Interp::bicubic);
  f.fused = wmpf(f.prior_up, f.z, model.wmpf);
  f.q_map = conv2d(f.prior_up, model.wia.query);
  f.k_map = conv2d(f.z, model.wia.key);
  f.v_map = conv2d(f.z, model.wia.value);
  return f;
}

template <typename T>
QueryOutput<T> query_features(const LiwtModel<T>& model, const FeatureMaps<T>& features, const Tensor<T>& img_lr,
                              std::span<const Point2> queries, std::span<const Cell> cells) {
  if (queries.empty()) throw InvalidArgument("forward: no query coordinates");
  if (cells.size() != 1 && cells.size() != queries.size()) {
    throw InvalidArgument("forward: need one cell or one cell per query");
  }
  const auto& cfg = model.config();
  const CoordSpace space{img_lr.dim(0), img_lr.dim(1)};
  std::vector<LocalGrid> grids;
  grids.reserve(queries.size());
  for (const auto& q : queries) grids.push_back(local_grid(space, q));

  const auto attn = wia<T>(grids, features.q_map, features.k_map, features.v_map, features.fused, model.wia, cfg.heads,
                           cfg.pe_levels);
  const auto q_count = static_cast<std::int64_t>(queries.size());
  std::vector<T> cell_values(static_cast<std::size_t>(2 * q_count));
  for (std::int64_t i = 0; i < q_count; ++i) {
    const auto& c = cells.size() == 1 ? cells[0] : cells[i];
    cell_values[2 * i] = static_cast<T>(c.scaled_h);
    cell_values[2 * i + 1] = static_cast<T>(c.scaled_w);
  }
  auto x = concat(std::vector<Tensor<T>>{reshape(attn.embeddings, Shape{q_count, kGridPoints * cfg.features}),
                                          Tensor<T>(Shape{q_count, 2}, std::move(cell_values))},
                  1);
  const auto& layers = model.decoder.layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = linear(x, layers[l]);
    if (l + 1 < layers.size()) x = relu(x);
  }
  const auto base = sample_at(img_lr, queries, Interp::bilinear);
  return {add(x, base), x, attn.attention};
}

template <typename T>
Tensor<T> forward(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::span<const Point2> queries,
                  std::span<const Cell> cells) {
  return query_features(model, compute_features(model, img_lr), img_lr, queries, cells).rgb;
}

template <typename T>
Tensor<T> predict_points(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::span<const Point2> points,
                         const Cell& cell, std::int64_t chunk) {
  NoGradGuard no_grad;
  if (chunk < 1) throw InvalidArgument("predict_points: chunk must be positive");
  const auto features = compute_features(model, img_lr);
  const auto total = static_cast<std::int64_t>(points.size());
  std::vector<T> out(static_cast<std::size_t>(total * 3));
  for (std::int64_t start = 0; start < total; start += chunk) {
    const auto len = std::min(chunk, total - start);
    const auto rgb = query_features(model, features, img_lr, points.subspan(start, len), std::span<const Cell>(&cell, 1)).rgb;
    std::ranges::copy(rgb.data(), out.begin() + start * 3);
  }
  return Tensor<T>(Shape{total, 3}, std::move(out));
}

template <typename T>
Tensor<T> super_resolve(const LiwtModel<T>& model, const Tensor<T>& img_lr, std::int64_t out_h, std::int64_t out_w,
                        std::int64_t chunk) {
  const std::int64_t h = img_lr.dim(0), w = img_lr.dim(1);
  const auto points = pixel_centers(out_h, out_w);
  const Cell cell = cell_of(static_cast<double>(out_h) / static_cast<double>(h),
                            static_cast<double>(out_w) / static_cast<double>(w), h, w);
  return reshape(predict_points(model, img_lr, points, cell, chunk), Shape{out_h, out_w, 3});
}

#define LIWT_INSTANTIATE_MODEL(T)                                                                               \
  template class LiwtModel<T>;                                                                                  \
  template Tensor<T> encode(const Tensor<T>&, const EncoderParams<T>&);                                         \
  template Tensor<T> whferb(const Tensor<T>&, const WhferbParams<T>&);                                          \
  template std::pair<Tensor<T>, Tensor<T>> werb(const Tensor<T>&, const Tensor<T>&, const WerbParams<T>&);      \
  template Tensor<T> werm(const Tensor<T>&, const Tensor<T>&, const WermParams<T>&);                            \
  template Tensor<T> wmpf(const Tensor<T>&, const Tensor<T>&, const WmpfParams<T>&);                            \
  template Tensor<T> wmpf_gate(const Tensor<T>&, const Tensor<T>&, const WmpfParams<T>&);                       \
  template WiaOutput<T> wia(std::span<const LocalGrid>, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                            const Tensor<T>&, const WiaParams<T>&, int, int);                                   \
  template FeatureMaps<T> compute_features(const LiwtModel<T>&, const Tensor<T>&);                              \
  template QueryOutput<T> query_features(const LiwtModel<T>&, const FeatureMaps<T>&, const Tensor<T>&,          \
                                         std::span<const Point2>, std::span<const Cell>);                       \
  template Tensor<T> forward(const LiwtModel<T>&, const Tensor<T>&, std::span<const Point2>,                    \
                             std::span<const Cell>);                                                            \
  template Tensor<T> predict_points(const LiwtModel<T>&, const Tensor<T>&, std::span<const Point2>, const Cell&, \
                                    std::int64_t);                                                              \
  template Tensor<T> super_resolve(const LiwtModel<T>&, const Tensor<T>&, std::int64_t, std::int64_t,           \
                                   std::int64_t);

LIWT_INSTANTIATE_MODEL(float)
LIWT_INSTANTIATE_MODEL(double)

}  // namespace liwt
