#include "liwt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "liwt/nn.hpp"
#include "liwt/ops.hpp"
#include "liwt/wavelet.hpp"

namespace liwt {

namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::vector<std::int64_t> pick_entries(std::int64_t n, const std::string& name, const GradCheckOptions& o) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  if (o.max_entries <= 0 || n <= o.max_entries) return idx;
  std::mt19937_64 rng(o.seed ^ name_hash(name));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(o.max_entries));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensord random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensord(std::move(shape), std::move(v));
}

Tensord leaf(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto t = random_tensor(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Contracts an arbitrary output with fixed random weights into a scalar.
Tensord project(const Tensord& out, std::uint64_t seed) {
  if (out.numel() == 1) return reshape(out, Shape{});
  std::mt19937_64 rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

}  // namespace

std::vector<GradCheckRow> check_gradients(const LossFn& loss, const std::vector<NamedTensor<double>>& tensors,
                                          const GradCheckOptions& options) {
  for (const auto& t : tensors) {
    if (!t.tensor.is_leaf() || !t.tensor.requires_grad()) {
      throw InvalidArgument("grad check: '" + t.name + "' is not a leaf requiring gradients");
    }
  }
  for (const auto& t : tensors) Tensord(t.tensor).zero_grad();
  const auto base = loss();
  backward(base);
  const double f0 = base.item();

  std::vector<GradCheckRow> rows;
  for (const auto& named : tensors) {
    Tensord t = named.tensor;
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(static_cast<std::size_t>(t.numel()), 0.0);
    GradCheckRow row{named.name, 0.0, 0, 0, {}};
    auto values = t.mutable_data();
    for (const auto i : pick_entries(t.numel(), named.name, options)) {
      const double orig = values[i];
      const double h = options.step;
      auto eval_at = [&](double v) {
        values[i] = v;
        NoGradGuard guard;
        return loss().item();
      };
      const double fp = eval_at(orig + h), fm = eval_at(orig - h);
      const double fp2 = eval_at(orig + 2 * h), fm2 = eval_at(orig - 2 * h);
      values[i] = orig;
      auto disagree = [](double u, double v, double rel) {
        return std::abs(u - v) > 1e-8 && std::abs(u - v) > rel * std::max(std::abs(u), std::abs(v));
      };
      const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h;
      const double near = (fp - fm) / (2 * h), far = (fp2 - fm2) / (4 * h);
      if (disagree(fwd, bwd, 1e-3) || disagree(near, far, 1e-4)) {
        ++row.kinks;
        continue;
      }
      const double numeric = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
      const double a = analytic[static_cast<std::size_t>(i)];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
      ++row.checked;
      if (row.worst.empty() || rel > row.max_rel_error) {
        row.max_rel_error = rel;
        row.worst = named.name + "[" + std::to_string(i) + "]";
      }
    }
    rows.push_back(std::move(row));
  }
  for (const auto& t : tensors) Tensord(t.tensor).zero_grad();
  return rows;
}

std::vector<GradCheckRow> group_rows(const std::vector<GradCheckRow>& rows,
                                     const std::function<std::string(const std::string&)>& group_of,
                                     const std::vector<std::string>& order) {
  std::map<std::string, GradCheckRow> groups;
  for (const auto& name : order) groups[name] = GradCheckRow{name, 0.0, 0, 0, {}};
  for (const auto& r : rows) {
    const auto g = group_of(r.name);
    auto& acc = groups.try_emplace(g, GradCheckRow{g, 0.0, 0, 0, {}}).first->second;
    acc.checked += r.checked;
    acc.kinks += r.kinks;
    if (r.checked > 0 && (acc.worst.empty() || r.max_rel_error > acc.max_rel_error)) {
      acc.max_rel_error = r.max_rel_error;
      acc.worst = r.worst;
    }
  }
  std::vector<GradCheckRow> out;
  for (const auto& name : order) out.push_back(groups.at(name));
  for (const auto& [name, row] : groups) {
    if (std::find(order.begin(), order.end(), name) == order.end()) out.push_back(row);
  }
  return out;
}

std::vector<OpCheck> check_primitives(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OpCheck> out;
  auto run = [&out, seed](const std::string& op, const std::vector<NamedTensor<double>>& inputs,
                          const std::function<Tensord()>& build) {
    const auto rows = check_gradients([&] { return project(build(), seed + 17); }, inputs);
    GradCheckRow merged{op, 0.0, 0, 0, {}};
    for (const auto& r : rows) {
      merged.checked += r.checked;
      merged.kinks += r.kinks;
      if (merged.worst.empty() || r.max_rel_error > merged.max_rel_error) {
        merged.max_rel_error = r.max_rel_error;
        merged.worst = r.worst;
      }
    }
    out.push_back({op, merged});
  };

  {
    auto a = leaf({3, 4}, rng), b = leaf({3, 4}, rng);
    run("add", {{"a", a}, {"b", b}}, [=] { return add(a, b); });
    run("sub", {{"a", a}, {"b", b}}, [=] { return sub(a, b); });
    run("mul", {{"a", a}, {"b", b}}, [=] { return mul(a, b); });
    run("scale", {{"a", a}}, [=] { return scale(a, 1.7); });
    run("relu", {{"a", a}}, [=] { return relu(a); });
    run("sigmoid", {{"a", a}}, [=] { return sigmoid(a); });
    run("abs", {{"a", a}}, [=] { return abs(a); });
    run("l1", {{"a", a}, {"b", b}}, [=] { return l1(a, b, Reduction::mean); });
    run("sum", {{"a", a}}, [=] { return scale(sum(a), 0.3); });
    run("mean", {{"a", a}}, [=] { return scale(mean(a), 2.0); });
    run("sum_last", {{"a", a}}, [=] { return sum_last(a); });
    run("softmax", {{"a", a}}, [=] { return softmax(a, 1); });
    run("transpose", {{"a", a}}, [=] { return transpose(a); });
    run("reshape", {{"a", a}}, [=] { return reshape(a, Shape{2, 6}); });
    run("slice", {{"a", a}}, [=] { return slice(a, 1, 1, 2); });
    run("concat", {{"a", a}, {"b", b}}, [=] { return concat(std::vector<Tensord>{a, b}, 1); });
  }
  {
    auto a = leaf({3, 5}, rng), b = leaf({5, 4}, rng);
    run("matmul", {{"a", a}, {"b", b}}, [=] { return matmul(a, b); });
  }
  {
    auto x = leaf({5, 3}, rng), bias = leaf({3}, rng), s = leaf({3}, rng);
    const std::vector<std::int64_t> rows{4, 0, 0, 2, 3};
    const std::vector<double> weights{0.2, -0.4, 1.1, 0.5, 0.7, -0.3};
    const std::vector<std::int64_t> taps_rows{1, 2, 0, 0, 4, 3};
    run("gather_rows", {{"x", x}}, [=] { return gather_rows(x, std::span<const std::int64_t>(rows)); });
    run("weighted_gather", {{"x", x}}, [=] {
      return weighted_gather(x, std::span<const std::int64_t>(taps_rows), std::span<const double>(weights), 2);
    });
    run("bias_add", {{"x", x}, {"b", bias}}, [=] { return bias_add(x, bias); });
    run("scale_channels", {{"x", x}, {"s", s}}, [=] { return scale_channels(x, s); });
    run("repeat_interleave", {{"x", x}}, [=] { return repeat_interleave(x, 3); });
  }
  {
    auto x = leaf({6, 4, 3}, rng);
    auto conv = make_conv2d<double>(3, 3, 2, rng);
    conv.bias = random_tensor({2}, rng);
    conv.weight.set_requires_grad(true);
    conv.bias.set_requires_grad(true);
    run("im2col", {{"x", x}, {"weight", conv.weight}, {"bias", conv.bias}}, [=] { return conv2d(x, conv); });
    run("maxpool2d", {{"x", x}}, [=] { return maxpool2d(x); });
    run("global_avg_pool", {{"x", x}}, [=] { return global_avg_pool(x); });
    run("dwt", {{"x", x}}, [=] {
      const auto b = dwt(x);
      return concat(std::vector<Tensord>{b.ll, b.lh, b.hl, b.hh}, 2);
    });
    auto band = leaf({3, 2, 3}, rng);
    run("idwt", {{"band", band}}, [=] { return idwt(SubBands<double>{band, band, band, band}); });
    const std::vector<Point2> pts{{-0.71, 0.2}, {0.33, -0.95}, {0.9, 0.6}};
    run("sample_bicubic", {{"x", x}}, [=] { return sample_at(x, std::span<const Point2>(pts), Interp::bicubic); });
  }
  return out;
}

const std::vector<std::string>& model_groups() {
  static const std::vector<std::string> groups{"encoder", "werm", "wmpf", "wia", "bias_head", "decoder"};
  return groups;
}

std::string model_group(const std::string& name) {
  if (name.rfind("wia.bias_head", 0) == 0) return "bias_head";
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

ModelGradCheck check_model_gradients(const ModelConfig& config, std::int64_t lr_size, std::int64_t queries,
                                     std::uint64_t seed, const GradCheckOptions& options) {
  LiwtModel<double> model(config, seed);
  std::mt19937_64 rng(seed + 1);
  // Small random biases so no bias gradient sits exactly at a symmetric point.
  for (auto& p : model.parameters()) {
    p.tensor.set_requires_grad(true);
    if (p.name.find(".bias") != std::string::npos) {
      auto v = p.tensor.mutable_data();
      std::uniform_real_distribution<double> u(-0.05, 0.05);
      for (auto& b : v) b = u(rng);
    }
  }
  const auto img = random_tensor({lr_size, lr_size, 3}, rng, 0.0, 1.0);
  std::uniform_real_distribution<double> coord(-0.98, 0.98);
  std::vector<Point2> pts;
  for (std::int64_t q = 0; q < queries; ++q) pts.push_back({coord(rng), coord(rng)});
  const std::vector<Cell> cells{cell_of(2.5, 2.5, lr_size, lr_size)};
  const auto params = model.parameters();
  const auto target = random_tensor({queries, 3}, rng, 0.0, 1.0);
  auto loss = [&] {
    return l1(forward(model, img, std::span<const Point2>(pts), std::span<const Cell>(cells)), target, Reduction::mean);
  };
  ModelGradCheck result;
  result.tensors = check_gradients(loss, params, options);
  result.groups = group_rows(result.tensors, model_group, model_groups());
  return result;
}

}  // namespace liwt
