#pragma once

// Finite-difference checks of reverse-mode gradients in double precision.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "liwt/model.hpp"
#include "liwt/tensor.hpp"

namespace liwt {

struct GradCheckOptions {
  // Fourth-order central stencil at +-step and +-2 step.
  double step = 3e-5;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
  // 0 checks every entry; otherwise a seeded sample per tensor.
  std::int64_t max_entries = 0;
  std::uint64_t seed = 7;
};

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  std::int64_t checked = 0;
  // Entries where the one-sided differences disagree, i.e. the step straddles
  // a kink of relu/maxpool/abs. They are excluded from the maximum.
  std::int64_t kinks = 0;
  std::string worst;  // tensor name and flat index of the worst entry
};

using LossFn = std::function<Tensord()>;

// Checks d loss / d t for each named tensor. Every tensor must be a leaf with
// requires_grad set; `loss` rebuilds the graph from their current values.
std::vector<GradCheckRow> check_gradients(const LossFn& loss, const std::vector<NamedTensor<double>>& tensors,
                                          const GradCheckOptions& options = {});

// Collapses per-tensor rows into one row per group; `group_of` maps a tensor
// name to its group.
std::vector<GradCheckRow> group_rows(const std::vector<GradCheckRow>& rows,
                                     const std::function<std::string(const std::string&)>& group_of,
                                     const std::vector<std::string>& order);

struct OpCheck {
  std::string op;
  GradCheckRow row;
};

// Gradient checks of every differentiable primitive on small random inputs.
std::vector<OpCheck> check_primitives(std::uint64_t seed);

// Model groups: encoder, werm, wmpf, wia, bias_head, decoder.
std::string model_group(const std::string& parameter_name);
const std::vector<std::string>& model_groups();

struct ModelGradCheck {
  std::vector<GradCheckRow> groups;
  std::vector<GradCheckRow> tensors;
};

// End-to-end check of every model parameter: mean L1 loss of random queries
// on a random LR image against random targets.
ModelGradCheck check_model_gradients(const ModelConfig& config, std::int64_t lr_size, std::int64_t queries,
                                     std::uint64_t seed, const GradCheckOptions& options);

}  // namespace liwt
