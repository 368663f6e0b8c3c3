#pragma once

// L1 optimisation with Adam, a step-decay learning rate, checkpoints and a
// line-oriented run manifest.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "liwt/data.hpp"
#include "liwt/model.hpp"

namespace liwt {

struct LrSchedule {
  double initial = 1e-4;
  std::int64_t decay_every = 200;
  double factor = 0.5;

  double at(std::int64_t epoch) const;
};

// 1e-4 * 0.5^floor(epoch / 200).
double lr_at(std::int64_t epoch);

template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<NamedTensor<T>> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // One bias-corrected update from the current gradients; tensors without a
  // gradient are treated as having a zero gradient.
  void step(double lr);
  std::int64_t steps() const { return t_; }

  // Moment buffers as "optim.m.<name>" and "optim.v.<name>".
  std::vector<NamedTensor<T>> state() const;
  void load_state(const std::vector<NamedTensor<T>>& tensors, std::int64_t steps);

 private:
  std::vector<NamedTensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Mean |pred - gt| over all samples, queries and channels; zeroes gradients,
// back-propagates and applies one Adam step. Throws NonFiniteLoss (without
// updating) when the loss is not finite.
double train_step(LiwtModel<float>& model, const TrainBatch& batch, Adam<float>& opt, double lr);

// Same loss without any update.
double batch_loss(const LiwtModel<float>& model, const TrainBatch& batch);

struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based count of completed epochs
  double loss = 0.0;
  double lr = 0.0;
  std::int64_t steps = 0;
};

struct RunManifest {
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  std::vector<std::pair<std::int64_t, std::string>> checkpoints;  // epoch, path relative to the run dir

  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

struct FitSettings {
  std::int64_t epochs = 10;
  std::int64_t checkpoint_every = 5;
  std::int64_t batch = 4;
  std::int64_t epoch_repeat = 1;
  std::uint64_t seed = 0;
  BatchSettings samples;
  CurriculumSchedule curriculum;
  LrSchedule lr;
  std::string run_dir;
  // Checkpoint to continue from; its epoch metadata selects the first epoch.
  std::string resume;
  // Written into the manifest verbatim.
  std::vector<std::pair<std::string, std::string>> config_records;
};

using Logger = std::function<void(const std::string&)>;

// Writes <run_dir>/manifest.txt, <run_dir>/loss.csv and
// <run_dir>/checkpoints/epoch_NNNN.ckpt. Throws CheckpointError if a
// checkpoint cannot be written.
RunManifest fit(LiwtModel<float>& model, const ImageSet& images, const FitSettings& settings, const Logger& log);

std::string checkpoint_name(std::int64_t epoch);

}  // namespace liwt
