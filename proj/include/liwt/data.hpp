#pragma once

// Training data: image folders, LR/HR patch synthesis, query sampling and
// the curriculum over magnification ranges.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "liwt/coords.hpp"
#include "liwt/tensor.hpp"

namespace liwt {

struct ImageSet {
  std::vector<Tensorf> images;
  std::vector<std::string> paths;
};

using WarningSink = std::function<void(const std::string&)>;

// Loads every *.png in `dir` in lexicographic path order. Files that fail
// to decode or whose shorter side is below `min_side` are reported to `warn`
// and skipped. Throws ImageError if the directory is missing or nothing
// usable remains.
ImageSet load_images(const std::string& dir, std::int64_t min_side, const WarningSink& warn);

struct CurriculumSchedule {
  // Stage k covers epochs [boundary[k-1], boundary[k]) * total.
  std::vector<double> boundaries{0.25, 0.5};
  std::vector<double> max_scales{4.0, 6.0, 8.0};
  double min_scale = 1.0;

  // Throws ConfigError when the ranges are not nested and monotone.
  void validate() const;
  int stage(std::int64_t epoch, std::int64_t total) const;
  double max_scale(std::int64_t epoch, std::int64_t total) const;
  double largest_scale() const { return max_scales.back(); }
};

// Uniform draw from [min_scale, max_scale(epoch)).
double sample_scale(const CurriculumSchedule& sched, std::int64_t epoch, std::int64_t total, std::mt19937_64& rng);

struct PatchPair {
  Tensorf lr;   // p x p x 3
  Tensorf hr;   // floor(p s) x floor(p s) x 3
  double scale = 1.0;  // floor(p s) / p
};

// floor(p s) side of the HR crop for an LR patch of side p.
std::int64_t hr_patch_side(std::int64_t p, double s);

// Random aligned crop of side floor(p s), bicubic-downsampled to p x p.
// Throws InvalidArgument when the image is too small or p is odd.
PatchPair make_pair(const Tensorf& img, double s, std::int64_t p, std::mt19937_64& rng);

struct QuerySample {
  std::vector<Point2> coords;  // HR pixel centers
  Tensorf rgb;                 // m x 3
  Cell cell;
};

// m distinct HR pixels chosen uniformly without replacement. The cell
// refers to an LR lattice of lr_h x lr_w.
QuerySample sample_queries(const Tensorf& hr, std::int64_t m, std::int64_t lr_h, std::int64_t lr_w,
                           std::mt19937_64& rng);

struct TrainSample {
  Tensorf lr;
  QuerySample queries;
  double scale = 1.0;
};

using TrainBatch = std::vector<TrainSample>;

struct BatchSettings {
  std::int64_t patch = 24;
  std::int64_t queries = 0;  // 0 means patch * patch
  double fixed_scale = 0.0;  // > 0 disables the curriculum
};

// One sample per listed image index.
TrainBatch make_batch(const ImageSet& set, std::span<const std::size_t> indices, const CurriculumSchedule& sched,
                      const BatchSettings& settings, std::int64_t epoch, std::int64_t total, std::mt19937_64& rng);

// Generator for one epoch, derived from the run seed alone.
std::mt19937_64 epoch_rng(std::uint64_t seed, std::int64_t epoch);

}  // namespace liwt
