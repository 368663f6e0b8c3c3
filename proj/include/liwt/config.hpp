#pragma once

// Run configuration: sectioned "key = value" text with comments starting
// with '#' or ';'. Unknown sections and keys are errors.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "liwt/data.hpp"
#include "liwt/model.hpp"
#include "liwt/training.hpp"

namespace liwt {

struct RunConfig {
  ModelConfig model;

  // [data]
  std::string train_dir = "data/train";
  std::int64_t patch = 24;
  std::int64_t batch = 4;
  std::int64_t queries = 0;  // 0 means patch^2
  std::int64_t epoch_repeat = 1;
  double fixed_scale = 0.0;  // > 0 replaces the curriculum
  CurriculumSchedule curriculum;

  // [train]
  std::int64_t epochs = 20;
  std::int64_t checkpoint_every = 5;
  std::uint64_t seed = 0;
  LrSchedule lr;
  std::string run_dir = "runs/liwt";
  int threads = 0;  // 0 keeps the OpenMP default

  // [eval]
  std::string hr_dir = "data/valid";
  std::vector<double> scales{2.0, 3.0, 4.0};

  // Throws ConfigError naming the first offending "section.key".
  void validate() const;
  // Smallest image side usable with the largest curriculum scale.
  std::int64_t min_image_side() const;
};

// Full-scale settings: C = 64, p = 48, batch 32, 1000 epochs, n = 4,
// 8 heads, L = 10.
RunConfig full_config();

// A top-level "preset = full" line, if present, must precede all sections.
RunConfig parse_config(std::istream& in, const std::string& origin);

// Reads a config file, or the config records of a run manifest.
RunConfig load_config(const std::string& path);

void set_config_value(RunConfig& config, const std::string& section, const std::string& key, const std::string& value);

// ("section.key", value) pairs covering every field.
std::vector<std::pair<std::string, std::string>> config_records(const RunConfig& config);

std::string render_config(const RunConfig& config);

FitSettings fit_settings(const RunConfig& config);

}  // namespace liwt
