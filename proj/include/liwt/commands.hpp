#pragma once

// Entry points of the command-line tool. Each returns the process exit
// code: 0 ok, 1 internal error, 2 usage/config/input error, 3 checkpoint
// error.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace liwt {

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitUsage = 2, kExitCheckpoint = 3 };

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct TrainArgs {
  std::string config;  // empty uses the built-in defaults
  std::string preset;  // "full" or "desk", applied when no config is given
  std::optional<std::int64_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;   // run directory
  std::optional<std::string> data;  // training image directory
  std::optional<std::string> resume;
};

struct SrArgs {
  std::string checkpoint;
  std::string image;
  std::string scale = "2";
  std::string out;
  std::optional<int> threads;
};

struct EvalArgs {
  std::string checkpoint;
  std::string hr_dir;
  std::string scales = "2,3,4";
  std::string out = "eval";
  std::optional<int> threads;
};

struct DwtArgs {
  std::string image;
  std::string out = "dwt";
};

struct GradCheckArgs {
  std::string config;  // optional; only the [model] section is used
  std::uint64_t seed = 1;
  std::int64_t lr_size = 8;
  std::int64_t queries = 6;
  std::int64_t max_entries = 64;
  double tolerance = 1e-4;
  std::optional<int> threads;
  // Test fixture: scales the incoming gradient of one op, "op:factor".
  std::string inject_fault;
};

int cmd_train(const TrainArgs& args, Streams io);
int cmd_sr(const SrArgs& args, Streams io);
int cmd_eval(const EvalArgs& args, Streams io);
int cmd_dwt_inspect(const DwtArgs& args, Streams io);
int cmd_grad_check(const GradCheckArgs& args, Streams io);

// "2", "2.5" or "2x3" (height x width).
std::pair<double, double> parse_scale(const std::string& text);
std::vector<double> parse_scale_list(const std::string& text);

}  // namespace liwt
