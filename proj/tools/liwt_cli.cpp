#include <CLI11.hpp>

#include <iostream>

#include "liwt/commands.hpp"

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liwt: arbitrary-scale super-resolution with a local implicit wavelet transformer"};
  app.require_subcommand(1);
  liwt::Streams io{std::cout, std::cerr};

  liwt::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model on a directory of PNG images");
  train_cmd->add_option("--config", train.config, "config file or run manifest");
  train_cmd->add_option("--preset", train.preset, "desk (default) or full, used without --config");
  optional_flag(train_cmd, "--epochs", train.epochs, "override train.epochs");
  optional_flag(train_cmd, "--seed", train.seed, "override train.seed");
  optional_flag(train_cmd, "--threads", train.threads, "worker threads (1 is deterministic and single-core)");
  optional_flag(train_cmd, "--out", train.out, "run directory");
  optional_flag(train_cmd, "--data", train.data, "training image directory");
  optional_flag(train_cmd, "--resume", train.resume, "checkpoint to continue from");

  liwt::SrArgs sr;
  auto* sr_cmd = app.add_subcommand("sr", "super-resolve one PNG image");
  sr_cmd->add_option("--checkpoint", sr.checkpoint, "model checkpoint")->required();
  sr_cmd->add_option("--image", sr.image, "input PNG")->required();
  sr_cmd->add_option("--scale", sr.scale, "magnification, e.g. 2, 2.2 or 2x3 (height x width)");
  sr_cmd->add_option("--out", sr.out, "output PNG");
  optional_flag(sr_cmd, "--threads", sr.threads, "worker threads");

  liwt::EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM against bicubic and bilinear baselines");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--hr", ev.hr_dir, "directory of HR PNG images")->required();
  eval_cmd->add_option("--scale", ev.scales, "comma-separated scales");
  eval_cmd->add_option("--out", ev.out, "report directory");
  optional_flag(eval_cmd, "--threads", ev.threads, "worker threads");

  liwt::DwtArgs dwt;
  auto* dwt_cmd = app.add_subcommand("dwt-inspect", "write Haar sub-bands of an image and their energy shares");
  dwt_cmd->add_option("--image", dwt.image, "input PNG with even extents")->required();
  dwt_cmd->add_option("--out", dwt.out, "output directory");

  liwt::GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of every gradient rule and model group");
  gc_cmd->add_option("--config", gc.config, "config whose [model] section replaces the tiny default");
  gc_cmd->add_option("--seed", gc.seed, "random seed");
  gc_cmd->add_option("--size", gc.lr_size, "LR image side");
  gc_cmd->add_option("--queries", gc.queries, "query points");
  gc_cmd->add_option("--entries", gc.max_entries, "entries checked per tensor (0 = all)");
  gc_cmd->add_option("--tolerance", gc.tolerance, "maximum relative error");
  optional_flag(gc_cmd, "--threads", gc.threads, "worker threads");
  gc_cmd->add_option("--inject-fault", gc.inject_fault, "test fixture: op:factor scales one op's gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return liwt::kExitUsage;
  }

  if (*train_cmd) return liwt::cmd_train(train, io);
  if (*sr_cmd) return liwt::cmd_sr(sr, io);
  if (*eval_cmd) return liwt::cmd_eval(ev, io);
  if (*dwt_cmd) return liwt::cmd_dwt_inspect(dwt, io);
  if (*gc_cmd) return liwt::cmd_grad_check(gc, io);
  return liwt::kExitUsage;
}
