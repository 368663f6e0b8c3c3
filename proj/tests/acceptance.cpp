// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "liwt/commands.hpp"
#include "liwt/coords.hpp"
#include "liwt/data.hpp"
#include "liwt/gradcheck.hpp"
#include "liwt/image_io.hpp"
#include "liwt/metrics.hpp"
#include "liwt/model.hpp"
#include "liwt/nn.hpp"
#include "liwt/training.hpp"
#include "liwt/wavelet.hpp"
#include "support.hpp"

using namespace liwt;
using liwt::testing::random_tensor;
using liwt::testing::read_file;
using liwt::testing::run_cli;
using liwt::testing::synthetic_image;
using liwt::testing::TempDir;

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.features = 8;
  c.encoder_blocks = 1;
  c.werb_blocks = 1;
  c.heads = 2;
  c.pe_levels = 4;
  c.decoder_hidden = 32;
  return c;
}

double energy(std::span<const float> v) {
  double e = 0.0;
  for (const float x : v) e += static_cast<double>(x) * x;
  return e;
}

Outcome dwt_reconstruction() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> side(1, 32), chans(1, 8);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int n = 0; n < 100; ++n) {
    const auto x = random_tensor<float>({2 * side(rng), 2 * side(rng), chans(rng)}, 1000 + n);
    const auto y = idwt(dwt(x));
    worst = std::max(worst, liwt::testing::max_abs_diff(y.data(), x.data()));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 5.0, "max |idwt(dwt(x)) - x| = " + fmt("%.3g", worst) + " over 100 inputs in " +
                                          fmt("%.2f", secs) + " s"};
}

Outcome parseval() {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> side(1, 32), chans(1, 8);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const auto x = random_tensor<float>({2 * side(rng), 2 * side(rng), chans(rng)}, 2000 + n);
    const auto b = dwt(x);
    const double bands = energy(b.ll.data()) + energy(b.lh.data()) + energy(b.hl.data()) + energy(b.hh.data());
    worst = std::max(worst, std::abs(bands - energy(x.data())) / energy(x.data()));
  }
  return {worst < 1e-5, "max relative energy mismatch " + fmt("%.3g", worst)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool ok = true;
  std::string failing;
  for (const auto& c : check_primitives(1)) {
    worst = std::max(worst, c.row.max_rel_error);
    if (c.row.checked == 0 || c.row.max_rel_error >= 1e-4) {
      ok = false;
      failing += " op:" + c.op;
    }
  }
  GradCheckOptions opts;
  opts.max_entries = 64;
  ModelConfig cfg;
  cfg.features = 8;
  cfg.werb_blocks = 1;
  cfg.heads = 2;
  cfg.pe_levels = 4;
  const auto model = check_model_gradients(cfg, 8, 6, 1, opts);
  for (const auto& g : model.groups) {
    worst = std::max(worst, g.max_rel_error);
    if (g.checked == 0 || g.max_rel_error >= 1e-4) {
      ok = false;
      failing += " group:" + g.name;
    }
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, "max relative error " + fmt("%.3g", worst) + " over ops and " +
                                  std::to_string(model.groups.size()) + " groups in " + fmt("%.1f", secs) + " s" +
                                  failing};
}

Outcome attention_normalization() {
  const LiwtModel<float> m(tiny_config(), 2);
  const auto img = random_tensor<float>({16, 16, 3}, 3, 0, 1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NoGradGuard guard;
  const auto features = compute_features(m, img);
  const Cell cell = cell_of(3.0, 3.0, 16, 16);
  double worst = 0.0;
  bool nonneg = true;
  std::int64_t total = 0;
  for (int chunk = 0; chunk < 5; ++chunk) {
    std::vector<Point2> pts(2000);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const auto out = query_features(m, features, img, pts, std::span<const Cell>(&cell, 1));
    const auto a = out.attention.data();
    const int heads = tiny_config().heads;
    for (std::size_t qi = 0; qi < pts.size(); ++qi) {
      for (int h = 0; h < heads; ++h) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) {
          const float w = a[(qi * 9 + k) * heads + h];
          nonneg = nonneg && w >= 0.0f;
          s += w;
        }
        worst = std::max(worst, std::abs(s - 1.0));
      }
      ++total;
    }
  }
  return {nonneg && worst < 1e-6 && total == 10000,
          std::to_string(total) + " queries, max |sum - 1| = " + fmt("%.3g", worst)};
}

Outcome shape_law(const TempDir& dir) {
  const auto t0 = Clock::now();
  LiwtModel<float> m(tiny_config(), 5);
  save_checkpoint(dir.str("shape.ckpt"), model_checkpoint(m));
  save_png(dir.str("lr16.png"), synthetic_image(16, 16));
  bool ok = true;
  std::string detail;
  for (const double s : {1.3, 2.0, 2.2, 3.3, 4.0, 6.6, 7.7}) {
    const auto expect = static_cast<std::int64_t>(std::floor(s * 16 + 1e-9));
    const auto name = "sr_" + std::to_string(expect) + ".png";
    std::ostringstream scale;
    scale << s;
    const auto r = run_cli("sr --checkpoint \"" + dir.str("shape.ckpt") + "\" --image \"" + dir.str("lr16.png") +
                               "\" --scale " + scale.str() + " --out \"" + dir.str(name) + "\"",
                           dir.str());
    bool this_ok = r.code == 0;
    if (this_ok) {
      const auto png = load_png(dir.str(name));
      this_ok = png.shape() == Shape{expect, expect, 3};
    }
    ok = ok && this_ok;
    detail += " x" + scale.str() + "->" + std::to_string(expect) + (this_ok ? "" : "(bad)");
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 60.0, "16x16 input:" + detail + " in " + fmt("%.1f", secs) + " s"};
}

Outcome residual_identity(const TempDir& dir) {
  LiwtModel<float> m(tiny_config(), 6);
  m.zero_decoder_output();
  const auto img = random_tensor<float>({16, 16, 3}, 7, 0, 1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point2> pts(2000);
  for (auto& p : pts) p = {u(rng), u(rng)};
  const Cell cell = cell_of(2.5, 2.5, 16, 16);
  Tensorf pred;
  {
    NoGradGuard guard;
    pred = forward(m, img, pts, std::span<const Cell>(&cell, 1));
  }
  const auto base = sample_at(img, pts, Interp::bilinear);
  const double diff = liwt::testing::max_abs_diff(pred.data(), base.data());

  save_checkpoint(dir.str("zero.ckpt"), model_checkpoint(m));
  fs::create_directories(dir.path() / "hr");
  save_png(dir.str("hr/a.png"), synthetic_image(48, 40));
  const auto r = run_cli("eval --checkpoint \"" + dir.str("zero.ckpt") + "\" --hr \"" + dir.str("hr") +
                             "\" --scale 2,3 --out \"" + dir.str("eval") + "\"",
                         dir.str());
  bool same = r.code == 0;
  if (same) {
    std::istringstream in(read_file(dir.str("eval/eval.csv")));
    std::map<std::string, std::string> psnr_of;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> c;
      std::istringstream ls(line);
      std::string cell_text;
      while (std::getline(ls, cell_text, ',')) c.push_back(cell_text);
      psnr_of[c[0] + "|" + c[1] + "|" + c[3]] = c[4];
    }
    int compared = 0;
    for (const auto& [key, value] : psnr_of) {
      if (key.rfind("LIWT|", 0) != 0) continue;
      const auto other = psnr_of.find("Bilinear" + key.substr(4));
      same = same && other != psnr_of.end() && other->second == value;
      ++compared;
    }
    same = same && compared == 4;
  }
  return {diff < 1e-6 && same, "zeroed decoder vs bilinear: max diff " + fmt("%.3g", diff) +
                                   ", eval PSNR rows " + (same ? "identical" : "differ")};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto hr = synthetic_image(32, 32);
  const auto lr = resample(hr, 16, 16, Interp::bicubic);
  ModelConfig cfg;
  cfg.features = 16;
  LiwtModel<float> m(cfg, 1);
  Adam<float> opt(m.parameters());
  std::mt19937_64 rng(5);
  TrainSample full;
  full.lr = lr;
  full.queries.coords = pixel_centers(32, 32);
  full.queries.rgb = reshape(hr, Shape{1024, 3});
  full.queries.cell = cell_of(2.0, 2.0, 16, 16);
  full.scale = 2.0;
  const double initial = batch_loss(m, TrainBatch{full});
  for (int step = 0; step < 300; ++step) {
    TrainSample s;
    s.lr = lr;
    s.scale = 2.0;
    s.queries = sample_queries(hr, 256, 16, 16, rng);
    train_step(m, TrainBatch{s}, opt, 1e-4);
  }
  const double final_loss = batch_loss(m, TrainBatch{full});
  const double model_db = psnr(clamp01(super_resolve(m, lr, 32, 32)), hr, 2);
  const double bicubic_db = psnr(clamp01(bicubic_baseline(lr, 2.0, 2.0)), hr, 2);
  return {final_loss < 0.5 * initial && model_db >= bicubic_db + 0.5,
          "L1 " + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_loss) + ", PSNR " + fmt("%.2f", model_db) +
              " dB vs bicubic " + fmt("%.2f", bicubic_db) + " dB, " + fmt("%.1f", seconds_since(t0)) + " s"};
}

Outcome curriculum() {
  const CurriculumSchedule sched;
  const std::int64_t total = 100;
  const std::int64_t epochs[] = {10, 30, 70};
  const double maxima[] = {4.0, 6.0, 8.0};
  bool ok = true;
  std::string detail;
  for (int k = 0; k < 3; ++k) {
    std::mt19937_64 rng(20 + k);
    const int bins = 20, draws = 10000;
    std::vector<int> count(bins, 0);
    bool in_range = true;
    for (int n = 0; n < draws; ++n) {
      const double s = sample_scale(sched, epochs[k], total, rng);
      in_range = in_range && s >= 1.0 && s < maxima[k];
      const int b = std::min(bins - 1, static_cast<int>((s - 1.0) / (maxima[k] - 1.0) * bins));
      ++count[std::max(0, b)];
    }
    const double expected = static_cast<double>(draws) / bins;
    double chi2 = 0.0;
    for (const int c : count) chi2 += (c - expected) * (c - expected) / expected;
    // 19 degrees of freedom, significance 0.01.
    const bool stage_ok = in_range && chi2 < 36.191;
    ok = ok && stage_ok;
    detail += " stage" + std::to_string(k + 1) + "[1," + fmt("%g", maxima[k]) + ") chi2=" + fmt("%.1f", chi2);
  }
  return {ok, "10000 draws per stage;" + detail};
}

Outcome metric_oracles() {
  bool ok = true;
  double psnr_err = 0.0;
  const Tensorf mid(Shape{8, 8, 3}, 0.5f);
  // Dyadic offsets keep the MSE exact in single precision.
  for (const float d : {0.25f, 0.125f, 0.0625f}) {
    const Tensorf off(Shape{8, 8, 3}, 0.5f + d);
    psnr_err = std::max(psnr_err, std::abs(psnr(mid, off, 0) - 10.0 * std::log10(1.0 / (double(d) * d))));
    std::vector<float> half(8 * 8 * 3, 0.5f);
    for (std::size_t i = 0; i < half.size(); i += 2) half[i] += d;
    psnr_err = std::max(psnr_err, std::abs(psnr(mid, Tensorf(Shape{8, 8, 3}, std::move(half)), 0) -
                                           10.0 * std::log10(2.0 / (double(d) * d))));
  }
  ok = ok && psnr_err < 1e-9 && std::isinf(psnr(mid, mid, 0));

  double self_err = 0.0, oracle_err = 0.0;
  for (int n = 0; n < 5; ++n) {
    const auto x = random_tensor<float>({16 + n, 24 - n, 3}, 30 + n, 0, 1);
    const auto y = random_tensor<float>({16 + n, 24 - n, 3}, 40 + n, 0, 1);
    self_err = std::max(self_err, std::abs(ssim(x, x, 0) - 1.0));
    oracle_err = std::max(oracle_err, std::abs(ssim(x, y, 0) - liwt::testing::ssim_oracle(x, y)));
    std::vector<float> blend(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < blend.size(); ++i) blend[i] = 0.7f * blend[i] + 0.3f * y.data()[i];
    const Tensorf z(x.shape(), std::move(blend));
    oracle_err = std::max(oracle_err, std::abs(ssim(x, z, 0) - liwt::testing::ssim_oracle(x, z)));
  }
  ok = ok && self_err < 1e-12 && oracle_err < 1e-6;
  return {ok, "PSNR closed-form error " + fmt("%.3g", psnr_err) + ", |SSIM(x,x) - 1| " + fmt("%.3g", self_err) +
                  ", SSIM vs window oracle " + fmt("%.3g", oracle_err)};
}

Outcome determinism(const TempDir& dir) {
  fs::create_directories(dir.path() / "data");
  for (int k = 0; k < 3; ++k) {
    save_png(dir.str("data/img" + std::to_string(k) + ".png"), random_tensor<float>({64, 64, 3}, 60 + k, 0, 1));
  }
  std::ofstream(dir.str("det.ini")) << "[model]\nfeatures = 8\nencoder_blocks = 1\nwerb_blocks = 1\nheads = 2\n"
                                       "pe_levels = 4\ndecoder_hidden = 32\n[data]\npatch = 8\nbatch = 2\n"
                                       "queries = 32\n[train]\ncheckpoint_every = 1\nseed = 4\n";
  auto run = [&](const std::string& out) {
    return run_cli("train --config \"" + dir.str("det.ini") + "\" --data \"" + dir.str("data") +
                       "\" --epochs 2 --threads 1 --out \"" + dir.str(out) + "\"",
                   dir.str())
        .code;
  };
  if (run("a") != 0 || run("b") != 0) return {false, "training run failed"};
  bool same = read_file(dir.str("a/loss.csv")) == read_file(dir.str("b/loss.csv"));
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "a" / "checkpoints")) {
    const auto other = dir.path() / "b" / "checkpoints" / e.path().filename();
    same = same && fs::exists(other) && read_file(e.path().string()) == read_file(other.string());
    ++files;
  }
  return {same && files == 3, std::to_string(files) + " checkpoints and loss.csv " +
                                  (same ? "bit-identical" : "differ") + " across two runs"};
}

}  // namespace

int main() {
  TempDir scratch;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dwt-reconstruction", dwt_reconstruction},
      {"dwt-parseval", parseval},
      {"gradient-check", gradient_suite},
      {"attention-normalization", attention_normalization},
      {"output-shape-law", [&] { return shape_law(scratch); }},
      {"residual-identity", [&] { return residual_identity(scratch); }},
      {"overfit-single-image", overfit},
      {"scale-curriculum", curriculum},
      {"metric-oracles", metric_oracles},
      {"training-determinism", [&] { return determinism(scratch); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
