#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "liwt/training.hpp"
#include "support.hpp"

using namespace liwt;
using liwt::testing::random_tensor;
using liwt::testing::read_file;
using liwt::testing::TempDir;

namespace fs = std::filesystem;

namespace {

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

TrainBatch fixed_batch(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto hr = random_tensor<float>({16, 16, 3}, seed, 0, 1);
  TrainSample s;
  s.lr = resample(hr, 8, 8, Interp::bicubic);
  s.queries = sample_queries(hr, 64, 8, 8, rng);
  s.scale = 2.0;
  return {s};
}

std::vector<std::vector<float>> snapshot(const LiwtModel<float>& m) {
  std::vector<std::vector<float>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

ImageSet tiny_images() {
  ImageSet set;
  for (std::uint64_t k = 0; k < 3; ++k) {
    set.images.push_back(random_tensor<float>({64, 64, 3}, 100 + k, 0, 1));
    set.paths.push_back("img" + std::to_string(k));
  }
  return set;
}

FitSettings tiny_settings(const std::string& dir, std::int64_t epochs) {
  FitSettings s;
  s.epochs = epochs;
  s.checkpoint_every = 2;
  s.batch = 2;
  s.seed = 17;
  s.samples.patch = 8;
  s.samples.queries = 16;
  s.run_dir = dir;
  s.config_records = {{"train.seed", "17"}};
  return s;
}

}  // namespace

TEST(LrSchedule, StepDecay) {
  EXPECT_DOUBLE_EQ(lr_at(0), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(199), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(200), 5e-5);
  EXPECT_DOUBLE_EQ(lr_at(999), 1e-4 * std::pow(0.5, 4));
  for (std::int64_t e = 1; e < 3000; ++e) ASSERT_LE(lr_at(e), lr_at(e - 1));
  EXPECT_THROW(lr_at(-1), InvalidArgument);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensord w(Shape{3}, {0.5, -1.0, 2.0});
  w.set_requires_grad(true);
  Adam<double> opt({{"w", w}});
  opt.step(1e-2);
  EXPECT_EQ(w.at(0), 0.5);
  EXPECT_EQ(w.at(1), -1.0);
  EXPECT_EQ(w.at(2), 2.0);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  Tensord w(Shape{4}, {1.0, 1.0, 1.0, 1.0});
  w.set_requires_grad(true);
  backward(sum(mul(w, Tensord(Shape{4}, {0.3, -2.0, 5e-3, -40.0}))));
  Adam<double> opt({{"w", w}});
  opt.step(1e-3);
  const double expected[] = {-1e-3, 1e-3, -1e-3, 1e-3};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(w.at(i) - 1.0, expected[i], 1e-8) << i;
}

TEST(Adam, QuadraticToyConverges) {
  Tensord w = Tensord::scalar(0.0);
  w.set_requires_grad(true);
  Adam<double> opt({{"w", w}});
  const double target = 3.0;
  for (int step = 0; step < 200; ++step) {
    w.zero_grad();
    const auto d = sub(w, Tensord::scalar(target));
    backward(mul(d, d));
    opt.step(0.1);
  }
  EXPECT_NEAR(w.item(), target, 2e-2);
}

TEST(TrainStep, PerfectPredictionIsStationary) {
  LiwtModel<float> m(tiny_config(), 1);
  auto batch = fixed_batch(2);
  {
    NoGradGuard guard;
    auto& q = batch[0].queries;
    q.rgb = forward(m, batch[0].lr, std::span<const Point2>(q.coords), std::span<const Cell>(&q.cell, 1));
  }
  const auto before = snapshot(m);
  Adam<float> opt(m.parameters());
  EXPECT_EQ(train_step(m, batch, opt, 1e-3), 0.0);
  for (const auto& p : m.parameters()) {
    for (const auto g : p.tensor.grad()) ASSERT_EQ(g, 0.0f) << p.name;
  }
  EXPECT_EQ(snapshot(m), before);
}

TEST(TrainStep, SmallStepDecreasesLoss) {
  LiwtModel<float> m(tiny_config(), 3);
  const auto batch = fixed_batch(4);
  Adam<float> opt(m.parameters());
  const double before = batch_loss(m, batch);
  const double reported = train_step(m, batch, opt, 1e-6);
  EXPECT_DOUBLE_EQ(reported, before);
  EXPECT_LT(batch_loss(m, batch), before);
}

TEST(TrainStep, NonFiniteLossIsFatal) {
  LiwtModel<float> m(tiny_config(), 5);
  auto batch = fixed_batch(6);
  auto rgb = batch[0].queries.rgb.detach();
  rgb.mutable_data()[4] = std::numeric_limits<float>::quiet_NaN();
  batch[0].queries.rgb = rgb;
  const auto before = snapshot(m);
  Adam<float> opt(m.parameters());
  EXPECT_THROW(train_step(m, batch, opt, 1e-3), NonFiniteLoss);
  EXPECT_EQ(snapshot(m), before);
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Manifest, RoundTrip) {
  TempDir dir;
  RunManifest m;
  m.config = {{"model.features", "8"}, {"train.run_dir", "a b/c"}};
  m.seed = 42;
  m.history = {{1, 0.123456789012345678, 1e-4, 3}, {2, 0.1, 5e-5, 3}};
  m.checkpoints = {{0, "checkpoints/epoch_0000.ckpt"}, {2, "checkpoints/epoch_0002.ckpt"}};
  m.write(dir.str("manifest.txt"));
  const auto r = RunManifest::read(dir.str("manifest.txt"));
  EXPECT_EQ(r.config, m.config);
  EXPECT_EQ(r.seed, 42u);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0].loss, m.history[0].loss);
  EXPECT_EQ(r.history[1].lr, 5e-5);
  EXPECT_EQ(r.checkpoints, m.checkpoints);
}

TEST(Fit, ZeroEpochsWritesInitialCheckpointOnly) {
  TempDir dir;
  LiwtModel<float> m(tiny_config(), 7);
  const auto manifest = fit(m, tiny_images(), tiny_settings(dir.str("run"), 0), {});
  EXPECT_TRUE(manifest.history.empty());
  ASSERT_EQ(manifest.checkpoints.size(), 1u);
  EXPECT_EQ(manifest.checkpoints[0].first, 0);
  EXPECT_TRUE(fs::exists(dir.path() / "run" / manifest.checkpoints[0].second));
  EXPECT_EQ(read_file(dir.str("run/loss.csv")), "epoch,step,loss,lr\n");
  const auto ck = load_checkpoint<float>(dir.str("run/checkpoints/epoch_0000.ckpt"));
  EXPECT_EQ(ck.meta.at("epoch"), "0");
  EXPECT_EQ(RunManifest::read(dir.str("run/manifest.txt")).checkpoints.size(), 1u);
}

TEST(Fit, HistoryCheckpointsAndLossCurve) {
  TempDir dir;
  LiwtModel<float> m(tiny_config(), 8);
  const auto manifest = fit(m, tiny_images(), tiny_settings(dir.str("run"), 3), {});
  ASSERT_EQ(manifest.history.size(), 3u);
  for (const auto& r : manifest.history) {
    EXPECT_EQ(r.steps, 2);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_DOUBLE_EQ(r.lr, 1e-4);
  }
  std::vector<std::int64_t> epochs;
  for (const auto& c : manifest.checkpoints) epochs.push_back(c.first);
  EXPECT_EQ(epochs, (std::vector<std::int64_t>{0, 2, 3}));
  const auto csv = read_file(dir.str("run/loss.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 6);
  const auto ck = load_checkpoint<float>(dir.str("run/checkpoints/epoch_0003.ckpt"));
  EXPECT_EQ(ck.meta.at("step"), "6");
  bool has_optim = false;
  for (const auto& t : ck.tensors) has_optim = has_optim || t.name.rfind("optim.m.", 0) == 0;
  EXPECT_TRUE(has_optim);
}

TEST(Fit, ResumeReproducesUninterruptedRun) {
  omp_set_num_threads(1);
  TempDir dir;
  const auto images = tiny_images();
  {
    LiwtModel<float> m(tiny_config(), 9);
    fit(m, images, tiny_settings(dir.str("full"), 4), {});
  }
  fs::copy(dir.path() / "full", dir.path() / "resumed", fs::copy_options::recursive);
  fs::remove(dir.path() / "resumed" / "checkpoints" / "epoch_0004.ckpt");
  {
    LiwtModel<float> m(tiny_config(), 12345);
    auto s = tiny_settings(dir.str("resumed"), 4);
    s.resume = dir.str("resumed/checkpoints/epoch_0002.ckpt");
    fit(m, images, s, {});
  }
  EXPECT_EQ(read_file(dir.str("full/loss.csv")), read_file(dir.str("resumed/loss.csv")));
  EXPECT_EQ(read_file(dir.str("full/manifest.txt")), read_file(dir.str("resumed/manifest.txt")));
  EXPECT_EQ(read_file(dir.str("full/checkpoints/epoch_0004.ckpt")),
            read_file(dir.str("resumed/checkpoints/epoch_0004.ckpt")));
}

TEST(Fit, ResumeRejectsOtherModel) {
  TempDir dir;
  {
    LiwtModel<float> m(tiny_config(), 10);
    fit(m, tiny_images(), tiny_settings(dir.str("run"), 0), {});
  }
  auto wide = tiny_config();
  wide.features = 16;
  LiwtModel<float> m(wide, 11);
  auto s = tiny_settings(dir.str("run"), 2);
  s.resume = dir.str("run/checkpoints/epoch_0000.ckpt");
  EXPECT_THROW(fit(m, tiny_images(), s, {}), CheckpointError);
}
