#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "liwt/commands.hpp"
#include "liwt/config.hpp"
#include "liwt/image_io.hpp"
#include "liwt/model.hpp"
#include "support.hpp"

using namespace liwt;
using liwt::testing::random_tensor;
using liwt::testing::read_file;
using liwt::testing::run_cli;
using liwt::testing::synthetic_image;
using liwt::testing::TempDir;

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# small enough for unit tests
[model]
features = 8
encoder_blocks = 1
werb_blocks = 1
heads = 2
pe_levels = 4
decoder_hidden = 32

[data]
patch = 8
batch = 2
queries = 16

[train]
epochs = 2
checkpoint_every = 1
seed = 3
)";

ModelConfig tiny_model() {
  ModelConfig c;
  c.features = 8;
  c.encoder_blocks = 1;
  c.werb_blocks = 1;
  c.heads = 2;
  c.pe_levels = 4;
  c.decoder_hidden = 32;
  return c;
}

std::string write_checkpoint_file(const TempDir& dir, bool zero_decoder) {
  LiwtModel<float> m(tiny_model(), 21);
  if (zero_decoder) m.zero_decoder_output();
  const auto path = dir.str(zero_decoder ? "zero.ckpt" : "model.ckpt");
  save_checkpoint(path, model_checkpoint(m));
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string q(const std::string& s) { return "\"" + s + "\""; }

std::map<std::string, std::vector<std::string>> csv_rows(const std::string& text) {
  std::map<std::string, std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows[cells[0] + "|" + cells[1] + "|" + cells[3]] = cells;
  }
  return rows;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  std::istringstream in("[model]\nfeatures = 16 ; inline comment\n[train]\nseed = 9\nlr = 2e-4\n");
  const auto c = parse_config(in, "inline");
  EXPECT_EQ(c.model.features, 16);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.lr.initial, 2e-4);
  EXPECT_EQ(c.patch, 24);
}

TEST(Config, UnknownKeyNamesField) {
  std::istringstream in("[train]\nlearning_rate = 1\n");
  try {
    parse_config(in, "x.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.learning_rate"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("x.ini:2"), std::string::npos) << e.what();
  }
  std::istringstream bad_section("[optim]\nlr = 1\n");
  EXPECT_THROW(parse_config(bad_section, "y"), ConfigError);
  std::istringstream bad_value("[data]\npatch = 7\n");
  EXPECT_THROW(parse_config(bad_value, "z"), ConfigError);
}

TEST(Config, FullPreset) {
  std::istringstream in("preset = full\n[train]\nepochs = 3\n");
  const auto c = parse_config(in, "p");
  EXPECT_EQ(c.model.features, 64);
  EXPECT_EQ(c.patch, 48);
  EXPECT_EQ(c.epochs, 3);
  std::istringstream late("[train]\nepochs = 3\n[model]\n");
  EXPECT_NO_THROW(parse_config(late, "l"));
}

TEST(Config, RenderRoundTrip) {
  std::istringstream in(kTinyConfig);
  const auto c = parse_config(in, "tiny");
  std::istringstream again(render_config(c));
  EXPECT_EQ(config_records(parse_config(again, "rendered")), config_records(c));
}

TEST(ParseScale, Forms) {
  EXPECT_EQ(parse_scale("2"), std::make_pair(2.0, 2.0));
  EXPECT_EQ(parse_scale("2.2"), std::make_pair(2.2, 2.2));
  EXPECT_EQ(parse_scale("2x3"), std::make_pair(2.0, 3.0));
  EXPECT_THROW(parse_scale("0.5"), InvalidArgument);
  EXPECT_THROW(parse_scale("two"), InvalidArgument);
  EXPECT_EQ(parse_scale_list("2,3.3"), (std::vector<double>{2.0, 3.3}));
  EXPECT_THROW(parse_scale_list("2x3"), InvalidArgument);
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_EQ(run_cli("", dir.str()).code, 2);
  EXPECT_EQ(run_cli("frobnicate", dir.str()).code, 2);
  EXPECT_EQ(run_cli("sr --image x.png", dir.str()).code, 2);
}

TEST(Cli, TrainMissingDataDirectory) {
  TempDir dir;
  const auto missing = dir.str("no_such_dir");
  const auto r = run_cli("train --data " + q(missing) + " --out " + q(dir.str("run")), dir.str());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST(Cli, TrainZeroEpochsAndResumeFromManifest) {
  TempDir dir;
  fs::create_directories(dir.path() / "data");
  for (int k = 0; k < 2; ++k) save_png(dir.str("data/img" + std::to_string(k) + ".png"), random_tensor<float>({64, 64, 3}, 40 + k, 0, 1));
  write_text(dir.str("tiny.ini"), kTinyConfig);
  const auto base = "train --config " + q(dir.str("tiny.ini")) + " --data " + q(dir.str("data"));

  const auto zero = run_cli(base + " --epochs 0 --out " + q(dir.str("run0")), dir.str());
  ASSERT_EQ(zero.code, 0) << zero.output;
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir.path() / "run0" / "checkpoints")) files.push_back(e.path().filename());
  EXPECT_EQ(files, (std::vector<std::string>{"epoch_0000.ckpt"}));

  const auto one = run_cli(base + " --epochs 1 --threads 1 --out " + q(dir.str("run1")), dir.str());
  ASSERT_EQ(one.code, 0) << one.output;
  const auto from_manifest = load_config(dir.str("run1/manifest.txt"));
  std::istringstream tiny(kTinyConfig);
  EXPECT_EQ(model_config_fields(from_manifest.model), model_config_fields(parse_config(tiny, "tiny").model));
  EXPECT_EQ(from_manifest.model.features, 8);
  EXPECT_EQ(from_manifest.epochs, 1);
  EXPECT_EQ(from_manifest.queries, 16);

  const auto bad = run_cli(base + " --resume " + q(dir.str("tiny.ini")) + " --out " + q(dir.str("run2")), dir.str());
  EXPECT_EQ(bad.code, 3) << bad.output;
}

TEST(Cli, InvalidConfigExitsTwo) {
  TempDir dir;
  write_text(dir.str("bad.ini"), "[model]\nfeatures = 8\nwidth = 3\n");
  const auto r = run_cli("train --config " + q(dir.str("bad.ini")), dir.str());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("model.width"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir.path() / "runs"));
}

TEST(Cli, CorruptCheckpointExitsThree) {
  TempDir dir;
  write_text(dir.str("junk.ckpt"), "not a checkpoint");
  save_png(dir.str("in.png"), synthetic_image(8, 8));
  const auto r = run_cli("sr --checkpoint " + q(dir.str("junk.ckpt")) + " --image " + q(dir.str("in.png")), dir.str());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("junk.ckpt"), std::string::npos) << r.output;
  const auto missing = run_cli("eval --checkpoint " + q(dir.str("none.ckpt")) + " --hr " + q(dir.str()), dir.str());
  EXPECT_EQ(missing.code, 3);
}

TEST(Cli, SrOutputExtents) {
  TempDir dir;
  const auto ckpt = write_checkpoint_file(dir, false);
  save_png(dir.str("ten.png"), synthetic_image(10, 10));
  auto run = [&](const std::string& scale, const std::string& out) {
    const auto r = run_cli("sr --checkpoint " + q(ckpt) + " --image " + q(dir.str("ten.png")) + " --scale " + scale +
                               " --out " + q(dir.str(out)),
                           dir.str());
    EXPECT_EQ(r.code, 0) << r.output;
    return load_png(dir.str(out));
  };
  EXPECT_EQ(run("2.2", "a.png").shape(), (Shape{22, 22, 3}));
  EXPECT_EQ(run("2x3", "b.png").shape(), (Shape{20, 30, 3}));

  save_png(dir.str("odd.png"), synthetic_image(9, 7));
  const auto r = run_cli("sr --checkpoint " + q(ckpt) + " --image " + q(dir.str("odd.png")) + " --scale 2", dir.str());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("padded"), std::string::npos);
  EXPECT_EQ(load_png(dir.str("odd_sr.png")).shape(), (Shape{18, 14, 3}));
}

TEST(Cli, SrScaleOneWithZeroDecoderIsIdentity) {
  TempDir dir;
  const auto ckpt = write_checkpoint_file(dir, true);
  save_png(dir.str("in.png"), synthetic_image(12, 16));
  const auto r = run_cli("sr --checkpoint " + q(ckpt) + " --image " + q(dir.str("in.png")) + " --scale 1 --out " +
                             q(dir.str("out.png")),
                         dir.str());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto a = load_png(dir.str("in.png")), b = load_png(dir.str("out.png"));
  ASSERT_EQ(a.shape(), b.shape());
  EXPECT_LE(liwt::testing::max_abs_diff(a.data(), b.data()), 1.0 / 255.0 + 1e-6);
}

TEST(Cli, EvalZeroDecoderMatchesBilinear) {
  TempDir dir;
  const auto ckpt = write_checkpoint_file(dir, true);
  fs::create_directories(dir.path() / "hr");
  save_png(dir.str("hr/a.png"), synthetic_image(40, 36));
  save_png(dir.str("hr/b.png"), random_tensor<float>({30, 44, 3}, 50, 0, 1));
  const auto cmd = "eval --checkpoint " + q(ckpt) + " --hr " + q(dir.str("hr")) + " --scale 2,3.3 --out ";
  const auto r = run_cli(cmd + q(dir.str("e1")), dir.str());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = read_file(dir.str("e1/eval.csv"));
  const auto rows = csv_rows(csv);
  for (const std::string s : {"2", "3.2999999999999998"}) {
    for (const std::string img : {"a.png", "b.png", "mean"}) {
      ASSERT_TRUE(rows.count("LIWT|" + s + "|" + img)) << s << img << "\n" << csv;
      ASSERT_TRUE(rows.count("Bicubic|" + s + "|" + img));
      EXPECT_EQ(rows.at("LIWT|" + s + "|" + img)[4], rows.at("Bilinear|" + s + "|" + img)[4]) << s << img;
    }
  }
  EXPECT_EQ(rows.at("LIWT|2|a.png")[2], "2");
  EXPECT_EQ(rows.at("LIWT|3.2999999999999998|a.png")[2], "4");
  EXPECT_TRUE(fs::exists(dir.path() / "e1" / "eval.txt"));

  ASSERT_EQ(run_cli(cmd + q(dir.str("e2")), dir.str()).code, 0);
  EXPECT_EQ(csv, read_file(dir.str("e2/eval.csv")));
}

TEST(Cli, DwtInspectConstantImage) {
  TempDir dir;
  save_png(dir.str("c.png"), Tensorf(Shape{8, 8, 3}, 0.6f));
  const auto r = run_cli("dwt-inspect --image " + q(dir.str("c.png")) + " --out " + q(dir.str("bands")), dir.str());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* b : {"ll", "lh", "hl", "hh"}) {
    const auto img = load_png(dir.str(std::string("bands/") + b + ".png"));
    EXPECT_EQ(img.shape(), (Shape{4, 4, 3}));
  }
  const auto rows = read_file(dir.str("bands/energy.csv"));
  EXPECT_EQ(rows.rfind("band,energy,share\nll,", 0), 0u) << rows;
  EXPECT_NE(rows.find("lh,0,0\n"), std::string::npos) << rows;
  EXPECT_NE(rows.find("hl,0,0\n"), std::string::npos);
  EXPECT_NE(rows.find("hh,0,0\n"), std::string::npos);
}

TEST(Cli, DwtInspectHorizontalEdge) {
  TempDir dir;
  std::vector<float> v(16 * 16 * 3, 0.1f);
  for (int y = 5; y < 16; ++y)
    for (int x = 0; x < 16 * 3; ++x) v[y * 16 * 3 + x] = 0.9f;
  save_png(dir.str("edge.png"), Tensorf(Shape{16, 16, 3}, std::move(v)));
  const auto r = run_cli("dwt-inspect --image " + q(dir.str("edge.png")) + " --out " + q(dir.str("o")), dir.str());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(read_file(dir.str("o/energy.csv")));
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> share;
  double total = 0.0;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    share[line.substr(0, a)] = std::stod(line.substr(b + 1));
    total += share[line.substr(0, a)];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const double high = share["lh"] + share["hl"] + share["hh"];
  EXPECT_GT(high, 0.0);
  EXPECT_GT(share["lh"] / high, 0.9);

  save_png(dir.str("odd.png"), synthetic_image(7, 8));
  EXPECT_EQ(run_cli("dwt-inspect --image " + q(dir.str("odd.png")) + " --out " + q(dir.str("p")), dir.str()).code, 2);
}

TEST(Cli, GradCheckPassesAndCatchesFault) {
  TempDir dir;
  const auto ok = run_cli("grad-check --entries 16", dir.str());
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("PASS"), std::string::npos);
  for (const char* group : {"encoder", "werm", "wmpf", "wia", "bias_head", "decoder"}) {
    EXPECT_NE(ok.output.find(std::string("\n") + group + " "), std::string::npos) << group;
  }

  const auto bad = run_cli("grad-check --entries 16 --inject-fault sigmoid:1.5", dir.str());
  EXPECT_EQ(bad.code, 1) << bad.output;
  EXPECT_NE(bad.output.find("FAIL"), std::string::npos);
  EXPECT_NE(bad.output.find("failing op sigmoid"), std::string::npos) << bad.output;
}
