#pragma once

#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "liwt/ops.hpp"
#include "liwt/tensor.hpp"

namespace liwt::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<T>(u(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename A, typename B>
double max_abs_diff(std::span<const A> a, std::span<const B> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("liwt_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = {}) const { return leaf.empty() ? path_.string() : (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

// Checkerboard, a diagonal edge and a smooth sinusoid in the three channels.
inline Tensorf synthetic_image(std::int64_t h, std::int64_t w) {
  std::vector<float> v(static_cast<std::size_t>(h * w * 3));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      float* px = &v[static_cast<std::size_t>((y * w + x) * 3)];
      px[0] = ((x / 4 + y / 4) % 2) ? 0.9f : 0.1f;
      px[1] = x > y ? 0.8f : 0.2f;
      px[2] = 0.5f + 0.4f * std::sin(x * 0.7f) * std::cos(y * 0.5f);
    }
  return Tensorf(Shape{h, w, 3}, std::move(v));
}

// Direct 2D windowed SSIM, one window position at a time.
inline double ssim_oracle(const Tensorf& a, const Tensorf& b) {
  const int n = 11;
  double g[11][11], total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dy = i - 5, dx = j - 5;
      g[i][j] = std::exp(-(dy * dy + dx * dx) / (2 * 1.5 * 1.5));
      total += g[i][j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  const auto h = a.dim(0), w = a.dim(1), ch = a.dim(2);
  double acc = 0.0;
  for (std::int64_t c = 0; c < ch; ++c) {
    double plane = 0.0;
    std::int64_t count = 0;
    for (std::int64_t y0 = 0; y0 + n <= h; ++y0)
      for (std::int64_t x0 = 0; x0 + n <= w; ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const auto k = ((y0 + i) * w + x0 + j) * ch + c;
            const double wt = g[i][j] / total, va = a.at(k), vb = b.at(k);
            ma += wt * va;
            mb += wt * vb;
            saa += wt * va * va;
            sbb += wt * vb * vb;
            sab += wt * va * vb;
          }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        plane += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
    acc += plane / static_cast<double>(count);
  }
  return acc / static_cast<double>(ch);
}

// Largest relative error between reverse-mode gradients and plain central
// differences |f(x+h) - f(x-h)| / 2h over every entry of every leaf.
template <typename T>
double fd_max_rel_error(const std::function<Tensor<T>()>& loss, std::vector<Tensor<T>> leaves, double h,
                        double floor) {
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(loss());
  double worst = 0.0;
  for (auto& t : leaves) {
    const std::vector<T> analytic = t.has_grad() ? std::vector<T>(t.grad().begin(), t.grad().end())
                                                 : std::vector<T>(static_cast<std::size_t>(t.numel()), T(0));
    auto v = t.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T orig = v[i];
      NoGradGuard guard;
      v[i] = static_cast<T>(orig + h);
      const double fp = loss().item();
      v[i] = static_cast<T>(orig - h);
      const double fm = loss().item();
      v[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  for (auto& t : leaves) t.zero_grad();
  return worst;
}

// Contracts any tensor with fixed pseudo-random weights into a scalar.
template <typename T>
Tensor<T> project(const Tensor<T>& out, std::uint64_t seed = 99) {
  return sum(mul(out, random_tensor<T>(out.shape(), seed)));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct RunResult {
  int code = -1;
  std::string output;
};

// Runs the command-line tool inside `scratch` with stdout and stderr
// captured together.
inline RunResult run_cli(const std::string& args, const std::string& scratch) {
  const std::string log = scratch + "/cli_output.txt";
  const std::string cmd = "cd \"" + scratch + "\" && \"" + std::string(LIWT_CLI_PATH) + "\" " + args + " > \"" + log + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_file(log);
  return r;
}

}  // namespace liwt::testing
