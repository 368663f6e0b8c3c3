#include "liwt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "liwt/coords.hpp"
#include "liwt/nn.hpp"

namespace liwt {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct Cropped {
  std::int64_t h, w, c, crop;
};

Cropped check_pair(const Tensorf& a, const Tensorf& b, std::int64_t crop, const char* who) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(who) + ": shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.rank() != 3) throw InvalidArgument(std::string(who) + ": expected H x W x C, got " + shape_str(a.shape()));
  if (crop < 0) throw InvalidArgument(std::string(who) + ": negative border crop");
  const auto h = a.dim(0) - 2 * crop, w = a.dim(1) - 2 * crop;
  if (h < 1 || w < 1) throw InvalidArgument(std::string(who) + ": border crop leaves no pixels");
  return {h, w, a.dim(2), crop};
}

std::array<double, kWindow> gaussian_1d() {
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& x, std::int64_t h, std::int64_t w,
                                 const std::array<double, kWindow>& g) {
  const std::int64_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x0 = 0; x0 < ow; ++x0) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * x[y * w + x0 + k];
      rows[y * ow + x0] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t y0 = 0; y0 < oh; ++y0)
    for (std::int64_t x0 = 0; x0 < ow; ++x0) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y0 + k) * ow + x0];
      out[y0 * ow + x0] = acc;
    }
  return out;
}

}  // namespace

std::int64_t border_crop(double scale) { return static_cast<std::int64_t>(std::ceil(scale - 1e-9)); }

double psnr(const Tensorf& a, const Tensorf& b, std::int64_t crop) {
  const auto g = check_pair(a, b, crop, "psnr");
  const auto ad = a.data(), bd = b.data();
  const std::int64_t w_full = a.dim(1);
  double se = 0.0;
  for (std::int64_t y = 0; y < g.h; ++y)
    for (std::int64_t x = 0; x < g.w; ++x)
      for (std::int64_t ch = 0; ch < g.c; ++ch) {
        const auto i = ((y + crop) * w_full + x + crop) * g.c + ch;
        const double d = static_cast<double>(ad[i]) - static_cast<double>(bd[i]);
        se += d * d;
      }
  const double mse = se / static_cast<double>(g.h * g.w * g.c);
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensorf& a, const Tensorf& b, std::int64_t crop) {
  const auto g = check_pair(a, b, crop, "ssim");
  if (g.h < kWindow || g.w < kWindow) {
    throw InvalidArgument("ssim: " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                          " after cropping is smaller than the 11x11 window");
  }
  const auto win = gaussian_1d();
  const auto ad = a.data(), bd = b.data();
  const std::int64_t w_full = a.dim(1);
  const std::size_t n = static_cast<std::size_t>(g.h * g.w);
  double total = 0.0;
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (std::int64_t y = 0; y < g.h; ++y)
      for (std::int64_t x = 0; x < g.w; ++x) {
        const auto i = ((y + crop) * w_full + x + crop) * g.c + ch;
        const auto k = static_cast<std::size_t>(y * g.w + x);
        pa[k] = ad[i];
        pb[k] = bd[i];
        aa[k] = pa[k] * pa[k];
        bb[k] = pb[k] * pb[k];
        ab[k] = pa[k] * pb[k];
      }
    const auto mu_a = filter_valid(pa, g.h, g.w, win), mu_b = filter_valid(pb, g.h, g.w, win);
    const auto e_aa = filter_valid(aa, g.h, g.w, win), e_bb = filter_valid(bb, g.h, g.w, win);
    const auto e_ab = filter_valid(ab, g.h, g.w, win);
    double acc = 0.0;
    for (std::size_t k = 0; k < mu_a.size(); ++k) {
      const double va = e_aa[k] - mu_a[k] * mu_a[k];
      const double vb = e_bb[k] - mu_b[k] * mu_b[k];
      const double cov = e_ab[k] - mu_a[k] * mu_b[k];
      acc += ((2.0 * mu_a[k] * mu_b[k] + kC1) * (2.0 * cov + kC2)) /
             ((mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + kC1) * (va + vb + kC2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(g.c);
}

Tensorf bicubic_baseline(const Tensorf& img_lr, double s_h, double s_w) {
  if (!(s_h >= 1.0) || !(s_w >= 1.0)) throw InvalidArgument("bicubic_baseline: scale must be at least 1");
  return resample(img_lr, scaled_extent(s_h, img_lr.dim(0)), scaled_extent(s_w, img_lr.dim(1)), Interp::bicubic);
}

Tensorf clamp01(const Tensorf& img) {
  std::vector<float> v(img.data().begin(), img.data().end());
  for (auto& x : v) x = std::clamp(x, 0.0f, 1.0f);
  return Tensorf(img.shape(), std::move(v));
}

double EvalRow::mean_psnr() const {
  if (images.empty()) return 0.0;
  double s = 0.0;
  for (const auto& i : images) s += i.psnr;
  return s / static_cast<double>(images.size());
}

double EvalRow::mean_ssim() const {
  if (images.empty()) return 0.0;
  double s = 0.0;
  for (const auto& i : images) s += i.ssim;
  return s / static_cast<double>(images.size());
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

void EvalReport::write_table(std::ostream& out) const {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %7s %5s %10s %8s %7s\n", static_cast<int>(width), "method", "scale", "crop",
                "psnr_db", "ssim", "images");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %7.3g %5lld %10s %8.5f %7zu\n", static_cast<int>(width), r.method.c_str(),
                  r.scale, static_cast<long long>(r.crop), format_psnr(r.mean_psnr()).c_str(), r.mean_ssim(),
                  r.images.size());
    out << buf;
  }
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "method,scale,crop,image,psnr,ssim\n";
  char buf[64];
  auto num = [&buf](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    for (const auto& i : r.images) {
      out << r.method << ',' << num(r.scale) << ',' << r.crop << ',' << i.image << ',' << num(i.psnr) << ','
          << num(i.ssim) << '\n';
    }
    out << r.method << ',' << num(r.scale) << ',' << r.crop << ",mean," << num(r.mean_psnr()) << ','
        << num(r.mean_ssim()) << '\n';
  }
}

}  // namespace liwt
