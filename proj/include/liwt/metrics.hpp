#pragma once

// Full-reference image quality on RGB in [0, 1].

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "liwt/tensor.hpp"

namespace liwt {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// Border removed before comparing at scale s: ceil(s) pixels per side.
std::int64_t border_crop(double scale);

// 10 log10(1 / MSE) over H x W x C after removing `crop` pixels from every
// side; +inf when the images agree exactly.
double psnr(const Tensorf& a, const Tensorf& b, std::int64_t crop);

// Mean over channels of single-scale SSIM with an 11 x 11 Gaussian window
// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over all
// window positions fully inside the cropped image.
double ssim(const Tensorf& a, const Tensorf& b, std::int64_t crop);

// Bicubic resize of an LR image to floor(s_h H) x floor(s_w W).
Tensorf bicubic_baseline(const Tensorf& img_lr, double s_h, double s_w);

Tensorf clamp01(const Tensorf& img);

struct ImageScore {
  std::string image;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalRow {
  std::string method;
  double scale = 1.0;
  std::int64_t crop = 0;
  std::vector<ImageScore> images;

  double mean_psnr() const;
  double mean_ssim() const;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  // Aligned table, one line per method and scale.
  void write_table(std::ostream& out) const;
  // "method,scale,crop,image,psnr,ssim" rows, including a "mean" image row.
  void write_csv(std::ostream& out) const;
};

std::string format_psnr(double db);

}  // namespace liwt
