#include "liwt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "liwt/image_io.hpp"
#include "liwt/nn.hpp"

namespace liwt {

namespace fs = std::filesystem;

ImageSet load_images(const std::string& dir, std::int64_t min_side, const WarningSink& warn) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ImageError("image directory '" + dir + "' does not exist");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.push_back(entry.path().string());
  }
  if (ec) throw ImageError("cannot list '" + dir + "': " + ec.message());
  std::ranges::sort(files);

  ImageSet set;
  for (const auto& path : files) {
    try {
      auto img = load_png(path);
      if (std::min(img.dim(0), img.dim(1)) < min_side) {
        if (warn) {
          warn("skipping '" + path + "': " + std::to_string(img.dim(0)) + "x" + std::to_string(img.dim(1)) +
               " is smaller than " + std::to_string(min_side) + " pixels");
        }
        continue;
      }
      set.images.push_back(std::move(img));
      set.paths.push_back(path);
    } catch (const ImageError& e) {
      if (warn) warn(e.what());
    }
  }
  if (set.images.empty()) throw ImageError("no usable PNG images in '" + dir + "'");
  return set;
}

void CurriculumSchedule::validate() const {
  if (max_scales.size() != boundaries.size() + 1) {
    throw ConfigError("curriculum: need one more stage scale than boundaries");
  }
  double prev = 0.0;
  for (const double b : boundaries) {
    if (!(b > prev && b < 1.0)) throw ConfigError("curriculum: boundaries must increase within (0, 1)");
    prev = b;
  }
  double lo = min_scale;
  if (!(min_scale >= 1.0)) throw ConfigError("curriculum: minimum scale must be at least 1");
  for (const double s : max_scales) {
    if (!(s >= lo)) throw ConfigError("curriculum: stage scales must not decrease");
    lo = s;
  }
}

int CurriculumSchedule::stage(std::int64_t epoch, std::int64_t total) const {
  if (total <= 0 || epoch < 0 || epoch >= total) {
    throw InvalidArgument("curriculum: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total) + ")");
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(total);
  int k = 0;
  while (k < static_cast<int>(boundaries.size()) && frac >= boundaries[k]) ++k;
  return k;
}

double CurriculumSchedule::max_scale(std::int64_t epoch, std::int64_t total) const {
  return max_scales[static_cast<std::size_t>(stage(epoch, total))];
}

double sample_scale(const CurriculumSchedule& sched, std::int64_t epoch, std::int64_t total, std::mt19937_64& rng) {
  const double hi = sched.max_scale(epoch, total);
  if (hi <= sched.min_scale) return sched.min_scale;
  // Bits to [0, 1) directly, so the draw does not depend on library details.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return sched.min_scale + u * (hi - sched.min_scale);
}

std::int64_t hr_patch_side(std::int64_t p, double s) { return scaled_extent(s, p); }

PatchPair make_pair(const Tensorf& img, double s, std::int64_t p, std::mt19937_64& rng) {
  if (p < 2 || p % 2 != 0) throw InvalidArgument("make_pair: patch size must be even, got " + std::to_string(p));
  if (!(s >= 1.0)) throw InvalidArgument("make_pair: scale must be at least 1");
  const std::int64_t side = hr_patch_side(p, s);
  const std::int64_t h = img.dim(0), w = img.dim(1);
  if (h < side || w < side) {
    throw InvalidArgument("make_pair: " + shape_str(img.shape()) + " image cannot hold a " + std::to_string(side) +
                          " pixel crop");
  }
  const auto y0 = std::uniform_int_distribution<std::int64_t>(0, h - side)(rng);
  const auto x0 = std::uniform_int_distribution<std::int64_t>(0, w - side)(rng);
  std::vector<float> crop(static_cast<std::size_t>(side * side * 3));
  const auto src = img.data();
  for (std::int64_t y = 0; y < side; ++y) {
    std::copy_n(src.begin() + ((y0 + y) * w + x0) * 3, side * 3, crop.begin() + y * side * 3);
  }
  PatchPair pair;
  pair.hr = Tensorf(Shape{side, side, 3}, std::move(crop));
  pair.lr = resample(pair.hr, p, p, Interp::bicubic);
  pair.scale = static_cast<double>(side) / static_cast<double>(p);
  return pair;
}

QuerySample sample_queries(const Tensorf& hr, std::int64_t m, std::int64_t lr_h, std::int64_t lr_w,
                           std::mt19937_64& rng) {
  const std::int64_t h = hr.dim(0), w = hr.dim(1), n = h * w;
  if (m < 1 || m > n) {
    throw InvalidArgument("sample_queries: cannot draw " + std::to_string(m) + " of " + std::to_string(n) + " pixels");
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  // Partial Fisher-Yates: the first m entries form a uniform sample.
  for (std::int64_t i = 0; i < m; ++i) {
    const auto j = std::uniform_int_distribution<std::int64_t>(i, n - 1)(rng);
    std::swap(order[i], order[j]);
  }
  order.resize(static_cast<std::size_t>(m));
  const CoordSpace space{h, w};
  QuerySample out;
  out.coords.reserve(order.size());
  std::vector<float> rgb(static_cast<std::size_t>(m * 3));
  const auto src = hr.data();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto idx = order[k];
    out.coords.push_back(space.center(idx / w, idx % w));
    std::copy_n(src.begin() + idx * 3, 3, rgb.begin() + static_cast<std::int64_t>(k) * 3);
  }
  out.rgb = Tensorf(Shape{m, 3}, std::move(rgb));
  out.cell = cell_of(static_cast<double>(h) / static_cast<double>(lr_h), static_cast<double>(w) / static_cast<double>(lr_w),
                     lr_h, lr_w);
  return out;
}

TrainBatch make_batch(const ImageSet& set, std::span<const std::size_t> indices, const CurriculumSchedule& sched,
                      const BatchSettings& settings, std::int64_t epoch, std::int64_t total, std::mt19937_64& rng) {
  const std::int64_t p = settings.patch;
  const std::int64_t m = settings.queries > 0 ? settings.queries : p * p;
  TrainBatch batch;
  for (const auto idx : indices) {
    const auto& img = set.images.at(idx);
    const double s = settings.fixed_scale > 0.0 ? settings.fixed_scale : sample_scale(sched, epoch, total, rng);
    auto pair = make_pair(img, s, p, rng);
    TrainSample sample;
    sample.queries = sample_queries(pair.hr, std::min(m, pair.hr.numel() / 3), p, p, rng);
    sample.lr = std::move(pair.lr);
    sample.scale = pair.scale;
    batch.push_back(std::move(sample));
  }
  return batch;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::int64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(static_cast<std::uint64_t>(epoch) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace liwt
