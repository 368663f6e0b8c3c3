#include "liwt/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "liwt/config.hpp"
#include "liwt/data.hpp"
#include "liwt/gradcheck.hpp"
#include "liwt/image_io.hpp"
#include "liwt/metrics.hpp"
#include "liwt/model.hpp"
#include "liwt/nn.hpp"
#include "liwt/training.hpp"
#include "liwt/wavelet.hpp"

namespace liwt {

namespace fs = std::filesystem;

namespace {

template <typename F>
int guarded(Streams io, F&& body) {
  try {
    return body();
  } catch (const CheckpointError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ImageError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    io.err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

void set_threads(std::optional<int> threads) {
  if (threads && *threads > 0) omp_set_num_threads(*threads);
}

LiwtModel<float> load_model(const std::string& path) {
  try {
    const auto ckpt = load_checkpoint<float>(path);
    LiwtModel<float> model(ckpt.config, 0);
    restore_parameters(model, ckpt);
    return model;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint '" + path + "' is unusable: " + e.what());
  }
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Mirrors the last row/column so both extents become even.
Tensorf pad_to_even(const Tensorf& img) {
  const auto h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const auto ph = h + h % 2, pw = w + w % 2;
  if (ph == h && pw == w) return img;
  auto reflect = [](std::int64_t i, std::int64_t n) { return i < n ? i : std::max<std::int64_t>(n - 2, 0); };
  std::vector<float> out(static_cast<std::size_t>(ph * pw * c));
  const auto src = img.data();
  for (std::int64_t y = 0; y < ph; ++y)
    for (std::int64_t x = 0; x < pw; ++x)
      std::copy_n(src.begin() + (reflect(y, h) * w + reflect(x, w)) * c, c, out.begin() + (y * pw + x) * c);
  return Tensorf(Shape{ph, pw, c}, std::move(out));
}

// Super-resolves an image of any size; odd extents are padded and the query
// lattice is mapped into the padded coordinate space.
Tensorf upscale(const LiwtModel<float>& model, const Tensorf& img, std::int64_t out_h, std::int64_t out_w) {
  const auto h = img.dim(0), w = img.dim(1);
  const auto padded = pad_to_even(img);
  const double fy = static_cast<double>(h) / static_cast<double>(padded.dim(0));
  const double fx = static_cast<double>(w) / static_cast<double>(padded.dim(1));
  auto points = pixel_centers(out_h, out_w);
  if (fy != 1.0 || fx != 1.0) {
    for (auto& p : points) {
      p.y = -1.0 + (p.y + 1.0) * fy;
      p.x = -1.0 + (p.x + 1.0) * fx;
    }
  }
  const auto cell = cell_of(static_cast<double>(out_h) / static_cast<double>(h),
                            static_cast<double>(out_w) / static_cast<double>(w), h, w);
  const Cell padded_cell{cell.ch * fy, cell.cw * fx, cell.scaled_h, cell.scaled_w};
  return reshape(predict_points(model, padded, points, padded_cell), Shape{out_h, out_w, 3});
}

Tensorf crop_top_left(const Tensorf& img, std::int64_t h, std::int64_t w) {
  const auto c = img.dim(2), src_w = img.dim(1);
  std::vector<float> out(static_cast<std::size_t>(h * w * c));
  const auto src = img.data();
  for (std::int64_t y = 0; y < h; ++y) std::copy_n(src.begin() + y * src_w * c, w * c, out.begin() + y * w * c);
  return Tensorf(Shape{h, w, c}, std::move(out));
}

}  // namespace

std::pair<double, double> parse_scale(const std::string& text) {
  auto one = [&](const std::string& part) {
    try {
      std::size_t used = 0;
      const double v = std::stod(part, &used);
      if (used == part.size() && v >= 1.0 && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("scale '" + text + "': expected a number >= 1 or HxW such as 2x3");
  };
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) {
    const double s = one(text);
    return {s, s};
  }
  return {one(text.substr(0, x)), one(text.substr(x + 1))};
}

std::vector<double> parse_scale_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    const auto [sh, sw] = parse_scale(part);
    if (sh != sw) throw InvalidArgument("evaluation scales must be isotropic, got '" + part + "'");
    out.push_back(sh);
  }
  if (out.empty()) throw InvalidArgument("no evaluation scales given");
  return out;
}

int cmd_train(const TrainArgs& args, Streams io) {
  return guarded(io, [&] {
    RunConfig cfg;
    if (!args.config.empty()) {
      cfg = load_config(args.config);
    } else if (args.preset == "full") {
      cfg = full_config();
    } else if (!args.preset.empty() && args.preset != "desk") {
      throw ConfigError("unknown preset '" + args.preset + "'");
    }
    if (args.epochs) cfg.epochs = *args.epochs;
    if (args.seed) cfg.seed = *args.seed;
    if (args.threads) cfg.threads = *args.threads;
    if (args.out) cfg.run_dir = *args.out;
    if (args.data) cfg.train_dir = *args.data;
    cfg.validate();
    set_threads(cfg.threads);

    const auto images = load_images(cfg.train_dir, cfg.min_image_side(),
                                    [&](const std::string& msg) { io.err << "warning: " << msg << "\n"; });
    io.out << "loaded " << images.images.size() << " training images from " << cfg.train_dir << "\n";
    fs::create_directories(cfg.run_dir);
    {
      std::ofstream conf(fs::path(cfg.run_dir) / "config.ini");
      conf << render_config(cfg);
      if (!conf) throw CheckpointError("cannot write config into '" + cfg.run_dir + "'");
    }
    LiwtModel<float> model(cfg.model, cfg.seed);
    auto settings = fit_settings(cfg);
    if (args.resume) settings.resume = *args.resume;
    const auto manifest = fit(model, images, settings, [&](const std::string& msg) { io.out << msg << "\n"; });
    io.out << "run directory: " << cfg.run_dir << " (" << manifest.checkpoints.size() << " checkpoints)\n";
    return int{kExitOk};
  });
}

int cmd_sr(const SrArgs& args, Streams io) {
  return guarded(io, [&] {
    set_threads(args.threads);
    const auto [s_h, s_w] = parse_scale(args.scale);
    const auto model = load_model(args.checkpoint);
    const auto img = load_png(args.image);
    const auto h = img.dim(0), w = img.dim(1);
    const auto out_h = scaled_extent(s_h, h), out_w = scaled_extent(s_w, w);
    if (h % 2 != 0 || w % 2 != 0) {
      io.out << "input " << h << "x" << w << " padded to " << h + h % 2 << "x" << w + w % 2
             << " by reflection; output covers the original extent\n";
    }
    const auto out = clamp01(upscale(model, img, out_h, out_w));
    const auto path = args.out.empty() ? fs::path(args.image).stem().string() + "_sr.png" : args.out;
    save_png(path, out);
    io.out << "wrote " << path << " (" << out_h << "x" << out_w << ")\n";
    return int{kExitOk};
  });
}

int cmd_eval(const EvalArgs& args, Streams io) {
  return guarded(io, [&] {
    set_threads(args.threads);
    const auto scales = parse_scale_list(args.scales);
    const auto model = load_model(args.checkpoint);
    const auto images = load_images(args.hr_dir, 2, [&](const std::string& msg) { io.err << "warning: " << msg << "\n"; });
    EvalReport report;
    for (const double s : scales) {
      const auto crop = border_crop(s);
      EvalRow liwt_row{"LIWT", s, crop, {}}, bicubic_row{"Bicubic", s, crop, {}}, bilinear_row{"Bilinear", s, crop, {}};
      for (std::size_t i = 0; i < images.images.size(); ++i) {
        const auto& hr_full = images.images[i];
        const auto name = fs::path(images.paths[i]).filename().string();
        const auto lr_h = 2 * static_cast<std::int64_t>(std::floor(static_cast<double>(hr_full.dim(0)) / (2.0 * s)));
        const auto lr_w = 2 * static_cast<std::int64_t>(std::floor(static_cast<double>(hr_full.dim(1)) / (2.0 * s)));
        if (lr_h < 2 || lr_w < 2) {
          io.err << "warning: skipping " << name << " at x" << s << ": too small\n";
          continue;
        }
        const auto hr_h = scaled_extent(s, lr_h), hr_w = scaled_extent(s, lr_w);
        const auto hr = crop_top_left(hr_full, hr_h, hr_w);
        const auto lr = resample(hr, lr_h, lr_w, Interp::bicubic);
        auto score = [&](EvalRow& row, const Tensorf& pred) {
          const auto clamped = clamp01(pred);
          const bool windowed = hr_h - 2 * crop >= 11 && hr_w - 2 * crop >= 11;
          row.images.push_back({name, psnr(clamped, hr, crop), windowed ? ssim(clamped, hr, crop) : std::nan("")});
        };
        score(liwt_row, upscale(model, lr, hr_h, hr_w));
        score(bicubic_row, bicubic_baseline(lr, s, s));
        score(bilinear_row, resample(lr, hr_h, hr_w, Interp::bilinear));
      }
      report.rows.push_back(std::move(liwt_row));
      report.rows.push_back(std::move(bicubic_row));
      report.rows.push_back(std::move(bilinear_row));
    }
    fs::create_directories(args.out);
    {
      std::ofstream table(fs::path(args.out) / "eval.txt");
      report.write_table(table);
      std::ofstream csv(fs::path(args.out) / "eval.csv");
      report.write_csv(csv);
      if (!table || !csv) throw ImageError("cannot write the report into '" + args.out + "'");
    }
    report.write_table(io.out);
    return int{kExitOk};
  });
}

int cmd_dwt_inspect(const DwtArgs& args, Streams io) {
  return guarded(io, [&] {
    const auto img = load_png(args.image);
    if (img.dim(0) % 2 != 0 || img.dim(1) % 2 != 0) {
      throw InvalidArgument("dwt-inspect needs even image extents, got " + shape_str(img.shape()));
    }
    const Tensord x(img.shape(), std::vector<double>(img.data().begin(), img.data().end()));
    const auto bands = dwt(x);
    fs::create_directories(args.out);
    const std::array<Band, 4> order{Band::ll, Band::lh, Band::hl, Band::hh};
    const std::array<const char*, 4> names{"ll", "lh", "hl", "hh"};
    std::array<double, 4> energy{};
    for (int b = 0; b < 4; ++b) {
      const auto& band = bands[order[b]];
      const auto h = band.dim(0), w = band.dim(1), c = band.dim(2);
      const auto d = band.data();
      std::vector<double> gray(static_cast<std::size_t>(h * w));
      for (std::int64_t i = 0; i < h * w; ++i) {
        double acc = 0.0;
        for (std::int64_t ch = 0; ch < c; ++ch) acc += d[i * c + ch];
        gray[i] = acc / static_cast<double>(c);
      }
      for (const double v : d) energy[b] += v * v;
      const auto [lo, hi] = std::minmax_element(gray.begin(), gray.end());
      const double span = *hi - *lo;
      std::vector<float> norm(gray.size(), 0.0f);
      if (span > 0.0) {
        for (std::size_t i = 0; i < gray.size(); ++i) norm[i] = static_cast<float>((gray[i] - *lo) / span);
      }
      save_gray_png((fs::path(args.out) / (std::string(names[b]) + ".png")).string(), Tensorf(Shape{h, w}, std::move(norm)));
    }
    double total = 0.0;
    for (const double e : energy) total += e;
    std::ostringstream table;
    table << "band  energy              share\n";
    std::ofstream csv(fs::path(args.out) / "energy.csv");
    csv << "band,energy,share\n";
    for (int b = 0; b < 4; ++b) {
      const double share = total > 0.0 ? energy[b] / total : 0.0;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-5s %-19.10g %.8f\n", names[b], energy[b], share);
      table << buf;
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", names[b], energy[b], share);
      csv << buf;
    }
    if (!csv) throw ImageError("cannot write '" + (fs::path(args.out) / "energy.csv").string() + "'");
    io.out << table.str();
    return int{kExitOk};
  });
}

int cmd_grad_check(const GradCheckArgs& args, Streams io) {
  return guarded(io, [&] {
    set_threads(args.threads);
    ModelConfig cfg;
    cfg.features = 8;
    cfg.encoder_blocks = 1;
    cfg.werb_blocks = 1;
    cfg.heads = 2;
    cfg.pe_levels = 4;
    if (!args.config.empty()) cfg = load_config(args.config).model;
    cfg.validate();

    struct FaultReset {
      ~FaultReset() { debug::clear_gradient_fault(); }
    } reset;
    if (!args.inject_fault.empty()) {
      const auto colon = args.inject_fault.find(':');
      const auto op = args.inject_fault.substr(0, colon);
      const double factor = colon == std::string::npos ? 2.0 : std::stod(args.inject_fault.substr(colon + 1));
      debug::inject_gradient_fault(op, factor);
      io.out << "injected gradient fault: op '" << op << "' scaled by " << factor << "\n";
    }

    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::vector<std::string> failures;
    char buf[200];
    io.out << "primitive ops (f64, fourth-order central differences)\n";
    std::snprintf(buf, sizeof buf, "%-18s %12s %8s %6s  %s\n", "op", "max_rel_err", "checked", "kinks", "status");
    io.out << buf;
    for (const auto& c : check_primitives(args.seed)) {
      const bool pass = c.row.checked > 0 && c.row.max_rel_error < args.tolerance;
      ok = ok && pass;
      if (!pass) failures.push_back("op " + c.op + " (worst " + c.row.worst + ")");
      std::snprintf(buf, sizeof buf, "%-18s %12s %8lld %6lld  %s\n", c.op.c_str(), sci(c.row.max_rel_error).c_str(),
                    static_cast<long long>(c.row.checked), static_cast<long long>(c.row.kinks), pass ? "ok" : "FAIL");
      io.out << buf;
    }

    GradCheckOptions opts;
    opts.max_entries = args.max_entries;
    opts.seed = args.seed;
    const auto model = check_model_gradients(cfg, args.lr_size, args.queries, args.seed, opts);
    io.out << "\nmodel parameters (" << args.lr_size << "x" << args.lr_size << " LR, C=" << cfg.features
           << ", n=" << cfg.werb_blocks << ", heads=" << cfg.heads << ", L=" << cfg.pe_levels << ", "
           << args.queries << " queries, up to " << args.max_entries << " entries per tensor)\n";
    std::snprintf(buf, sizeof buf, "%-10s %12s %8s %6s  %-6s %s\n", "group", "max_rel_err", "checked", "kinks", "status",
                  "worst");
    io.out << buf;
    for (const auto& g : model.groups) {
      const bool pass = g.checked > 0 && g.max_rel_error < args.tolerance;
      ok = ok && pass;
      std::snprintf(buf, sizeof buf, "%-10s %12s %8lld %6lld  %-6s %s\n", g.name.c_str(), sci(g.max_rel_error).c_str(),
                    static_cast<long long>(g.checked), static_cast<long long>(g.kinks), pass ? "ok" : "FAIL",
                    g.worst.c_str());
      io.out << buf;
    }
    for (const auto& t : model.tensors) {
      if (t.max_rel_error >= args.tolerance) failures.push_back("parameter " + t.name + " (worst " + t.worst + ")");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io.out << "\n" << (ok ? "PASS" : "FAIL") << ": tolerance " << sci(args.tolerance) << ", " << fixed(secs, 1) << " s\n";
    for (const auto& f : failures) io.out << "  failing " << f << "\n";
    return ok ? int{kExitOk} : int{kExitInternal};
  });
}

}  // namespace liwt
