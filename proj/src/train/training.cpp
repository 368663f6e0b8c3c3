#include "liwt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "liwt/ops.hpp"

namespace liwt {

namespace fs = std::filesystem;

double LrSchedule::at(std::int64_t epoch) const {
  if (epoch < 0) throw InvalidArgument("lr schedule: negative epoch");
  const auto k = decay_every > 0 ? epoch / decay_every : 0;
  return initial * std::pow(factor, static_cast<double>(k));
}

double lr_at(std::int64_t epoch) { return LrSchedule{}.at(epoch); }

template <typename T>
Adam<T>::Adam(std::vector<NamedTensor<T>> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  if (!(lr > 0.0)) throw InvalidArgument("adam: learning rate must be positive");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T> p = params_[k].tensor;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      const double mi = beta1_ * m[i] + (1.0 - beta1_) * gi;
      const double vi = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(w[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps_));
    }
  }
}

template <typename T>
std::vector<NamedTensor<T>> Adam<T>::state() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out.push_back({"optim.m." + params_[k].name, Tensor<T>(params_[k].tensor.shape(), m_[k])});
    out.push_back({"optim.v." + params_[k].name, Tensor<T>(params_[k].tensor.shape(), v_[k])});
  }
  return out;
}

template <typename T>
void Adam<T>::load_state(const std::vector<NamedTensor<T>>& tensors, std::int64_t steps) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (const char* kind : {"m", "v"}) {
      const std::string name = std::string("optim.") + kind + "." + params_[k].name;
      const auto it = std::ranges::find_if(tensors, [&](const NamedTensor<T>& t) { return t.name == name; });
      if (it == tensors.end()) throw CheckpointError("checkpoint is missing optimizer tensor '" + name + "'");
      if (it->tensor.shape() != params_[k].tensor.shape()) {
        throw CheckpointError("optimizer tensor '" + name + "' has shape " + shape_str(it->tensor.shape()));
      }
      auto& dst = kind[0] == 'm' ? m_[k] : v_[k];
      dst.assign(it->tensor.data().begin(), it->tensor.data().end());
    }
  }
  t_ = steps;
}

template class Adam<float>;
template class Adam<double>;

namespace {

struct LossTerms {
  Tensorf loss;
  std::vector<double> per_sample;
};

LossTerms compute_loss(const LiwtModel<float>& model, const TrainBatch& batch) {
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  LossTerms out;
  Tensorf total;
  std::int64_t count = 0;
  for (const auto& s : batch) {
    const auto pred = forward(model, s.lr, std::span<const Point2>(s.queries.coords),
                              std::span<const Cell>(&s.queries.cell, 1));
    const auto part = l1(pred, s.queries.rgb, Reduction::sum);
    out.per_sample.push_back(static_cast<double>(part.item()) / static_cast<double>(s.queries.rgb.numel()));
    total = total.defined() ? add(total, part) : part;
    count += s.queries.rgb.numel();
  }
  out.loss = scale(total, 1.0f / static_cast<float>(count));
  return out;
}

std::string nonfinite_dump(const LiwtModel<float>& model, const TrainBatch& batch, const LossTerms& terms, double lr) {
  std::ostringstream os;
  os << "non-finite training loss " << terms.loss.item() << " at lr " << lr << "\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    os << "  sample " << i << ": scale " << batch[i].scale << ", lr " << shape_str(batch[i].lr.shape()) << ", loss "
       << terms.per_sample[i] << "\n";
  }
  for (const auto& p : model.parameters()) {
    double peak = 0.0;
    bool finite = true;
    for (const float v : p.tensor.data()) {
      finite = finite && std::isfinite(v);
      peak = std::max(peak, static_cast<double>(std::abs(v)));
    }
    if (!finite || peak > 1e6) os << "  parameter " << p.name << ": max |w| " << peak << (finite ? "" : " (non-finite)") << "\n";
  }
  return os.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw CheckpointError("cannot write '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

double batch_loss(const LiwtModel<float>& model, const TrainBatch& batch) {
  NoGradGuard guard;
  return static_cast<double>(compute_loss(model, batch).loss.item());
}

double train_step(LiwtModel<float>& model, const TrainBatch& batch, Adam<float>& opt, double lr) {
  model.zero_grad();
  const auto terms = compute_loss(model, batch);
  const double value = terms.loss.item();
  if (!std::isfinite(value)) throw NonFiniteLoss(nonfinite_dump(model, batch, terms, lr));
  backward(terms.loss);
  opt.step(lr);
  return value;
}

std::string checkpoint_name(std::int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04lld.ckpt", static_cast<long long>(epoch));
  return std::string("checkpoints/") + buf;
}

void RunManifest::write(const std::string& path) const {
  std::ostringstream os;
  os << "liwt-manifest 1\n";
  os << "seed " << seed << "\n";
  for (const auto& [k, v] : config) os << "config " << k << " = " << v << "\n";
  for (const auto& r : history) {
    os << "epoch " << r.epoch << " loss " << format_double(r.loss) << " lr " << format_double(r.lr) << " steps "
       << r.steps << "\n";
  }
  for (const auto& [e, p] : checkpoints) os << "checkpoint " << e << " " << p << "\n";
  write_text_atomic(path, os.str());
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path + "'");
  RunManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    auto bad = [&] { return ConfigError(path + ":" + std::to_string(lineno) + ": malformed record '" + line + "'"); };
    if (kind == "liwt-manifest") {
      continue;
    } else if (kind == "seed") {
      if (!(ls >> m.seed)) throw bad();
    } else if (kind == "config") {
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw bad();
      m.config.emplace_back(line.substr(7, eq - 7), line.substr(eq + 3));
    } else if (kind == "epoch") {
      EpochRecord r;
      std::string l, lr, st;
      if (!(ls >> r.epoch >> l >> r.loss >> lr >> r.lr >> st >> r.steps)) throw bad();
      m.history.push_back(r);
    } else if (kind == "checkpoint") {
      std::int64_t e = 0;
      std::string p;
      if (!(ls >> e >> p)) throw bad();
      m.checkpoints.emplace_back(e, p);
    } else {
      throw bad();
    }
  }
  return m;
}

RunManifest fit(LiwtModel<float>& model, const ImageSet& images, const FitSettings& settings, const Logger& log) {
  if (settings.run_dir.empty()) throw ConfigError("train: run directory is not set");
  if (settings.epochs < 0) throw ConfigError("train.epochs: must be non-negative");
  if (settings.batch < 1) throw ConfigError("data.batch: must be positive");
  if (settings.epoch_repeat < 1) throw ConfigError("data.epoch_repeat: must be positive");
  settings.curriculum.validate();
  const fs::path run(settings.run_dir);
  std::error_code ec;
  fs::create_directories(run / "checkpoints", ec);
  if (ec) throw CheckpointError("cannot create '" + (run / "checkpoints").string() + "': " + ec.message());

  auto params = model.parameters();
  Adam<float> opt(params);
  RunManifest manifest;
  manifest.config = settings.config_records;
  manifest.seed = settings.seed;
  std::int64_t start = 0;
  std::int64_t global_step = 0;
  std::vector<std::string> csv_rows;

  if (!settings.resume.empty()) {
    const auto ckpt = load_checkpoint<float>(settings.resume);
    if (!(ckpt.config == model.config())) throw CheckpointError("resume checkpoint was written for a different model");
    restore_parameters(model, ckpt);
    try {
      start = std::stoll(ckpt.meta.at("epoch"));
      global_step = std::stoll(ckpt.meta.at("step"));
    } catch (const std::exception&) {
      throw CheckpointError("resume checkpoint lacks epoch/step metadata");
    }
    opt.load_state(ckpt.tensors, global_step);
    if (fs::exists(run / "manifest.txt")) {
      const auto old = RunManifest::read((run / "manifest.txt").string());
      for (const auto& r : old.history) {
        if (r.epoch <= start) manifest.history.push_back(r);
      }
      for (const auto& c : old.checkpoints) {
        if (c.first <= start) manifest.checkpoints.push_back(c);
      }
    }
    std::ifstream csv(run / "loss.csv");
    std::string row;
    std::getline(csv, row);
    while (std::getline(csv, row)) {
      if (!row.empty() && std::stoll(row.substr(0, row.find(','))) <= start) csv_rows.push_back(row);
    }
    if (log) log("resuming from epoch " + std::to_string(start) + " (" + settings.resume + ")");
  }

  auto write_csv = [&] {
    std::string text = "epoch,step,loss,lr\n";
    for (const auto& r : csv_rows) text += r + "\n";
    write_text_atomic(run / "loss.csv", text);
  };
  auto save = [&](std::int64_t epoch) {
    Checkpoint<float> ckpt = model_checkpoint(model);
    for (auto& t : opt.state()) ckpt.tensors.push_back(std::move(t));
    ckpt.meta["epoch"] = std::to_string(epoch);
    ckpt.meta["step"] = std::to_string(global_step);
    ckpt.meta["seed"] = std::to_string(settings.seed);
    ckpt.meta["total_epochs"] = std::to_string(settings.epochs);
    const auto rel = checkpoint_name(epoch);
    save_checkpoint((run / rel).string(), ckpt);
    std::erase_if(manifest.checkpoints, [&](const auto& c) { return c.first == epoch; });
    manifest.checkpoints.emplace_back(epoch, rel);
    manifest.write((run / "manifest.txt").string());
  };

  if (settings.resume.empty()) {
    write_csv();
    save(0);
  }
  for (std::int64_t e = start; e < settings.epochs; ++e) {
    auto rng = epoch_rng(settings.seed, e);
    std::vector<std::size_t> order;
    for (std::int64_t r = 0; r < settings.epoch_repeat; ++r) {
      for (std::size_t i = 0; i < images.images.size(); ++i) order.push_back(i);
    }
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = settings.lr.at(e);
    double sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(settings.batch)) {
      const auto len = std::min(order.size() - b, static_cast<std::size_t>(settings.batch));
      const auto batch = make_batch(images, std::span<const std::size_t>(order).subspan(b, len), settings.curriculum,
                                    settings.samples, e, settings.epochs, rng);
      double loss = 0.0;
      try {
        loss = train_step(model, batch, opt, lr);
      } catch (const NonFiniteLoss& err) {
        std::ofstream(run / "nonfinite_dump.txt") << err.what();
        throw;
      }
      ++global_step;
      ++steps;
      sum += loss;
      csv_rows.push_back(std::to_string(e + 1) + "," + std::to_string(global_step) + "," + format_double(loss) + "," +
                         format_double(lr));
    }
    const EpochRecord rec{e + 1, sum / static_cast<double>(std::max<std::int64_t>(steps, 1)), lr, steps};
    manifest.history.push_back(rec);
    write_csv();
    if (log) log("epoch " + std::to_string(rec.epoch) + "/" + std::to_string(settings.epochs) + " loss " +
                 format_double(rec.loss) + " lr " + format_double(lr));
    if ((e + 1) % std::max<std::int64_t>(settings.checkpoint_every, 1) == 0 || e + 1 == settings.epochs) {
      save(e + 1);
    } else {
      manifest.write((run / "manifest.txt").string());
    }
  }
  return manifest;
}

}  // namespace liwt
