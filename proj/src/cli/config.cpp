#include "liwt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace liwt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

std::int64_t as_int(const std::string& field, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(field + ": expected an integer, got '" + value + "'");
}

double as_double(const std::string& field, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(field + ": expected a number, got '" + value + "'");
}

std::vector<double> as_list(const std::string& field, const std::string& value) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string part;
  while (std::getline(is, part, ',')) out.push_back(as_double(field, trim(part)));
  if (out.empty()) throw ConfigError(field + ": expected a comma-separated list");
  return out;
}

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.") + e.what());
  }
  auto fail = [](const std::string& f, const std::string& why) { throw ConfigError(f + ": " + why); };
  if (patch < 2 || patch % 2 != 0) fail("data.patch", "must be an even number of at least 2");
  if (batch < 1) fail("data.batch", "must be positive");
  if (queries < 0 || queries > patch * patch) fail("data.queries", "must lie in [0, patch^2]");
  if (epoch_repeat < 1) fail("data.epoch_repeat", "must be positive");
  if (fixed_scale != 0.0 && !(fixed_scale >= 1.0)) fail("data.fixed_scale", "must be 0 or at least 1");
  try {
    curriculum.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("data.") + e.what());
  }
  if (epochs < 0) fail("train.epochs", "must be non-negative");
  if (checkpoint_every < 1) fail("train.checkpoint_every", "must be positive");
  if (!(lr.initial > 0.0)) fail("train.lr", "must be positive");
  if (lr.decay_every < 1) fail("train.lr_decay_epochs", "must be positive");
  if (!(lr.factor > 0.0 && lr.factor <= 1.0)) fail("train.lr_decay_factor", "must lie in (0, 1]");
  if (run_dir.empty()) fail("train.run_dir", "must not be empty");
  if (threads < 0) fail("train.threads", "must be non-negative");
  for (const double s : scales) {
    if (!(s >= 1.0)) fail("eval.scales", "every scale must be at least 1");
  }
}

std::int64_t RunConfig::min_image_side() const {
  const double s = fixed_scale > 0.0 ? fixed_scale : curriculum.largest_scale();
  return hr_patch_side(patch, s);
}

RunConfig full_config() {
  RunConfig c;
  c.model.features = 64;
  c.model.werb_blocks = 4;
  c.model.heads = 8;
  c.model.pe_levels = 10;
  c.model.encoder_blocks = 16;
  c.patch = 48;
  c.batch = 32;
  c.epochs = 1000;
  c.checkpoint_every = 50;
  return c;
}

void set_config_value(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  const std::string field = section + "." + key;
  if (section == "model") {
    if (key == "features" || key == "encoder_blocks" || key == "werb_blocks" || key == "heads" || key == "pe_levels" ||
        key == "decoder_hidden" || key == "decoder_layers" || key == "wmpf_reduction") {
      set_model_config_field(c.model, key, std::to_string(as_int(field, value)));
      return;
    }
  } else if (section == "data") {
    if (key == "dir") return void(c.train_dir = value);
    if (key == "patch") return void(c.patch = as_int(field, value));
    if (key == "batch") return void(c.batch = as_int(field, value));
    if (key == "queries") return void(c.queries = as_int(field, value));
    if (key == "epoch_repeat") return void(c.epoch_repeat = as_int(field, value));
    if (key == "fixed_scale") return void(c.fixed_scale = as_double(field, value));
    if (key == "curriculum_boundaries") return void(c.curriculum.boundaries = as_list(field, value));
    if (key == "curriculum_scales") return void(c.curriculum.max_scales = as_list(field, value));
    if (key == "min_scale") return void(c.curriculum.min_scale = as_double(field, value));
  } else if (section == "train") {
    if (key == "epochs") return void(c.epochs = as_int(field, value));
    if (key == "checkpoint_every") return void(c.checkpoint_every = as_int(field, value));
    if (key == "seed") {
      const auto v = as_int(field, value);
      if (v < 0) throw ConfigError(field + ": must be non-negative");
      return void(c.seed = static_cast<std::uint64_t>(v));
    }
    if (key == "lr") return void(c.lr.initial = as_double(field, value));
    if (key == "lr_decay_epochs") return void(c.lr.decay_every = as_int(field, value));
    if (key == "lr_decay_factor") return void(c.lr.factor = as_double(field, value));
    if (key == "run_dir") return void(c.run_dir = value);
    if (key == "threads") return void(c.threads = static_cast<int>(as_int(field, value)));
  } else if (section == "eval") {
    if (key == "dir") return void(c.hr_dir = value);
    if (key == "scales") return void(c.scales = as_list(field, value));
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
  throw ConfigError("unknown key '" + field + "'");
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
  RunConfig c;
  std::string section;
  std::string line;
  int lineno = 0;
  bool any_entry = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    auto text = trim(line.substr(0, line.find_first_of("#;")));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where + "malformed section header '" + text + "'");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "model" && section != "data" && section != "train" && section != "eval") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + text + "'");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    try {
      if (section.empty()) {
        if (key != "preset") throw ConfigError("key '" + key + "' appears outside a section");
        if (any_entry) throw ConfigError("preset must come before any other setting");
        if (value == "full") c = full_config();
        else if (value != "desk") throw ConfigError("unknown preset '" + value + "' (expected desk or full)");
        any_entry = true;
        continue;
      }
      set_config_value(c, section, key, value);
      any_entry = true;
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::string first;
  std::getline(in, first);
  if (first.rfind("liwt-manifest", 0) == 0) {
    const auto manifest = RunManifest::read(path);
    RunConfig c;
    for (const auto& [field, value] : manifest.config) {
      const auto dot = field.find('.');
      if (dot == std::string::npos) throw ConfigError(path + ": malformed config record '" + field + "'");
      set_config_value(c, field.substr(0, dot), field.substr(dot + 1), value);
    }
    c.validate();
    return c;
  }
  in.clear();
  in.seekg(0);
  return parse_config(in, path);
}

std::vector<std::pair<std::string, std::string>> config_records(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : model_config_fields(c.model)) out.emplace_back("model." + k, v);
  out.emplace_back("data.dir", c.train_dir);
  out.emplace_back("data.patch", std::to_string(c.patch));
  out.emplace_back("data.batch", std::to_string(c.batch));
  out.emplace_back("data.queries", std::to_string(c.queries));
  out.emplace_back("data.epoch_repeat", std::to_string(c.epoch_repeat));
  out.emplace_back("data.fixed_scale", num(c.fixed_scale));
  out.emplace_back("data.curriculum_boundaries", list(c.curriculum.boundaries));
  out.emplace_back("data.curriculum_scales", list(c.curriculum.max_scales));
  out.emplace_back("data.min_scale", num(c.curriculum.min_scale));
  out.emplace_back("train.epochs", std::to_string(c.epochs));
  out.emplace_back("train.checkpoint_every", std::to_string(c.checkpoint_every));
  out.emplace_back("train.seed", std::to_string(c.seed));
  out.emplace_back("train.lr", num(c.lr.initial));
  out.emplace_back("train.lr_decay_epochs", std::to_string(c.lr.decay_every));
  out.emplace_back("train.lr_decay_factor", num(c.lr.factor));
  out.emplace_back("train.run_dir", c.run_dir);
  out.emplace_back("train.threads", std::to_string(c.threads));
  out.emplace_back("eval.dir", c.hr_dir);
  out.emplace_back("eval.scales", list(c.scales));
  return out;
}

std::string render_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& [field, value] : config_records(c)) {
    const auto dot = field.find('.');
    const auto s = field.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += field.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

FitSettings fit_settings(const RunConfig& c) {
  FitSettings f;
  f.epochs = c.epochs;
  f.checkpoint_every = c.checkpoint_every;
  f.batch = c.batch;
  f.epoch_repeat = c.epoch_repeat;
  f.seed = c.seed;
  f.samples = BatchSettings{c.patch, c.queries, c.fixed_scale};
  f.curriculum = c.curriculum;
  f.lr = c.lr;
  f.run_dir = c.run_dir;
  f.config_records = config_records(c);
  return f;
}

}  // namespace liwt
