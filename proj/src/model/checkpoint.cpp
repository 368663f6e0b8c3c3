#include <array>
#include <fstream>
#include <sstream>

#include "liwt/model.hpp"

namespace liwt {

namespace {

constexpr std::array<char, 8> kCheckpointMagic{'L', 'I', 'W', 'T', 'C', 'K', 'P', 'T'};
constexpr int kCheckpointVersion = 1;

template <typename T>
constexpr const char* dtype_name() {
  return std::is_same_v<T, float> ? "f32" : "f64";
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw CheckpointError("checkpoint truncated in header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  if (text == "scalar") return s;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, 'x')) {
    try {
      s.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw CheckpointError("checkpoint manifest has malformed shape '" + text + "'");
    }
  }
  return s;
}

std::string shape_token(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> model_config_fields(const ModelConfig& c) {
  return {{"features", std::to_string(c.features)},
          {"encoder_blocks", std::to_string(c.encoder_blocks)},
          {"werb_blocks", std::to_string(c.werb_blocks)},
          {"heads", std::to_string(c.heads)},
          {"pe_levels", std::to_string(c.pe_levels)},
          {"decoder_hidden", std::to_string(c.decoder_hidden)},
          {"decoder_layers", std::to_string(c.decoder_layers)},
          {"wmpf_reduction", std::to_string(c.wmpf_reduction)}};
}

void set_model_config_field(ModelConfig& c, const std::string& key, const std::string& value) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  if (key == "features") c.features = v;
  else if (key == "encoder_blocks") c.encoder_blocks = v;
  else if (key == "werb_blocks") c.werb_blocks = v;
  else if (key == "heads") c.heads = v;
  else if (key == "pe_levels") c.pe_levels = v;
  else if (key == "decoder_hidden") c.decoder_hidden = v;
  else if (key == "decoder_layers") c.decoder_layers = v;
  else if (key == "wmpf_reduction") c.wmpf_reduction = v;
  else throw ConfigError("unknown model key '" + key + "'");
}

template <typename T>
void write_checkpoint(std::ostream& out, const Checkpoint<T>& ckpt) {
  std::ostringstream manifest;
  manifest << "liwt-checkpoint " << kCheckpointVersion << '\n';
  manifest << "dtype " << dtype_name<T>() << '\n';
  for (const auto& [k, v] : model_config_fields(ckpt.config)) manifest << "config " << k << " = " << v << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n=") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("checkpoint meta entry '" + k + "' contains reserved characters");
    }
    manifest << "meta " << k << " = " << v << '\n';
  }
  for (const auto& t : ckpt.tensors) manifest << "tensor " << t.name << ' ' << shape_token(t.tensor.shape()) << '\n';
  const std::string text = manifest.str();
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) write_snapshot(out, t.tensor);
  if (!out) throw CheckpointError("checkpoint write failed");
}

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) throw CheckpointError("checkpoint truncated before magic");
  if (magic != kCheckpointMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const auto len = get_u64(in);
  if (len > (1u << 26)) throw CheckpointError("checkpoint manifest length is implausible");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("checkpoint truncated in manifest");

  Checkpoint<T> ckpt;
  std::vector<std::pair<std::string, Shape>> entries;
  std::istringstream lines(text);
  std::string line;
  bool saw_header = false;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "liwt-checkpoint") {
      int version = 0;
      ls >> version;
      if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
      saw_header = true;
    } else if (kind == "dtype") {
      std::string d;
      ls >> d;
      if (d != dtype_name<T>()) throw CheckpointError("checkpoint stores " + d + ", expected " + dtype_name<T>());
    } else if (kind == "config" || kind == "meta") {
      const auto rest = line.substr(kind.size() + 1);
      const auto eq = rest.find('=');
      if (eq == std::string::npos) throw CheckpointError("malformed manifest line '" + line + "'");
      const auto key = trim(rest.substr(0, eq));
      const auto value = trim(rest.substr(eq + 1));
      if (kind == "meta") {
        ckpt.meta[key] = value;
      } else {
        try {
          set_model_config_field(ckpt.config, key, value);
        } catch (const ConfigError& e) {
          throw CheckpointError(std::string("checkpoint config: ") + e.what());
        }
      }
    } else if (kind == "tensor") {
      std::string name, shape;
      ls >> name >> shape;
      if (name.empty() || shape.empty()) throw CheckpointError("malformed manifest line '" + line + "'");
      entries.emplace_back(name, parse_shape(shape));
    } else {
      throw CheckpointError("unknown manifest record '" + kind + "'");
    }
  }
  if (!saw_header) throw CheckpointError("checkpoint manifest lacks its header");
  for (const auto& [name, shape] : entries) {
    Tensor<T> t;
    try {
      t = read_snapshot<T>(in);
    } catch (const CheckpointError& e) {
      throw CheckpointError("tensor '" + name + "': " + e.what());
    }
    if (t.shape() != shape) {
      throw CheckpointError("tensor '" + name + "' snapshot shape " + shape_str(t.shape()) +
                            " disagrees with manifest " + shape_str(shape));
    }
    ckpt.tensors.push_back({name, std::move(t)});
  }
  return ckpt;
}

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp + "' for writing");
    write_checkpoint(out, ckpt);
    out.flush();
    if (!out) throw CheckpointError("failed writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into '" + path + "'");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  try {
    return read_checkpoint<T>(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
}

template <typename T>
Checkpoint<T> model_checkpoint(const LiwtModel<T>& model) {
  Checkpoint<T> ckpt;
  ckpt.config = model.config();
  for (const auto& p : model.parameters()) ckpt.tensors.push_back({p.name, p.tensor.detach()});
  return ckpt;
}

template <typename T>
void restore_parameters(LiwtModel<T>& model, const Checkpoint<T>& ckpt) {
  std::map<std::string, const Tensor<T>*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t.tensor;
  for (auto& p : model.parameters()) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor '" + p.name + "'");
    const auto& src = *it->second;
    if (src.shape() != p.tensor.shape()) {
      throw CheckpointError("tensor '" + p.name + "' has shape " + shape_str(src.shape()) + " in checkpoint, model expects " +
                            shape_str(p.tensor.shape()));
    }
  }
  for (const auto& t : ckpt.tensors) {
    if (t.name.rfind("optim.", 0) == 0) continue;
    bool known = false;
    for (const auto& p : model.parameters()) known = known || p.name == t.name;
    if (!known) throw CheckpointError("checkpoint tensor '" + t.name + "' does not belong to the configured model");
  }
  for (auto& p : model.parameters()) {
    auto dst = p.tensor.mutable_data();
    const auto src = by_name.at(p.name)->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

#define LIWT_INSTANTIATE_CKPT(T)                                            \
  template void write_checkpoint(std::ostream&, const Checkpoint<T>&);      \
  template Checkpoint<T> read_checkpoint(std::istream&);                    \
  template void save_checkpoint(const std::string&, const Checkpoint<T>&);  \
  template Checkpoint<T> load_checkpoint(const std::string&);               \
  template Checkpoint<T> model_checkpoint(const LiwtModel<T>&);             \
  template void restore_parameters(LiwtModel<T>&, const Checkpoint<T>&);

LIWT_INSTANTIATE_CKPT(float)
LIWT_INSTANTIATE_CKPT(double)

}  // namespace liwt
