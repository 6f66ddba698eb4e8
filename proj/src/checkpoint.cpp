#include "cdaae/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "cdaae/error.hpp"

namespace cdaae {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'D', 'A', 'E'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u32(static_cast<std::uint32_t>(d));
    bytes(t.data().data(), t.numel() * sizeof(float));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw ValidationError("checkpoint is truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > in_.size() - pos_) throw ValidationError("checkpoint is truncated");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, Tensor<float>> tensor() {
    std::string name = str();
    const std::uint32_t ndim = u32();
    if (ndim == 0 || ndim > 8) throw ValidationError("checkpoint tensor '" + name + "' has invalid rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      shape.push_back(u32());
      if (shape.back() == 0) throw ValidationError("checkpoint tensor '" + name + "' has a zero dimension");
      numel *= shape.back();
      if (numel > (in_.size() - pos_) / sizeof(float)) throw ValidationError("checkpoint is truncated");
    }
    std::vector<float> data(numel);
    bytes(data.data(), numel * sizeof(float));
    return {std::move(name), Tensor<float>(std::move(shape), std::move(data))};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

json loss_bundle_row(const LossRecord& r) {
  const auto& l = r.losses;
  return json::array({r.step, l.l_r, l.l_e_d, l.l_e_g, l.l_g_d, l.l_g_g, l.total_ae});
}

LossRecord loss_record_from(const json& row) {
  if (!row.is_array() || row.size() != 7) throw ValidationError("checkpoint loss history row is malformed");
  LossRecord r;
  r.step = row[0].get<std::size_t>();
  r.losses = {row[1].get<double>(), row[2].get<double>(), row[3].get<double>(),
              row[4].get<double>(), row[5].get<double>(), row[6].get<double>()};
  return r;
}

json adam_config_json(const AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

AdamConfig adam_config_from(const json& j) {
  return {j.at("learning_rate").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
          j.at("epsilon").get<double>()};
}

// Names of the AE and discriminator parameters in optimizer order.
std::pair<std::vector<std::string>, std::vector<std::string>> optimizer_names(ModelParams<float>& p) {
  std::vector<std::string> ae, disc;
  for (auto& nt : p.named()) {
    if (nt.name.starts_with("encoder.") || nt.name.starts_with("decoder.")) {
      ae.push_back(nt.name);
    } else {
      disc.push_back(nt.name);
    }
  }
  return {ae, disc};
}

void check_moments(const AdamState<float>& s, std::size_t n, const char* which) {
  if (s.first_moment.size() != n || s.second_moment.size() != n) {
    throw UsageError(std::string("checkpoint: ") + which + " optimizer state does not match the parameter list");
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  ModelParams<float> params = ck.params;
  const auto [ae_names, disc_names] = optimizer_names(params);
  check_moments(ck.adam_ae, ae_names.size(), "autoencoder");
  check_moments(ck.adam_disc, disc_names.size(), "discriminator");

  json header;
  header["config"] = ck.config.to_json();
  header["model"] = {{"skip_position", std::string(to_string(params.skip))},
                     {"label_mode", std::string(to_string(params.label_mode))},
                     {"label_dim", params.label_dim()},
                     {"z_dim", kLatentDim}};
  header["state"] = {{"global_step", ck.state.global_step},
                     {"epoch", ck.state.epoch},
                     {"step_in_epoch", ck.state.step_in_epoch},
                     {"adam_ae", adam_config_json(ck.adam_ae.config)},
                     {"adam_ae_step", ck.adam_ae.step},
                     {"adam_disc", adam_config_json(ck.adam_disc.config)},
                     {"adam_disc_step", ck.adam_disc.step}};
  json history = json::array();
  for (const auto& r : ck.loss_history) history.push_back(loss_bundle_row(r));
  header["loss_history"] = std::move(history);

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(header.dump());

  const auto named = params.named();
  w.u32(static_cast<std::uint32_t>(named.size() + 2 * ae_names.size() + 2 * disc_names.size()));
  for (const auto& nt : named) w.tensor(nt.name, *nt.tensor);
  for (std::size_t i = 0; i < ae_names.size(); ++i) w.tensor("adam.ae.m." + ae_names[i], ck.adam_ae.first_moment[i]);
  for (std::size_t i = 0; i < ae_names.size(); ++i) w.tensor("adam.ae.v." + ae_names[i], ck.adam_ae.second_moment[i]);
  for (std::size_t i = 0; i < disc_names.size(); ++i) {
    w.tensor("adam.disc.m." + disc_names[i], ck.adam_disc.first_moment[i]);
  }
  for (std::size_t i = 0; i < disc_names.size(); ++i) {
    w.tensor("adam.disc.v." + disc_names[i], ck.adam_disc.second_moment[i]);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ValidationError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ck;
  json header;
  try {
    header = json::parse(r.str());
    ck.config = TrainConfig::from_json(header.at("config"));
    const auto& model = header.at("model");
    const SkipPosition skip = parse_skip_position(model.at("skip_position").get<std::string>());
    const LabelMode mode = parse_label_mode(model.at("label_mode").get<std::string>());
    ck.params = ModelParams<float>::initialize(skip, mode, 0);
    const auto& state = header.at("state");
    ck.state.global_step = state.at("global_step").get<std::size_t>();
    ck.state.epoch = state.at("epoch").get<std::size_t>();
    ck.state.step_in_epoch = state.at("step_in_epoch").get<std::size_t>();
    ck.adam_ae.config = adam_config_from(state.at("adam_ae"));
    ck.adam_ae.step = state.at("adam_ae_step").get<std::size_t>();
    ck.adam_disc.config = adam_config_from(state.at("adam_disc"));
    ck.adam_disc.step = state.at("adam_disc_step").get<std::size_t>();
    for (const auto& row : header.at("loss_history")) ck.loss_history.push_back(loss_record_from(row));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  } catch (const UsageError& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  }

  std::map<std::string, Tensor<float>> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = r.tensor();
    if (!tensors.emplace(name, std::move(t)).second) throw ValidationError("duplicate checkpoint tensor '" + name + "'");
  }
  if (!r.done()) throw ValidationError("trailing bytes after checkpoint tensors");

  auto take = [&](const std::string& name, const Shape& shape) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                            ", expected " + shape_to_string(shape));
    }
    Tensor<float> t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  for (auto& nt : ck.params.named()) {
    const bool grad = nt.tensor->requires_grad();
    *nt.tensor = take(nt.name, nt.tensor->shape());
    nt.tensor->set_requires_grad(grad);
  }
  const auto [ae_names, disc_names] = optimizer_names(ck.params);
  std::map<std::string, Shape> shapes;
  for (auto& nt : ck.params.named()) shapes[nt.name] = nt.tensor->shape();
  for (const auto& n : ae_names) ck.adam_ae.first_moment.push_back(take("adam.ae.m." + n, shapes[n]));
  for (const auto& n : ae_names) ck.adam_ae.second_moment.push_back(take("adam.ae.v." + n, shapes[n]));
  for (const auto& n : disc_names) ck.adam_disc.first_moment.push_back(take("adam.disc.m." + n, shapes[n]));
  for (const auto& n : disc_names) ck.adam_disc.second_moment.push_back(take("adam.disc.v." + n, shapes[n]));
  if (!tensors.empty()) throw ValidationError("unexpected checkpoint tensor '" + tensors.begin()->first + "'");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string file_sha256_hex(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

Checkpoint initial_checkpoint(const TrainConfig& config) {
  Checkpoint ck;
  ck.config = config;
  ck.params = ModelParams<float>::initialize(config.skip_position, config.label_mode, config.seed);
  ck.adam_ae = AdamState<float>::create(ck.params.autoencoder(), AdamConfig{config.lr_ae});
  ck.adam_disc = AdamState<float>::create(ck.params.discriminators(), AdamConfig{config.lr_disc});
  return ck;
}

}  // namespace cdaae
