#include "cdaae/config.hpp"

#include <fstream>
#include <set>

#include "cdaae/error.hpp"

namespace cdaae {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr_ae > 0.0)) throw ValidationError("lr_ae must be > 0");
  if (!(lr_disc > 0.0)) throw ValidationError("lr_disc must be > 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(alpha >= 0.0) || !(beta1 >= 0.0) || !(beta2 >= 0.0)) throw ValidationError("loss weights must be >= 0");
  if (manifest.empty()) throw ValidationError("manifest path is required");
  if (output_dir.empty()) throw ValidationError("output_dir is required");
}

json TrainConfig::to_json() const {
  json j;
  j["skip_position"] = std::string(to_string(skip_position));
  j["label_mode"] = std::string(to_string(label_mode));
  j["lr_ae"] = lr_ae;
  j["lr_disc"] = lr_disc;
  j["batch_size"] = batch_size;
  j["alpha"] = alpha;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["manifest"] = manifest;
  j["output_dir"] = output_dir;
  j["max_steps"] = max_steps ? json(*max_steps) : json(nullptr);
  j["train_subjects"] = train_subjects;
  j["per_au_cap"] = per_au_cap;
  j["zero_frames"] = zero_frames;
  j["heldout_manifest"] = heldout_manifest;
  return j;
}

namespace {

template <typename V>
V get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

std::size_t get_count(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError(std::string("config field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {
      "skip_position", "label_mode", "lr_ae",          "lr_disc",    "batch_size",  "alpha",
      "beta1",         "beta2",      "epochs",         "seed",       "manifest",    "output_dir",
      "max_steps",     "train_subjects", "per_au_cap", "zero_frames", "heldout_manifest"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown config field '" + key + "'");
  }

  TrainConfig c;
  try {
    if (j.contains("skip_position")) c.skip_position = parse_skip_position(get_as<std::string>(j, "skip_position"));
    if (j.contains("label_mode")) c.label_mode = parse_label_mode(get_as<std::string>(j, "label_mode"));
  } catch (const UsageError& e) {
    throw ValidationError(e.what());
  }
  if (j.contains("lr_ae")) c.lr_ae = get_as<double>(j, "lr_ae");
  if (j.contains("lr_disc")) c.lr_disc = get_as<double>(j, "lr_disc");
  if (j.contains("batch_size")) c.batch_size = get_count(j, "batch_size");
  if (j.contains("alpha")) c.alpha = get_as<double>(j, "alpha");
  if (j.contains("beta1")) c.beta1 = get_as<double>(j, "beta1");
  if (j.contains("beta2")) c.beta2 = get_as<double>(j, "beta2");
  if (j.contains("epochs")) c.epochs = get_count(j, "epochs");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("manifest")) c.manifest = get_as<std::string>(j, "manifest");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir");
  if (j.contains("max_steps") && !j.at("max_steps").is_null()) c.max_steps = get_count(j, "max_steps");
  if (j.contains("train_subjects")) c.train_subjects = get_as<std::vector<std::string>>(j, "train_subjects");
  if (j.contains("per_au_cap")) c.per_au_cap = get_count(j, "per_au_cap");
  if (j.contains("zero_frames")) c.zero_frames = get_count(j, "zero_frames");
  if (j.contains("heldout_manifest")) c.heldout_manifest = get_as<std::string>(j, "heldout_manifest");
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  TrainConfig c = TrainConfig::from_json(j);
  const auto base = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.manifest);
  resolve(c.output_dir);
  resolve(c.heldout_manifest);
  return c;
}

void save_config(const TrainConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config " + path.string());
  out << config.to_json().dump(2) << '\n';
}

}  // namespace cdaae
