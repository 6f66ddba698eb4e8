#include "cdaae/service.hpp"

#include <chrono>
#include <cmath>

#include <httplib.h>
#include <openssl/evp.h>

#include "cdaae/checkpoint.hpp"
#include "cdaae/error.hpp"
#include "cdaae/image.hpp"
#include "cdaae/synthesis.hpp"

namespace cdaae {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') clean.push_back(c);
  }
  if (clean.empty()) throw ValidationError("empty base64 payload");
  if (clean.size() % 4 != 0) throw ValidationError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw ValidationError("malformed base64 payload");
  std::size_t pad = 0;
  if (clean.back() == '=') ++pad;
  if (clean.size() >= 2 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

namespace {

using nlohmann::json;

HttpResponse reply(int status, const json& body) { return {status, body.dump()}; }

HttpResponse error_reply(int status, const std::string& code, const std::string& message) {
  return reply(status, json{{"error", {{"code", code}, {"message", message}}}});
}

struct RequestError {
  std::string code;
  std::string message;
};

LabelVector parse_label(const json& body, LabelMode mode) {
  if (!body.contains("label")) throw RequestError{"missing_label", "request has no \"label\" field"};
  const auto& arr = body["label"];
  if (!arr.is_array()) throw RequestError{"invalid_label", "\"label\" must be an array of numbers"};
  const std::size_t expected = label_dim(mode);
  if (arr.size() != expected) {
    throw RequestError{"label_length", "label has " + std::to_string(arr.size()) + " entries, expected " +
                                           std::to_string(expected) + " for " + std::string(to_string(mode)) +
                                           " mode"};
  }
  LabelVector label = LabelVector::zeros(mode);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!arr[i].is_number()) {
      throw RequestError{"invalid_label", "label entry " + std::to_string(i) + " is not a number"};
    }
    const double v = arr[i].get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw RequestError{"label_range", "label entry " + std::to_string(i) + " is outside [0,1]"};
    }
    label[i] = v;
  }
  return label;
}

Image parse_image(const json& body) {
  if (!body.contains("image")) throw RequestError{"missing_image", "request has no \"image\" field"};
  if (!body["image"].is_string()) throw RequestError{"invalid_image", "\"image\" must be a base64 string"};
  try {
    const auto bytes = base64_decode(body["image"].get<std::string>());
    Image img = decode_png(bytes);
    if (img.width == 0 || img.height == 0) throw ValidationError("empty image");
    return img;
  } catch (const ValidationError& e) {
    throw RequestError{"invalid_image", std::string("image is not a decodable PNG: ") + e.what()};
  }
}

}  // namespace

InferenceService::InferenceService(ModelParams<float> params, std::string checkpoint_hash)
    : model_(std::make_shared<const Cdaae<float>>(std::move(params))), checkpoint_hash_(std::move(checkpoint_hash)) {}

InferenceService InferenceService::from_checkpoint(const std::filesystem::path& path) {
  auto ck = load_checkpoint(path);
  return InferenceService(std::move(ck.params), file_sha256_hex(path));
}

json InferenceService::info_json() const {
  return json{{"label_mode", std::string(to_string(model_->label_mode()))},
              {"label_dim", label_dim(model_->label_mode())},
              {"skip_position", std::string(to_string(model_->skip()))},
              {"z_dim", kLatentDim},
              {"checkpoint_sha256", checkpoint_hash_}};
}

HttpResponse InferenceService::health() const {
  if (!loaded()) return error_reply(503, "not_loaded", "no model loaded");
  return reply(200, json{{"status", "ok"}});
}

HttpResponse InferenceService::model_info() const {
  if (!loaded()) return error_reply(503, "not_loaded", "no model loaded");
  return reply(200, info_json());
}

HttpResponse InferenceService::synthesize(std::string_view body) const {
  if (!loaded()) return error_reply(503, "not_loaded", "no model loaded");
  const auto start = std::chrono::steady_clock::now();
  try {
    const json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      return error_reply(400, "invalid_json", "request body must be a JSON object");
    }
    const LabelMode mode = model_->label_mode();
    const LabelVector label = parse_label(req, mode);
    const Image image = parse_image(req);

    std::optional<GridSpec> grid;
    if (req.contains("grid")) {
      const auto& g = req["grid"];
      if (!g.is_object() || !g.contains("x") || !g.contains("y") || !g["x"].is_string() || !g["y"].is_string()) {
        throw RequestError{"invalid_grid", "\"grid\" must be {\"x\": \"<label>:<values>\", \"y\": ...}"};
      }
      try {
        grid = GridSpec{parse_grid_axis(g["x"].get<std::string>(), mode),
                        parse_grid_axis(g["y"].get<std::string>(), mode), label};
        grid->validate();
      } catch (const ValidationError& e) {
        throw RequestError{"invalid_grid", e.what()};
      }
    }

    const Tensor<float> source = preprocess(image);
    json out;
    out["image"] = base64_encode(encode_png(postprocess(synthesize_one(*model_, source, label))));
    if (grid) {
      const auto result = manifold_grid(*model_, source, *grid);
      out["grid"] = {{"image", base64_encode(encode_png(result.image))},
                     {"rows", result.rows},
                     {"columns", result.columns}};
    }
    out["model_info"] = info_json();
    out["latency_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return reply(200, out);
  } catch (const RequestError& e) {
    return error_reply(400, e.code, e.message);
  } catch (const NumericError& e) {
    return error_reply(500, "numeric_failure", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

void register_routes(httplib::Server& server, const InferenceService& service, const std::string& allowed_origin) {
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.set_post_routing_handler([allowed_origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", allowed_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.health());
  });
  server.Get("/model/info", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.model_info());
  });
  server.Post("/synthesize", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.synthesize(req.body));
  });
}

}  // namespace cdaae
