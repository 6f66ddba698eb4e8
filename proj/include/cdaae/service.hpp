#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdaae/model.hpp"

namespace httplib {
class Server;
}

namespace cdaae {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws ValidationError on malformed input. Whitespace is ignored.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling for one frozen model, independent of the HTTP layer.
///
/// POST /synthesize body: {"image": <base64 PNG>, "label": [..label_dim..],
/// "grid": {"x": "AU2:0,0.5,1", "y": "AU26:0,1"}} with "grid" optional.
/// The reply "image" is always the 32x32 synthesis under "label"; a grid
/// request adds "grid" holding the tiled sweep with "label" as the base.
///
/// Errors are {"error": {"code": ..., "message": ...}}.
class InferenceService {
 public:
  InferenceService() = default;
  InferenceService(ModelParams<float> params, std::string checkpoint_hash);
  static InferenceService from_checkpoint(const std::filesystem::path& path);

  bool loaded() const { return model_ != nullptr; }

  HttpResponse health() const;
  HttpResponse model_info() const;
  HttpResponse synthesize(std::string_view body) const;

 private:
  nlohmann::json info_json() const;

  std::shared_ptr<const Cdaae<float>> model_;
  std::string checkpoint_hash_;
};

/// Registers the routes of `service` on `server`, with CORS headers for
/// `allowed_origin` on every response. `service` must outlive `server`.
void register_routes(httplib::Server& server, const InferenceService& service,
                     const std::string& allowed_origin = "*");

}  // namespace cdaae
