#include <doctest.h>

#include <limits>
#include <thread>

#include <httplib.h>

#include "cdaae/checkpoint.hpp"
#include "cdaae/service.hpp"
#include "cdaae/synthesis.hpp"
#include "cdaae/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace cdaae;
using nlohmann::json;

namespace {

InferenceService au_service(SkipPosition pos = SkipPosition::P2) {
  return InferenceService(ModelParams<float>::initialize(pos, LabelMode::AU, 11), "abc123");
}

Image face() { return make_synthetic_corpus(2, 2, 4).images[1]; }

json request(const Image& img, std::vector<double> label) {
  return json{{"image", base64_encode(encode_png(img))}, {"label", label}};
}

json body_of(const HttpResponse& r) { return json::parse(r.body); }

void check_error(const HttpResponse& r, int status, const std::string& code) {
  CHECK(r.status == status);
  const auto b = body_of(r);
  REQUIRE(b.contains("error"));
  CHECK(b["error"]["code"] == code);
  CHECK(b["error"]["message"].get<std::string>().size() > 0);
}

}  // namespace

TEST_SUITE("base64") {
  TEST_CASE("round trip for every padding length") {
    for (std::size_t n = 1; n < 10; ++n) {
      std::vector<std::uint8_t> bytes(n);
      for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(37 * i + 200);
      CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_encode({'f', 'o', 'o', 'b'}) == "Zm9vYg==");
    CHECK(base64_decode("Zm9v\nYmFy") == std::vector<std::uint8_t>{'f', 'o', 'o', 'b', 'a', 'r'});
  }

  TEST_CASE("malformed input is rejected") {
    CHECK_THROWS_AS(base64_decode(""), ValidationError);
    CHECK_THROWS_AS(base64_decode("abc"), ValidationError);
    CHECK_THROWS_AS(base64_decode("ab!d"), ValidationError);
  }
}

TEST_SUITE("service handlers") {
  TEST_CASE("no model loaded answers 503") {
    const InferenceService empty;
    CHECK(empty.health().status == 503);
    check_error(empty.model_info(), 503, "not_loaded");
    check_error(empty.synthesize(request(face(), std::vector<double>(12, 0.0)).dump()), 503, "not_loaded");
  }

  TEST_CASE("model info echoes the checkpoint") {
    test::TempDir dir;
    TrainConfig cfg;
    cfg.manifest = "m.csv";
    cfg.output_dir = dir.path().string();
    cfg.skip_position = SkipPosition::P3;
    cfg.label_mode = LabelMode::Emotion;
    save_checkpoint(initial_checkpoint(cfg), dir.path() / "ck.cdae");
    const auto svc = InferenceService::from_checkpoint(dir.path() / "ck.cdae");
    CHECK(svc.health().status == 200);
    const auto info = body_of(svc.model_info());
    CHECK(info["z_dim"] == 100);
    CHECK(info["skip_position"] == "p3");
    CHECK(info["label_mode"] == "emotion");
    CHECK(info["label_dim"] == 8);
    CHECK(info["checkpoint_sha256"] == file_sha256_hex(dir.path() / "ck.cdae"));
  }

  TEST_CASE("synthesis matches the library path and is deterministic") {
    const auto svc = au_service();
    std::vector<double> label(12, 0.0);
    label[1] = 0.7;
    label[11] = 0.4;
    const auto body = request(face(), label).dump();
    const auto r = svc.synthesize(body);
    REQUIRE(r.status == 200);
    const auto b = body_of(r);
    const auto png = base64_decode(b["image"].get<std::string>());
    const auto img = decode_png(png);
    CHECK(img.width == 32);
    CHECK(img.height == 32);
    CHECK(b["latency_ms"].get<double>() >= 0.0);
    CHECK(b["model_info"]["z_dim"] == 100);
    CHECK(b["model_info"]["checkpoint_sha256"] == "abc123");
    CHECK_FALSE(b.contains("grid"));

    const auto model = Cdaae<float>::create(SkipPosition::P2, LabelMode::AU, 11);
    LabelVector lv = LabelVector::zeros(LabelMode::AU);
    lv.values = label;
    CHECK(img == postprocess(synthesize_one(model, preprocess(face()), lv)));
    CHECK(body_of(svc.synthesize(body))["image"] == b["image"]);
  }

  TEST_CASE("images of any size are resized on ingest") {
    const auto svc = au_service();
    const auto big = resize_bilinear(face(), 80, 64);
    const auto r = svc.synthesize(request(big, std::vector<double>(12, 0.2)).dump());
    REQUIRE(r.status == 200);
    const auto img = decode_png(base64_decode(body_of(r)["image"].get<std::string>()));
    CHECK(img.width == 32);
    CHECK(img.height == 32);
  }

  TEST_CASE("label length 11 names the expected 12") {
    const auto r = au_service().synthesize(request(face(), std::vector<double>(11, 0.0)).dump());
    check_error(r, 400, "label_length");
    CHECK(body_of(r)["error"]["message"].get<std::string>().find("12") != std::string::npos);
  }

  TEST_CASE("bad requests carry a code and a message") {
    const auto svc = au_service();
    std::vector<double> label(12, 0.0);
    label[3] = 1.2;
    check_error(svc.synthesize(request(face(), label).dump()), 400, "label_range");
    label[3] = -0.1;
    check_error(svc.synthesize(request(face(), label).dump()), 400, "label_range");
    check_error(svc.synthesize("{not json"), 400, "invalid_json");
    check_error(svc.synthesize("[1,2]"), 400, "invalid_json");

    auto req = request(face(), std::vector<double>(12, 0.0));
    req["image"] = base64_encode({1, 2, 3, 4, 5});
    check_error(svc.synthesize(req.dump()), 400, "invalid_image");
    req["image"] = "@@@@";
    check_error(svc.synthesize(req.dump()), 400, "invalid_image");
    req.erase("image");
    check_error(svc.synthesize(req.dump()), 400, "missing_image");

    req = request(face(), std::vector<double>(12, 0.0));
    req["label"] = "high";
    check_error(svc.synthesize(req.dump()), 400, "invalid_label");
    req["label"] = json::array({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, "x"});
    check_error(svc.synthesize(req.dump()), 400, "invalid_label");
    req.erase("label");
    check_error(svc.synthesize(req.dump()), 400, "missing_label");

    req = request(face(), std::vector<double>(12, 0.0));
    req["grid"] = {{"x", "AU2:0,1"}, {"y", "AU2:0,1"}};
    check_error(svc.synthesize(req.dump()), 400, "invalid_grid");
    req["grid"] = {{"x", "AU3:0,1"}, {"y", "AU2:0,1"}};
    check_error(svc.synthesize(req.dump()), 400, "invalid_grid");
    req["grid"] = 5;
    check_error(svc.synthesize(req.dump()), 400, "invalid_grid");
  }

  TEST_CASE("a grid request returns the tiled sweep alongside the single image") {
    const auto svc = au_service();
    auto req = request(face(), std::vector<double>(12, 0.0));
    req["grid"] = {{"x", "AU2:0,0.5,1"}, {"y", "AU26:0,1"}};
    const auto r = svc.synthesize(req.dump());
    REQUIRE(r.status == 200);
    const auto b = body_of(r);
    CHECK(b["grid"]["rows"] == 2);
    CHECK(b["grid"]["columns"] == 3);
    const auto grid = decode_png(base64_decode(b["grid"]["image"].get<std::string>()));
    CHECK(grid.width == 96);
    CHECK(grid.height == 64);
    const auto single = decode_png(base64_decode(b["image"].get<std::string>()));
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) CHECK(grid.at(x, y, 0) == single.at(x, y, 0));
  }

  TEST_CASE("numeric failure is a 500") {
    auto params = ModelParams<float>::initialize(SkipPosition::P2, LabelMode::AU, 11);
    for (auto& v : params.encoder_convs[0].weight.storage()) v = std::numeric_limits<float>::quiet_NaN();
    const InferenceService svc(std::move(params), "nan");
    const auto r = svc.synthesize(request(face(), std::vector<double>(12, 0.0)).dump());
    CHECK(r.status == 500);
    CHECK(body_of(r)["error"]["code"] == "numeric_failure");
  }

  TEST_CASE("concurrent identical requests give identical images") {
    const auto svc = au_service();
    const auto body = request(face(), std::vector<double>(12, 0.5)).dump();
    std::vector<std::string> images(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < images.size(); ++i) {
      threads.emplace_back([&, i] { images[i] = body_of(svc.synthesize(body))["image"].get<std::string>(); });
    }
    for (auto& t : threads) t.join();
    for (const auto& img : images) CHECK(img == images[0]);
  }
}

TEST_SUITE("http") {
  TEST_CASE("round trip over a real socket") {
    const auto svc = au_service();
    httplib::Server server;
    register_routes(server, svc, "http://localhost:5173");
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

    auto info = client.Get("/model/info");
    REQUIRE(info);
    CHECK(json::parse(info->body)["z_dim"] == 100);

    const auto body = request(face(), std::vector<double>(12, 0.3)).dump();
    auto a = client.Post("/synthesize", body, "application/json");
    auto b = client.Post("/synthesize", body, "application/json");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->status == 200);
    const auto ia = json::parse(a->body)["image"].get<std::string>();
    CHECK(ia == json::parse(b->body)["image"].get<std::string>());
    const auto img = decode_png(base64_decode(ia));
    CHECK(img.width == 32);
    CHECK(img.height == 32);

    auto bad = client.Post("/synthesize", request(face(), std::vector<double>(11, 0.0)).dump(), "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["error"]["message"].get<std::string>().find("12") != std::string::npos);
    CHECK(bad->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

    auto pre = client.Options("/synthesize");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    server.stop();
    worker.join();
  }

  TEST_CASE("an unloaded server reports 503 on health") {
    const InferenceService empty;
    httplib::Server server;
    register_routes(server, empty);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    auto r = client.Get("/health");
    REQUIRE(r);
    CHECK(r->status == 503);
    server.stop();
    worker.join();
  }
}
