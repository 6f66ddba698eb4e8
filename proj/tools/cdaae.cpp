#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "cdaae/ablation.hpp"
#include "cdaae/error.hpp"
#include "cdaae/image.hpp"
#include "cdaae/service.hpp"
#include "cdaae/synthesis.hpp"
#include "cdaae/synthetic.hpp"

using namespace cdaae;
namespace fs = std::filesystem;

namespace {

void print_progress(const LossRecord& rec) {
  if (rec.step % 50 != 0) return;
  const auto& l = rec.losses;
  std::fprintf(stderr, "step %zu  l_r %.5f  l_e_d %.4f  l_e_g %.4f  l_g_d %.4f  l_g_g %.4f\n", rec.step, l.l_r,
               l.l_e_d, l.l_e_g, l.l_g_d, l.l_g_g);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << j.dump(2) << '\n';
}

Cdaae<float> load_model(const std::string& path) { return Cdaae<float>(load_checkpoint(path).params); }

fs::path ground_truth_beside(const fs::path& manifest) { return manifest.parent_path() / "ground_truth.csv"; }

LabelVector parse_label_list(const std::string& text, LabelMode mode) {
  LabelVector label = LabelVector::zeros(mode);
  if (text.empty()) return label;
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("label entry \"" + item + "\" is not a number");
    }
  }
  label.values = values;
  label.validate();
  return label;
}

std::size_t emotion_or_throw(const std::string& name) {
  const auto idx = emotion_index(name);
  if (!idx) throw ValidationError("unknown emotion \"" + name + "\"");
  return *idx;
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional difference adversarial autoencoder for facial expression synthesis"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, source_path, out_path, manifest_path, truth_path;

  auto* train_cmd = app.add_subcommand("train", "Train one model from a JSON config");
  train_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> positions{"none", "p1", "p2", "p3"};
  auto* ablate_cmd = app.add_subcommand("ablate", "Train every skip position with identical seeds and compare");
  ablate_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--positions", positions, "Skip positions to train")->delimiter(',');
  ablate_cmd->add_option("--report", out_path, "Report path (default <output_dir>/ablation.json)");

  auto* resume_cmd = app.add_subcommand("resume", "Continue training from a checkpoint");
  resume_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);

  std::string ax, ay, base_label;
  auto* grid_cmd = app.add_subcommand("grid", "Two-label manifold grid");
  grid_cmd->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--source", source_path, "Source face PNG")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--ax", ax, "Column axis, e.g. AU2:0,0.2,0.4,0.6,0.8,1")->required();
  grid_cmd->add_option("--ay", ay, "Row axis, e.g. AU26:0,0.2,0.4,0.6,0.8,1")->required();
  grid_cmd->add_option("--base", base_label, "Comma-separated base label (default zeros)");
  grid_cmd->add_option("--out", out_path, "Output PNG")->required();

  std::string class_a, class_b;
  double weight = 0.5;
  auto* interp_cmd = app.add_subcommand("interpolate", "Blend two emotions");
  interp_cmd->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--source", source_path, "Source face PNG")->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--a", class_a, "First emotion")->required();
  interp_cmd->add_option("--b", class_b, "Second emotion")->required();
  interp_cmd->add_option("--w", weight, "Weight on the first emotion")->check(CLI::Range(0.0, 1.0));
  interp_cmd->add_option("--out", out_path, "Output PNG")->required();

  std::string subject, report_path;
  auto* compare_cmd = app.add_subcommand("compare", "Real frames over synthesis from one source frame");
  compare_cmd->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--subject", subject, "Subject id (default first subject)");
  compare_cmd->add_option("--truth", truth_path, "ground_truth.csv; adds an expression correlation report");
  compare_cmd->add_option("--out", out_path, "Output PNG")->required();
  compare_cmd->add_option("--report", report_path, "JSON report path (default stdout)");

  auto* eval_cmd = app.add_subcommand("eval", "Identity and label-control metrics on a synthetic corpus");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", manifest_path, "Held-out synthetic manifest")->required()->check(
      CLI::ExistingFile);
  eval_cmd->add_option("--truth", truth_path, "ground_truth.csv (default beside the manifest)");
  eval_cmd->add_option("--out", out_path, "JSON report path (default stdout)");
  bool details = false;
  eval_cmd->add_flag("--details", details, "Include per-trial and per-sweep detail");

  int port = 8080;
  std::string host = "127.0.0.1", origin = "*";
  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  serve_cmd->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--origin", origin, "Allowed CORS origin");

  std::size_t n_subjects = 10, n_expressions = 9;
  std::uint64_t seed = 1;
  std::string prefix = "s";
  auto* corpus_cmd = app.add_subcommand("synth-corpus", "Render a synthetic corpus with ground truth");
  corpus_cmd->add_option("--out", out_path, "Output directory")->required();
  corpus_cmd->add_option("--subjects", n_subjects);
  corpus_cmd->add_option("--expressions", n_expressions);
  corpus_cmd->add_option("--seed", seed);
  corpus_cmd->add_option("--prefix", prefix, "Subject id prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const auto r = train(load_config(config_path), print_progress);
      std::cout << r.final_checkpoint.string() << '\n';
    } else if (*ablate_cmd) {
      const auto cfg = load_config(config_path);
      std::vector<SkipPosition> pos;
      for (const auto& p : positions) pos.push_back(parse_skip_position(p));
      std::optional<SyntheticCorpus> heldout;
      std::optional<OracleRegressor> oracle;
      if (!cfg.heldout_manifest.empty()) {
        heldout = load_synthetic_corpus(cfg.heldout_manifest, ground_truth_beside(cfg.heldout_manifest));
        oracle = OracleRegressor::fit();
      }
      const auto report = run_ablation(cfg, pos, heldout ? &*heldout : nullptr, oracle ? &*oracle : nullptr,
                                       print_progress);
      const auto j = report.to_json();
      write_json(j, out_path.empty() ? (fs::path(cfg.output_dir) / "ablation.json").string() : out_path);
      for (const auto& e : report.entries) {
        std::cout << to_string(e.position) << "  smoothed l_r " << e.final_smoothed_l_r;
        if (e.eval) std::cout << "  identity " << e.eval->identity.score;
        std::cout << '\n';
      }
      if (const auto c = report.p2_at_least_none(); c && !*c) std::cout << "WARNING: P2 identity below None\n";
      if (const auto c = report.p1_highest_identity(); c && !*c) std::cout << "WARNING: P1 identity not highest\n";
    } else if (*resume_cmd) {
      const auto r = resume(fs::path(checkpoint_path), print_progress);
      std::cout << r.final_checkpoint.string() << '\n';
    } else if (*grid_cmd) {
      const auto model = load_model(checkpoint_path);
      GridSpec spec{parse_grid_axis(ax, model.label_mode()), parse_grid_axis(ay, model.label_mode()),
                    parse_label_list(base_label, model.label_mode())};
      const auto g = manifold_grid(model, preprocess(read_png(source_path)), spec);
      write_png(out_path, g.image);
    } else if (*interp_cmd) {
      const auto model = load_model(checkpoint_path);
      const auto t = interpolate_emotions(model, preprocess(read_png(source_path)), emotion_or_throw(class_a),
                                          emotion_or_throw(class_b), weight);
      write_png(out_path, postprocess(t));
    } else if (*compare_cmd) {
      const auto model = load_model(checkpoint_path);
      const auto manifest = load_manifest(manifest_path);
      const std::string who = subject.empty() ? manifest.subjects().at(0) : subject;
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        if (manifest.rows[i].subject_id == who) rows.push_back(i);
      }
      if (rows.empty()) throw ValidationError("subject \"" + who + "\" not in " + manifest_path);
      std::vector<Tensor<float>> frames;
      std::vector<LabelVector> labels;
      for (auto i : rows) {
        frames.push_back(preprocess(read_png(manifest.resolve(manifest.rows[i]))));
        labels.push_back(manifest.rows[i].label);
      }
      const auto strip = comparison_strip(model, frames, labels, 0);
      write_png(out_path, strip.image);
      nlohmann::json j{{"subject_id", who}, {"columns", rows.size()}};
      if (!truth_path.empty()) {
        const auto truth = read_ground_truth(truth_path);
        const auto oracle = OracleRegressor::fit();
        std::vector<double> want, got;
        for (std::size_t c = 0; c < rows.size(); ++c) {
          const auto it = truth.find(manifest.rows[rows[c]].image_path);
          if (it == truth.end()) throw ValidationError("no ground truth for " + manifest.rows[rows[c]].image_path);
          const auto p = oracle.predict(strip.generated[c]);
          for (std::size_t k = 4; k < 8; ++k) {
            want.push_back(it->second.values()[k]);
            got.push_back(p[k]);
          }
        }
        j["expression_pearson"] = pearson(want, got);
      }
      write_json(j, report_path);
    } else if (*eval_cmd) {
      const auto model = load_model(checkpoint_path);
      const fs::path truth = truth_path.empty() ? ground_truth_beside(manifest_path) : fs::path(truth_path);
      const auto corpus = load_synthetic_corpus(manifest_path, truth);
      const auto report = evaluate(model_synthesis(model), corpus, OracleRegressor::fit());
      auto j = report.to_json(details);
      j["checkpoint_sha256"] = file_sha256_hex(checkpoint_path);
      write_json(j, out_path);
    } else if (*serve_cmd) {
      const auto service = InferenceService::from_checkpoint(checkpoint_path);
      httplib::Server server;
      register_routes(server, service, origin);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
      if (bound < 0) throw UsageError("cannot bind " + host + ":" + std::to_string(port));
      std::cerr << "listening on http://" << host << ':' << bound << '\n';
      server.listen_after_bind();
    } else if (*corpus_cmd) {
      const auto corpus = make_synthetic_corpus(n_subjects, n_expressions, seed, prefix);
      write_synthetic_corpus(corpus, out_path);
      std::cout << (fs::path(out_path) / "manifest.csv").string() << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
