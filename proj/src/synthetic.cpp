#include "cdaae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "cdaae/error.hpp"

namespace cdaae {

std::array<double, 8> SyntheticFaceSpec::values() const {
  const auto i = identity.values();
  const auto e = expression.values();
  return {i[0], i[1], i[2], i[3], e[0], e[1], e[2], e[3]};
}

SyntheticFaceSpec SyntheticFaceSpec::from_values(const std::array<double, 8>& v) {
  return {{v[0], v[1], v[2], v[3]}, {v[4], v[5], v[6], v[7]}};
}

void SyntheticFaceSpec::validate() const {
  static constexpr std::array<const char*, 8> names = {"skin_tone",  "face_aspect", "eye_spacing", "nose_length",
                                                       "brow_raise", "brow_lower",  "mouth_open",  "mouth_corner"};
  const auto v = values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw ValidationError(std::string("synthetic face parameter ") + names[i] + " = " + std::to_string(v[i]) +
                            " outside [0,1]");
    }
  }
}

LabelVector expression_label(const ExpressionParams& expression) {
  auto label = LabelVector::zeros(LabelMode::AU);
  const auto e = expression.values();
  for (std::size_t i = 0; i < e.size(); ++i) label[kSyntheticLabelSlots[i]] = e[i];
  return label;
}

ExpressionParams expression_from_label(const LabelVector& label) {
  if (label.mode != LabelMode::AU) throw UsageError("synthetic expressions use AU labels");
  return {label[kSyntheticLabelSlots[0]], label[kSyntheticLabelSlots[1]], label[kSyntheticLabelSlots[2]],
          label[kSyntheticLabelSlots[3]]};
}

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kBackground{70, 90, 120};
constexpr Rgb kSkinLight{238, 206, 180};
constexpr Rgb kSkinDark{112, 74, 52};
constexpr Rgb kEye{30, 30, 40};
constexpr Rgb kBrow{60, 40, 28};
constexpr Rgb kMouth{150, 40, 50};
constexpr int kSupersample = 4;

// Face geometry in pixel units; pixel (i, j) covers [i, i+1) x [j, j+1).
constexpr double kCenterX = 16.0;
constexpr double kHeadCenterY = 16.5;
constexpr double kHeadRadiusY = 13.5;
constexpr double kEyeY = 15.6;
constexpr double kMouthY = 24.2;
constexpr double kMouthHalfWidth = 4.2;
constexpr double kMouthCornerLift = 1.8;
constexpr double kLipHalfThickness = 0.35;

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double t = std::clamp(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

double mouth_max_half_height(const ExpressionParams& e) {
  return kLipHalfThickness + 1.9 * e.mouth_open + kLipHalfThickness;
}

bool in_mouth(double x, double y, const ExpressionParams& e) {
  const double u = (x - kCenterX) / kMouthHalfWidth;
  if (std::abs(u) >= 1.0) return false;
  const double center = kMouthY - kMouthCornerLift * e.mouth_corner * u * u;
  const double half = (kLipHalfThickness + 1.9 * e.mouth_open) * std::sqrt(1.0 - u * u) + kLipHalfThickness;
  return std::abs(y - center) <= half;
}

Rgb shade(double x, double y, const SyntheticFaceSpec& s) {
  const auto& id = s.identity;
  const auto& ex = s.expression;
  const Rgb skin = lerp(kSkinLight, kSkinDark, id.skin_tone);
  Rgb c = kBackground;

  const double head_rx = 9.0 + 3.5 * id.face_aspect;
  const double hx = (x - kCenterX) / head_rx, hy = (y - kHeadCenterY) / kHeadRadiusY;
  if (hx * hx + hy * hy <= 1.0) c = skin;

  if (std::abs(x - kCenterX) <= 1.0 && y >= 16.4 && y <= 18.0 + 3.0 * id.nose_length) {
    c = {skin.r * 0.6, skin.g * 0.6, skin.b * 0.6};
  }

  const double eye_offset = 3.0 + 2.2 * id.eye_spacing;
  for (double side : {-1.0, 1.0}) {
    const double ex_ = (x - (kCenterX + side * eye_offset)) / 1.7, ey_ = (y - kEyeY) / 1.1;
    if (ex_ * ex_ + ey_ * ey_ <= 1.0) c = kEye;
  }

  // Brows: the whole brow moves with raise - lower; raise additionally lifts
  // the outer end and lower pulls the inner end down.
  const double brow_y = 10.6 - 1.8 * (ex.brow_raise - ex.brow_lower);
  for (double side : {-1.0, 1.0}) {
    const double inner_x = kCenterX + side * (1.6 + 2.2 * id.eye_spacing);
    const double outer_x = kCenterX + side * (5.0 + 2.2 * id.eye_spacing);
    const double inner_y = brow_y + 1.2 * ex.brow_lower;
    const double outer_y = brow_y - 1.2 * ex.brow_raise;
    if (segment_distance(x, y, inner_x, inner_y, outer_x, outer_y) <= 0.7) c = kBrow;
  }

  if (in_mouth(x, y, ex)) c = kMouth;
  return c;
}

}  // namespace

Image render_synthetic_face(const SyntheticFaceSpec& spec) {
  spec.validate();
  Image img(32, 32);
  constexpr double n = kSupersample * kSupersample;
  for (std::size_t py = 0; py < 32; ++py) {
    for (std::size_t px = 0; px < 32; ++px) {
      double r = 0, g = 0, b = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const Rgb c = shade(static_cast<double>(px) + (sx + 0.5) / kSupersample,
                              static_cast<double>(py) + (sy + 0.5) / kSupersample, spec);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      img.at(px, py, 0) = static_cast<std::uint8_t>(std::lround(r / n));
      img.at(px, py, 1) = static_cast<std::uint8_t>(std::lround(g / n));
      img.at(px, py, 2) = static_cast<std::uint8_t>(std::lround(b / n));
    }
  }
  return img;
}

PixelBox mouth_bounding_box(const SyntheticFaceSpec& spec) {
  const auto& e = spec.expression;
  const double half = mouth_max_half_height(e);
  const double top = kMouthY - kMouthCornerLift * e.mouth_corner - half;
  const double bottom = kMouthY + half;
  return {static_cast<std::size_t>(std::floor(kCenterX - kMouthHalfWidth)), static_cast<std::size_t>(std::floor(top)),
          static_cast<std::size_t>(std::ceil(kCenterX + kMouthHalfWidth)), static_cast<std::size_t>(std::ceil(bottom))};
}

namespace {

double identity_distance(const IdentityParams& a, const IdentityParams& b) {
  const auto va = a.values(), vb = b.values();
  double s = 0;
  for (std::size_t i = 0; i < va.size(); ++i) s += (va[i] - vb[i]) * (va[i] - vb[i]);
  return std::sqrt(s);
}

std::string two_digits(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(std::size_t n_subjects, std::size_t n_expressions, std::uint64_t seed,
                                      const std::string& subject_prefix) {
  if (n_subjects < 2) throw UsageError("synthetic corpus needs at least 2 subjects");
  if (n_expressions < 2) throw UsageError("synthetic corpus needs at least 2 expressions per subject");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<IdentityParams> identities;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) throw UsageError("cannot place that many distinct synthetic identities");
      IdentityParams id{unit(rng), unit(rng), unit(rng), unit(rng)};
      const bool separated = std::all_of(identities.begin(), identities.end(), [&](const IdentityParams& o) {
        return identity_distance(id, o) > kMinIdentityDistance;
      });
      if (separated) {
        identities.push_back(id);
        break;
      }
    }
  }

  SyntheticCorpus corpus;
  corpus.manifest.label_mode = LabelMode::AU;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    const std::string subject = subject_prefix + two_digits(s);
    for (std::size_t e = 0; e < n_expressions; ++e) {
      ExpressionParams ex;
      if (e > 0) {
        auto draw = [&] {
          const double gate = unit(rng);
          const double v = unit(rng);
          return gate < 0.4 ? 0.0 : v;
        };
        ex.brow_raise = draw();
        ex.brow_lower = draw();
        ex.mouth_open = draw();
        ex.mouth_corner = draw();
      }
      SyntheticFaceSpec spec{identities[s], ex};
      corpus.truth.push_back(spec);
      corpus.images.push_back(render_synthetic_face(spec));
      corpus.manifest.rows.push_back({"images/" + subject + "_e" + two_digits(e) + ".png", subject, "",
                                      expression_label(ex)});
    }
  }
  return corpus;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < corpus.manifest.rows.size(); ++i) {
    write_png(dir / corpus.manifest.rows[i].image_path, corpus.images[i]);
  }
  write_manifest(corpus.manifest, dir / "manifest.csv");
  std::ofstream gt(dir / "ground_truth.csv");
  if (!gt) throw ValidationError("cannot write ground_truth.csv in " + dir.string());
  gt << kGroundTruthHeader << '\n';
  for (std::size_t i = 0; i < corpus.manifest.rows.size(); ++i) {
    const auto& row = corpus.manifest.rows[i];
    gt << row.image_path << ',' << row.subject_id;
    for (double v : corpus.truth[i].values()) gt << ',' << format_double(v);
    gt << '\n';
  }
}

std::map<std::string, SyntheticFaceSpec> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ground truth " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty ground truth file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGroundTruthHeader) throw ValidationError(path.string() + ": unexpected ground truth header");
  std::map<std::string, SyntheticFaceSpec> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 10) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 10 fields");
    std::array<double, 8> v{};
    try {
      for (std::size_t i = 0; i < 8; ++i) v[i] = std::stod(fields[i + 2]);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    out[fields[0]] = SyntheticFaceSpec::from_values(v);
  }
  return out;
}

SyntheticCorpus load_synthetic_corpus(const std::filesystem::path& manifest_path,
                                      const std::filesystem::path& ground_truth_path) {
  SyntheticCorpus corpus;
  corpus.manifest = load_manifest(manifest_path);
  const auto truth = read_ground_truth(ground_truth_path);
  for (std::size_t i = 0; i < corpus.manifest.rows.size(); ++i) {
    const auto& row = corpus.manifest.rows[i];
    const auto it = truth.find(row.image_path);
    if (it == truth.end()) throw ValidationError("no ground truth for " + row.image_path);
    corpus.truth.push_back(it->second);
    corpus.images.push_back(corpus.manifest.load_image(i));
  }
  return corpus;
}

}  // namespace cdaae
