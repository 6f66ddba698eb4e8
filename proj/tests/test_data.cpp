#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "cdaae/dataset.hpp"
#include "cdaae/manifest.hpp"
#include "cdaae/oracle.hpp"
#include "cdaae/sampler.hpp"
#include "cdaae/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace cdaae;

namespace {

std::string header() { return std::string(kManifestHeader) + "\n"; }

CorpusManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "/data");
}

ManifestRow au_row(std::string path, std::string subject, std::vector<std::pair<std::size_t, double>> active = {}) {
  ManifestRow r{std::move(path), std::move(subject), "", LabelVector::zeros(LabelMode::AU)};
  for (auto [slot, v] : active) r.label[slot] = v;
  return r;
}

CorpusManifest emotion_grid(std::size_t subjects, std::size_t gazes) {
  CorpusManifest m;
  m.label_mode = LabelMode::Emotion;
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t g = 0; g < gazes; ++g)
      for (std::size_t e = 0; e < kEmotionCount; ++e) {
        m.rows.push_back({"s" + std::to_string(s) + "_g" + std::to_string(g) + "_e" + std::to_string(e) + ".png",
                          "s" + std::to_string(s), "g" + std::to_string(g), LabelVector::one_hot(e)});
      }
  return m;
}

// 2500 single-AU frames per AU with intensities spread over all bins, plus 2000 neutral frames.
CorpusManifest abundant_au_corpus() {
  CorpusManifest m;
  std::size_t i = 0;
  for (std::size_t au = 0; au < kActionUnitCount; ++au) {
    for (std::size_t k = 0; k < 2500; ++k, ++i) {
      const double v = 0.2 * static_cast<double>(k % 5) + 0.1 + (k % 7 == 0 ? 0.1 : 0.0);
      m.rows.push_back(au_row("f" + std::to_string(i) + ".png", "s" + std::to_string(i % 30), {{au, v}}));
    }
  }
  for (std::size_t k = 0; k < 2000; ++k, ++i) {
    m.rows.push_back(au_row("f" + std::to_string(i) + ".png", "s" + std::to_string(i % 30)));
  }
  return m;
}

bool is_zero(const LabelVector& l) {
  return std::all_of(l.values.begin(), l.values.end(), [](double v) { return v == 0; });
}

}  // namespace

TEST_SUITE("manifest") {
  TEST_CASE("empty data section is rejected with no rows") {
    try {
      parse(header());
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("no rows") != std::string::npos);
    }
  }

  TEST_CASE("0-5 coded intensities are rescaled") {
    const auto m = parse(header() + "a.png,s1,,au5,0,5,2.5,0,0,0,0,0,0,0,0,1\n" +
                         "b.png,s1,,au5,0,0,0,0,0,0,0,0,0,0,0,0\n");
    CHECK(m.label_mode == LabelMode::AU);
    CHECK(m.rows[0].label[1] == 1.0);
    CHECK(m.rows[0].label[2] == 0.5);
    CHECK(m.rows[0].label[11] == doctest::Approx(0.2));
  }

  TEST_CASE("au rows above 1 and au5 rows above 5 are rejected") {
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au,0,1.5,0,0,0,0,0,0,0,0,0,0\nb.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\n"),
                    ValidationError);
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au5,0,6,0,0,0,0,0,0,0,0,0,0\nb.png,s1,,au5,0,0,0,0,0,0,0,0,0,0,0,0\n"),
                    ValidationError);
  }

  TEST_CASE("duplicate image path is rejected") {
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\na.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\n"),
                    ValidationError);
  }

  TEST_CASE("unknown label mode is rejected") {
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,valence,0,0,0,0,0,0,0,0,0,0,0,0\n"), ValidationError);
  }

  TEST_CASE("subject with a single image is rejected") {
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\nb.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\n" +
                          "c.png,s2,,au,0,0,0,0,0,0,0,0,0,0,0,0\n"),
                    ValidationError);
  }

  TEST_CASE("wrong header and wrong field count are rejected") {
    CHECK_THROWS_AS(parse("path,subject\n"), ValidationError);
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au,0,0,0\n"), ValidationError);
  }

  TEST_CASE("emotion rows must be one-hot with empty tail columns") {
    const auto ok = parse(header() + "a.png,s1,left,emotion,0,1,0,0,0,0,0,0,,,,\nb.png,s1,left,emotion,1,0,0,0,0,0,0,0,,,,\n");
    CHECK(ok.label_mode == LabelMode::Emotion);
    CHECK(ok.rows[0].label == LabelVector::one_hot(1));
    CHECK(ok.rows[0].gaze == "left");
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,emotion,0,1,1,0,0,0,0,0,,,,\nb.png,s1,,emotion,1,0,0,0,0,0,0,0,,,,\n"),
                    ValidationError);
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,emotion,0,1,0,0,0,0,0,0,0,,,\nb.png,s1,,emotion,1,0,0,0,0,0,0,0,,,,\n"),
                    ValidationError);
  }

  TEST_CASE("AU and emotion rows cannot be mixed") {
    CHECK_THROWS_AS(parse(header() + "a.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\nb.png,s1,,emotion,1,0,0,0,0,0,0,0,,,,\n"),
                    ValidationError);
  }

  TEST_CASE("byte order mark, CRLF and quoted fields are accepted") {
    const auto m = parse("\xEF\xBB\xBF" + std::string(kManifestHeader) + "\r\n\"dir,x/a.png\",s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\r\n" +
                         "b.png,s1,,au,0,0,0,0,0,0,0,0,0,0,0,0\r\n");
    CHECK(m.rows.size() == 2);
    CHECK(m.rows[0].image_path == "dir,x/a.png");
    CHECK(m.resolve(m.rows[1]) == std::filesystem::path("/data/b.png"));
  }

  TEST_CASE("missing file is an error naming the path") {
    try {
      load_manifest("/nonexistent/manifest.csv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("/nonexistent/manifest.csv") != std::string::npos);
    }
  }

  TEST_CASE("write and load round trip") {
    test::TempDir dir;
    CorpusManifest m;
    m.rows = {au_row("a.png", "s1", {{0, 0.1}, {11, 1.0 / 3.0}}), au_row("b.png", "s1")};
    write_manifest(m, dir.path() / "m.csv");
    const auto back = load_manifest(dir.path() / "m.csv");
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].label == m.rows[0].label);
    CHECK(back.root == dir.path());

    auto em = emotion_grid(1, 1);
    write_manifest(em, dir.path() / "e.csv");
    const auto eback = load_manifest(dir.path() / "e.csv");
    CHECK(eback.label_mode == LabelMode::Emotion);
    CHECK(eback.rows[3].label == LabelVector::one_hot(3));
  }

  TEST_CASE("subjects keep first-appearance order and filtering keeps row order") {
    CorpusManifest m;
    m.rows = {au_row("1", "b"), au_row("2", "a"), au_row("3", "b"), au_row("4", "a"), au_row("5", "c"), au_row("6", "c")};
    CHECK(m.subjects() == std::vector<std::string>{"b", "a", "c"});
    const auto f = m.filter_subjects({"c", "b"});
    REQUIRE(f.rows.size() == 4);
    CHECK(f.rows[0].image_path == "1");
    CHECK(f.rows[3].image_path == "6");
  }
}

TEST_SUITE("emotion sampler") {
  TEST_CASE("50 subjects x 3 gazes x 8 emotions gives 9600 pairs") {
    const auto m = emotion_grid(50, 3);
    CHECK(m.rows.size() == 1200);
    const auto pairs = sample_pairs_emotion(m, 1);
    CHECK(pairs.size() == 9600);
    std::set<std::pair<std::size_t, std::size_t>> unique;
    for (const auto& p : pairs) {
      CHECK(m.rows[p.source].subject_id == m.rows[p.target].subject_id);
      CHECK(m.rows[p.source].gaze == m.rows[p.target].gaze);
      CHECK(p.label == m.rows[p.target].label);
      CHECK(p.subject_id == m.rows[p.target].subject_id);
      unique.insert({p.source, p.target});
    }
    CHECK(unique.size() == 9600);
  }

  TEST_CASE("1 subject x 1 gaze x 8 emotions gives 64 pairs including self pairs") {
    const auto m = emotion_grid(1, 1);
    const auto pairs = sample_pairs_emotion(m, 3);
    CHECK(pairs.size() == 64);
    std::size_t self = 0;
    for (const auto& p : pairs) {
      if (p.source != p.target) continue;
      ++self;
      CHECK(p.label == m.rows[p.source].label);
    }
    CHECK(self == 8);
  }

  TEST_CASE("holes and duplicates are listed") {
    auto m = emotion_grid(2, 1);
    m.rows.erase(m.rows.begin() + 3);
    m.rows[9].label = LabelVector::one_hot(0);
    try {
      sample_pairs_emotion(m, 1);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("anger") != std::string::npos);
      CHECK(msg.find("s0") != std::string::npos);
      CHECK(msg.find("s1") != std::string::npos);
    }
  }

  TEST_CASE("order is fixed by the seed") {
    const auto m = emotion_grid(3, 2);
    const auto a = sample_pairs_emotion(m, 5), b = sample_pairs_emotion(m, 5), c = sample_pairs_emotion(m, 6);
    auto key = [](const std::vector<FacePair>& v) {
      std::vector<std::pair<std::size_t, std::size_t>> k;
      for (const auto& p : v) k.push_back({p.source, p.target});
      return k;
    };
    CHECK(key(a) == key(b));
    CHECK(key(a) != key(c));
  }
}

TEST_SUITE("AU sampler") {
  TEST_CASE("intensity bins follow one original coding unit") {
    CHECK(intensity_bin(0.2) == 0);
    CHECK(intensity_bin(0.2000001) == 1);
    CHECK(intensity_bin(0.6) == 2);
    CHECK(intensity_bin(1.0) == 4);
    CHECK(intensity_bin(0.01) == 0);
  }

  TEST_CASE("abundant data fills every cap") {
    const auto m = abundant_au_corpus();
    const auto s = sample_pairs_au(m, AuSamplerOptions{}, 11);
    CHECK(s.pairs.size() == 12 * 2000 + 1000);
    for (auto n : s.selected_per_au) CHECK(n == 2000);
    CHECK(s.selected_zero == 1000);
    CHECK(s.warnings.empty());
  }

  TEST_CASE("caps are never exceeded and targets are nonzero for their AU") {
    const auto m = abundant_au_corpus();
    const AuSamplerOptions opt{300, 50};
    const auto s = sample_pairs_au(m, opt, 12);
    std::array<std::size_t, kActionUnitCount> per_au{};
    std::size_t zeros = 0;
    std::set<std::size_t> zero_targets;
    for (const auto& p : s.pairs) {
      const auto& l = m.rows[p.target].label;
      if (is_zero(l)) {
        ++zeros;
        zero_targets.insert(p.target);
        continue;
      }
      for (std::size_t au = 0; au < kActionUnitCount; ++au) per_au[au] += l[au] > 0;
    }
    for (auto n : per_au) CHECK(n <= opt.per_au_cap);
    CHECK(zeros == opt.zero_frames);
    CHECK(zero_targets.size() == opt.zero_frames);
  }

  TEST_CASE("selection follows the intensity histogram") {
    CorpusManifest m;
    // AU1 histogram over bins: 400, 300, 200, 100, 0.
    const std::array<std::size_t, 5> counts{400, 300, 200, 100, 0};
    std::size_t i = 0;
    for (std::size_t b = 0; b < 5; ++b)
      for (std::size_t k = 0; k < counts[b]; ++k, ++i)
        m.rows.push_back(au_row(std::to_string(i), "s" + std::to_string(i % 4), {{0, 0.2 * b + 0.1}}));
    const auto s = sample_pairs_au(m, AuSamplerOptions{100, 0}, 3);
    std::array<std::size_t, 5> got{};
    for (const auto& p : s.pairs) ++got[intensity_bin(p.label[0])];
    CHECK(got == std::array<std::size_t, 5>{40, 30, 20, 10, 0});
    CHECK(s.warnings.size() == kActionUnitCount - 1);
  }

  TEST_CASE("scarce AU uses every frame once") {
    CorpusManifest m;
    for (std::size_t i = 0; i < 30; ++i) m.rows.push_back(au_row(std::to_string(i), "s" + std::to_string(i % 3), {{5, 0.5}}));
    for (std::size_t i = 30; i < 40; ++i) m.rows.push_back(au_row(std::to_string(i), "s" + std::to_string(i % 3)));
    const auto s = sample_pairs_au(m, AuSamplerOptions{}, 4);
    CHECK(s.selected_per_au[5] == 30);
    CHECK(s.selected_zero == 10);
    std::set<std::size_t> targets;
    for (const auto& p : s.pairs) targets.insert(p.target);
    CHECK(targets.size() == 40);
  }

  TEST_CASE("single-subject corpus gives only intra-subject pairs") {
    CorpusManifest m;
    for (std::size_t i = 0; i < 50; ++i) m.rows.push_back(au_row(std::to_string(i), "only", {{i % 12, 0.5}}));
    for (const auto& p : sample_pairs_au(m, AuSamplerOptions{}, 8).pairs) {
      CHECK(m.rows[p.source].subject_id == "only");
      CHECK(m.rows[p.target].subject_id == "only");
    }
  }

  TEST_CASE("every pair stays within its subject and carries the target label") {
    const auto corpus = make_synthetic_corpus(10, 9, 3);
    const auto s = sample_pairs(corpus.manifest, AuSamplerOptions{}, 9);
    CHECK_FALSE(s.empty());
    for (const auto& p : s) {
      CHECK(corpus.manifest.rows[p.source].subject_id == corpus.manifest.rows[p.target].subject_id);
      CHECK(p.label == corpus.manifest.rows[p.target].label);
    }
  }

  TEST_CASE("sources are drawn from the whole subject frame set") {
    CorpusManifest m;
    for (std::size_t i = 0; i < 5; ++i) m.rows.push_back(au_row(std::to_string(i), "s", {{0, 0.5}}));
    std::set<std::size_t> sources;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      for (const auto& p : sample_pairs_au(m, AuSamplerOptions{}, seed).pairs) sources.insert(p.source);
    }
    CHECK(sources.size() == 5);
  }

  TEST_CASE("fixed seed gives the identical pair sequence") {
    const auto m = abundant_au_corpus();
    const auto a = sample_pairs_au(m, AuSamplerOptions{500, 100}, 21);
    const auto b = sample_pairs_au(m, AuSamplerOptions{500, 100}, 21);
    const auto c = sample_pairs_au(m, AuSamplerOptions{500, 100}, 22);
    REQUIRE(a.pairs.size() == b.pairs.size());
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      same = same && a.pairs[i].source == b.pairs[i].source && a.pairs[i].target == b.pairs[i].target;
      differs = differs || a.pairs[i].target != c.pairs[i].target || a.pairs[i].source != c.pairs[i].source;
    }
    CHECK(same);
    CHECK(differs);
  }

  TEST_CASE("AU without nonzero frames warns instead of failing") {
    CorpusManifest m;
    for (std::size_t i = 0; i < 6; ++i) m.rows.push_back(au_row(std::to_string(i), "s", {{3, 0.4}}));
    const auto s = sample_pairs_au(m, AuSamplerOptions{}, 1);
    CHECK(s.pairs.size() == 6);
    CHECK(s.warnings.size() == 11);
    CHECK(s.warnings[0].find("AU1") != std::string::npos);
  }
}

TEST_SUITE("renderer") {
  TEST_CASE("rendering is a pure function") {
    const auto spec = SyntheticFaceSpec::from_values({0.3, 0.7, 0.1, 0.9, 0.5, 0.2, 0.8, 0.4});
    CHECK(render_synthetic_face(spec) == render_synthetic_face(spec));
    CHECK(render_synthetic_face(spec).width == 32);
  }

  TEST_CASE("mouth_open changes pixels only inside the mouth box") {
    for (double corner : {0.0, 0.5, 1.0}) {
      auto a = SyntheticFaceSpec::from_values({0.4, 0.4, 0.4, 0.4, 0.3, 0.6, 0.1, corner});
      auto b = a;
      b.expression.mouth_open = 0.9;
      const auto ia = render_synthetic_face(a), ib = render_synthetic_face(b);
      const auto box_a = mouth_bounding_box(a), box_b = mouth_bounding_box(b);
      std::size_t changed = 0;
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
          for (std::size_t c = 0; c < 3; ++c) {
            if (ia.at(x, y, c) == ib.at(x, y, c)) continue;
            ++changed;
            CHECK((box_a.contains(x, y) || box_b.contains(x, y)));
          }
      CHECK(changed > 0);
    }
  }

  TEST_CASE("out-of-range parameters are rejected") {
    CHECK_THROWS_AS(render_synthetic_face(SyntheticFaceSpec::from_values({0, 0, 0, 1.2, 0, 0, 0, 0})), ValidationError);
    CHECK_THROWS_AS(render_synthetic_face(SyntheticFaceSpec::from_values({0, 0, 0, 0, 0, -0.1, 0, 0})), ValidationError);
  }

  TEST_CASE("expression parameters map one-to-one onto four label slots") {
    const ExpressionParams e{0.1, 0.2, 0.3, 0.4};
    const auto l = expression_label(e);
    std::size_t nonzero = 0;
    for (double v : l.values) nonzero += v != 0;
    CHECK(nonzero == 4);
    CHECK(l[1] == 0.1);
    CHECK(l[2] == 0.2);
    CHECK(l[11] == 0.3);
    CHECK(l[6] == 0.4);
    CHECK(expression_from_label(l).values() == e.values());
  }

  TEST_CASE("oracle regressor recovers expression parameters on a 100-image grid") {
    const auto oracle = OracleRegressor::fit();
    std::array<double, 4> mae{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j, ++n) {
        const double a = (i + 0.5) / 10.0, b = (j + 0.5) / 10.0;
        const auto spec = SyntheticFaceSpec::from_values({a, b, 1 - a, 1 - b, a, b, 1 - b, (a + b) / 2});
        const auto p = oracle.predict(render_synthetic_face(spec));
        for (std::size_t k = 0; k < 4; ++k) mae[k] += std::abs(p[4 + k] - spec.values()[4 + k]);
      }
    for (std::size_t k = 0; k < 4; ++k) {
      INFO("expression parameter " << k);
      CHECK(mae[k] / n < 0.05);
    }
  }
}

TEST_SUITE("synthetic corpus") {
  TEST_CASE("10 subjects x 9 expressions gives 90 rows") {
    const auto c = make_synthetic_corpus(10, 9, 1);
    CHECK(c.manifest.rows.size() == 90);
    CHECK(c.manifest.subjects().size() == 10);
    CHECK(c.images.size() == 90);
    CHECK(c.manifest.label_mode == LabelMode::AU);
    c.manifest.validate();
    for (std::size_t i = 0; i < 90; ++i) {
      CHECK(c.manifest.rows[i].label == expression_label(c.truth[i].expression));
      CHECK(c.images[i] == render_synthetic_face(c.truth[i]));
    }
  }

  TEST_CASE("fixed seed gives the identical corpus") {
    const auto a = make_synthetic_corpus(4, 3, 9), b = make_synthetic_corpus(4, 3, 9);
    CHECK(a.images == b.images);
    CHECK(a.manifest.rows.size() == b.manifest.rows.size());
    for (std::size_t i = 0; i < a.truth.size(); ++i) CHECK(a.truth[i].values() == b.truth[i].values());
  }

  TEST_CASE("distinct subjects are separated in identity space") {
    const auto c = make_synthetic_corpus(40, 2, 5);
    std::map<std::string, std::array<double, 4>> ids;
    for (std::size_t i = 0; i < c.truth.size(); ++i) ids[c.manifest.rows[i].subject_id] = c.truth[i].identity.values();
    REQUIRE(ids.size() == 40);
    double min_d = 1e9;
    for (auto a = ids.begin(); a != ids.end(); ++a)
      for (auto b = std::next(a); b != ids.end(); ++b) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += (a->second[k] - b->second[k]) * (a->second[k] - b->second[k]);
        min_d = std::min(min_d, std::sqrt(s));
      }
    CHECK(min_d > 0.05);
  }

  TEST_CASE("every subject starts with a neutral frame") {
    const auto c = make_synthetic_corpus(5, 4, 2, "q");
    std::set<std::string> seen;
    for (const auto& row : c.manifest.rows) {
      if (seen.insert(row.subject_id).second) CHECK(is_zero(row.label));
      CHECK(row.subject_id.rfind("q", 0) == 0);
    }
  }

  TEST_CASE("fewer than two subjects is rejected") {
    CHECK_THROWS_AS(make_synthetic_corpus(1, 9, 1), UsageError);
  }

  TEST_CASE("written corpus loads back with its ground truth") {
    test::TempDir dir;
    const auto c = make_synthetic_corpus(3, 3, 4);
    write_synthetic_corpus(c, dir.path());
    const auto back = load_synthetic_corpus(dir.path() / "manifest.csv", dir.path() / "ground_truth.csv");
    CHECK(back.images == c.images);
    for (std::size_t i = 0; i < c.truth.size(); ++i) CHECK(back.truth[i].values() == c.truth[i].values());
    const auto store = FaceStore::load(back.manifest);
    CHECK(store.size() == 9);
    CHECK(store.face(4) == preprocess(c.images[4]));
  }
}

TEST_SUITE("preprocess") {
  TEST_CASE("extreme pixel values map to plus and minus one") {
    Image img(32, 32);
    img.at(0, 0, 0) = 255;
    const auto t = preprocess(img);
    CHECK(t.shape() == Shape{3, 32, 32});
    CHECK(t[0] == 1.0f);
    CHECK(t[1] == -1.0f);
  }

  TEST_CASE("postprocess inverts preprocess on 32x32 images") {
    std::mt19937_64 rng(3);
    Image img(32, 32);
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xFF);
    CHECK(postprocess(preprocess(img)) == img);
  }

  TEST_CASE("postprocess clamps out-of-range values") {
    Tensor<float> t(Shape{1, 3, 32, 32}, 0.0f);
    t[0] = 3.0f;
    t[1] = -7.0f;
    const auto img = postprocess(t);
    CHECK(img.at(0, 0, 0) == 255);
    CHECK(img.at(1, 0, 0) == 0);
  }

  TEST_CASE("64x64 input matches an area-average reference within 2/255") {
    std::mt19937_64 rng(4);
    Image big(64, 64);
    for (auto& v : big.rgb) v = static_cast<std::uint8_t>(rng() & 0xFF);
    const auto got = postprocess(preprocess(big));
    const auto ref = oracle::area_downscale(big, 2);
    int worst = 0;
    for (std::size_t i = 0; i < ref.rgb.size(); ++i) worst = std::max(worst, std::abs(int(got.rgb[i]) - int(ref.rgb[i])));
    CHECK(worst <= 2);
  }

  TEST_CASE("batches stack sources, targets and labels") {
    const auto c = make_synthetic_corpus(2, 3, 6);
    const auto store = FaceStore::from_images(c.images);
    const auto pairs = sample_pairs(c.manifest, AuSamplerOptions{}, 1);
    const auto batch = make_batch(store, std::span(pairs).first(3), LabelMode::AU);
    CHECK(batch.source.shape() == Shape{3, 3, 32, 32});
    CHECK(batch.labels.shape() == Shape{3, 12});
    for (std::size_t k = 0; k < 3 * 32 * 32; ++k) CHECK(batch.target[2 * 3 * 32 * 32 + k] == store.face(pairs[2].target)[k]);
    CHECK(batch.labels[2 * 12 + 11] == static_cast<float>(pairs[2].label[11]));
  }

  TEST_CASE("mixed image sizes are rejected") {
    test::TempDir dir;
    write_png(dir.path() / "a.png", Image(32, 32));
    write_png(dir.path() / "b.png", Image(64, 64));
    CorpusManifest m;
    m.root = dir.path();
    m.rows = {au_row("a.png", "s"), au_row("b.png", "s")};
    CHECK_THROWS_AS(FaceStore::load(m), ValidationError);
  }
}
