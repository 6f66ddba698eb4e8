#include "cdaae/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cdaae/error.hpp"

namespace cdaae {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ValidationError(where + ": malformed label value '" + text + "'");
  }
  return v;
}

std::string format_label_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

CorpusManifest parse_manifest(std::istream& in, const std::filesystem::path& root) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manifest is empty: missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw ValidationError("manifest header mismatch: expected '" + std::string(kManifestHeader) + "'");
  }

  CorpusManifest m;
  m.root = root;
  bool have_family = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    std::vector<std::string> f;
    try {
      f = split_csv_line(line);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (f.size() != 16) {
      throw ValidationError(where + ": expected 16 fields, got " + std::to_string(f.size()));
    }
    ManifestRow row;
    row.image_path = f[0];
    row.subject_id = f[1];
    row.gaze = f[2];
    if (row.image_path.empty()) throw ValidationError(where + ": empty image_path");
    if (row.subject_id.empty()) throw ValidationError(where + ": empty subject_id");

    const std::string mode = lower(trim(f[3]));
    LabelMode family;
    double divisor = 1.0;
    if (mode == "au") {
      family = LabelMode::AU;
    } else if (mode == "au5") {
      family = LabelMode::AU;
      divisor = 5.0;
    } else if (mode == "emotion") {
      family = LabelMode::Emotion;
    } else {
      throw ValidationError(where + ": unknown label_mode '" + f[3] + "'");
    }
    if (!have_family) {
      m.label_mode = family;
      have_family = true;
    } else if (family != m.label_mode) {
      throw ValidationError(where + ": label_mode mixes AU and emotion rows");
    }

    const std::size_t dim = label_dim(family);
    row.label = LabelVector::zeros(family);
    for (std::size_t i = 0; i < 12; ++i) {
      const std::string& cell = f[4 + i];
      if (i >= dim) {
        if (!trim(cell).empty()) throw ValidationError(where + ": column l" + std::to_string(i + 1) + " must be empty in emotion mode");
        continue;
      }
      if (trim(cell).empty()) throw ValidationError(where + ": missing label column l" + std::to_string(i + 1));
      const double raw = parse_number(cell, where);
      if (divisor != 1.0 && !(raw >= 0.0 && raw <= divisor)) {
        throw ValidationError(where + ": au5 intensity " + cell + " outside [0,5]");
      }
      row.label[i] = raw / divisor;
    }
    m.rows.push_back(std::move(row));
  }
  m.validate();
  return m;
}

void CorpusManifest::validate() const {
  if (rows.empty()) throw ValidationError("manifest has no rows");
  std::set<std::string> paths;
  std::map<std::string, std::size_t> per_subject;
  for (const auto& row : rows) {
    if (!paths.insert(row.image_path).second) throw ValidationError("duplicate image_path '" + row.image_path + "'");
    if (row.label.mode != label_mode) throw ValidationError("row '" + row.image_path + "' has a different label mode");
    try {
      row.label.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("row '" + row.image_path + "': " + e.what());
    }
    if (label_mode == LabelMode::Emotion && !row.label.is_one_hot()) {
      throw ValidationError("row '" + row.image_path + "': emotion label must be one-hot");
    }
    ++per_subject[row.subject_id];
  }
  for (const auto& [subject, count] : per_subject) {
    if (count < 2) throw ValidationError("subject '" + subject + "' has a single image; pairing needs at least two");
  }
}

Image CorpusManifest::load_image(std::size_t row) const {
  if (row >= rows.size()) throw UsageError("manifest row out of range");
  return read_png(resolve(rows[row]));
}

std::vector<std::string> CorpusManifest::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.subject_id).second) out.push_back(row.subject_id);
  }
  return out;
}

CorpusManifest CorpusManifest::filter_subjects(const std::vector<std::string>& subject_ids) const {
  const std::set<std::string> keep(subject_ids.begin(), subject_ids.end());
  CorpusManifest out;
  out.label_mode = label_mode;
  out.root = root;
  for (const auto& row : rows) {
    if (keep.count(row.subject_id)) out.rows.push_back(row);
  }
  return out;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  try {
    return parse_manifest(in, path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& row : manifest.rows) {
    out << csv_field(row.image_path) << ',' << csv_field(row.subject_id) << ',' << csv_field(row.gaze) << ','
        << to_string(manifest.label_mode);
    for (std::size_t i = 0; i < 12; ++i) {
      out << ',';
      if (i < row.label.size()) out << format_label_value(row.label[i]);
    }
    out << '\n';
  }
}

}  // namespace cdaae
