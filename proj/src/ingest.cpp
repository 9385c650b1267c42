#include "ccdet/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ccdet/errors.hpp"
#include "ccdet/text.hpp"

namespace ccdet {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  return in;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw InputError("line " + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    fail_line(line, std::string("missing field '") + key + "'");
  }
  return *it;
}

double finite_number(const json& v, const char* what, std::size_t line) {
  if (!v.is_number()) {
    fail_line(line, std::string(what) + " is not a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    fail_line(line, std::string(what) + " is not finite");
  }
  return d;
}

BBox parse_bbox(const json& v, std::size_t line) {
  if (!v.is_array() || v.size() != 4) {
    fail_line(line, "bbox must be an array of 4 numbers");
  }
  BBox b{finite_number(v[0], "bbox[0]", line), finite_number(v[1], "bbox[1]", line),
         finite_number(v[2], "bbox[2]", line), finite_number(v[3], "bbox[3]", line)};
  if (b.x1 > b.x2 || b.y1 > b.y2) {
    fail_line(line, "bbox corners out of order");
  }
  return b;
}

// Returns true when the box had to be modified.
bool clamp_to_image(BBox& b, const ImageInfo& img) {
  const double w = static_cast<double>(img.width);
  const double h = static_cast<double>(img.height);
  const BBox before = b;
  b.x1 = std::clamp(b.x1, 0.0, w);
  b.x2 = std::clamp(b.x2, 0.0, w);
  b.y1 = std::clamp(b.y1, 0.0, h);
  b.y2 = std::clamp(b.y2, 0.0, h);
  return !(before == b);
}

RleMask parse_mask(const json& v, const ImageInfo& img, std::size_t line) {
  RleMask r;
  try {
    r = rle_from_json(v);
  } catch (const InputError& e) {
    fail_line(line, std::string("mask: ") + e.what());
  }
  if (r.height != img.height || r.width != img.width) {
    fail_line(line, "mask size [" + std::to_string(r.height) + "," +
                        std::to_string(r.width) + "] does not match image " +
                        img.image_id);
  }
  return r;
}

template <typename F>
void for_each_line(std::istream& in, F&& handle) {
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    if (text::trim(buf).empty()) {
      continue;
    }
    json j;
    try {
      j = json::parse(buf);
    } catch (const json::parse_error& e) {
      fail_line(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
      fail_line(line, "expected a JSON object");
    }
    handle(j, line);
  }
}

const ImageInfo& lookup_image(const RunManifest& m, const json& j, std::size_t line) {
  const json& id = require(j, "image_id", line);
  if (!id.is_string()) {
    fail_line(line, "image_id must be a string");
  }
  const ImageInfo* img = m.find_image(id.get<std::string>());
  if (img == nullptr) {
    fail_line(line, "unknown image_id '" + id.get<std::string>() + "'");
  }
  return *img;
}

}  // namespace

const ImageInfo* RunManifest::find_image(const std::string& image_id) const {
  const auto it = std::find_if(images.begin(), images.end(),
                               [&](const ImageInfo& i) { return i.image_id == image_id; });
  return it == images.end() ? nullptr : &*it;
}

std::string_view to_string(FeatureStatus s) {
  switch (s) {
    case FeatureStatus::complete: return "complete";
    case FeatureStatus::box_only: return "box_only";
    case FeatureStatus::undefined: return "undefined";
  }
  return "?";
}

std::optional<FeatureStatus> parse_feature_status(std::string_view s) {
  for (auto st : {FeatureStatus::complete, FeatureStatus::box_only, FeatureStatus::undefined}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

json rle_to_json(const RleMask& r) {
  return json{{"size", {r.height, r.width}}, {"counts", r.counts}};
}

RleMask rle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts")) {
    throw CorruptRleError("RLE must be an object with size and counts");
  }
  const json& size = j.at("size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_unsigned() ||
      !size[1].is_number_unsigned()) {
    throw CorruptRleError("RLE size must be [H, W] with non-negative integers");
  }
  RleMask r;
  r.height = size[0].get<std::size_t>();
  r.width = size[1].get<std::size_t>();
  const json& counts = j.at("counts");
  if (!counts.is_array()) {
    throw CorruptRleError("RLE counts must be an array");
  }
  r.counts.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!counts[i].is_number_unsigned()) {
      throw CorruptRleError("RLE counts must be non-negative integers");
    }
    const auto c = counts[i].get<std::uint64_t>();
    if (c == 0 && i != 0) {
      throw CorruptRleError("RLE run of length 0 at index " + std::to_string(i));
    }
    r.counts.push_back(c);
  }
  std::uint64_t sum = 0;
  for (auto c : r.counts) sum += c;
  if (sum != r.height * r.width) {
    throw CorruptRleError("RLE runs sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(r.height * r.width));
  }
  return r;
}

RunManifest parse_manifest(const json& j) {
  RunManifest m;
  try {
    m.dataset = j.value("dataset", std::string{});
    m.k = j.at("k").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.repetitions = j.value("repetitions", 1);
    for (const json& im : j.at("images")) {
      m.images.push_back({im.at("image_id").get<std::string>(),
                          im.at("width").get<std::size_t>(),
                          im.at("height").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  if (m.k < 2) {
    throw InputError("manifest: k must be at least 2");
  }
  if (m.class_names.size() != m.k) {
    throw InputError("manifest: class_names has " + std::to_string(m.class_names.size()) +
                     " entries, k is " + std::to_string(m.k));
  }
  if (m.repetitions < 1) {
    throw InputError("manifest: repetitions must be at least 1");
  }
  std::set<std::string> seen;
  for (const auto& im : m.images) {
    if (!seen.insert(im.image_id).second) {
      throw InputError("manifest: duplicate image_id '" + im.image_id + "'");
    }
    if (im.width == 0 || im.height == 0) {
      throw InputError("manifest: image '" + im.image_id + "' has zero size");
    }
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_manifest(j);
}

RunData parse_run(const RunManifest& manifest, std::istream& detections) {
  RunData run;
  run.manifest = manifest;
  std::size_t index = 0;
  for_each_line(detections, [&](const json& j, std::size_t line) {
    const ImageInfo& img = lookup_image(manifest, j, line);
    DetectionSample s;
    s.image_id = img.image_id;
    const json& rep = require(j, "repetition", line);
    if (!rep.is_number_integer() || rep.get<long long>() < 0) {
      fail_line(line, "repetition must be a non-negative integer");
    }
    if (rep.get<long long>() >= manifest.repetitions) {
      fail_line(line, "repetition " + std::to_string(rep.get<long long>()) +
                          " exceeds manifest repetitions");
    }
    s.repetition = rep.get<int>();
    const json& scores = require(j, "class_scores", line);
    if (!scores.is_array() || scores.size() != manifest.k) {
      fail_line(line, "class_scores must have length k=" + std::to_string(manifest.k));
    }
    s.class_scores.reserve(manifest.k);
    for (const json& v : scores) {
      const double p = finite_number(v, "class score", line);
      if (p < 0.0 || p > 1.0) {
        fail_line(line, "class score outside [0,1]");
      }
      s.class_scores.push_back(p);
    }
    s.bbox = parse_bbox(require(j, "bbox", line), line);
    if (clamp_to_image(s.bbox, img)) {
      run.warnings.push_back("line " + std::to_string(line) + ": bbox clamped to image bounds");
    }
    if (const auto it = j.find("mask"); it != j.end() && !it->is_null()) {
      s.mask = parse_mask(*it, img, line);
    }
    s.source_index = index++;
    run.by_image[s.image_id].push_back(std::move(s));
  });
  for (auto& [id, samples] : run.by_image) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const DetectionSample& a, const DetectionSample& b) {
                       return a.repetition < b.repetition;
                     });
  }
  run.total = index;
  return run;
}

RunData load_run(const std::filesystem::path& manifest_path,
                 const std::filesystem::path& detections_path) {
  const RunManifest manifest = load_manifest(manifest_path);
  auto in = open_input(detections_path);
  return parse_run(manifest, in);
}

GroundTruthSet parse_ground_truth(const RunManifest& manifest, std::istream& in) {
  GroundTruthSet gt;
  std::size_t index = 0;
  for_each_line(in, [&](const json& j, std::size_t line) {
    const ImageInfo& img = lookup_image(manifest, j, line);
    GroundTruthObject o;
    o.image_id = img.image_id;
    const json& cls = require(j, "class_id", line);
    if (!cls.is_number_integer() || cls.get<long long>() < 0 ||
        cls.get<long long>() >= static_cast<long long>(manifest.k)) {
      fail_line(line, "class_id must be an integer in [0," + std::to_string(manifest.k) + ")");
    }
    o.class_id = cls.get<int>();
    o.bbox = parse_bbox(require(j, "bbox", line), line);
    if (clamp_to_image(o.bbox, img)) {
      gt.warnings.push_back("line " + std::to_string(line) + ": bbox clamped to image bounds");
    }
    if (const auto it = j.find("mask"); it != j.end() && !it->is_null()) {
      o.mask = parse_mask(*it, img, line);
    }
    o.source_index = index++;
    gt.by_image[o.image_id].push_back(std::move(o));
  });
  gt.total = index;
  return gt;
}

GroundTruthSet load_ground_truth(const RunManifest& manifest,
                                 const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_ground_truth(manifest, in);
}

void write_feature_table(const std::vector<FeatureRow>& rows, std::ostream& out) {
  out << "image_id,cluster_id,status";
  for (auto name : kFeatureNames) out << ',' << name;
  out << ",label\n";
  for (const FeatureRow& r : rows) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!std::isfinite(r.values[i])) {
        throw InputError("feature " + std::string(kFeatureNames[i]) + " of " + r.image_id +
                         "/" + std::to_string(r.cluster_id) + " is not finite");
      }
    }
  }
  for (const FeatureRow& r : rows) {
    out << text::csv_escape(r.image_id) << ',' << r.cluster_id << ',' << to_string(r.status);
    for (double v : r.values) out << ',' << text::format_double(v);
    out << ',';
    if (r.label) out << to_string(*r.label);
    out << '\n';
  }
}

void write_feature_table(const std::vector<FeatureRow>& rows,
                         const std::filesystem::path& path) {
  std::ostringstream buf;
  write_feature_table(rows, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << buf.str();
}

std::vector<FeatureRow> read_feature_table(std::istream& in) {
  std::string buf;
  if (!std::getline(in, buf)) {
    throw InputError("feature table: missing header");
  }
  const auto header = text::csv_split(buf);
  constexpr std::size_t kColumns = kFeatureCount + 4;
  bool header_ok = header.size() == kColumns && header[0] == "image_id" &&
                   header[1] == "cluster_id" && header[2] == "status" &&
                   header[kColumns - 1] == "label";
  for (std::size_t i = 0; header_ok && i < kFeatureCount; ++i) {
    header_ok = header[3 + i] == kFeatureNames[i];
  }
  if (!header_ok) {
    throw InputError("feature table: unexpected header");
  }
  std::vector<FeatureRow> rows;
  std::size_t line = 1;
  while (std::getline(in, buf)) {
    ++line;
    if (text::trim(buf).empty()) continue;
    const auto f = text::csv_split(buf);
    if (f.size() != kColumns) {
      fail_line(line, "expected " + std::to_string(kColumns) + " columns");
    }
    FeatureRow r;
    r.image_id = f[0];
    const auto cid = text::parse_double(f[1]);
    if (!cid || *cid < 0 || std::floor(*cid) != *cid) {
      fail_line(line, "bad cluster_id");
    }
    r.cluster_id = static_cast<std::size_t>(*cid);
    const auto st = parse_feature_status(f[2]);
    if (!st) fail_line(line, "bad status '" + f[2] + "'");
    r.status = *st;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = text::parse_double(f[3 + i]);
      if (!v || !std::isfinite(*v)) {
        fail_line(line, "bad value for " + std::string(kFeatureNames[i]));
      }
      r.values[i] = *v;
    }
    if (!f.back().empty()) {
      const auto c = parse_category(f.back());
      if (!c) fail_line(line, "bad label '" + f.back() + "'");
      r.label = *c;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<FeatureRow> read_feature_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_feature_table(in);
}

}  // namespace ccdet
