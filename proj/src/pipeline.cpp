#include "ccdet/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ccdet/errors.hpp"
#include "ccdet/parallel.hpp"
#include "ccdet/text.hpp"

namespace ccdet {

using nlohmann::json;

namespace {

// Typed reader over one JSON object that rejects unknown keys.
class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<std::string_view> keys)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError("config: " + where() + " must be an object");
    for (const auto& [key, value] : j_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw InputError("config: unknown key '" + (path_.empty() ? "" : path_ + ".") + key + "'");
      }
    }
  }

  template <class T>
  void read(std::string_view key, T& out) const {
    const std::string k(key);
    if (!j_.contains(k)) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!j_.at(k).is_boolean()) throw InputError("");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!j_.at(k).is_number_unsigned()) throw InputError("");
      }
      if constexpr (std::is_same_v<T, double>) {
        if (!j_.at(k).is_number()) throw InputError("");
      }
      out = j_.at(k).get<T>();
    } catch (const std::exception&) {
      throw InputError("config: bad value for '" + (path_.empty() ? "" : path_ + ".") + k + "'");
    }
  }

  std::optional<Section> child(std::string_view key, std::initializer_list<std::string_view> keys) const {
    const std::string k(key);
    if (!j_.contains(k)) return std::nullopt;
    return Section(j_.at(k), path_.empty() ? k : path_ + "." + k, keys);
  }

  const json& raw(std::string_view key) const { return j_.at(std::string(key)); }
  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

 private:
  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
};

template <class Fn>
void as_input_error(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

std::string_view to_string(IouSource s) { return s == IouSource::box ? "box" : "mask"; }
std::string_view to_string(SfsMode m) {
  switch (m) {
    case SfsMode::forward: return "forward";
    case SfsMode::backward: return "backward";
    case SfsMode::both: return "both";
  }
  return "?";
}

std::string parse_line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

json box_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

BBox box_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw InputError("box must have 4 numbers");
  return {v[0], v[1], v[2], v[3]};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Summary of one cluster: mean box, mean mask, dominant class.
ClusterRecord summarize_cluster(const std::string& image_id, const Cluster& c, FeatureStatus status,
                                bool use_masks) {
  ClusterRecord r;
  r.image_id = image_id;
  r.cluster_id = c.cluster_id;
  r.size = c.size();
  r.status = status;
  const double n = static_cast<double>(c.size());
  std::vector<double> scores(c.members.front().class_scores.size(), 0.0);
  for (const auto& m : c.members) {
    r.mean_box.x1 += m.bbox.x1 / n;
    r.mean_box.y1 += m.bbox.y1 / n;
    r.mean_box.x2 += m.bbox.x2 / n;
    r.mean_box.y2 += m.bbox.y2 / n;
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] += m.class_scores[k];
  }
  for (double& s : scores) s /= n;
  r.k_max = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  r.score = scores[r.k_max];
  const bool all_masks =
      std::all_of(c.members.begin(), c.members.end(), [](const auto& m) { return m.mask.has_value(); });
  if (use_masks && all_masks) {
    std::vector<BinaryMask> masks;
    masks.reserve(c.size());
    for (const auto& m : c.members) masks.push_back(rle_decode(*m.mask));
    r.mean_mask = rle_encode(mean_mask(masks));
  }
  return r;
}

void write_text_file(const std::string& content, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out) throw InputError("write failed: " + path.string());
}

}  // namespace

void PipelineConfig::validate() const {
  if (jobs < 1) throw InputError("config: jobs must be at least 1");
  if (min_cc < 1) throw InputError("config: cycle.min_cc must be at least 1");
  if (sfs.folds < 2) throw InputError("config: sfs.folds must be at least 2");
  if (sfs.n_select < 1 || sfs.n_select > kFeatureCount) {
    throw InputError("config: sfs.n_select must be in [1, " + std::to_string(kFeatureCount) + "]");
  }
  as_input_error([&] {
    clustering.validate();
    features.kde.validate();
    thresholds.validate();
    classifier.tree.validate();
  });
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  const Section root(j, "", {"seed", "jobs", "clustering", "kde", "features", "matching", "classifier", "sfs", "cycle"});
  root.read("seed", c.seed);
  root.read("jobs", c.jobs);
  if (auto s = root.child("clustering", {"method", "link_iou", "min_cluster_size", "gmm_max_components",
                                         "gmm_max_iterations", "gmm_tolerance"})) {
    std::string method = "greedy_iou";
    s->read("method", method);
    if (method == "greedy_iou") {
      c.clustering.method = ClusterMethod::greedy_iou;
    } else if (method == "gmm") {
      c.clustering.method = ClusterMethod::gmm;
    } else {
      throw InputError("config: clustering.method must be greedy_iou or gmm");
    }
    s->read("link_iou", c.clustering.link_iou);
    s->read("min_cluster_size", c.clustering.min_cluster_size);
    s->read("gmm_max_components", c.clustering.gmm_max_components);
    s->read("gmm_max_iterations", c.clustering.gmm_max_iterations);
    s->read("gmm_tolerance", c.clustering.gmm_tolerance);
  }
  if (auto s = root.child("kde", {"grid_size", "bandwidth", "min_bandwidth", "kl_epsilon"})) {
    s->read("grid_size", c.features.kde.grid_size);
    if (s->has("bandwidth") && !s->raw("bandwidth").is_null()) {
      double bw = 0.0;
      s->read("bandwidth", bw);
      c.features.kde.bandwidth = bw;
    }
    s->read("min_bandwidth", c.features.kde.min_bandwidth);
    s->read("kl_epsilon", c.features.kde.kl_epsilon);
  }
  if (auto s = root.child("features", {"use_masks"})) {
    s->read("use_masks", c.features.use_masks);
  }
  if (auto s = root.child("matching", {"iou_source", "tp_iou", "fp_iou"})) {
    std::string source = "box";
    s->read("iou_source", source);
    if (source != "box" && source != "mask") throw InputError("config: matching.iou_source must be box or mask");
    c.iou_source = source == "box" ? IouSource::box : IouSource::mask;
    s->read("tp_iou", c.thresholds.tp_iou);
    s->read("fp_iou", c.thresholds.fp_iou);
  }
  if (auto s = root.child("classifier", {"kind", "max_depth", "min_leaf", "n_trees", "max_features",
                                         "bootstrap", "undersample"})) {
    std::string kind = "tree";
    s->read("kind", kind);
    if (kind != "tree" && kind != "forest") throw InputError("config: classifier.kind must be tree or forest");
    c.classifier.kind = kind == "tree" ? ModelKind::tree : ModelKind::forest;
    s->read("max_depth", c.classifier.tree.max_depth);
    s->read("min_leaf", c.classifier.tree.min_leaf);
    s->read("n_trees", c.classifier.tree.n_trees);
    s->read("max_features", c.classifier.tree.max_features);
    s->read("bootstrap", c.classifier.tree.bootstrap);
    s->read("undersample", c.classifier.undersample);
  }
  if (auto s = root.child("sfs", {"mode", "n_select", "folds"})) {
    std::string mode = "both";
    s->read("mode", mode);
    if (mode == "forward") {
      c.sfs.mode = SfsMode::forward;
    } else if (mode == "backward") {
      c.sfs.mode = SfsMode::backward;
    } else if (mode == "both") {
      c.sfs.mode = SfsMode::both;
    } else {
      throw InputError("config: sfs.mode must be forward, backward or both");
    }
    s->read("n_select", c.sfs.n_select);
    s->read("folds", c.sfs.folds);
  }
  if (auto s = root.child("cycle", {"min_cc"})) {
    s->read("min_cc", c.min_cc);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

json to_json(const PipelineConfig& c) {
  const auto& kde = c.features.kde;
  const auto& t = c.classifier.tree;
  return json{
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"clustering",
       {{"method", c.clustering.method == ClusterMethod::greedy_iou ? "greedy_iou" : "gmm"},
        {"link_iou", c.clustering.link_iou},
        {"min_cluster_size", c.clustering.min_cluster_size},
        {"gmm_max_components", c.clustering.gmm_max_components},
        {"gmm_max_iterations", c.clustering.gmm_max_iterations},
        {"gmm_tolerance", c.clustering.gmm_tolerance}}},
      {"kde",
       {{"grid_size", kde.grid_size},
        {"bandwidth", kde.bandwidth ? json(*kde.bandwidth) : json(nullptr)},
        {"min_bandwidth", kde.min_bandwidth},
        {"kl_epsilon", kde.kl_epsilon}}},
      {"features", {{"use_masks", c.features.use_masks}}},
      {"matching",
       {{"iou_source", to_string(c.iou_source)},
        {"tp_iou", c.thresholds.tp_iou},
        {"fp_iou", c.thresholds.fp_iou}}},
      {"classifier",
       {{"kind", c.classifier.kind == ModelKind::tree ? "tree" : "forest"},
        {"max_depth", t.max_depth},
        {"min_leaf", t.min_leaf},
        {"n_trees", t.n_trees},
        {"max_features", t.max_features},
        {"bootstrap", t.bootstrap},
        {"undersample", c.classifier.undersample}}},
      {"sfs", {{"mode", to_string(c.sfs.mode)}, {"n_select", c.sfs.n_select}, {"folds", c.sfs.folds}}},
      {"cycle", {{"min_cc", c.min_cc}}}};
}

CriteriaOutput run_criteria(const RunData& run, const PipelineConfig& config) {
  config.validate();
  ClusteringConfig cc = config.clustering;
  cc.gmm_seed = config.seed;

  std::vector<const std::pair<const std::string, std::vector<DetectionSample>>*> images;
  for (const auto& entry : run.by_image) images.push_back(&entry);
  std::vector<CriteriaOutput> parts(images.size());

  parallel_for(images.size(), config.jobs, [&](std::size_t i) {
    const auto& [image_id, samples] = *images[i];
    CriteriaOutput& part = parts[i];
    auto [kept, dropped] = filter_clusters(cluster_samples(samples, cc), config.clustering.min_cluster_size);
    std::vector<std::pair<const Cluster*, bool>> all;
    for (const auto& c : kept) all.emplace_back(&c, true);
    for (const auto& c : dropped) all.emplace_back(&c, false);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first->cluster_id < b.first->cluster_id; });
    for (const auto& [cluster, is_kept] : all) {
      FeatureRow row;
      row.image_id = image_id;
      row.cluster_id = cluster->cluster_id;
      if (is_kept) {
        FeatureResult fr = feature_vector(*cluster, config.features);
        row.values = fr.values;
        row.status = fr.status;
        if (fr.status != FeatureStatus::complete && config.features.use_masks) {
          part.warnings.push_back("image " + image_id + " cluster " + std::to_string(cluster->cluster_id) +
                                  ": " + std::string(to_string(fr.status)) + " (" + fr.note + ")");
        }
      } else {
        row.status = FeatureStatus::undefined;
        part.warnings.push_back("image " + image_id + " cluster " + std::to_string(cluster->cluster_id) +
                                ": below min_cluster_size (" + std::to_string(cluster->size()) + ")");
      }
      part.features.push_back(row);
      part.clusters.push_back(summarize_cluster(image_id, *cluster, row.status, config.features.use_masks));
    }
  });

  CriteriaOutput out;
  out.warnings = run.warnings;
  for (auto& p : parts) {
    std::move(p.features.begin(), p.features.end(), std::back_inserter(out.features));
    std::move(p.clusters.begin(), p.clusters.end(), std::back_inserter(out.clusters));
    std::move(p.warnings.begin(), p.warnings.end(), std::back_inserter(out.warnings));
  }
  return out;
}

void write_clusters(const std::vector<ClusterRecord>& clusters, std::ostream& out) {
  for (const auto& c : clusters) {
    const json j{{"image_id", c.image_id},
                 {"cluster_id", c.cluster_id},
                 {"size", c.size},
                 {"status", to_string(c.status)},
                 {"mean_box", box_json(c.mean_box)},
                 {"k_max", c.k_max},
                 {"score", c.score},
                 {"mean_mask", c.mean_mask ? rle_to_json(*c.mean_mask) : json(nullptr)}};
    out << j.dump() << '\n';
  }
}

std::vector<ClusterRecord> read_clusters(std::istream& in) {
  std::vector<ClusterRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      ClusterRecord c;
      c.image_id = j.at("image_id").get<std::string>();
      c.cluster_id = j.at("cluster_id").get<std::size_t>();
      c.size = j.at("size").get<std::size_t>();
      const auto status = parse_feature_status(j.at("status").get<std::string>());
      if (!status) throw InputError("unknown status");
      c.status = *status;
      c.mean_box = box_from_json(j.at("mean_box"));
      c.k_max = j.at("k_max").get<std::size_t>();
      c.score = j.at("score").get<double>();
      if (j.contains("mean_mask") && !j.at("mean_mask").is_null()) c.mean_mask = rle_from_json(j.at("mean_mask"));
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw InputError(parse_line_error(n, e.what()));
    } catch (const InputError& e) {
      throw InputError(parse_line_error(n, e.what()));
    }
  }
  return out;
}

CategorizeOutput run_categorize(const RunManifest& manifest, const std::vector<ClusterRecord>& clusters,
                                const GroundTruthSet* gt, const PipelineConfig& config) {
  config.validate();
  std::map<std::string, std::vector<const ClusterRecord*>> by_image;
  for (const auto& c : clusters) {
    const ImageInfo* info = manifest.find_image(c.image_id);
    if (!info) throw InputError("cluster for unknown image_id '" + c.image_id + "'");
    if (c.k_max >= manifest.k) throw InputError("cluster k_max out of range in image '" + c.image_id + "'");
    by_image[c.image_id].push_back(&c);
  }
  std::vector<const std::pair<const std::string, std::vector<const ClusterRecord*>>*> images;
  for (const auto& e : by_image) images.push_back(&e);

  static const std::vector<GroundTruthObject> kNoGt;
  std::vector<std::vector<MatchResult>> parts(images.size());
  std::vector<std::vector<ScoredDetection>> scored(images.size());
  parallel_for(images.size(), config.jobs, [&](std::size_t i) {
    const auto& [image_id, recs] = *images[i];
    std::vector<ClusterSummary> summaries;
    for (const ClusterRecord* r : recs) {
      ClusterSummary s;
      s.image_id = r->image_id;
      s.cluster_id = r->cluster_id;
      s.size = r->size;
      s.mean_box = r->mean_box;
      if (r->mean_mask) s.mean_mask = rle_decode(*r->mean_mask);
      s.k_max = r->k_max;
      s.score = r->score;
      scored[i].push_back({s.image_id, s.k_max, s.score, s.mean_box, s.mean_mask});
      summaries.push_back(std::move(s));
    }
    const std::vector<GroundTruthObject>* objects = &kNoGt;
    if (gt) {
      if (auto it = gt->by_image.find(image_id); it != gt->by_image.end()) objects = &it->second;
    }
    parts[i] = match_image(summaries, *objects, config.iou_source, config.thresholds);
  });

  CategorizeOutput out;
  std::vector<ScoredDetection> detections;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::move(parts[i].begin(), parts[i].end(), std::back_inserter(out.matches));
    std::move(scored[i].begin(), scored[i].end(), std::back_inserter(detections));
  }
  out.summary = summarize(out.matches, gt ? gt->total : 0);
  if (gt) {
    std::vector<GroundTruthObject> flat;
    for (const auto& [id, objs] : gt->by_image) flat.insert(flat.end(), objs.begin(), objs.end());
    out.summary.map_box = map_at_iou(detections, flat, IouSource::box, 0.5);
    out.summary.map_mask = map_at_iou(detections, flat, IouSource::mask, 0.5);
  }
  return out;
}

void write_categorized(const std::vector<MatchResult>& matches, std::ostream& out) {
  for (const auto& m : matches) {
    const json j{{"image_id", m.image_id},
                 {"cluster_id", m.cluster_id},
                 {"category", to_string(m.category)},
                 {"iou_box_gt", m.iou_box_gt},
                 {"iou_mask_gt", optional_json(m.iou_mask_gt)},
                 {"class_correct", m.class_correct},
                 {"gt_index", m.gt_index ? json(*m.gt_index) : json(nullptr)}};
    out << j.dump() << '\n';
  }
}

std::vector<MatchResult> read_categorized(std::istream& in) {
  std::vector<MatchResult> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      MatchResult m;
      m.image_id = j.at("image_id").get<std::string>();
      m.cluster_id = j.at("cluster_id").get<std::size_t>();
      const auto cat = parse_category(j.at("category").get<std::string>());
      if (!cat) throw InputError("unknown category '" + j.at("category").get<std::string>() + "'");
      m.category = *cat;
      m.iou_box_gt = j.value("iou_box_gt", 0.0);
      if (j.contains("iou_mask_gt") && !j.at("iou_mask_gt").is_null()) {
        m.iou_mask_gt = j.at("iou_mask_gt").get<double>();
      }
      m.class_correct = j.value("class_correct", false);
      if (j.contains("gt_index") && !j.at("gt_index").is_null()) m.gt_index = j.at("gt_index").get<std::size_t>();
      m.iou = m.iou_box_gt;
      out.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw InputError(parse_line_error(n, e.what()));
    } catch (const InputError& e) {
      throw InputError(parse_line_error(n, e.what()));
    }
  }
  return out;
}

json summary_json(const DatasetSummary& s) {
  json counts = json::object();
  json pct = json::object();
  for (Category c : kAllCategories) {
    counts[std::string(to_string(c))] = s.counts[index_of(c)];
    pct[std::string(to_string(c))] = s.percentages[index_of(c)];
  }
  counts["FN"] = s.false_negatives;
  return json{{"detections", s.detections},
              {"gt_objects", s.gt_objects},
              {"counts", std::move(counts)},
              {"percentages", std::move(pct)},
              {"map50_box", optional_json(s.map_box)},
              {"map50_mask", optional_json(s.map_mask)}};
}

std::string format_summary(const DatasetSummary& s, const std::string& dataset) {
  std::ostringstream out;
  auto row = [&](std::string_view name, const std::string& value) {
    out << std::left << std::setw(16) << name << value << '\n';
  };
  auto pct = [](double p) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(1) << p;
    return o.str();
  };
  row("dataset", dataset);
  row("GT objects", std::to_string(s.gt_objects));
  row("detections", std::to_string(s.detections));
  for (Category c : kAllCategories) {
    const std::size_t i = index_of(c);
    row(to_string(c), std::to_string(s.counts[i]) + " (" + pct(s.percentages[i]) + "%)");
  }
  row("FN", std::to_string(s.false_negatives));
  auto map_text = [&](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream o;
    o << std::fixed << std::setprecision(1) << 100.0 * *v;
    return o.str();
  };
  row("mAP50 box", map_text(s.map_box));
  row("mAP50 mask", map_text(s.map_mask));
  return out.str();
}

std::vector<FeatureRow> attach_labels(std::vector<FeatureRow> rows, const std::vector<MatchResult>& matches) {
  std::map<std::pair<std::string, std::size_t>, Category> index;
  for (const auto& m : matches) index[{m.image_id, m.cluster_id}] = m.category;
  for (auto& r : rows) {
    if (auto it = index.find({r.image_id, r.cluster_id}); it != index.end()) {
      r.label = it->second;
    } else {
      r.label.reset();
    }
  }
  return rows;
}

DecisionModel run_train(const std::vector<FeatureRow>& labeled, const PipelineConfig& config) {
  config.validate();
  LabeledSet set = LabeledSet::from_feature_rows(labeled);
  if (set.empty()) throw InputError("no complete labeled rows to train on");
  if (config.classifier.undersample) set = random_undersample(set, config.seed);
  TreeConfig tc = config.classifier.tree;
  tc.seed = config.seed;
  tc.jobs = config.jobs;
  return config.classifier.kind == ModelKind::tree ? train_tree(set, tc) : train_forest(set, tc);
}

EvalReport run_eval(const DecisionModel& model, const std::vector<FeatureRow>& labeled) {
  const LabeledSet set = LabeledSet::from_feature_rows(labeled);
  if (set.empty()) throw InputError("no complete labeled rows to evaluate");
  if (model.n_features != set.n_features()) {
    throw InputError("model expects " + std::to_string(model.n_features) + " features");
  }
  return evaluate(model, set);
}

AnalysisOutput run_analyze(const std::vector<FeatureRow>& rows, const std::vector<MatchResult>& matches,
                           const PipelineConfig& config) {
  config.validate();
  std::map<std::pair<std::string, std::size_t>, const MatchResult*> index;
  for (const auto& m : matches) index[{m.image_id, m.cluster_id}] = &m;

  std::vector<CriteriaVector> x;
  std::vector<double> box_iou;
  std::vector<std::optional<double>> mask_iou;
  for (const auto& r : rows) {
    if (r.status != FeatureStatus::complete) continue;
    const auto it = index.find({r.image_id, r.cluster_id});
    if (it == index.end() || !it->second->gt_index) continue;
    x.push_back(r.values);
    box_iou.push_back(it->second->iou_box_gt);
    mask_iou.push_back(it->second->iou_mask_gt);
  }
  AnalysisOutput out;
  out.correlations = correlation_report(x, box_iou, mask_iou);

  const LabeledSet set = LabeledSet::from_feature_rows(attach_labels(rows, matches));
  SfsConfig sc;
  sc.n_select = config.sfs.n_select;
  sc.folds = config.sfs.folds;
  sc.seed = config.seed;
  sc.tree = config.classifier.tree;
  sc.tree.seed = config.seed;
  sc.jobs = config.jobs;
  if (config.sfs.mode != SfsMode::backward) {
    sc.direction = SelectionDirection::forward;
    out.selections.push_back(sequential_feature_selection(set, sc));
  }
  if (config.sfs.mode != SfsMode::forward) {
    sc.direction = SelectionDirection::backward;
    out.selections.push_back(sequential_feature_selection(set, sc));
  }
  return out;
}

json selections_json(const std::vector<SelectionResult>& selections) {
  json arr = json::array();
  for (const auto& s : selections) arr.push_back(to_json(s));
  return json{{"selections", std::move(arr)}};
}

ImageCategories group_by_image(const std::vector<MatchResult>& matches) {
  ImageCategories out;
  for (const auto& m : matches) out[m.image_id].push_back(m.category);
  return out;
}

json selection_json(std::size_t cycle, const std::set<std::string>& selected,
                    const std::array<std::size_t, kNumCategories>& counts, std::size_t false_negatives) {
  json c = json::object();
  for (Category cat : kAllCategories) c[std::string(to_string(cat))] = counts[index_of(cat)];
  c["FN"] = false_negatives;
  return json{{"cycle", cycle}, {"selected", selected}, {"counts", std::move(c)}};
}

std::vector<std::string> run_full(const FullRunInputs& inputs, const PipelineConfig& config,
                                  const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const RunData run = load_run(inputs.manifest, inputs.detections);
  std::optional<GroundTruthSet> gt;
  if (inputs.gt) gt = load_ground_truth(run.manifest, *inputs.gt);

  write_json_file(to_json(config), out_dir / "config.json");
  CriteriaOutput crit = run_criteria(run, config);
  std::vector<std::string> warnings = crit.warnings;
  if (gt) warnings.insert(warnings.end(), gt->warnings.begin(), gt->warnings.end());
  write_feature_table(crit.features, out_dir / "features.csv");
  {
    std::ostringstream buf;
    write_clusters(crit.clusters, buf);
    write_text_file(buf.str(), out_dir / "clusters.ndjson");
  }

  const CategorizeOutput cat = run_categorize(run.manifest, crit.clusters, gt ? &*gt : nullptr, config);
  {
    std::ostringstream buf;
    write_categorized(cat.matches, buf);
    write_text_file(buf.str(), out_dir / "categorized.ndjson");
  }
  write_json_file(summary_json(cat.summary), out_dir / "summary.json");
  write_text_file(format_summary(cat.summary, run.manifest.dataset), out_dir / "summary.txt");
  const auto labeled = attach_labels(crit.features, cat.matches);
  write_feature_table(labeled, out_dir / "labeled.csv");

  const auto by_image = group_by_image(cat.matches);
  write_json_file(selection_json(1, select_corner_case_images(by_image, config.min_cc), tally(by_image),
                                 cat.summary.false_negatives),
                  out_dir / "selection.json");

  try {
    const AnalysisOutput an = run_analyze(crit.features, cat.matches, config);
    std::ostringstream csv;
    write_correlation_csv(an.correlations, csv);
    write_text_file(csv.str(), out_dir / "correlations.csv");
    write_json_file(to_json(an.correlations), out_dir / "correlations.json");
    write_json_file(selections_json(an.selections), out_dir / "sfs.json");
  } catch (const InputError& e) {
    warnings.push_back(std::string("analysis skipped: ") + e.what());
  }
  try {
    const DecisionModel model = run_train(labeled, config);
    write_json_file(to_json(model), out_dir / "model.json");
    const EvalReport report = run_eval(model, labeled);
    write_json_file(to_json(report), out_dir / "train_report.json");
    write_text_file(format_report(report), out_dir / "train_report.txt");
  } catch (const InputError& e) {
    warnings.push_back(std::string("training skipped: ") + e.what());
  }
  return warnings;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  write_text_file(j.dump(2) + "\n", path);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace ccdet
