#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ccdet/errors.hpp"
#include "ccdet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ccdet;

namespace {

struct Common {
  std::string config_path;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> min_cluster_size;
  std::optional<std::string> iou_source;
  std::optional<double> tp_iou;
  std::optional<double> fp_iou;
  std::optional<std::size_t> min_cc;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--jobs", c.jobs, "worker threads");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.min_cluster_size) cfg.clustering.min_cluster_size = *c.min_cluster_size;
  if (c.iou_source) cfg.iou_source = *c.iou_source == "mask" ? IouSource::mask : IouSource::box;
  if (c.tp_iou) cfg.thresholds.tp_iou = *c.tp_iou;
  if (c.fp_iou) cfg.thresholds.fp_iou = *c.fp_iou;
  if (c.min_cc) cfg.min_cc = *c.min_cc;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Common& c, const PipelineConfig& cfg, std::string_view command) {
  const fs::path out(c.out);
  fs::create_directories(out);
  write_json_file(to_json(cfg), out / "config.json");
  std::clog << "ccdet " << command << ": seed=" << cfg.seed << " jobs=" << cfg.jobs
            << " config=" << (out / "config.json").string() << '\n';
  return out;
}

void write_text(const std::string& s, const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot write " + p.string());
  f << s;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::clog << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corner-case detection from sampled instance-segmentation predictions"};
  app.require_subcommand(1);
  Common common;
  std::string manifest, detections, gt, clusters, features, categorized, model_path, state_path, summary_path;

  auto* criteria = app.add_subcommand("criteria", "cluster samples and compute the 26 criteria");
  add_common(criteria, common);
  criteria->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  criteria->add_option("--detections", detections)->required()->check(CLI::ExistingFile);
  criteria->add_option("--min-cluster-size", common.min_cluster_size);

  auto* categorize = app.add_subcommand("categorize", "match clusters to ground truth and categorize");
  add_common(categorize, common);
  categorize->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  categorize->add_option("--clusters", clusters, "clusters.ndjson from criteria")->required()->check(CLI::ExistingFile);
  categorize->add_option("--gt", gt, "ground-truth NDJSON; absent means every cluster is FP")->check(CLI::ExistingFile);
  categorize->add_option("--features", features, "feature CSV to label")->check(CLI::ExistingFile);
  categorize->add_option("--iou-source", common.iou_source)->check(CLI::IsMember({"box", "mask"}));
  categorize->add_option("--tp-iou", common.tp_iou);
  categorize->add_option("--fp-iou", common.fp_iou);

  auto* train = app.add_subcommand("train", "train the decision function on a labeled feature CSV");
  add_common(train, common);
  train->add_option("--features", features)->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate a model on a labeled feature CSV");
  add_common(eval, common);
  eval->add_option("--model", model_path)->required();
  eval->add_option("--features", features)->required()->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "correlations and sequential feature selection");
  add_common(analyze, common);
  analyze->add_option("--features", features)->required()->check(CLI::ExistingFile);
  analyze->add_option("--categorized", categorized)->required()->check(CLI::ExistingFile);

  auto* select = app.add_subcommand("select", "pick corner-case images for the next training cycle");
  add_common(select, common);
  select->add_option("--categorized", categorized)->required()->check(CLI::ExistingFile);
  select->add_option("--state", state_path, "cycle state from a previous select")->check(CLI::ExistingFile);
  select->add_option("--manifest", manifest, "candidate subset (all its images)")->check(CLI::ExistingFile);
  select->add_option("--summary", summary_path, "summary.json supplying the FN count")->check(CLI::ExistingFile);
  select->add_option("--min-cc", common.min_cc);

  auto* report = app.add_subcommand("report", "per-cycle table from a cycle state");
  add_common(report, common);
  report->add_option("--state", state_path)->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "criteria, categorize, analyze, train and evaluate in one pass");
  add_common(run, common);
  run->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  run->add_option("--detections", detections)->required()->check(CLI::ExistingFile);
  run->add_option("--gt", gt)->check(CLI::ExistingFile);
  run->add_option("--min-cluster-size", common.min_cluster_size);
  run->add_option("--iou-source", common.iou_source)->check(CLI::IsMember({"box", "mask"}));
  run->add_option("--tp-iou", common.tp_iou);
  run->add_option("--fp-iou", common.fp_iou);
  run->add_option("--min-cc", common.min_cc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const PipelineConfig cfg = resolve(common);

    if (criteria->parsed()) {
      const fs::path out = prepare_out(common, cfg, "criteria");
      const RunData data = load_run(manifest, detections);
      const CriteriaOutput res = run_criteria(data, cfg);
      write_feature_table(res.features, out / "features.csv");
      std::ostringstream buf;
      write_clusters(res.clusters, buf);
      write_text(buf.str(), out / "clusters.ndjson");
      report_warnings(res.warnings);
    } else if (categorize->parsed()) {
      const fs::path out = prepare_out(common, cfg, "categorize");
      const RunManifest m = load_manifest(manifest);
      auto in = open_input(clusters);
      const auto recs = read_clusters(in);
      std::optional<GroundTruthSet> g;
      if (!gt.empty()) g = load_ground_truth(m, gt);
      const CategorizeOutput res = run_categorize(m, recs, g ? &*g : nullptr, cfg);
      std::ostringstream buf;
      write_categorized(res.matches, buf);
      write_text(buf.str(), out / "categorized.ndjson");
      write_json_file(summary_json(res.summary), out / "summary.json");
      const std::string table = format_summary(res.summary, m.dataset);
      write_text(table, out / "summary.txt");
      std::cout << table;
      if (!features.empty()) {
        write_feature_table(attach_labels(read_feature_table(fs::path(features)), res.matches), out / "labeled.csv");
      }
      if (g) report_warnings(g->warnings);
    } else if (train->parsed()) {
      const fs::path out = prepare_out(common, cfg, "train");
      const DecisionModel model = run_train(read_feature_table(fs::path(features)), cfg);
      write_json_file(to_json(model), out / "model.json");
    } else if (eval->parsed()) {
      if (!fs::exists(model_path)) throw InputError("model file not found: " + model_path);
      const fs::path out = prepare_out(common, cfg, "eval");
      const DecisionModel model = model_from_json(read_json_file(model_path));
      const EvalReport rep = run_eval(model, read_feature_table(fs::path(features)));
      write_json_file(to_json(rep), out / "report.json");
      const std::string text = format_report(rep);
      write_text(text, out / "report.txt");
      std::cout << text;
    } else if (analyze->parsed()) {
      const fs::path out = prepare_out(common, cfg, "analyze");
      auto in = open_input(categorized);
      const AnalysisOutput res = run_analyze(read_feature_table(fs::path(features)), read_categorized(in), cfg);
      std::ostringstream csv;
      write_correlation_csv(res.correlations, csv);
      write_text(csv.str(), out / "correlations.csv");
      write_json_file(to_json(res.correlations), out / "correlations.json");
      write_json_file(selections_json(res.selections), out / "sfs.json");
    } else if (select->parsed()) {
      const fs::path out = prepare_out(common, cfg, "select");
      CycleState state = state_path.empty() ? CycleState{} : cycle_state_from_json(read_json_file(state_path));
      auto in = open_input(categorized);
      const ImageCategories images = group_by_image(read_categorized(in));
      if (!manifest.empty()) {
        for (const auto& info : load_manifest(manifest).images) state.candidates.insert(info.image_id);
      }
      for (const auto& [id, cats] : images) state.candidates.insert(id);
      state.counts = tally(images);
      if (!summary_path.empty()) {
        state.false_negatives = read_json_file(summary_path).at("counts").value("FN", std::size_t{0});
      }
      const auto chosen = select_corner_case_images(images, cfg.min_cc);
      write_json_file(selection_json(state.cycle, chosen, state.counts, state.false_negatives),
                      out / "selection.json");
      write_json_file(to_json(advance_cycle(state, chosen)), out / "state.json");
      std::cout << "cycle " << state.cycle << ": selected " << chosen.size() << " of " << state.candidates.size()
                << " candidate images\n";
    } else if (report->parsed()) {
      const fs::path out = prepare_out(common, cfg, "report");
      const CycleReport rep = cycle_report(cycle_state_from_json(read_json_file(state_path)).history);
      std::ostringstream csv;
      write_cycle_csv(rep, csv);
      write_text(csv.str(), out / "cycle_report.csv");
      write_json_file(to_json(rep), out / "cycle_report.json");
      std::cout << csv.str();
    } else if (run->parsed()) {
      FullRunInputs inputs{manifest, detections, std::nullopt};
      if (!gt.empty()) inputs.gt = gt;
      std::clog << "ccdet run: seed=" << cfg.seed << " jobs=" << cfg.jobs << '\n';
      report_warnings(run_full(inputs, cfg, common.out));
    }
  } catch (const InputError& e) {
    std::cerr << "ccdet: error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "ccdet: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ccdet: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
