// Regenerates tests/data. Usage: make_fixtures <dir>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ccdet/pipeline.hpp"
#include "synth.hpp"

using namespace ccdet;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <dir>\n";
    return 2;
  }
  const fs::path dir(argv[1]);
  fs::create_directories(dir);

  synth::SceneOptions opt;
  opt.images = 6;
  opt.seed = 42;
  synth::write_scene_dataset(dir, opt);

  PipelineConfig cfg;
  cfg.seed = 3;
  cfg.classifier.tree.n_trees = 15;
  cfg.classifier.undersample = false;
  cfg.sfs.n_select = 3;
  cfg.sfs.folds = 3;
  write_json_file(to_json(cfg), dir / "config.json");

  const auto run = load_run(dir / "manifest.json", dir / "detections.ndjson");
  const auto gt = load_ground_truth(run.manifest, dir / "gt.ndjson");
  const auto crit = run_criteria(run, cfg);
  write_feature_table(crit.features, dir / "features.csv");

  const auto cat = run_categorize(run.manifest, crit.clusters, &gt, cfg);
  const auto labeled = attach_labels(crit.features, cat.matches);
  write_feature_table(labeled, dir / "labeled.csv");
  write_json_file(summary_json(cat.summary), dir / "summary.json");

  const auto model = run_train(labeled, cfg);
  const auto report = run_eval(model, labeled);
  write_json_file({{"weighted_f1", report.weighted_f1}, {"rows", report.total}}, dir / "golden.json");
  std::cout << "wrote " << dir.string() << ": " << crit.features.size() << " clusters, weighted F1 "
            << report.weighted_f1 << '\n';
  return 0;
}
