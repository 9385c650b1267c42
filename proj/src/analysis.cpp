#include "ccdet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "ccdet/errors.hpp"
#include "ccdet/parallel.hpp"
#include "ccdet/text.hpp"

namespace ccdet {

using nlohmann::json;

namespace {

void require_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("correlation: need at least two samples");
}

std::string_view target_name(IouTarget t) { return t == IouTarget::box ? "box_iou" : "mask_iou"; }

json correlation_json(const Correlation& c) {
  return c.defined ? json(c.value) : json(nullptr);
}

std::string correlation_csv(const Correlation& c) {
  return c.defined ? text::format_double(c.value) : std::string();
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return {};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), true};
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

std::string_view to_string(CriteriaGroup g) {
  switch (g) {
    case CriteriaGroup::class_score: return "class";
    case CriteriaGroup::box: return "box";
    case CriteriaGroup::mask: return "mask";
    case CriteriaGroup::combined: return "combined";
  }
  return "?";
}

CriteriaGroup group_of(std::size_t f) {
  if (f < feature::kBoxSigmaBegin) return CriteriaGroup::class_score;
  if (f < feature::kMaskSigmaBegin) return CriteriaGroup::box;
  if (f < feature::kIouMis) return CriteriaGroup::mask;
  return CriteriaGroup::combined;
}

const CorrelationEntry* CorrelationTable::find(std::size_t f, IouTarget target) const {
  for (const auto& e : entries) {
    if (e.feature == f && e.target == target) return &e;
  }
  return nullptr;
}

CorrelationTable correlation_report(std::span<const CriteriaVector> features,
                                    std::span<const double> box_iou,
                                    std::span<const std::optional<double>> mask_iou) {
  if (features.size() != box_iou.size() || features.size() != mask_iou.size()) {
    throw std::invalid_argument("correlation_report: column lengths differ");
  }
  std::vector<std::size_t> mask_rows;
  for (std::size_t i = 0; i < mask_iou.size(); ++i) {
    if (mask_iou[i]) mask_rows.push_back(i);
  }

  auto entry = [&](std::size_t f, IouTarget target) {
    CorrelationEntry e;
    e.feature = f;
    e.group = group_of(f);
    e.target = target;
    std::vector<double> x;
    std::vector<double> y;
    if (target == IouTarget::box) {
      for (std::size_t i = 0; i < features.size(); ++i) {
        x.push_back(features[i][f]);
        y.push_back(box_iou[i]);
      }
    } else {
      for (std::size_t i : mask_rows) {
        x.push_back(features[i][f]);
        y.push_back(*mask_iou[i]);
      }
    }
    e.n = x.size();
    if (e.n >= 2) {
      e.pearson = pearson(x, y);
      e.spearman = spearman(x, y);
    }
    return e;
  };

  CorrelationTable table;
  const std::array<std::pair<CriteriaGroup, std::vector<IouTarget>>, 4> layout = {{
      {CriteriaGroup::box, {IouTarget::box}},
      {CriteriaGroup::mask, {IouTarget::mask}},
      {CriteriaGroup::combined, {IouTarget::box, IouTarget::mask}},
      {CriteriaGroup::class_score, {IouTarget::box, IouTarget::mask}},
  }};
  for (const auto& [group, targets] : layout) {
    for (IouTarget t : targets) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (group_of(f) == group) table.entries.push_back(entry(f, t));
      }
    }
  }
  // remaining cross pairs (box criteria vs mask IoU and vice versa) complete the table
  for (const auto& [group, t] : {std::pair{CriteriaGroup::box, IouTarget::mask},
                                 std::pair{CriteriaGroup::mask, IouTarget::box}}) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (group_of(f) == group) table.entries.push_back(entry(f, t));
    }
  }
  return table;
}

void write_correlation_csv(const CorrelationTable& table, std::ostream& out) {
  out << "feature,group,target,n,pearson,spearman,defined\n";
  for (const auto& e : table.entries) {
    out << kFeatureNames[e.feature] << ',' << to_string(e.group) << ',' << target_name(e.target) << ','
        << e.n << ',' << correlation_csv(e.pearson) << ',' << correlation_csv(e.spearman) << ','
        << (e.pearson.defined && e.spearman.defined ? "true" : "false") << '\n';
  }
}

json to_json(const CorrelationTable& table) {
  json rows = json::array();
  for (const auto& e : table.entries) {
    rows.push_back({{"feature", kFeatureNames[e.feature]},
                    {"group", to_string(e.group)},
                    {"target", target_name(e.target)},
                    {"n", e.n},
                    {"pearson", correlation_json(e.pearson)},
                    {"spearman", correlation_json(e.spearman)}});
  }
  return json{{"correlations", std::move(rows)}};
}

std::string_view to_string(SelectionDirection d) {
  return d == SelectionDirection::forward ? "forward" : "backward";
}

void SfsConfig::validate(std::size_t n_features) const {
  if (n_select < 1) throw InputError("n_select must be at least 1");
  if (n_select > n_features) {
    throw InputError("n_select " + std::to_string(n_select) + " exceeds the " +
                     std::to_string(n_features) + " available features");
  }
  if (folds < 2) throw InputError("folds must be at least 2");
  if (jobs < 1) throw InputError("jobs must be at least 1");
  tree.validate();
}

double cross_validated_f1(const LabeledSet& set, std::span<const std::size_t> columns,
                          std::size_t folds, std::uint64_t seed, const TreeConfig& tree) {
  if (set.size() < folds) {
    throw InputError("cross-validation needs at least " + std::to_string(folds) + " rows");
  }
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }
  const LabeledSet view = set.select_features(columns);
  double total = 0.0;
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t p = 0; p < order.size(); ++p) {
      (p % folds == k ? test_idx : train_idx).push_back(order[p]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    const LabeledSet train = view.subset(train_idx);
    const LabeledSet test = view.subset(test_idx);
    if (train.distinct_classes() < 2) {
      const std::vector<Category> constant(test.size(), train.label(0));
      total += evaluate_predictions(test.labels(), constant).weighted_f1;
    } else {
      total += evaluate(train_tree(train, tree), test).weighted_f1;
    }
  }
  return total / static_cast<double>(folds);
}

SelectionResult sequential_feature_selection(const LabeledSet& set, const SfsConfig& config) {
  const std::size_t d = set.n_features();
  config.validate(d);
  if (set.distinct_classes() < 2) throw InputError("feature selection needs at least two classes");

  SelectionResult result;
  result.direction = config.direction;
  std::vector<std::size_t> current;
  if (config.direction == SelectionDirection::backward) {
    current.resize(d);
    std::iota(current.begin(), current.end(), std::size_t{0});
  }
  auto score = [&](std::vector<std::size_t> cols) {
    std::sort(cols.begin(), cols.end());
    return cross_validated_f1(set, cols, config.folds, config.seed, config.tree);
  };

  const bool forward = config.direction == SelectionDirection::forward;
  while (forward ? current.size() < config.n_select : current.size() > config.n_select) {
    std::vector<std::size_t> candidates;
    for (std::size_t f = 0; f < d; ++f) {
      const bool in = std::find(current.begin(), current.end(), f) != current.end();
      if (in != forward) candidates.push_back(f);
    }
    std::vector<double> scores(candidates.size());
    parallel_for(candidates.size(), config.jobs, [&](std::size_t c) {
      std::vector<std::size_t> cols = current;
      if (forward) {
        cols.push_back(candidates[c]);
      } else {
        std::erase(cols, candidates[c]);
      }
      scores[c] = score(std::move(cols));
    });
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    if (forward) {
      current.push_back(candidates[best]);
    } else {
      std::erase(current, candidates[best]);
    }
    result.steps.push_back({candidates[best], scores[best]});
  }
  result.selected = current;
  result.final_score = result.steps.empty() ? score(current) : result.steps.back().score;
  return result;
}

json to_json(const SelectionResult& r, std::span<const std::string_view> names) {
  auto name = [&](std::size_t f) {
    return f < names.size() ? std::string(names[f]) : std::to_string(f);
  };
  json selected = json::array();
  for (std::size_t f : r.selected) selected.push_back(name(f));
  json steps = json::array();
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    steps.push_back({{"step", i + 1},
                     {r.direction == SelectionDirection::forward ? "added" : "removed", name(r.steps[i].feature)},
                     {"score", r.steps[i].score}});
  }
  return json{{"direction", to_string(r.direction)},
              {"selected", std::move(selected)},
              {"steps", std::move(steps)},
              {"final_score", r.final_score}};
}

}  // namespace ccdet
