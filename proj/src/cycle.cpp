#include "ccdet/cycle.hpp"

#include <ostream>

#include "ccdet/errors.hpp"

namespace ccdet {

using nlohmann::json;

namespace {

json counts_json(const std::array<std::size_t, kNumCategories>& counts) {
  json j = json::object();
  for (Category c : kAllCategories) j[std::string(to_string(c))] = counts[index_of(c)];
  return j;
}

std::array<std::size_t, kNumCategories> counts_from_json(const json& j) {
  std::array<std::size_t, kNumCategories> counts{};
  for (Category c : kAllCategories) counts[index_of(c)] = j.value(std::string(to_string(c)), std::size_t{0});
  return counts;
}

json record_json(const CycleRecord& r) {
  return json{{"cycle", r.cycle},
              {"training_before", r.training_before},
              {"candidates", r.candidates},
              {"selected", r.selected},
              {"training_after", r.training_after},
              {"counts", counts_json(r.counts)},
              {"FN", r.false_negatives},
              {"corner_cases", r.corner_cases()}};
}

CycleRecord record_from_json(const json& j) {
  CycleRecord r;
  r.cycle = j.at("cycle").get<std::size_t>();
  r.training_before = j.at("training_before").get<std::size_t>();
  r.candidates = j.at("candidates").get<std::size_t>();
  r.selected = j.at("selected").get<std::size_t>();
  r.training_after = j.at("training_after").get<std::size_t>();
  r.counts = counts_from_json(j.at("counts"));
  r.false_negatives = j.value("FN", std::size_t{0});
  return r;
}

}  // namespace

std::set<std::string> select_corner_case_images(const ImageCategories& images, std::size_t min_cc) {
  std::set<std::string> out;
  for (const auto& [id, cats] : images) {
    std::size_t n = 0;
    for (Category c : cats) n += is_corner_case(c) ? 1 : 0;
    if (n >= min_cc && n > 0) out.insert(id);
  }
  return out;
}

std::array<std::size_t, kNumCategories> tally(const ImageCategories& images) {
  std::array<std::size_t, kNumCategories> counts{};
  for (const auto& [id, cats] : images) {
    for (Category c : cats) ++counts[index_of(c)];
  }
  return counts;
}

std::size_t CycleRecord::corner_cases() const {
  return counts[index_of(Category::L_CC)] + counts[index_of(Category::C_CC)] +
         counts[index_of(Category::LC_CC)];
}

CycleState advance_cycle(const CycleState& state, const std::set<std::string>& selected) {
  for (const auto& id : selected) {
    if (!state.candidates.contains(id)) {
      throw InputError("selected image '" + id + "' is not in the cycle " + std::to_string(state.cycle) +
                       " candidate subset");
    }
  }
  CycleRecord rec;
  rec.cycle = state.cycle;
  rec.training_before = state.training.size();
  rec.candidates = state.candidates.size();
  rec.selected = selected.size();
  rec.counts = state.counts;
  rec.false_negatives = state.false_negatives;

  CycleState next;
  next.cycle = state.cycle + 1;
  next.training = state.training;
  next.training.insert(selected.begin(), selected.end());
  rec.training_after = next.training.size();
  next.history = state.history;
  next.history.push_back(rec);
  return next;
}

CycleReport cycle_report(const std::vector<CycleRecord>& history) {
  CycleReport r;
  r.rows = history;
  if (history.empty()) return r;
  r.total_images = history.front().training_before;
  for (const auto& h : history) r.total_images += h.candidates;
  r.used_images = history.back().training_after;
  r.reduction = r.total_images == 0
                    ? 0.0
                    : 1.0 - static_cast<double>(r.used_images) / static_cast<double>(r.total_images);
  return r;
}

void write_cycle_csv(const CycleReport& report, std::ostream& out) {
  out << "cycle,TP,L_CC,C_CC,LC_CC,FP,FN,corner_cases,candidates,selected,training_before,training_after\n";
  for (const auto& h : report.rows) {
    out << h.cycle;
    for (std::size_t c : h.counts) out << ',' << c;
    out << ',' << h.false_negatives << ',' << h.corner_cases() << ',' << h.candidates << ','
        << h.selected << ',' << h.training_before << ',' << h.training_after << '\n';
  }
}

json to_json(const CycleReport& report) {
  json rows = json::array();
  for (const auto& h : report.rows) rows.push_back(record_json(h));
  return json{{"cycles", std::move(rows)},
              {"total_images", report.total_images},
              {"used_images", report.used_images},
              {"reduction", report.reduction},
              {"reduction_percent", 100.0 * report.reduction}};
}

json to_json(const CycleState& state) {
  json history = json::array();
  for (const auto& h : state.history) history.push_back(record_json(h));
  return json{{"cycle", state.cycle},
              {"training", state.training},
              {"candidates", state.candidates},
              {"counts", counts_json(state.counts)},
              {"FN", state.false_negatives},
              {"history", std::move(history)}};
}

CycleState cycle_state_from_json(const json& j) {
  CycleState s;
  try {
    s.cycle = j.at("cycle").get<std::size_t>();
    if (s.cycle < 1) throw InputError("cycle state: cycle must be at least 1");
    s.training = j.value("training", std::set<std::string>{});
    s.candidates = j.value("candidates", std::set<std::string>{});
    if (j.contains("counts")) s.counts = counts_from_json(j.at("counts"));
    s.false_negatives = j.value("FN", std::size_t{0});
    for (const json& h : j.value("history", json::array())) s.history.push_back(record_from_json(h));
  } catch (const json::exception& e) {
    throw InputError(std::string("cycle state: ") + e.what());
  }
  return s;
}

}  // namespace ccdet
