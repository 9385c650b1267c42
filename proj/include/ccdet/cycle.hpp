#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccdet/category.hpp"

namespace ccdet {

// Categorized detections per image.
using ImageCategories = std::map<std::string, std::vector<Category>>;

// Images with at least `min_cc` detections in {L_CC, C_CC, LC_CC}.
std::set<std::string> select_corner_case_images(const ImageCategories& images,
                                                std::size_t min_cc = 1);

std::array<std::size_t, kNumCategories> tally(const ImageCategories& images);

struct CycleRecord {
  std::size_t cycle = 0;
  std::size_t training_before = 0;
  std::size_t candidates = 0;
  std::size_t selected = 0;
  std::size_t training_after = 0;
  std::array<std::size_t, kNumCategories> counts{};
  std::size_t false_negatives = 0;

  std::size_t corner_cases() const;
};

struct CycleState {
  std::size_t cycle = 1;
  std::set<std::string> training;
  std::set<std::string> candidates;
  std::array<std::size_t, kNumCategories> counts{};
  std::size_t false_negatives = 0;
  std::vector<CycleRecord> history;
};

// Returns the next state: training grows by `selected`, this cycle's counts
// are archived in `history`, candidates and counts reset. Throws InputError
// for a selected id outside the candidate subset.
CycleState advance_cycle(const CycleState& state, const std::set<std::string>& selected);

struct CycleReport {
  std::vector<CycleRecord> rows;
  std::size_t total_images = 0;  // initial training plus every candidate subset
  std::size_t used_images = 0;   // final training set
  double reduction = 0.0;        // 1 - used / total
};

CycleReport cycle_report(const std::vector<CycleRecord>& history);

void write_cycle_csv(const CycleReport& report, std::ostream& out);
nlohmann::json to_json(const CycleReport& report);

nlohmann::json to_json(const CycleState& state);
CycleState cycle_state_from_json(const nlohmann::json& j);

}  // namespace ccdet
