#pragma once

#include <string>
#include <vector>

#include "poirank/geo.hpp"
#include "poirank/rng.hpp"

namespace poirank {

// Sign of a location mention. Near rewards small distances, Far rewards large
// ones, Distractor mentions carry no constraint.
enum class ConstraintSign : int { Near = -1, Distractor = 0, Far = 1 };

inline double sign_value(ConstraintSign s) { return static_cast<double>(static_cast<int>(s)); }

std::string constraint_sign_name(ConstraintSign s);
ConstraintSign constraint_sign_from_name(const std::string& name);

enum class TemplateCategory { CloseSet, FarSet, Combination };

std::string template_category_name(TemplateCategory c);

struct TemplateSpec {
  int id = 0;  // 1..48
  TemplateCategory category = TemplateCategory::CloseSet;
  // Question text with ENTITY and LOCATION slot markers.
  std::string text;
  // One sign per LOCATION slot, in order of appearance.
  std::vector<ConstraintSign> slot_signs;
  bool has_distractor = false;

  size_t mention_count() const { return slot_signs.size(); }
};

// The 48 question templates: ids 1-16 close, 17-32 far, 33-48 combination;
// the second half of each category carries a distractor mention.
const std::vector<TemplateSpec>& template_bank();

const TemplateSpec& template_by_id(int id);

// Surface phrase naming an entity type, e.g. "a pizzeria" for a restaurant.
const std::vector<std::string>& metonym_list(PoiType t);
std::string metonym(PoiType t, Rng& rng);

// Hybrid-mode keyword vocabulary and the fixed entity -> keyword assignment.
const std::vector<std::string>& keyword_list();
const std::string& entity_keyword(const std::string& entity_id);

}  // namespace poirank
