#include "poirank/templates.hpp"

#include <stdexcept>

namespace poirank {

std::string constraint_sign_name(ConstraintSign s) {
  switch (s) {
    case ConstraintSign::Near: return "near";
    case ConstraintSign::Far: return "far";
    case ConstraintSign::Distractor: return "distractor";
  }
  throw std::logic_error("bad ConstraintSign");
}

ConstraintSign constraint_sign_from_name(const std::string& name) {
  if (name == "near") return ConstraintSign::Near;
  if (name == "far") return ConstraintSign::Far;
  if (name == "distractor") return ConstraintSign::Distractor;
  throw std::runtime_error("unknown constraint sign '" + name + "'");
}

std::string template_category_name(TemplateCategory c) {
  switch (c) {
    case TemplateCategory::CloseSet: return "close";
    case TemplateCategory::FarSet: return "far";
    case TemplateCategory::Combination: return "combination";
  }
  throw std::logic_error("bad TemplateCategory");
}

namespace {

constexpr ConstraintSign N = ConstraintSign::Near;
constexpr ConstraintSign F = ConstraintSign::Far;
constexpr ConstraintSign D = ConstraintSign::Distractor;

std::vector<TemplateSpec> build_bank() {
  struct Row {
    int id;
    const char* text;
    std::vector<ConstraintSign> signs;
  };
  // clang-format off
  const Row rows[] = {
      // Close to set X [1-16]; 9-16 carry a distractor.
      {1,  "Do you have any recommendations of ENTITY near the LOCATION?", {N}},
      {2,  "Does anyone have ideas on ENTITY close to LOCATION? Thank you!", {N}},
      {3,  "Hello! Could anyone please suggest ENTITY in the neighborhood of LOCATION?", {N}},
      {4,  "Good Morning! Can someone please propose ENTITY not very far from LOCATION?", {N}},
      {5,  "Suggestions for ENTITY close to both LOCATION and LOCATION?", {N, N}},
      {6,  "Some good ideas of ENTITY between LOCATION and LOCATION? Thanks much!", {N, N}},
      {7,  "Please advise ENTITY close to LOCATION and not very far off the LOCATION.", {N, N}},
      {8,  "Any ideas for ENTITY near LOCATION and also close to LOCATION would be welcomed?", {N, N}},
      {9,  "I once lived around LOCATION. Does anyone have ideas of ENTITY close to the LOCATION? Thanks!", {D, N}},
      {10, "Any nice suggestions of ENTITY near the LOCATION? I will be going to LOCATION the next day.", {N, D}},
      {11, "I just came from LOCATION. Someone, please recommend ENTITY in the neighborhood of LOCATION.", {D, N}},
      {12, "Could anyone propose ENTITY not far from the LOCATION? I need to leave for LOCATION urgently.", {N, D}},
      {13, "We came from LOCATION this morning. Suggestions for ENTITY close to both LOCATION and LOCATION?", {D, N, N}},
      {14, "Any ideas of ENTITY between LOCATION and LOCATION? I would be going to LOCATION. Thanks.", {N, N, D}},
      {15, "We might be staying around LOCATION. Please advise ENTITY close to LOCATION and not far from LOCATION.", {D, N, N}},
      {16, "Could anyone suggest ideas for ENTITY close to LOCATION and around LOCATION? We could be going to LOCATION soon.", {N, N, D}},
      // Far from set X [17-32]; 25-32 carry a distractor.
      {17, "Any suggestions for ENTITY quite far from the LOCATION? Thank you very much!", {F}},
      {18, "Somebody please suggest ENTITY cut off from LOCATION. Have a good day!", {F}},
      {19, "Does anyone have suggestions for ENTITY away from LOCATION? Thanks a lot!", {F}},
      {20, "Good Afternoon! Any proposals for ENTITY not very close to the LOCATION?", {F}},
      {21, "Suggestions on ENTITY far from both LOCATION and LOCATION? Thank!", {F, F}},
      {22, "Hi! Any idea of ENTITY far away from LOCATION and LOCATION?", {F, F}},
      {23, "Could anyone please propose ENTITY not close to LOCATION and also far from LOCATION?", {F, F}},
      {24, "Does anyone have any suggestions for ENTITY far from LOCATION and not around LOCATION?", {F, F}},
      {25, "Hey! I will be staying at LOCATION. Please suggest ENTITY cut off from LOCATION.", {D, F}},
      {26, "Any pleasant ideas of ENTITY far off the LOCATION? I might then be visiting LOCATION.", {F, D}},
      {27, "I came from LOCATION this afternoon. Any proposal for ENTITY not close to the LOCATION?", {D, F}},
      {28, "Does anyone have a suggestion for ENTITY distant from LOCATION? By the way, I came from LOCATION yesterday.", {F, D}},
      {29, "We will be staying near the LOCATION. Suggestions for ENTITY far from both LOCATION and LOCATION will be welcomed.", {D, F, F}},
      {30, "Any idea of ENTITY far away from LOCATION and LOCATION? I would then be visiting LOCATION.", {F, F, D}},
      {31, "Hi, I will be staying near the LOCATION. Could anyone propose ENTITY not very close to LOCATION and far from LOCATION?", {D, F, F}},
      {32, "Does anyone have suggestions for ENTITY far from LOCATION and also far from LOCATION? I will then be visiting LOCATION too.", {F, F, D}},
      // Combination [33-48]; 41-48 carry a distractor.
      {33, "Any good ideas of ENTITY far from LOCATION but close to LOCATION would be appreciated? Best Regards.", {F, N}},
      {34, "Anyone having ideas of ENTITY close to LOCATION but far from LOCATION?", {N, F}},
      {35, "Someone please advise ENTITY far from LOCATION but not very far from LOCATION.", {F, N}},
      {36, "Suggest ENTITY close to LOCATION but not in the neighborhood of LOCATION. Thank you so much!", {N, F}},
      {37, "Does anyone have good ideas of ENTITY far from LOCATION but near LOCATION? Regards.", {F, N}},
      {38, "Please suggest ideas of ENTITY in the neighborhood of LOCATION but far from LOCATION.", {N, F}},
      {39, "Could anyone advise ENTITY far from LOCATION but not too far from LOCATION?", {F, N}},
      {40, "Any nice ideas of ENTITY close to LOCATION but not in the neighborhood of LOCATION. Thanks!", {N, F}},
      {41, "Tomorrow, I would be coming to stay at LOCATION. Anyone having ideas of ENTITY close to LOCATION but far from LOCATION?", {D, N, F}},
      {42, "Please propose ENTITY far from LOCATION but not far from LOCATION. I will then be exploring LOCATION.", {F, N, D}},
      {43, "I came from LOCATION this evening. Any nice ideas for ENTITY far from LOCATION but close to LOCATION would be appreciated?", {D, F, N}},
      {44, "Suggest ENTITY close to LOCATION but not near LOCATION. Tomorrow, I will be leaving for LOCATION.", {N, F, D}},
      {45, "Yesterday, I came to stay at LOCATION. Any ideas of ENTITY close to LOCATION but far from LOCATION?", {D, N, F}},
      {46, "Suggestions of ENTITY far from LOCATION but not very far from LOCATION. I will then be moving to LOCATION.", {F, N, D}},
      {47, "I came from LOCATION today. Any good ideas for ENTITY far from LOCATION but near to LOCATION would be welcomed?", {D, F, N}},
      {48, "Advise ENTITY close to LOCATION but not close to LOCATION. I might be leaving for LOCATION soon.", {N, F, D}},
  };
  // clang-format on

  std::vector<TemplateSpec> bank;
  bank.reserve(48);
  for (const Row& row : rows) {
    TemplateSpec t;
    t.id = row.id;
    t.category = row.id <= 16   ? TemplateCategory::CloseSet
                 : row.id <= 32 ? TemplateCategory::FarSet
                                : TemplateCategory::Combination;
    t.text = row.text;
    t.slot_signs = row.signs;
    for (ConstraintSign s : row.signs) {
      if (s == ConstraintSign::Distractor) t.has_distractor = true;
    }
    bank.push_back(std::move(t));
  }
  return bank;
}

}  // namespace

const std::vector<TemplateSpec>& template_bank() {
  static const std::vector<TemplateSpec> bank = build_bank();
  return bank;
}

const TemplateSpec& template_by_id(int id) {
  if (id < 1 || id > 48) throw std::invalid_argument("template id must be in 1..48");
  return template_bank()[static_cast<size_t>(id - 1)];
}

const std::vector<std::string>& metonym_list(PoiType t) {
  static const std::vector<std::string> restaurant = {
      "a restaurant",    "an eatery",      "an eating joint", "a cafeteria",
      "an outlet",       "a coffee shop",  "a fast food place", "a lunch counter",
      "a lunch room",    "a snack bar",    "a chop house",    "a steak house",
      "a pizzeria",      "a coffee shop",  "a tea house",     "a bar room"};
  static const std::vector<std::string> hotel = {
      "a hotel",        "an inn",          "a motel",        "a guest house",
      "a hostel",       "a boarding house", "a lodge",       "an auberge",
      "a caravansary",  "a public house",  "a tavern",       "an accomodation",
      "a resort",       "a youth hostel",  "a bunk house",   "a dormitory",
      "a flop house"};
  static const std::vector<std::string> attraction = {
      "an attraction",      "a tourist spot",   "a tourist attraction",
      "a popular wonder",   "a sightseeing place", "a tourist location",
      "a place of tourist interest", "a crowd pleaser", "a scenic spot",
      "a popular landmark", "a monument"};
  switch (t) {
    case PoiType::Restaurant: return restaurant;
    case PoiType::Hotel: return hotel;
    case PoiType::Attraction: return attraction;
  }
  throw std::logic_error("bad PoiType");
}

std::string metonym(PoiType t, Rng& rng) {
  const auto& list = metonym_list(t);
  return list[rng.uniform_int(list.size())];
}

const std::vector<std::string>& keyword_list() {
  static const std::vector<std::string> keywords = {
      "sushi",    "tapas",    "ramen",    "falafel",  "gelato",
      "waffles",  "dumplings", "paella",  "curry",    "bagels",
      "smoothies", "pancakes", "noodles", "tacos",    "pretzels",
      "kebabs",   "churros",  "crepes",   "biryani",  "empanadas"};
  return keywords;
}

const std::string& entity_keyword(const std::string& entity_id) {
  const auto& keywords = keyword_list();
  return keywords[fnv1a64(entity_id) % keywords.size()];
}

}  // namespace poirank
