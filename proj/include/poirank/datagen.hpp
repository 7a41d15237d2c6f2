#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poirank/geo.hpp"
#include "poirank/rng.hpp"
#include "poirank/templates.hpp"

namespace poirank {

enum class BioTag : uint8_t { B, I, O };

char bio_tag_char(BioTag t);
BioTag bio_tag_from_char(char c);

struct Mention {
  size_t span_begin = 0;  // token index of first mention token
  size_t span_end = 0;    // one past the last mention token
  std::string entity_id;
  ConstraintSign sign = ConstraintSign::Distractor;
};

struct NegativeSample {
  std::string entity_id;
  bool hard = false;
};

struct QuestionInstance {
  std::string qid;
  std::string city_id;
  PoiType poi_type = PoiType::Restaurant;
  int template_id = 0;
  std::vector<std::string> tokens;
  std::vector<BioTag> bio_tags;
  std::vector<Mention> mentions;
  std::string gold_id;
  std::vector<NegativeSample> negatives;
  std::string keyword;  // empty unless generated in hybrid mode

  bool has_distractor() const;
  size_t mention_count() const { return mentions.size(); }
  size_t reasoned_mention_count() const;  // mentions with a Near/Far sign
};

struct DatasetSplit {
  std::string name;
  std::vector<QuestionInstance> questions;
};

struct Dataset {
  DatasetSplit train, dev, test;
};

struct DatagenConfig {
  size_t train_size = 6000;
  size_t dev_size = 1500;
  size_t test_size = 1500;
  uint64_t seed = 1;
  bool hybrid = false;
  size_t negatives = 500;
  double hard_frac = 0.35;
  size_t threads = 1;
};

// Lowercases, splits on whitespace/punctuation, keeps apostrophes inside
// tokens, drops standalone punctuation.
std::vector<std::string> tokenize(const std::string& text);

// Signed-distance score of a candidate against the question's mentions.
// Near mentions subtract their distance, Far mentions add it, distractors
// contribute nothing. The gold entity is the argmax over the universe.
double gold_score(const GeoPoint& candidate,
                  const std::vector<std::pair<GeoPoint, ConstraintSign>>& mentions);
double gold_score(const Catalog& catalog, const Entity& candidate,
                  const std::vector<Mention>& mentions);

QuestionInstance generate_question(const Catalog& catalog, const TemplateSpec& tpl, Rng& rng,
                                   const DatagenConfig& config);

// Negative pool for one question: hard negatives come uniformly from the top
// 5% of non-gold candidates by gold_score, soft from the remainder.
std::vector<NegativeSample> sample_negatives(
    const std::vector<const Entity*>& candidates_excluding_mentions, const std::string& gold_id,
    const std::vector<std::pair<GeoPoint, ConstraintSign>>& mention_points, Rng& rng, size_t n,
    double hard_frac);

Dataset generate_dataset(const Catalog& catalog, const DatagenConfig& config);

void save_split(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split(const std::string& path, const std::string& name);

}  // namespace poirank
