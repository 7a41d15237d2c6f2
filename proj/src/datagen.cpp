#include "poirank/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "poirank/parallel.hpp"

namespace poirank {

using nlohmann::json;

char bio_tag_char(BioTag t) {
  switch (t) {
    case BioTag::B: return 'B';
    case BioTag::I: return 'I';
    case BioTag::O: return 'O';
  }
  throw std::logic_error("bad BioTag");
}

BioTag bio_tag_from_char(char c) {
  switch (c) {
    case 'B': return BioTag::B;
    case 'I': return BioTag::I;
    case 'O': return BioTag::O;
    default: throw std::runtime_error(std::string("unknown bio tag '") + c + "'");
  }
}

bool QuestionInstance::has_distractor() const {
  for (const Mention& m : mentions) {
    if (m.sign == ConstraintSign::Distractor) return true;
  }
  return false;
}

size_t QuestionInstance::reasoned_mention_count() const {
  size_t n = 0;
  for (const Mention& m : mentions) {
    if (m.sign != ConstraintSign::Distractor) ++n;
  }
  return n;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    // apostrophes survive only inside a token
    size_t begin = current.find_first_not_of('\'');
    size_t end = current.find_last_not_of('\'');
    if (begin != std::string::npos) tokens.push_back(current.substr(begin, end - begin + 1));
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      current += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double gold_score(const GeoPoint& candidate,
                  const std::vector<std::pair<GeoPoint, ConstraintSign>>& mentions) {
  double score = 0.0;
  for (const auto& [point, sign] : mentions) {
    score += sign_value(sign) * manhattan_km(candidate, point);
  }
  return score;
}

double gold_score(const Catalog& catalog, const Entity& candidate,
                  const std::vector<Mention>& mentions) {
  std::vector<std::pair<GeoPoint, ConstraintSign>> points;
  points.reserve(mentions.size());
  for (const Mention& m : mentions) {
    const Entity* e = catalog.find(m.entity_id);
    if (!e) throw std::runtime_error("gold_score: unknown mention entity " + m.entity_id);
    points.emplace_back(e->location, m.sign);
  }
  return gold_score(candidate.location, points);
}

namespace {

constexpr double kGoldTieEpsilonKm = 1e-9;

// Fills the template's ENTITY slot with the metonym phrase and each LOCATION
// slot with a mention entity's name, tracking token spans for BIO tags.
void instantiate_template(const TemplateSpec& tpl, const std::string& entity_phrase,
                          const std::vector<const Entity*>& mention_entities,
                          QuestionInstance& out) {
  out.tokens.clear();
  out.mentions.clear();
  size_t cursor = 0;
  size_t slot = 0;
  const std::string& text = tpl.text;
  for (;;) {
    size_t next_entity = text.find("ENTITY", cursor);
    size_t next_location = text.find("LOCATION", cursor);
    size_t next = std::min(next_entity, next_location);
    auto segment = tokenize(text.substr(cursor, next - cursor));
    out.tokens.insert(out.tokens.end(), segment.begin(), segment.end());
    if (next == std::string::npos) break;
    if (next == next_entity) {
      auto phrase = tokenize(entity_phrase);
      out.tokens.insert(out.tokens.end(), phrase.begin(), phrase.end());
      cursor = next + 6;
    } else {
      const Entity* e = mention_entities.at(slot);
      auto name = tokenize(e->name);
      Mention m;
      m.span_begin = out.tokens.size();
      out.tokens.insert(out.tokens.end(), name.begin(), name.end());
      m.span_end = out.tokens.size();
      m.entity_id = e->id;
      m.sign = tpl.slot_signs.at(slot);
      out.mentions.push_back(std::move(m));
      ++slot;
      cursor = next + 8;
    }
  }
  if (slot != tpl.slot_signs.size()) {
    throw std::logic_error("template " + std::to_string(tpl.id) + ": slot count mismatch");
  }
  out.bio_tags.assign(out.tokens.size(), BioTag::O);
  for (const Mention& m : out.mentions) {
    out.bio_tags[m.span_begin] = BioTag::B;
    for (size_t i = m.span_begin + 1; i < m.span_end; ++i) out.bio_tags[i] = BioTag::I;
  }
}

struct ScoredCandidate {
  const Entity* entity;
  double score;
};

}  // namespace

std::vector<NegativeSample> sample_negatives(
    const std::vector<const Entity*>& candidates_excluding_mentions, const std::string& gold_id,
    const std::vector<std::pair<GeoPoint, ConstraintSign>>& mention_points, Rng& rng, size_t n,
    double hard_frac) {
  if (hard_frac < 0.0 || hard_frac > 1.0) {
    throw std::invalid_argument("sample_negatives: hard_frac must lie in [0, 1]");
  }
  std::vector<ScoredCandidate> ranked;
  ranked.reserve(candidates_excluding_mentions.size());
  for (const Entity* e : candidates_excluding_mentions) {
    if (e->id == gold_id) continue;
    ranked.push_back({e, gold_score(e->location, mention_points)});
  }
  std::sort(ranked.begin(), ranked.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity->id < b.entity->id;
  });

  size_t total = ranked.size();
  size_t pool_size = std::min(n, total);
  if (pool_size == 0) return {};
  size_t hard_zone = std::max<size_t>(1, static_cast<size_t>(std::ceil(0.05 * total)));
  size_t hard_target = static_cast<size_t>(std::llround(static_cast<double>(n) * hard_frac));
  size_t hard_take = std::min(hard_target, hard_zone);
  size_t soft_take = std::min(pool_size - hard_take, total - hard_zone);
  hard_take = std::min(pool_size - soft_take, hard_zone);  // re-expand if soft ran out

  std::vector<NegativeSample> out;
  out.reserve(hard_take + soft_take);
  for (size_t idx : rng.sample_indices(hard_zone, hard_take)) {
    out.push_back({ranked[idx].entity->id, true});
  }
  for (size_t idx : rng.sample_indices(total - hard_zone, soft_take)) {
    out.push_back({ranked[hard_zone + idx].entity->id, false});
  }
  return out;
}

QuestionInstance generate_question(const Catalog& catalog, const TemplateSpec& tpl, Rng& rng,
                                   const DatagenConfig& config) {
  std::vector<const std::string*> city_ids;
  city_ids.reserve(catalog.cities.size());
  for (const auto& [city_id, _] : catalog.cities) city_ids.push_back(&city_id);
  if (city_ids.empty()) throw std::runtime_error("generate_question: empty catalog");

  size_t slots = tpl.slot_signs.size();
  for (int city_try = 0; city_try < 10000; ++city_try) {
    const std::string& city_id = *city_ids[rng.uniform_int(city_ids.size())];
    PoiType type = kPoiTypes[rng.uniform_int(3)];
    auto universe = catalog.universe(city_id, type);
    if (universe.size() < slots + 2) continue;  // city too small, resample

    std::string phrase = metonym(type, rng);

    for (int location_try = 0; location_try < 50; ++location_try) {
      auto picked = rng.sample_indices(universe.size(), slots);
      std::vector<const Entity*> mention_entities;
      std::unordered_set<const Entity*> mention_set;
      for (size_t idx : picked) {
        mention_entities.push_back(universe[idx]);
        mention_set.insert(universe[idx]);
      }
      std::vector<std::pair<GeoPoint, ConstraintSign>> mention_points;
      for (size_t s = 0; s < slots; ++s) {
        mention_points.emplace_back(mention_entities[s]->location, tpl.slot_signs[s]);
      }

      std::vector<const Entity*> remaining;
      remaining.reserve(universe.size() - slots);
      for (const Entity* e : universe) {
        if (!mention_set.count(e)) remaining.push_back(e);
      }

      std::string keyword;
      std::vector<const Entity*> gold_pool;
      if (config.hybrid) {
        std::unordered_map<std::string, size_t> keyword_counts;
        for (const Entity* e : remaining) ++keyword_counts[entity_keyword(e->id)];
        std::vector<std::string> eligible;
        for (const std::string& k : keyword_list()) {
          if (keyword_counts[k] >= 2) eligible.push_back(k);
        }
        if (eligible.empty()) continue;
        keyword = eligible[rng.uniform_int(eligible.size())];
        for (const Entity* e : remaining) {
          if (entity_keyword(e->id) == keyword) gold_pool.push_back(e);
        }
      } else {
        gold_pool = remaining;
      }

      // Unique gold: best must beat the runner-up by more than the tie epsilon.
      const Entity* best = nullptr;
      double best_score = 0.0, second_score = 0.0;
      for (const Entity* e : gold_pool) {
        double s = gold_score(e->location, mention_points);
        if (!best || s > best_score) {
          second_score = best ? best_score : -1e300;
          best_score = s;
          best = e;
        } else if (s > second_score) {
          second_score = s;
        }
      }
      if (!best || best_score - second_score < kGoldTieEpsilonKm) continue;

      QuestionInstance q;
      q.city_id = city_id;
      q.poi_type = type;
      q.template_id = tpl.id;
      q.keyword = keyword;
      std::string entity_phrase = phrase;
      if (config.hybrid) entity_phrase += " serving " + keyword;
      instantiate_template(tpl, entity_phrase, mention_entities, q);
      q.gold_id = best->id;
      q.negatives =
          sample_negatives(remaining, best->id, mention_points, rng, config.negatives,
                           config.hard_frac);
      return q;
    }
  }
  throw std::runtime_error("generate_question: no viable city/type after 10000 attempts");
}

Dataset generate_dataset(const Catalog& catalog, const DatagenConfig& config) {
  Dataset dataset;
  dataset.train.name = "train";
  dataset.dev.name = "dev";
  dataset.test.name = "test";

  auto fill = [&](DatasetSplit& split, size_t size) {
    split.questions.resize(size);
    parallel_for(size, config.threads, [&](size_t i) {
      char qid[64];
      std::snprintf(qid, sizeof(qid), "%s-%06zu", split.name.c_str(), i);
      Rng rng(mix_seed(config.seed, fnv1a64(qid)));
      // round-robin over categories keeps the split balanced; the template
      // within a category is uniform, so ~half the questions get a distractor
      size_t category = i % 3;
      const TemplateSpec& tpl = template_bank()[category * 16 + rng.uniform_int(16)];
      QuestionInstance q = generate_question(catalog, tpl, rng, config);
      q.qid = qid;
      split.questions[i] = std::move(q);
    });
  };
  fill(dataset.train, config.train_size);
  fill(dataset.dev, config.dev_size);
  fill(dataset.test, config.test_size);
  return dataset;
}

void save_split(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_split: cannot open " + path);
  for (const QuestionInstance& q : split.questions) {
    json j;
    j["qid"] = q.qid;
    j["city_id"] = q.city_id;
    j["poi_type"] = std::string(1, poi_type_char(q.poi_type));
    j["template_id"] = q.template_id;
    j["tokens"] = q.tokens;
    json tags = json::array();
    for (BioTag t : q.bio_tags) tags.push_back(std::string(1, bio_tag_char(t)));
    j["bio_tags"] = std::move(tags);
    json mentions = json::array();
    for (const Mention& m : q.mentions) {
      mentions.push_back({{"span", {m.span_begin, m.span_end}},
                          {"entity_id", m.entity_id},
                          {"sign", constraint_sign_name(m.sign)}});
    }
    j["mentions"] = std::move(mentions);
    j["gold_id"] = q.gold_id;
    json negatives = json::array();
    for (const NegativeSample& n : q.negatives) {
      negatives.push_back({{"entity_id", n.entity_id}, {"hardness", n.hard ? "hard" : "soft"}});
    }
    j["negatives"] = std::move(negatives);
    if (!q.keyword.empty()) j["keyword"] = q.keyword;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_split: write failed for " + path);
}

namespace {

void validate_bio(const QuestionInstance& q) {
  if (q.bio_tags.size() != q.tokens.size()) {
    throw std::runtime_error("question " + q.qid + ": bio_tags length " +
                             std::to_string(q.bio_tags.size()) + " != token count " +
                             std::to_string(q.tokens.size()));
  }
  for (size_t i = 0; i < q.bio_tags.size(); ++i) {
    if (q.bio_tags[i] == BioTag::I &&
        (i == 0 || q.bio_tags[i - 1] == BioTag::O)) {
      throw std::runtime_error("question " + q.qid + ": I without preceding B at token " +
                               std::to_string(i));
    }
  }
  for (const Mention& m : q.mentions) {
    if (m.span_begin >= m.span_end || m.span_end > q.tokens.size()) {
      throw std::runtime_error("question " + q.qid + ": mention span out of range");
    }
    if (q.bio_tags[m.span_begin] != BioTag::B) {
      throw std::runtime_error("question " + q.qid + ": mention span does not start with B");
    }
  }
}

}  // namespace

DatasetSplit load_split(const std::string& path, const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_split: cannot open " + path);
  DatasetSplit split;
  split.name = name;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_split: line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    std::string qid = j.value("qid", std::string("<line " + std::to_string(line_no) + ">"));
    auto field = [&](const char* fname) -> const json& {
      auto it = j.find(fname);
      if (it == j.end()) {
        throw std::runtime_error("load_split: question " + qid + ": missing field '" + fname +
                                 "'");
      }
      return *it;
    };
    QuestionInstance q;
    try {
      q.qid = field("qid").get<std::string>();
      q.city_id = field("city_id").get<std::string>();
      std::string t = field("poi_type").get<std::string>();
      if (t.size() != 1) throw std::runtime_error("poi_type must be one character");
      q.poi_type = poi_type_from_char(t[0]);
      q.template_id = field("template_id").get<int>();
      q.tokens = field("tokens").get<std::vector<std::string>>();
      for (const auto& tag : field("bio_tags")) {
        std::string s = tag.get<std::string>();
        if (s.size() != 1) throw std::runtime_error("bio tag must be one character");
        q.bio_tags.push_back(bio_tag_from_char(s[0]));
      }
      for (const auto& jm : field("mentions")) {
        Mention m;
        m.span_begin = jm.at("span").at(0).get<size_t>();
        m.span_end = jm.at("span").at(1).get<size_t>();
        m.entity_id = jm.at("entity_id").get<std::string>();
        m.sign = constraint_sign_from_name(jm.at("sign").get<std::string>());
        q.mentions.push_back(std::move(m));
      }
      q.gold_id = field("gold_id").get<std::string>();
      for (const auto& jn : field("negatives")) {
        NegativeSample n;
        n.entity_id = jn.at("entity_id").get<std::string>();
        std::string hardness = jn.at("hardness").get<std::string>();
        if (hardness != "hard" && hardness != "soft") {
          throw std::runtime_error("hardness must be 'hard' or 'soft'");
        }
        n.hard = hardness == "hard";
        q.negatives.push_back(std::move(n));
      }
      if (j.contains("keyword")) q.keyword = j["keyword"].get<std::string>();
    } catch (const json::exception& ex) {
      throw std::runtime_error("load_split: question " + qid + ": bad field: " + ex.what());
    }
    validate_bio(q);
    split.questions.push_back(std::move(q));
  }
  return split;
}

}  // namespace poirank
