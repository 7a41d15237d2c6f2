#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "poirank/evaluator.hpp"
#include "poirank/trainer.hpp"

using namespace poirank;

namespace {

std::vector<Entity> line_of_entities(size_t n, double km_step = 1.0) {
  std::vector<Entity> out;
  for (size_t i = 0; i < n; ++i) {
    Entity e;
    char id[32];
    std::snprintf(id, sizeof(id), "c000_R_%05zu", i);
    e.id = id;
    e.name = "Spot";
    e.city_id = "c000";
    e.poi_type = PoiType::Restaurant;
    e.location = {0.0, km_step * static_cast<double>(i) / 111.32};
    out.push_back(e);
  }
  return out;
}

std::vector<const Entity*> pointers(const std::vector<Entity>& v) {
  std::vector<const Entity*> out;
  for (const Entity& e : v) out.push_back(&e);
  return out;
}

struct World {
  Catalog catalog;
  Dataset dataset;

  World() {
    CatalogConfig ccfg;
    ccfg.n_cities = 5;
    ccfg.min_city_size = 40;
    ccfg.max_city_size = 200;
    ccfg.seed = 19;
    catalog = generate_catalog(ccfg);
    DatagenConfig dcfg;
    dcfg.train_size = 48;
    dcfg.dev_size = 12;
    dcfg.test_size = 48;
    dcfg.seed = 7;
    dcfg.negatives = 20;
    dcfg.threads = 2;
    dataset = generate_dataset(catalog, dcfg);
  }
};

}  // namespace

TEST_CASE("acc@n basics") {
  auto entities = line_of_entities(5);
  auto ranked = pointers(entities);
  CHECK(acc_at_n(ranked, entities[0].id, 3) == 1);
  CHECK(acc_at_n(ranked, entities[3].id, 3) == 0);
  CHECK(acc_at_n(ranked, entities[4].id, 30) == 1);  // n beyond size: gold always found
}

TEST_CASE("mrr basics and the 1/1250 case") {
  auto entities = line_of_entities(1250);
  auto ranked = pointers(entities);
  CHECK(mrr(ranked, entities[0].id) == 1.0);
  CHECK(mrr(ranked, entities[1].id) == 0.5);
  CHECK(mrr(ranked, entities[1249].id) == doctest::Approx(0.0008).epsilon(1e-12));
  CHECK_THROWS_AS(mrr(ranked, "missing"), std::runtime_error);
}

TEST_CASE("dist_g averages the top three distances to the gold") {
  auto entities = line_of_entities(4);  // at 0, 1, 2, 3 km
  auto ranked = pointers(entities);
  // gold at 0 km: top-3 are at 0, 1, 2 km -> mean 1.0, the gold contributing zero
  CHECK(dist_g(ranked, entities[0]) == doctest::Approx(1.0).epsilon(1e-9));

  // top-3 at 1, 2, 3 km from a gold ranked outside
  std::vector<const Entity*> top3 = {&entities[1], &entities[2], &entities[3]};
  CHECK(dist_g(top3, entities[0]) == doctest::Approx(2.0).epsilon(1e-9));

  // co-located trio
  std::vector<Entity> same(3, entities[0]);
  CHECK(dist_g(pointers(same), entities[0]) == 0.0);

  // fewer than three candidates: average the available ones
  std::vector<const Entity*> two = {&entities[1], &entities[3]};
  CHECK(dist_g(two, entities[0]) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("universe bucket boundaries") {
  CHECK(universe_bucket(0) == "0-200");
  CHECK(universe_bucket(199) == "0-200");
  CHECK(universe_bucket(200) == "200-500");
  CHECK(universe_bucket(999) == "500-1000");
  CHECK(universe_bucket(1000) == "1000-5000");
  CHECK(universe_bucket(18000) == "5000-20000");
}

TEST_CASE("sort-by-distance: single-near gold is always ranked first") {
  World w;
  SortByDistanceRanker sd;
  Vocab vocab;  // baselines ignore token ids
  size_t checked = 0;
  for (const QuestionInstance& q : w.dataset.test.questions) {
    if (q.template_id > 4) continue;  // single near, no distractor
    EncodedQuestion eq = encode_tokens(vocab, q, w.catalog);
    auto universe = w.catalog.universe(q.city_id, q.poi_type);
    std::erase_if(universe, [&](const Entity* e) {
      return e->id == eq.mentions[0].entity_id;
    });
    auto ranked = sd.rank(eq, universe);
    REQUIRE(!ranked.empty());
    CHECK(ranked[0]->id == q.gold_id);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("sort-by-distance ranks a single-far gold last") {
  World w;
  SortByDistanceRanker sd;
  Vocab vocab;
  size_t checked = 0;
  for (const QuestionInstance& q : w.dataset.test.questions) {
    if (q.template_id < 17 || q.template_id > 20) continue;  // single far
    EncodedQuestion eq = encode_tokens(vocab, q, w.catalog);
    auto universe = w.catalog.universe(q.city_id, q.poi_type);
    std::erase_if(universe, [&](const Entity* e) {
      return e->id == eq.mentions[0].entity_id;
    });
    auto ranked = sd.rank(eq, universe);
    REQUIRE(!ranked.empty());
    CHECK(ranked.back()->id == q.gold_id);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("a distractor can fool sort-by-distance but not the gold rule") {
  // Near mention B at origin; distractor A far away; a decoy sits right next
  // to A while the gold sits next to B.
  Catalog catalog;
  std::vector<Entity> entities = {
      {"c000_R_00000", "B Anchor", "c000", PoiType::Restaurant, {0.0, 0.0}},
      {"c000_R_00001", "A Distractor", "c000", PoiType::Restaurant, {0.5, 0.5}},
      {"c000_R_00002", "Gold", "c000", PoiType::Restaurant, {0.0, 0.001}},
      {"c000_R_00003", "Decoy", "c000", PoiType::Restaurant, {0.5, 0.5004}},
  };
  catalog.cities["c000"] = entities;
  catalog.rebuild_index();

  QuestionInstance q;
  q.qid = "sd-trap";
  q.city_id = "c000";
  q.poi_type = PoiType::Restaurant;
  q.template_id = 9;
  q.tokens = {"near", "b", "anchor", "once", "a", "distractor"};
  q.bio_tags = {BioTag::O, BioTag::B, BioTag::I, BioTag::O, BioTag::B, BioTag::I};
  q.mentions = {{1, 3, "c000_R_00000", ConstraintSign::Near},
                {4, 6, "c000_R_00001", ConstraintSign::Distractor}};

  // the gold rule ignores the distractor: gold = nearest to B
  std::vector<std::pair<GeoPoint, ConstraintSign>> mentions = {
      {entities[0].location, ConstraintSign::Near},
      {entities[1].location, ConstraintSign::Distractor}};
  CHECK(gold_score(entities[2].location, mentions) > gold_score(entities[3].location, mentions));

  // but SD takes the min over all tagged mentions, so the decoy wins
  Vocab vocab;
  EncodedQuestion eq = encode_tokens(vocab, q, catalog);
  std::vector<const Entity*> universe = {&entities[2], &entities[3]};
  auto ranked = SortByDistanceRanker().rank(eq, universe);
  CHECK(ranked[0]->id == "c000_R_00003");
  CHECK(ranked[1]->id == "c000_R_00002");
}

TEST_CASE("evaluate populates every slice and keeps metric ordering") {
  World w;
  SortByDistanceRanker sd;
  Vocab vocab;
  MetricsReport report = evaluate(sd, w.dataset.test, w.catalog, vocab, 2);
  CHECK(report.aggregate.count == w.dataset.test.questions.size());
  CHECK(report.aggregate.acc3 <= report.aggregate.acc5);
  CHECK(report.aggregate.acc5 <= report.aggregate.acc30);
  CHECK(report.aggregate.mrr > 0.0);
  CHECK(report.aggregate.mrr <= 1.0);

  size_t total = 0;
  for (const auto& [_, s] : report.by_category) {
    total += s.count;
    CHECK(s.acc3 <= s.acc5);
    CHECK(s.acc5 <= s.acc30);
  }
  CHECK(total == report.aggregate.count);

  total = 0;
  for (const auto& [_, s] : report.by_universe_bucket) total += s.count;
  CHECK(total == report.aggregate.count);
  CHECK(report.by_universe_bucket.size() == 5);  // all buckets present, even empty

  total = 0;
  for (const auto& [_, s] : report.by_mention_count) total += s.count;
  CHECK(total == report.aggregate.count);

  // reasoned counts exclude distractors: only values 1 and 2 can occur
  for (const auto& [k, _] : report.by_reasoned_mention_count) {
    CHECK((k == "1" || k == "2"));
  }

  // determinism: identical inputs give identical serialized reports
  MetricsReport again = evaluate(sd, w.dataset.test, w.catalog, vocab, 1);
  CHECK(report.to_json().dump() == again.to_json().dump());
  CHECK(report.text_table() == again.text_table());
}

TEST_CASE("probe emits one row per (candidate, mention) with weights in range") {
  World w;
  const QuestionInstance* two_mentions = nullptr;
  for (const QuestionInstance& q : w.dataset.test.questions) {
    if (q.mention_count() == 2) {
      two_mentions = &q;
      break;
    }
  }
  REQUIRE(two_mentions != nullptr);

  Vocab vocab = Vocab::build(w.dataset.train);
  SpNetConfig cfg;
  cfg.emb_dim = 8;
  cfg.gru_hidden = 5;
  cfg.drl_dims = {6, 3, 1};
  SpatialModel model = SpatialModel::init(cfg, vocab, 23);
  EncodedQuestion eq = encode_tokens(vocab, *two_mentions, w.catalog);

  auto universe = w.catalog.universe(two_mentions->city_id, two_mentions->poi_type);
  REQUIRE(universe.size() >= 2);
  std::vector<const Entity*> candidates = {universe[0], universe[1]};
  auto rows = probe_weights(model, eq, candidates);
  REQUIRE(rows.size() == 4);
  for (const ProbeRecord& r : rows) {
    CHECK(r.weight > -1.0);
    CHECK(r.weight < 1.0);
    CHECK(r.distance_km >= 0.0);
    CHECK(!r.mention_text.empty());
  }
  CHECK(rows[0].candidate_id == universe[0]->id);
  CHECK(rows[2].candidate_id == universe[1]->id);

  // coordinate-identical candidates produce identical weight rows
  Entity clone = *universe[0];
  clone.id = "c999_R_00000";
  std::vector<const Entity*> pair = {universe[0], &clone};
  auto rows2 = probe_weights(model, eq, pair);
  REQUIRE(rows2.size() == 4);
  CHECK(rows2[0].weight == rows2[2].weight);
  CHECK(rows2[1].weight == rows2[3].weight);
  CHECK(rows2[0].distance_km == rows2[2].distance_km);
}

TEST_CASE("swapping near/far wording changes the probe weights") {
  Catalog catalog;
  std::vector<Entity> entities = {
      {"c000_R_00000", "Alpha Place", "c000", PoiType::Restaurant, {10.0, 20.0}},
      {"c000_R_00001", "Beta Corner", "c000", PoiType::Restaurant, {10.1, 20.1}},
      {"c000_R_00002", "Gamma Spot", "c000", PoiType::Restaurant, {10.05, 19.95}},
  };
  catalog.cities["c000"] = entities;
  catalog.rebuild_index();

  auto make_question = [&](bool swapped) {
    QuestionInstance q;
    q.qid = swapped ? "swap-1" : "swap-0";
    q.city_id = "c000";
    q.poi_type = PoiType::Restaurant;
    q.template_id = 34;
    std::string text = swapped
                           ? "ideas far from alpha place but close to beta corner"
                           : "ideas close to alpha place but far from beta corner";
    q.tokens = tokenize(text);
    q.bio_tags.assign(q.tokens.size(), BioTag::O);
    q.bio_tags[3] = BioTag::B;
    q.bio_tags[4] = BioTag::I;
    q.bio_tags[8] = BioTag::B;
    q.bio_tags[9] = BioTag::I;
    q.mentions = {{3, 5, "c000_R_00000", swapped ? ConstraintSign::Far : ConstraintSign::Near},
                  {8, 10, "c000_R_00001", swapped ? ConstraintSign::Near : ConstraintSign::Far}};
    return q;
  };

  Vocab vocab = Vocab::from_tokens(
      {"ideas", "close", "to", "far", "from", "alpha", "place", "but", "beta", "corner"});
  SpNetConfig cfg;
  cfg.emb_dim = 6;
  cfg.gru_hidden = 4;
  cfg.drl_dims = {5, 3, 1};
  SpatialModel model = SpatialModel::init(cfg, vocab, 77);

  std::vector<const Entity*> candidates = {&entities[2]};
  QuestionInstance q0 = make_question(false), q1 = make_question(true);
  auto rows0 = probe_weights(model, encode_tokens(vocab, q0, catalog), candidates);
  auto rows1 = probe_weights(model, encode_tokens(vocab, q1, catalog), candidates);
  REQUIRE(rows0.size() == 2);
  REQUIRE(rows1.size() == 2);
  bool any_differs = std::fabs(rows0[0].weight - rows1[0].weight) > 1e-6 ||
                     std::fabs(rows0[1].weight - rows1[1].weight) > 1e-6;
  CHECK(any_differs);
}

TEST_CASE("paired bootstrap p-value sanity") {
  std::vector<int> same(60, 1);
  CHECK(paired_bootstrap_pvalue(same, same, 400, 5) > 0.5);

  std::vector<int> a(60, 1), b(60, 0);
  CHECK(paired_bootstrap_pvalue(a, b, 400, 5) < 0.05);
  CHECK_THROWS_AS(paired_bootstrap_pvalue(a, std::vector<int>(3, 0), 10, 1),
                  std::invalid_argument);
}
