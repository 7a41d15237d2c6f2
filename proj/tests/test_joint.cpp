#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "poirank/joint.hpp"

using namespace poirank;

namespace {

struct Fixture {
  Catalog catalog;
  QuestionInstance located;      // one near mention
  QuestionInstance no_location;  // zero mentions, keyword "sushi"
  Vocab vocab;

  Fixture() {
    std::vector<Entity> entities;
    for (int i = 0; i < 8; ++i) {
      Entity e;
      e.id = "c000_R_0000" + std::to_string(i);
      e.name = "Baco Luma " + std::to_string(i);
      e.city_id = "c000";
      e.poi_type = PoiType::Restaurant;
      e.location = {23.0 + 0.01 * i, -82.0 - 0.015 * i};
      entities.push_back(e);
    }
    catalog.cities["c000"] = entities;
    catalog.rebuild_index();

    located.qid = "loc-0";
    located.city_id = "c000";
    located.poi_type = PoiType::Restaurant;
    located.template_id = 2;
    located.tokens = tokenize("does anyone have ideas on a pizzeria close to baco luma 0 thank you");
    located.bio_tags.assign(located.tokens.size(), BioTag::O);
    located.bio_tags[9] = BioTag::B;   // baco
    located.bio_tags[10] = BioTag::I;  // luma
    located.bio_tags[11] = BioTag::I;  // 0
    located.mentions = {{9, 12, "c000_R_00000", ConstraintSign::Near}};
    located.gold_id = "c000_R_00001";

    no_location.qid = "noloc-0";
    no_location.city_id = "c000";
    no_location.poi_type = PoiType::Restaurant;
    no_location.template_id = 1;
    no_location.tokens = tokenize("any recommendations of a pizzeria serving sushi");
    no_location.bio_tags.assign(no_location.tokens.size(), BioTag::O);
    no_location.gold_id = "c000_R_00002";
    no_location.keyword = "sushi";

    std::set<std::string> toks(located.tokens.begin(), located.tokens.end());
    toks.insert(no_location.tokens.begin(), no_location.tokens.end());
    vocab = Vocab::from_tokens({toks.begin(), toks.end()});
  }

  SpatialModel tiny_spatial(uint64_t seed) const {
    SpNetConfig c;
    c.emb_dim = 6;
    c.gru_hidden = 4;
    c.drl_dims = {5, 3, 1};
    return SpatialModel::init(c, vocab, seed);
  }
};

}  // namespace

TEST_CASE("joint init copies the pretrained encoder and unit rescalers") {
  Fixture f;
  SpatialModel pre = f.tiny_spatial(5);
  JointModel jm = JointModel::init(pre, 9);
  CHECK(jm.params.get("w_T")[0] == 1.0);
  CHECK(jm.params.get("w_L")[0] == 1.0);
  const Tensor& a = jm.params.get("jenc.gru_fw.Wz");
  const Tensor& b = pre.params.get("gru_fw.Wz");
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  const Tensor& e1 = jm.params.get("jenc.emb");
  const Tensor& e2 = pre.params.get("emb");
  for (size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == e2[i]);
}

TEST_CASE("attention pool of a single state returns that state") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(1), 2);
  size_t d = jm.config.state_dim();
  Tensor states({d, 1});
  Rng rng(3);
  for (size_t i = 0; i < d; ++i) states.at2(i, 0) = rng.uniform(-1, 1);
  Tensor pooled = attention_pool(jm, states);
  REQUIRE(pooled.size() == d);
  for (size_t i = 0; i < d; ++i) CHECK(pooled[i] == doctest::Approx(states.at2(i, 0)).epsilon(1e-12));
}

TEST_CASE("attention pool of identical states is that state (convexity)") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(4), 8);
  size_t d = jm.config.state_dim();
  Tensor states({d, 5});
  Rng rng(6);
  for (size_t i = 0; i < d; ++i) {
    double v = rng.uniform(-1, 1);
    for (size_t j = 0; j < 5; ++j) states.at2(i, j) = v;
  }
  Tensor pooled = attention_pool(jm, states);
  for (size_t i = 0; i < d; ++i) {
    CHECK(pooled[i] == doctest::Approx(states.at2(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("alpha_beta: zero head yields (0, 0) and is deterministic") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(11), 12);
  for (const char* name : {"ab.0.W", "ab.0.b", "ab.1.W", "ab.1.b"}) {
    Tensor& t = jm.params.get(name);
    for (size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  }
  Tensor pooled({jm.config.state_dim()});
  Rng rng(7);
  for (size_t i = 0; i < pooled.size(); ++i) pooled[i] = rng.uniform(-1, 1);
  auto [a1, b1] = alpha_beta(jm, pooled);
  CHECK(a1 == 0.0);
  CHECK(b1 == 0.0);

  JointModel jm2 = JointModel::init(f.tiny_spatial(11), 13);
  auto p1 = alpha_beta(jm2, pooled);
  auto p2 = alpha_beta(jm2, pooled);
  CHECK(p1.first == p2.first);
  CHECK(p1.second == p2.second);
}

TEST_CASE("joint_score closed-form cases") {
  // S_L = 0 collapses to the textual branch regardless of alpha / w_L
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    double s_t = rng.uniform(-3, 3), alpha = rng.uniform(-5, 5), beta = rng.uniform(-5, 5);
    double w_t = rng.uniform(-2, 2), w_l = rng.uniform(-2, 2);
    double expect = beta * sigmoid_value(w_t * s_t);
    CHECK(joint_score(s_t, 0.0, alpha, beta, w_t, w_l) == expect);
  }
  CHECK(joint_score(0.0, 10.0, 1.0, 0.0, 1.0, 1.0) ==
        doctest::Approx(0.5 * std::tanh(10.0)).epsilon(1e-15));
  CHECK(joint_score(0.0, 0.0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("joint_score is monotone in s_text when the gate slope is positive") {
  Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
    double w_t = rng.uniform(0.1, 2), w_l = rng.uniform(-2, 2);
    double s_l = rng.uniform(-3, 3);
    if (alpha * std::tanh(w_l * s_l) + beta <= 0.0) continue;
    double s1 = rng.uniform(-3, 3);
    double s2 = s1 + rng.uniform(0.01, 2.0);
    CHECK(joint_score(s2, s_l, alpha, beta, w_t, w_l) >
          joint_score(s1, s_l, alpha, beta, w_t, w_l));
  }
}

TEST_CASE("lexical bag score: overlap ratio, stopwords discounted") {
  std::vector<std::string> q = {"any", "ideas", "for", "a", "pizzeria", "serving", "sushi"};
  CHECK(LexicalScorer::bag_score(q, {}) == 0.0);
  CHECK(LexicalScorer::bag_score(q, {"tavern", "lodge"}) == 0.0);  // disjoint
  // keyword match beats an otherwise identical bag
  std::vector<std::string> with_kw = {"baco", "luma", "pizzeria", "sushi"};
  std::vector<std::string> other_kw = {"baco", "luma", "pizzeria", "tapas"};
  CHECK(LexicalScorer::bag_score(q, with_kw) > LexicalScorer::bag_score(q, other_kw));
  // the stopword "a" contributes nothing even though it appears in the question
  std::vector<std::string> stop_only = {"a", "for"};
  CHECK(LexicalScorer::bag_score(q, stop_only) == 0.0);
  // question token order cannot matter
  std::vector<std::string> shuffled = {"sushi", "serving", "pizzeria", "a", "for", "ideas", "any"};
  CHECK(LexicalScorer::bag_score(q, with_kw) == LexicalScorer::bag_score(shuffled, with_kw));
}

TEST_CASE("descriptor bags include name, metonym tokens and optional keyword") {
  Fixture f;
  const Entity& e = f.catalog.cities["c000"][0];
  LexicalScorer with_kw(true), without_kw(false);
  auto bag1 = with_kw.descriptor_bag(e);
  auto bag2 = without_kw.descriptor_bag(e);
  CHECK(bag1.size() == bag2.size() + 1);
  CHECK(std::count(bag1.begin(), bag1.end(), entity_keyword(e.id)) == 1);
  CHECK(std::count(bag1.begin(), bag1.end(), "baco") == 1);
  CHECK(std::count(bag1.begin(), bag1.end(), "pizzeria") == 1);  // restaurant metonym token
}

TEST_CASE("no-location joint ranking equals ranking by the textual gate") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(21), 22);
  LexicalScorer scorer(true);
  EncodedQuestion eq = encode_tokens(f.vocab, f.no_location, f.catalog);
  auto universe = f.catalog.universe("c000", PoiType::Restaurant);
  auto ranked = joint_rank(jm, scorer, eq, universe);
  REQUIRE(ranked.size() == universe.size());

  double w_t = jm.params.get("w_T")[0];
  // every score must equal beta * sigmoid(w_T * S_T) exactly, and the order
  // must follow it under the id tie rule
  for (const JointRanked& r : ranked) {
    double recomputed = r.breakdown.beta * sigmoid_value(w_t * r.breakdown.s_text);
    CHECK(r.breakdown.total == recomputed);
    CHECK(r.breakdown.s_spatial == 0.0);
  }
  for (size_t i = 1; i < ranked.size(); ++i) {
    bool ordered = ranked[i - 1].breakdown.total > ranked[i].breakdown.total ||
                   (ranked[i - 1].breakdown.total == ranked[i].breakdown.total &&
                    ranked[i - 1].entity->id < ranked[i].entity->id);
    CHECK(ordered);
  }
}

TEST_CASE("randomizing the spatial branch leaves no-location scores bitwise unchanged") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(31), 32);
  LexicalScorer scorer(true);
  EncodedQuestion eq = encode_tokens(f.vocab, f.no_location, f.catalog);
  auto universe = f.catalog.universe("c000", PoiType::Restaurant);
  auto before = joint_rank(jm, scorer, eq, universe);

  // scramble every spatial-branch parameter
  Rng rng(333);
  for (auto& [_, tensor] : jm.spatial.params) {
    for (size_t i = 0; i < tensor.size(); ++i) tensor[i] = rng.uniform(-2, 2);
  }
  auto after = joint_rank(jm, scorer, eq, universe);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].entity == after[i].entity);
    CHECK(before[i].breakdown.total == after[i].breakdown.total);  // bitwise
  }
}

TEST_CASE("score breakdown is self-consistent within 1e-12") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(41), 42);
  LexicalScorer scorer(true);
  for (const QuestionInstance* q : {&f.located, &f.no_location}) {
    EncodedQuestion eq = encode_tokens(f.vocab, *q, f.catalog);
    auto universe = f.catalog.universe("c000", PoiType::Restaurant);
    std::erase_if(universe, [&](const Entity* e) {
      for (const auto& m : eq.mentions) {
        if (m.entity_id == e->id) return true;
      }
      return false;
    });
    double w_t = jm.params.get("w_T")[0];
    double w_l = jm.params.get("w_L")[0];
    for (const JointRanked& r : joint_rank(jm, scorer, eq, universe)) {
      double recomputed = joint_score(r.breakdown.s_text, r.breakdown.s_spatial,
                                      r.breakdown.alpha, r.breakdown.beta, w_t, w_l);
      CHECK(std::fabs(recomputed - r.breakdown.total) <= 1e-12);
    }
  }
}

TEST_CASE("alpha/beta head and attention pass a gradient check") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(51), 52);
  EncodedQuestion eq = encode_tokens(f.vocab, f.located, f.catalog);

  ParamStore all;
  for (const auto& [name, tensor] : jm.params) all.insert(name, tensor);
  double err = grad_check(
      [&](Tape& tape, const std::map<std::string, Var>& vars) {
        JointParamVars jv = joint_param_vars(vars);
        auto [alpha, beta] = joint_alpha_beta_on_tape(tape, jv, jm.config, eq);
        return add(tape, mul(tape, alpha, alpha), scale(tape, beta, 0.5));
      },
      all);
  CHECK(err < 1e-3);
}

TEST_CASE("tape joint score agrees with the closed-form inference path") {
  Fixture f;
  JointModel jm = JointModel::init(f.tiny_spatial(61), 62);
  EncodedQuestion eq = encode_tokens(f.vocab, f.located, f.catalog);
  const Entity& cand = f.catalog.cities["c000"][3];
  double s_text = 0.4375;

  Tape tape;
  std::map<std::string, Var> jvars, svars;
  for (const auto& [name, tensor] : jm.params) jvars.emplace(name, tape.leaf(tensor));
  for (const auto& [name, tensor] : jm.spatial.params) svars.emplace(name, tape.leaf(tensor));
  JointParamVars jv = joint_param_vars(jvars);
  SpnetParamVars pv = spnet_param_vars(tape, svars);
  auto [alpha_v, beta_v] = joint_alpha_beta_on_tape(tape, jv, jm.config, eq);
  Var s_l = spnet_score_on_tape(tape, pv, jm.config, eq, cand.location, SpnetMode::Full);
  Var s = joint_score_on_tape(tape, alpha_v, beta_v, jv.w_T, jv.w_L, s_text, s_l);

  Tensor states = joint_encode(jm, eq);
  Tensor pooled = attention_pool(jm, states);
  auto [alpha, beta] = alpha_beta(jm, pooled);
  double expect = joint_score(s_text, score_candidate(jm.spatial, eq, cand), alpha, beta,
                              jm.params.get("w_T")[0], jm.params.get("w_L")[0]);
  CHECK(tape.value(s)[0] == doctest::Approx(expect).epsilon(1e-9));
}
