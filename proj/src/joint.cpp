#include "poirank/joint.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "poirank/linalg.hpp"

namespace poirank {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {"a",  "an",  "the", "of", "to",
                                                        "in", "for", "and", "or"};
  return words;
}

const std::vector<std::string>& metonym_tokens(PoiType t) {
  auto build = [](PoiType type) {
    std::set<std::string> unique;
    for (const std::string& phrase : metonym_list(type)) {
      for (const std::string& tok : tokenize(phrase)) unique.insert(tok);
    }
    return std::vector<std::string>(unique.begin(), unique.end());
  };
  static const std::vector<std::string> r = build(PoiType::Restaurant);
  static const std::vector<std::string> a = build(PoiType::Attraction);
  static const std::vector<std::string> h = build(PoiType::Hotel);
  switch (t) {
    case PoiType::Restaurant: return r;
    case PoiType::Attraction: return a;
    case PoiType::Hotel: return h;
  }
  throw std::logic_error("bad PoiType");
}

}  // namespace

std::vector<std::string> LexicalScorer::descriptor_bag(const Entity& e) const {
  std::set<std::string> bag;
  for (const std::string& tok : tokenize(e.name)) bag.insert(tok);
  const auto& mt = metonym_tokens(e.poi_type);
  bag.insert(mt.begin(), mt.end());
  if (include_keywords_) bag.insert(entity_keyword(e.id));
  return {bag.begin(), bag.end()};
}

double LexicalScorer::bag_score(const std::vector<std::string>& question_tokens,
                                const std::vector<std::string>& bag) {
  if (bag.empty()) return 0.0;
  std::unordered_set<std::string> q(question_tokens.begin(), question_tokens.end());
  size_t hits = 0;
  for (const std::string& tok : bag) {
    if (!stopwords().count(tok) && q.count(tok)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(bag.size());
}

double LexicalScorer::score_text(const QuestionInstance& q, const Entity& e) const {
  return bag_score(q.tokens, descriptor_bag(e));
}

JointModel JointModel::init(const SpatialModel& pretrained, uint64_t seed) {
  JointModel m;
  m.config = pretrained.config;
  m.vocab = pretrained.vocab;
  m.spatial = pretrained;

  // own encoder, initialized from the pretrained spatial encoder
  m.params.insert("jenc.emb", pretrained.params.get("emb"));
  for (const std::string dir : {"gru_fw", "gru_bw"}) {
    for (const std::string gate : {"z", "r", "h"}) {
      m.params.insert("jenc." + dir + ".W" + gate, pretrained.params.get(dir + ".W" + gate));
      m.params.insert("jenc." + dir + ".U" + gate, pretrained.params.get(dir + ".U" + gate));
      m.params.insert("jenc." + dir + ".b" + gate, pretrained.params.get(dir + ".b" + gate));
    }
  }
  m.params.create("att.W", {kAttentionDim, m.config.state_dim()}, seed);
  m.params.create("att.v", {kAttentionDim}, seed);
  m.params.create("ab.0.W", {32, m.config.state_dim()}, seed);
  m.params.create("ab.0.b", {32}, seed);
  m.params.create("ab.1.W", {2, 32}, seed);
  m.params.create("ab.1.b", {2}, seed);
  m.params.create_full("w_T", {1}, 1.0);
  m.params.create_full("w_L", {1}, 1.0);
  return m;
}

double joint_score(double s_text, double s_spatial, double alpha, double beta, double w_t,
                   double w_l) {
  double gate = sigmoid_value(w_t * s_text);
  return alpha * gate * std::tanh(w_l * s_spatial) + beta * gate;
}

Tensor joint_encode(const JointModel& model, const EncodedQuestion& eq) {
  std::vector<double> zero_dist(eq.length(), 0.0);
  return encode_states(model.params, "jenc.emb", "jenc.gru_fw", "jenc.gru_bw", model.config, eq,
                       zero_dist);
}

Tensor attention_pool(const JointModel& model, const Tensor& states) {
  size_t d = states.rows(), m = states.cols();
  if (m == 0) throw std::invalid_argument("attention_pool: empty states");
  const Tensor& W = model.params.get("att.W");
  const Tensor& v = model.params.get("att.v");

  Tensor proj({W.rows(), m});
  matmul_into(proj, W, states);
  for (size_t i = 0; i < proj.size(); ++i) proj[i] = std::tanh(proj[i]);

  std::vector<double> score(m, 0.0);
  for (size_t i = 0; i < W.rows(); ++i) {
    for (size_t j = 0; j < m; ++j) score[j] += v[i] * proj.at2(i, j);
  }
  double mx = *std::max_element(score.begin(), score.end());
  double total = 0.0;
  for (double& s : score) {
    s = std::exp(s - mx);
    total += s;
  }
  Tensor pooled({d});
  for (size_t j = 0; j < m; ++j) {
    double a = score[j] / total;
    for (size_t i = 0; i < d; ++i) pooled[i] += a * states.at2(i, j);
  }
  return pooled;
}

std::pair<double, double> alpha_beta(const JointModel& model, const Tensor& pooled) {
  const Tensor& W0 = model.params.get("ab.0.W");
  const Tensor& b0 = model.params.get("ab.0.b");
  Tensor h({W0.rows()});
  for (size_t i = 0; i < h.size(); ++i) h[i] = b0[i];
  matmul_into(h, W0, pooled);
  for (size_t i = 0; i < h.size(); ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
  const Tensor& W1 = model.params.get("ab.1.W");
  const Tensor& b1 = model.params.get("ab.1.b");
  Tensor out({2});
  out[0] = b1[0];
  out[1] = b1[1];
  matmul_into(out, W1, h);
  return {out[0], out[1]};
}

std::vector<JointRanked> joint_rank(const JointModel& model, const TextualScorer& scorer,
                                    const EncodedQuestion& eq,
                                    const std::vector<const Entity*>& universe) {
  if (universe.empty()) throw std::runtime_error("joint_rank: empty universe");

  Tensor states = joint_encode(model, eq);
  Tensor pooled = attention_pool(model, states);
  auto [alpha, beta] = alpha_beta(model, pooled);
  double w_t = model.params.get("w_T")[0];
  double w_l = model.params.get("w_L")[0];

  std::vector<double> spatial = score_universe(model.spatial, eq, universe, SpnetMode::Full);

  std::vector<JointRanked> ranked;
  ranked.reserve(universe.size());
  for (size_t i = 0; i < universe.size(); ++i) {
    ScoreBreakdown b;
    b.s_text = scorer.score_text(*eq.question, *universe[i]);
    b.s_spatial = spatial[i];
    b.alpha = alpha;
    b.beta = beta;
    b.total = joint_score(b.s_text, b.s_spatial, alpha, beta, w_t, w_l);
    ranked.push_back({universe[i], b});
  }
  std::sort(ranked.begin(), ranked.end(), [](const JointRanked& a, const JointRanked& b) {
    if (a.breakdown.total != b.breakdown.total) return a.breakdown.total > b.breakdown.total;
    return a.entity->id < b.entity->id;
  });
  return ranked;
}

JointParamVars joint_param_vars(const std::map<std::string, Var>& vars) {
  JointParamVars jv;
  jv.emb = vars.at("jenc.emb");
  auto gv = [&](const std::string& prefix) {
    GruParamVars p;
    p.Wz = vars.at(prefix + ".Wz");
    p.Uz = vars.at(prefix + ".Uz");
    p.bz = vars.at(prefix + ".bz");
    p.Wr = vars.at(prefix + ".Wr");
    p.Ur = vars.at(prefix + ".Ur");
    p.br = vars.at(prefix + ".br");
    p.Wh = vars.at(prefix + ".Wh");
    p.Uh = vars.at(prefix + ".Uh");
    p.bh = vars.at(prefix + ".bh");
    return p;
  };
  jv.fw = gv("jenc.gru_fw");
  jv.bw = gv("jenc.gru_bw");
  jv.att_W = vars.at("att.W");
  jv.att_v = vars.at("att.v");
  jv.ab.emplace_back(vars.at("ab.0.W"), vars.at("ab.0.b"));
  jv.ab.emplace_back(vars.at("ab.1.W"), vars.at("ab.1.b"));
  jv.w_T = vars.at("w_T");
  jv.w_L = vars.at("w_L");
  return jv;
}

std::pair<Var, Var> joint_alpha_beta_on_tape(Tape& tape, const JointParamVars& jv,
                                             const SpNetConfig& config,
                                             const EncodedQuestion& eq) {
  size_t m = eq.length();
  if (m == 0) throw std::invalid_argument("joint_alpha_beta_on_tape: empty question");

  std::vector<Var> inputs(m);
  for (size_t i = 0; i < m; ++i) {
    Tensor extra({4});
    size_t slot = eq.question->bio_tags[i] == BioTag::B   ? 0
                  : eq.question->bio_tags[i] == BioTag::I ? 1
                                                          : 2;
    extra[slot] = 1.0;
    inputs[i] = concat(tape, embed_row(tape, jv.emb, static_cast<size_t>(eq.token_ids[i])),
                       tape.leaf(std::move(extra)));
  }
  std::vector<Var> fw_states(m), bw_states(m);
  Var h = tape.leaf(Tensor({config.gru_hidden}));
  for (size_t i = 0; i < m; ++i) {
    h = gru_cell(tape, inputs[i], h, jv.fw);
    fw_states[i] = h;
  }
  h = tape.leaf(Tensor({config.gru_hidden}));
  for (size_t i = m; i-- > 0;) {
    h = gru_cell(tape, inputs[i], h, jv.bw);
    bw_states[i] = h;
  }
  std::vector<Var> states(m);
  for (size_t i = 0; i < m; ++i) states[i] = concat(tape, fw_states[i], bw_states[i]);

  Var q = stack_cols(tape, states);                       // (2h x m)
  Var proj = tanh(tape, matmul(tape, jv.att_W, q));       // (att x m)
  Var att = softmax(tape, vec_mat_dot(tape, jv.att_v, proj));  // (m)
  Var pooled = matmul(tape, q, att);                      // (2h)

  Var hidden = relu(tape, add(tape, matmul(tape, jv.ab[0].first, pooled), jv.ab[0].second));
  Var out = add(tape, matmul(tape, jv.ab[1].first, hidden), jv.ab[1].second);  // (2)
  return {slice(tape, out, 0, 1), slice(tape, out, 1, 2)};
}

Var joint_score_on_tape(Tape& tape, Var alpha, Var beta, Var w_T, Var w_L, double s_text,
                        Var s_spatial) {
  Var st = tape.leaf(Tensor::scalar(s_text));
  Var gate = sigmoid(tape, mul(tape, w_T, st));
  Var term1 = mul(tape, mul(tape, alpha, gate), tanh(tape, mul(tape, w_L, s_spatial)));
  Var term2 = mul(tape, beta, gate);
  return add(tape, term1, term2);
}

}  // namespace poirank
