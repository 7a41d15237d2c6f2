#include "poirank/spnet.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "poirank/linalg.hpp"

namespace poirank {

void SpNetConfig::validate() const {
  if (emb_dim == 0 || gru_hidden == 0) throw std::invalid_argument("SpNetConfig: zero dims");
  if (drl_dims.empty() || drl_dims.back() != 1) {
    throw std::invalid_argument("SpNetConfig: drl_dims must end with 1");
  }
  if (dist_scale <= 0.0) throw std::invalid_argument("SpNetConfig: dist_scale must be > 0");
}

Vocab Vocab::build(const DatasetSplit& train_split) {
  std::set<std::string> unique;
  for (const QuestionInstance& q : train_split.questions) {
    unique.insert(q.tokens.begin(), q.tokens.end());
  }
  return from_tokens(std::vector<std::string>(unique.begin(), unique.end()));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  std::sort(v.tokens_.begin(), v.tokens_.end());
  v.tokens_.erase(std::unique(v.tokens_.begin(), v.tokens_.end()), v.tokens_.end());
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    v.index_.emplace(v.tokens_[i], static_cast<int32_t>(i + 1));
  }
  return v;
}

int32_t Vocab::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkIndex : it->second;
}

namespace {

const char* kGateNames[3] = {"z", "r", "h"};

void create_gru_params(ParamStore& params, const std::string& prefix, size_t in_dim, size_t hid,
                       uint64_t seed) {
  for (const char* g : kGateNames) {
    params.create(prefix + ".W" + g, {hid, in_dim}, seed);
    params.create(prefix + ".U" + g, {hid, hid}, seed);
    params.create(prefix + ".b" + g, {hid}, seed);
  }
}

size_t bio_slot(BioTag t) {
  switch (t) {
    case BioTag::B: return 0;
    case BioTag::I: return 1;
    case BioTag::O: return 2;
  }
  throw std::logic_error("bad BioTag");
}

struct GruWeights {
  const Tensor *Wz, *Uz, *bz, *Wr, *Ur, *br, *Wh, *Uh, *bh;
};

GruWeights gru_weights(const ParamStore& params, const std::string& prefix) {
  return {&params.get(prefix + ".Wz"), &params.get(prefix + ".Uz"), &params.get(prefix + ".bz"),
          &params.get(prefix + ".Wr"), &params.get(prefix + ".Ur"), &params.get(prefix + ".br"),
          &params.get(prefix + ".Wh"), &params.get(prefix + ".Uh"), &params.get(prefix + ".bh")};
}

// Candidate-independent input slice for one token: embedding plus BIO one-hot,
// distance slot left at zero.
std::vector<double> base_input_row(const SpatialModel& model, const EncodedQuestion& eq,
                                   size_t i) {
  const SpNetConfig& c = model.config;
  std::vector<double> row(c.input_dim(), 0.0);
  const Tensor& emb = model.params.get("emb");
  auto tok = static_cast<size_t>(eq.token_ids[i]);
  for (size_t j = 0; j < c.emb_dim; ++j) row[j] = emb.at2(tok, j);
  row[c.emb_dim + bio_slot(eq.question->bio_tags[i])] = 1.0;
  return row;
}

// ---- single-candidate GRU ----

void gru_step(const GruWeights& w, const std::vector<double>& x, std::vector<double>& h) {
  size_t hid = h.size();
  Tensor xt = Tensor::from_vector(x);
  Tensor ht = Tensor::from_vector(h);
  Tensor pre_z({hid}), pre_r({hid}), pre_h({hid}), rh({hid});
  for (size_t i = 0; i < hid; ++i) {
    pre_z[i] = (*w.bz)[i];
    pre_r[i] = (*w.br)[i];
    pre_h[i] = (*w.bh)[i];
  }
  matmul_into(pre_z, *w.Wz, xt);
  matmul_into(pre_z, *w.Uz, ht);
  matmul_into(pre_r, *w.Wr, xt);
  matmul_into(pre_r, *w.Ur, ht);
  for (size_t i = 0; i < hid; ++i) {
    double r = sigmoid_value(pre_r[i]);
    rh[i] = r * h[i];
  }
  matmul_into(pre_h, *w.Wh, xt);
  matmul_into(pre_h, *w.Uh, rh);
  for (size_t i = 0; i < hid; ++i) {
    double z = sigmoid_value(pre_z[i]);
    double cand = std::tanh(pre_h[i]);
    h[i] = (1.0 - z) * h[i] + z * cand;
  }
}

}  // namespace

SpatialModel SpatialModel::init(SpNetConfig config, Vocab vocab, uint64_t seed) {
  config.validate();
  SpatialModel m;
  m.config = config;
  m.vocab = std::move(vocab);
  m.params.create("emb", {m.vocab.size(), config.emb_dim}, seed);
  create_gru_params(m.params, "gru_fw", config.input_dim(), config.gru_hidden, seed);
  create_gru_params(m.params, "gru_bw", config.input_dim(), config.gru_hidden, seed);
  size_t in = config.state_dim();
  for (size_t l = 0; l < config.drl_dims.size(); ++l) {
    size_t out = config.drl_dims[l];
    m.params.create("drl." + std::to_string(l) + ".W", {out, in}, seed);
    m.params.create("drl." + std::to_string(l) + ".b", {out}, seed);
    in = out;
  }
  m.params.create("head.0.W", {32, config.state_dim()}, seed);
  m.params.create("head.0.b", {32}, seed);
  m.params.create("head.1.W", {1, 32}, seed);
  m.params.create("head.1.b", {1}, seed);
  return m;
}

EncodedQuestion encode_tokens(const Vocab& vocab, const QuestionInstance& q,
                              const Catalog& catalog) {
  EncodedQuestion eq;
  eq.question = &q;
  eq.token_ids.reserve(q.tokens.size());
  for (const std::string& tok : q.tokens) eq.token_ids.push_back(vocab.lookup(tok));
  for (const Mention& m : q.mentions) {
    const Entity* e = catalog.find(m.entity_id);
    if (!e) {
      throw std::runtime_error("encode_tokens: question " + q.qid + " mentions entity " +
                               m.entity_id + " absent from the catalog");
    }
    eq.mentions.push_back({m.span_begin, m.span_end, e->location, e->id, m.sign});
  }
  return eq;
}

std::vector<double> distance_features(const EncodedQuestion& eq, const GeoPoint& candidate,
                                      double dist_scale) {
  std::vector<double> feat(eq.length(), 0.0);
  for (const auto& m : eq.mentions) {
    double d = dist_scale * manhattan_km(candidate, m.location);
    for (size_t i = m.span_begin; i < m.span_end; ++i) feat[i] = d;
  }
  return feat;
}

std::vector<double> distance_vector(const EncodedQuestion& eq, const GeoPoint& candidate,
                                    double dist_scale) {
  std::vector<double> d(eq.length(), 0.0);
  for (const auto& m : eq.mentions) {
    d[m.span_begin] = dist_scale * manhattan_km(candidate, m.location);
  }
  return d;
}

Tensor encode_states(const ParamStore& params, const std::string& emb_name,
                     const std::string& fw_prefix, const std::string& bw_prefix,
                     const SpNetConfig& config, const EncodedQuestion& eq,
                     const std::vector<double>& dist_features) {
  size_t m = eq.length();
  if (m == 0) throw std::invalid_argument("encode_states: empty question");
  if (dist_features.size() != m) {
    throw std::invalid_argument("encode_states: distance feature length mismatch");
  }
  const Tensor& emb = params.get(emb_name);

  std::vector<std::vector<double>> inputs(m);
  for (size_t i = 0; i < m; ++i) {
    std::vector<double> row(config.input_dim(), 0.0);
    auto tok = static_cast<size_t>(eq.token_ids[i]);
    for (size_t j = 0; j < config.emb_dim; ++j) row[j] = emb.at2(tok, j);
    row[config.emb_dim + bio_slot(eq.question->bio_tags[i])] = 1.0;
    row[config.emb_dim + 3] = dist_features[i];
    inputs[i] = std::move(row);
  }

  GruWeights fw = gru_weights(params, fw_prefix);
  GruWeights bw = gru_weights(params, bw_prefix);
  size_t hid = config.gru_hidden;
  Tensor states({config.state_dim(), m});

  std::vector<double> h(hid, 0.0);
  for (size_t i = 0; i < m; ++i) {
    gru_step(fw, inputs[i], h);
    for (size_t j = 0; j < hid; ++j) states.at2(j, i) = h[j];
  }
  h.assign(hid, 0.0);
  for (size_t i = m; i-- > 0;) {
    gru_step(bw, inputs[i], h);
    for (size_t j = 0; j < hid; ++j) states.at2(hid + j, i) = h[j];
  }
  return states;
}

Tensor encode_question(const SpatialModel& model, const EncodedQuestion& eq,
                       const GeoPoint& candidate) {
  return encode_states(model.params, "emb", "gru_fw", "gru_bw", model.config, eq,
                       distance_features(eq, candidate, model.config.dist_scale));
}

Tensor drl_weights(const SpatialModel& model, const Tensor& states) {
  if (states.ndim() != 2 || states.rows() != model.config.state_dim() || states.cols() == 0) {
    throw std::invalid_argument("drl_weights: bad states shape " + states.shape_str());
  }
  size_t m = states.cols();
  Tensor current = states;
  size_t n_layers = model.config.drl_dims.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const Tensor& W = model.params.get("drl." + std::to_string(l) + ".W");
    const Tensor& b = model.params.get("drl." + std::to_string(l) + ".b");
    Tensor next({W.rows(), m});
    for (size_t i = 0; i < W.rows(); ++i) {
      for (size_t j = 0; j < m; ++j) next.at2(i, j) = b[i];
    }
    matmul_into(next, W, current);
    if (l + 1 < n_layers) {
      for (size_t i = 0; i < next.size(); ++i) next[i] = next[i] > 0.0 ? next[i] : 0.0;
    }
    current = std::move(next);
  }
  Tensor w({m});
  for (size_t j = 0; j < m; ++j) w[j] = std::tanh(current.at2(0, j));
  return w;
}

double spatial_score(const Tensor& weights, const std::vector<double>& dvec) {
  if (weights.size() != dvec.size()) {
    throw std::invalid_argument("spatial_score: weights and d' length mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < dvec.size(); ++i) s += weights[i] * dvec[i];
  return s;
}

double score_candidate(const SpatialModel& model, const EncodedQuestion& eq,
                       const Entity& candidate) {
  Tensor states = encode_question(model, eq, candidate.location);
  Tensor w = drl_weights(model, states);
  return spatial_score(w, distance_vector(eq, candidate.location, model.config.dist_scale));
}

double ablation_score(const SpatialModel& model, const EncodedQuestion& eq,
                      const Entity& candidate) {
  Tensor states = encode_question(model, eq, candidate.location);
  size_t m = states.cols();
  size_t hid = model.config.gru_hidden;
  // final forward state is at the last position, final backward state at the first
  Tensor s({model.config.state_dim()});
  for (size_t j = 0; j < hid; ++j) s[j] = states.at2(j, m - 1);
  for (size_t j = 0; j < hid; ++j) s[hid + j] = states.at2(hid + j, 0);

  Tensor h1({32});
  for (size_t i = 0; i < 32; ++i) h1[i] = model.params.get("head.0.b")[i];
  matmul_into(h1, model.params.get("head.0.W"), s);
  for (size_t i = 0; i < 32; ++i) h1[i] = h1[i] > 0.0 ? h1[i] : 0.0;
  Tensor out({1});
  out[0] = model.params.get("head.1.b")[0];
  matmul_into(out, model.params.get("head.1.W"), h1);
  return out[0];
}

// ---- batched inference ----

namespace {

struct BatchGru {
  const GruWeights w;
  size_t hid, batch;
  Tensor z, r, rh, pre;

  BatchGru(const GruWeights& weights, size_t hidden, size_t batch_size)
      : w(weights),
        hid(hidden),
        batch(batch_size),
        z({hidden, batch_size}),
        r({hidden, batch_size}),
        rh({hidden, batch_size}),
        pre({hidden, batch_size}) {}

  // base_* = W * x_base + b per gate; wd_* = distance column of W; dist may be
  // null when every candidate's distance feature at this token is zero.
  void step(const double* base_z, const double* base_r, const double* base_h, const double* wd_z,
            const double* wd_r, const double* wd_h, const double* dist, Tensor& h) {
    auto fill = [&](Tensor& t, const double* base, const double* wd) {
      double* p = t.data();
      for (size_t i = 0; i < hid; ++i) {
        double b = base[i];
        double* row = p + i * batch;
        if (dist) {
          double wdv = wd[i];
          for (size_t c = 0; c < batch; ++c) row[c] = b + wdv * dist[c];
        } else {
          for (size_t c = 0; c < batch; ++c) row[c] = b;
        }
      }
    };
    size_t n = hid * batch;

    fill(z, base_z, wd_z);
    matmul_into(z, *w.Uz, h);
    for (size_t i = 0; i < n; ++i) z[i] = sigmoid_value(z[i]);

    fill(r, base_r, wd_r);
    matmul_into(r, *w.Ur, h);
    for (size_t i = 0; i < n; ++i) r[i] = sigmoid_value(r[i]);

    for (size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];

    fill(pre, base_h, wd_h);
    matmul_into(pre, *w.Uh, rh);
    for (size_t i = 0; i < n; ++i) {
      double cand = std::tanh(pre[i]);
      h[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
  }
};

// Per-token gate preactivations that do not depend on the candidate.
struct TokenBases {
  std::vector<double> z, r, h;  // each hid
};

TokenBases token_bases(const GruWeights& w, const std::vector<double>& x_base, size_t hid) {
  TokenBases tb;
  tb.z.assign(hid, 0.0);
  tb.r.assign(hid, 0.0);
  tb.h.assign(hid, 0.0);
  size_t in_dim = x_base.size();  // full input width; distance slot is zero here
  auto accum = [&](std::vector<double>& out, const Tensor& W, const Tensor& b) {
    for (size_t i = 0; i < hid; ++i) {
      double acc = b[i];
      const double* row = W.data() + i * in_dim;
      for (size_t j = 0; j + 1 < in_dim; ++j) acc += row[j] * x_base[j];
      out[i] = acc;
    }
  };
  accum(tb.z, *w.Wz, *w.bz);
  accum(tb.r, *w.Wr, *w.br);
  accum(tb.h, *w.Wh, *w.bh);
  return tb;
}

const double* dist_column(const Tensor& W, size_t hid, std::vector<double>& storage) {
  size_t in_dim = W.cols();
  storage.resize(hid);
  for (size_t i = 0; i < hid; ++i) storage[i] = W.at2(i, in_dim - 1);
  return storage.data();
}

}  // namespace

std::vector<double> score_universe(const SpatialModel& model, const EncodedQuestion& eq,
                                   const std::vector<const Entity*>& candidates, SpnetMode mode,
                                   Tensor* weights_out) {
  const SpNetConfig& cfg = model.config;
  size_t m = eq.length();
  size_t batch = candidates.size();
  if (m == 0) throw std::invalid_argument("score_universe: empty question");
  if (batch == 0) return {};

  // scaled candidate distance per mention
  size_t n_mentions = eq.mentions.size();
  std::vector<std::vector<double>> mention_dist(n_mentions, std::vector<double>(batch));
  for (size_t j = 0; j < n_mentions; ++j) {
    const GeoPoint& loc = eq.mentions[j].location;
    for (size_t c = 0; c < batch; ++c) {
      mention_dist[j][c] = cfg.dist_scale * manhattan_km(candidates[c]->location, loc);
    }
  }
  // token -> owning mention (distance feature source), -1 if outside mentions
  std::vector<int> token_mention(m, -1);
  for (size_t j = 0; j < n_mentions; ++j) {
    for (size_t i = eq.mentions[j].span_begin; i < eq.mentions[j].span_end; ++i) {
      token_mention[i] = static_cast<int>(j);
    }
  }

  GruWeights fw = gru_weights(model.params, "gru_fw");
  GruWeights bw = gru_weights(model.params, "gru_bw");
  size_t hid = cfg.gru_hidden;

  std::vector<TokenBases> bases_fw(m), bases_bw(m);
  for (size_t i = 0; i < m; ++i) {
    std::vector<double> xb = base_input_row(model, eq, i);
    bases_fw[i] = token_bases(fw, xb, hid);
    bases_bw[i] = token_bases(bw, xb, hid);
  }
  std::vector<double> wd_storage[6];
  const double* wd_fw[3] = {dist_column(*fw.Wz, hid, wd_storage[0]),
                            dist_column(*fw.Wr, hid, wd_storage[1]),
                            dist_column(*fw.Wh, hid, wd_storage[2])};
  const double* wd_bw[3] = {dist_column(*bw.Wz, hid, wd_storage[3]),
                            dist_column(*bw.Wr, hid, wd_storage[4]),
                            dist_column(*bw.Wh, hid, wd_storage[5])};

  // positions whose states feed the scorer
  std::vector<size_t> b_positions;
  for (size_t j = 0; j < n_mentions; ++j) b_positions.push_back(eq.mentions[j].span_begin);

  std::vector<Tensor> kept_fw, kept_bw;  // states at scorer positions (Full mode)
  if (mode == SpnetMode::Full) {
    kept_fw.assign(n_mentions, Tensor({hid, batch}));
    kept_bw.assign(n_mentions, Tensor({hid, batch}));
  }

  BatchGru gru_fw(fw, hid, batch), gru_bw(bw, hid, batch);
  Tensor h_fw({hid, batch}), h_bw({hid, batch});

  for (size_t i = 0; i < m; ++i) {
    int mj = token_mention[i];
    const double* dist = mj >= 0 ? mention_dist[static_cast<size_t>(mj)].data() : nullptr;
    gru_fw.step(bases_fw[i].z.data(), bases_fw[i].r.data(), bases_fw[i].h.data(), wd_fw[0],
                wd_fw[1], wd_fw[2], dist, h_fw);
    if (mode == SpnetMode::Full) {
      for (size_t j = 0; j < n_mentions; ++j) {
        if (b_positions[j] == i) kept_fw[j] = h_fw;
      }
    }
  }
  Tensor final_fw = h_fw;

  for (size_t i = m; i-- > 0;) {
    int mj = token_mention[i];
    const double* dist = mj >= 0 ? mention_dist[static_cast<size_t>(mj)].data() : nullptr;
    gru_bw.step(bases_bw[i].z.data(), bases_bw[i].r.data(), bases_bw[i].h.data(), wd_bw[0],
                wd_bw[1], wd_bw[2], dist, h_bw);
    if (mode == SpnetMode::Full) {
      for (size_t j = 0; j < n_mentions; ++j) {
        if (b_positions[j] == i) kept_bw[j] = h_bw;
      }
    }
  }
  Tensor final_bw = h_bw;

  std::vector<double> scores(batch, 0.0);

  if (mode == SpnetMode::Ablation) {
    Tensor s({cfg.state_dim(), batch});
    for (size_t j = 0; j < hid; ++j) {
      for (size_t c = 0; c < batch; ++c) {
        s.at2(j, c) = final_fw.at2(j, c);
        s.at2(hid + j, c) = final_bw.at2(j, c);
      }
    }
    const Tensor& W0 = model.params.get("head.0.W");
    const Tensor& b0 = model.params.get("head.0.b");
    Tensor h1({W0.rows(), batch});
    for (size_t i = 0; i < W0.rows(); ++i) {
      for (size_t c = 0; c < batch; ++c) h1.at2(i, c) = b0[i];
    }
    matmul_into(h1, W0, s);
    for (size_t i = 0; i < h1.size(); ++i) h1[i] = h1[i] > 0.0 ? h1[i] : 0.0;
    const Tensor& W1 = model.params.get("head.1.W");
    const Tensor& b1 = model.params.get("head.1.b");
    Tensor out({1, batch});
    for (size_t c = 0; c < batch; ++c) out[c] = b1[0];
    matmul_into(out, W1, h1);
    for (size_t c = 0; c < batch; ++c) scores[c] = out[c];
    return scores;
  }

  if (weights_out) *weights_out = Tensor({n_mentions, batch});

  // DRL applied at each mention's B position; other positions cannot affect
  // the score because d' is zero there.
  size_t n_layers = cfg.drl_dims.size();
  for (size_t j = 0; j < n_mentions; ++j) {
    Tensor current({cfg.state_dim(), batch});
    for (size_t i = 0; i < hid; ++i) {
      for (size_t c = 0; c < batch; ++c) {
        current.at2(i, c) = kept_fw[j].at2(i, c);
        current.at2(hid + i, c) = kept_bw[j].at2(i, c);
      }
    }
    for (size_t l = 0; l < n_layers; ++l) {
      const Tensor& W = model.params.get("drl." + std::to_string(l) + ".W");
      const Tensor& b = model.params.get("drl." + std::to_string(l) + ".b");
      Tensor next({W.rows(), batch});
      for (size_t i = 0; i < W.rows(); ++i) {
        for (size_t c = 0; c < batch; ++c) next.at2(i, c) = b[i];
      }
      matmul_into(next, W, current);
      if (l + 1 < n_layers) {
        for (size_t i = 0; i < next.size(); ++i) next[i] = next[i] > 0.0 ? next[i] : 0.0;
      }
      current = std::move(next);
    }
    for (size_t c = 0; c < batch; ++c) {
      double w = std::tanh(current.at2(0, c));
      if (weights_out) weights_out->at2(j, c) = w;
      scores[c] += w * mention_dist[j][c];
    }
  }
  return scores;
}

void sort_ranked(std::vector<RankedCandidate>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity->id < b.entity->id;
  });
}

std::vector<RankedCandidate> rank_universe(const SpatialModel& model, const EncodedQuestion& eq,
                                           const std::vector<const Entity*>& universe,
                                           SpnetMode mode) {
  if (universe.empty()) throw std::runtime_error("rank_universe: empty universe");
  std::vector<double> scores = score_universe(model, eq, universe, mode);
  std::vector<RankedCandidate> ranked;
  ranked.reserve(universe.size());
  for (size_t i = 0; i < universe.size(); ++i) ranked.push_back({universe[i], scores[i]});
  sort_ranked(ranked);
  return ranked;
}

// ---- tape path ----

SpnetParamVars spnet_param_vars(Tape& tape, const std::map<std::string, Var>& vars) {
  (void)tape;
  SpnetParamVars pv;
  pv.emb = vars.at("emb");
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
  pv.fw = gv("gru_fw");
  pv.bw = gv("gru_bw");
  for (size_t l = 0;; ++l) {
    auto wit = vars.find("drl." + std::to_string(l) + ".W");
    if (wit == vars.end()) break;
    pv.drl.emplace_back(wit->second, vars.at("drl." + std::to_string(l) + ".b"));
  }
  for (size_t l = 0;; ++l) {
    auto wit = vars.find("head." + std::to_string(l) + ".W");
    if (wit == vars.end()) break;
    pv.head.emplace_back(wit->second, vars.at("head." + std::to_string(l) + ".b"));
  }
  return pv;
}

Var spnet_score_on_tape(Tape& tape, const SpnetParamVars& pv, const SpNetConfig& config,
                        const EncodedQuestion& eq, const GeoPoint& candidate, SpnetMode mode) {
  size_t m = eq.length();
  if (m == 0) throw std::invalid_argument("spnet_score_on_tape: empty question");
  std::vector<double> dist = distance_features(eq, candidate, config.dist_scale);

  std::vector<Var> inputs(m);
  for (size_t i = 0; i < m; ++i) {
    Tensor extra({4});
    extra[bio_slot(eq.question->bio_tags[i])] = 1.0;
    extra[3] = dist[i];
    inputs[i] = concat(tape, embed_row(tape, pv.emb, static_cast<size_t>(eq.token_ids[i])),
                       tape.leaf(std::move(extra)));
  }

  std::vector<Var> fw_states(m), bw_states(m);
  Var h = tape.leaf(Tensor({config.gru_hidden}));
  for (size_t i = 0; i < m; ++i) {
    h = gru_cell(tape, inputs[i], h, pv.fw);
    fw_states[i] = h;
  }
  h = tape.leaf(Tensor({config.gru_hidden}));
  for (size_t i = m; i-- > 0;) {
    h = gru_cell(tape, inputs[i], h, pv.bw);
    bw_states[i] = h;
  }

  if (mode == SpnetMode::Ablation) {
    Var s = concat(tape, fw_states[m - 1], bw_states[0]);
    for (size_t l = 0; l < pv.head.size(); ++l) {
      s = add(tape, matmul(tape, pv.head[l].first, s), pv.head[l].second);
      if (l + 1 < pv.head.size()) s = relu(tape, s);
    }
    return sum(tape, s);  // width-1 vector -> scalar
  }

  // DRL only needs the B positions: d' zeroes every other contribution.
  std::vector<Var> b_states;
  std::vector<double> b_dist;
  for (const auto& mention : eq.mentions) {
    size_t i = mention.span_begin;
    b_states.push_back(concat(tape, fw_states[i], bw_states[i]));
    b_dist.push_back(config.dist_scale * manhattan_km(candidate, mention.location));
  }
  if (b_states.empty()) return tape.leaf(Tensor::scalar(0.0));

  Var q = stack_cols(tape, b_states);
  for (size_t l = 0; l < pv.drl.size(); ++l) {
    q = add_col_broadcast(tape, matmul(tape, pv.drl[l].first, q), pv.drl[l].second);
    if (l + 1 < pv.drl.size()) q = relu(tape, q);
  }
  Var w = tanh(tape, q);  // (1 x n_mentions)
  Tensor dprime({1, b_dist.size()});
  for (size_t j = 0; j < b_dist.size(); ++j) dprime[j] = b_dist[j];
  return sum(tape, mul(tape, w, tape.leaf(std::move(dprime))));
}

}  // namespace poirank
