#include "poirank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "poirank/parallel.hpp"

namespace poirank {

using nlohmann::json;

void TrainConfig::validate() const {
  if (model_kind != "spnet" && model_kind != "spnet-ablation" && model_kind != "joint") {
    throw std::invalid_argument("TrainConfig: unknown model kind '" + model_kind + "'");
  }
  if (margin <= 0.0) throw std::invalid_argument("TrainConfig: margin must be > 0");
  if (hard_frac < 0.0 || hard_frac > 1.0) {
    throw std::invalid_argument("TrainConfig: hard_frac must lie in [0, 1]");
  }
  net.validate();
}

double margin_loss(double s_pos, double s_neg, double margin) {
  return std::max(0.0, margin - s_pos + s_neg);
}

namespace {

struct PreparedQuestion {
  EncodedQuestion eq;
  const Entity* gold = nullptr;
  std::vector<const Entity*> hard_pool, soft_pool;

  std::vector<const Entity*> full_pool_with_gold() const {
    std::vector<const Entity*> pool;
    pool.reserve(hard_pool.size() + soft_pool.size() + 1);
    pool.push_back(gold);
    pool.insert(pool.end(), hard_pool.begin(), hard_pool.end());
    pool.insert(pool.end(), soft_pool.begin(), soft_pool.end());
    return pool;
  }
};

PreparedQuestion prepare_question(const QuestionInstance& q, const Vocab& vocab,
                                  const Catalog& catalog) {
  PreparedQuestion p;
  p.eq = encode_tokens(vocab, q, catalog);
  p.gold = catalog.find(q.gold_id);
  if (!p.gold) {
    throw std::runtime_error("train: question " + q.qid + " gold entity " + q.gold_id +
                             " absent from the catalog");
  }
  for (const NegativeSample& n : q.negatives) {
    const Entity* e = catalog.find(n.entity_id);
    if (!e) {
      throw std::runtime_error("train: question " + q.qid + " negative " + n.entity_id +
                               " absent from the catalog");
    }
    (n.hard ? p.hard_pool : p.soft_pool).push_back(e);
  }
  return p;
}

// Stratified draw of k negatives from the stored pool.
std::vector<const Entity*> draw_negatives(const PreparedQuestion& p, size_t k, double hard_frac,
                                          Rng& rng) {
  size_t want_hard = static_cast<size_t>(std::llround(static_cast<double>(k) * hard_frac));
  size_t n_hard = std::min(want_hard, p.hard_pool.size());
  size_t n_soft = std::min(k - n_hard, p.soft_pool.size());
  n_hard = std::min(std::max(n_hard, k - n_soft), p.hard_pool.size());
  std::vector<const Entity*> out;
  out.reserve(n_hard + n_soft);
  for (size_t idx : rng.sample_indices(p.hard_pool.size(), n_hard)) {
    out.push_back(p.hard_pool[idx]);
  }
  for (size_t idx : rng.sample_indices(p.soft_pool.size(), n_soft)) {
    out.push_back(p.soft_pool[idx]);
  }
  return out;
}

json params_to_json(const ParamStore& params) {
  json out = json::object();
  for (const auto& [name, tensor] : params) {
    json shape = json::array();
    for (size_t d : tensor.shape()) shape.push_back(d);
    json data = json::array();
    for (size_t i = 0; i < tensor.size(); ++i) data.push_back(tensor[i]);
    out[name] = {{"shape", std::move(shape)}, {"data", std::move(data)}};
  }
  return out;
}

void params_from_json(ParamStore& params, const json& j, const std::string& prefix) {
  for (auto& [name, tensor] : params) {
    std::string key = prefix + name;
    auto it = j.find(key);
    if (it == j.end()) {
      throw std::runtime_error("checkpoint: missing parameter '" + key + "'");
    }
    std::vector<size_t> shape = (*it).at("shape").get<std::vector<size_t>>();
    if (shape != tensor.shape()) {
      Tensor probe(shape);
      throw std::runtime_error("checkpoint: parameter '" + key + "' has shape " +
                               probe.shape_str() + ", expected " + tensor.shape_str());
    }
    std::vector<double> data = (*it).at("data").get<std::vector<double>>();
    tensor = Tensor(shape, std::move(data));
  }
}

json config_to_json(const SpNetConfig& c) {
  return {{"emb_dim", c.emb_dim},
          {"gru_hidden", c.gru_hidden},
          {"drl_dims", c.drl_dims},
          {"dist_scale", c.dist_scale}};
}

SpNetConfig config_from_json(const json& j) {
  SpNetConfig c;
  c.emb_dim = j.at("emb_dim").get<size_t>();
  c.gru_hidden = j.at("gru_hidden").get<size_t>();
  c.drl_dims = j.at("drl_dims").get<std::vector<size_t>>();
  c.dist_scale = j.at("dist_scale").get<double>();
  return c;
}

// ---- spatial (spnet / ablation) training ----

struct SpatialTrainer {
  SpatialModel& model;
  SpnetMode mode;
  const TrainConfig& config;
  Adam optimizer;

  explicit SpatialTrainer(SpatialModel& m, SpnetMode md, const TrainConfig& cfg)
      : model(m), mode(md), config(cfg), optimizer(cfg.adam) {}

  // One question: score gold + drawn negatives on per-candidate tapes, average
  // the hinge pairs, one Adam step. Returns the question loss.
  double step(const PreparedQuestion& p, const std::vector<const Entity*>& negatives) {
    size_t k = negatives.size();
    std::vector<const Entity*> cands;
    cands.reserve(k + 1);
    cands.push_back(p.gold);
    cands.insert(cands.end(), negatives.begin(), negatives.end());

    std::vector<Tape> tapes(cands.size());
    std::vector<std::map<std::string, Var>> vars(cands.size());
    std::vector<Var> score_vars(cands.size());
    std::vector<double> scores(cands.size());

    parallel_for(cands.size(), config.threads, [&](size_t i) {
      Tape& tape = tapes[i];
      tape.reserve(256);
      for (const auto& [name, tensor] : model.params) vars[i].emplace(name, tape.leaf(tensor));
      SpnetParamVars pv = spnet_param_vars(tape, vars[i]);
      score_vars[i] =
          spnet_score_on_tape(tape, pv, model.config, p.eq, cands[i]->location, mode);
      scores[i] = tape.value(score_vars[i])[0];
    });

    double loss = 0.0;
    std::vector<double> coeff(cands.size(), 0.0);  // dL/ds per candidate
    for (size_t j = 1; j < cands.size(); ++j) {
      double pair_loss = margin_loss(scores[0], scores[j], config.margin);
      loss += pair_loss;
      if (pair_loss > 0.0) {
        coeff[j] = 1.0 / static_cast<double>(k);
        coeff[0] -= 1.0 / static_cast<double>(k);
      }
    }
    loss /= static_cast<double>(k);

    parallel_for(cands.size(), config.threads, [&](size_t i) {
      if (coeff[i] != 0.0) tapes[i].backward(score_vars[i], coeff[i]);
    });

    GradMap grads;
    for (const auto& [name, tensor] : model.params) grads.emplace(name, Tensor(tensor.shape()));
    for (size_t i = 0; i < cands.size(); ++i) {
      if (coeff[i] == 0.0) continue;
      for (auto& [name, total] : grads) {
        Tensor g = tapes[i].grad(vars[i].at(name));
        for (size_t x = 0; x < total.size(); ++x) total[x] += g[x];
      }
    }
    optimizer.step(model.params, grads);
    return loss;
  }

  double dev_acc3(const std::vector<PreparedQuestion>& dev) {
    if (dev.empty()) return 0.0;
    std::vector<int> hits(dev.size(), 0);
    parallel_for(dev.size(), config.threads, [&](size_t i) {
      auto pool = dev[i].full_pool_with_gold();
      std::vector<double> scores = score_universe(model, dev[i].eq, pool, mode);
      std::vector<RankedCandidate> ranked;
      ranked.reserve(pool.size());
      for (size_t c = 0; c < pool.size(); ++c) ranked.push_back({pool[c], scores[c]});
      sort_ranked(ranked);
      for (size_t r = 0; r < std::min<size_t>(3, ranked.size()); ++r) {
        if (ranked[r].entity == dev[i].gold) hits[i] = 1;
      }
    });
    size_t total = 0;
    for (int h : hits) total += static_cast<size_t>(h);
    return static_cast<double>(total) / static_cast<double>(dev.size());
  }
};

// ---- joint training ----

struct JointTrainer {
  JointModel& model;
  const TrainConfig& config;
  Adam opt_joint, opt_spatial;
  LexicalScorer scorer;

  JointTrainer(JointModel& m, const TrainConfig& cfg, bool hybrid)
      : model(m),
        config(cfg),
        opt_joint(cfg.adam),
        opt_spatial(cfg.adam),
        scorer(hybrid) {}

  double step(const PreparedQuestion& p, const std::vector<const Entity*>& negatives) {
    size_t k = negatives.size();
    std::vector<const Entity*> cands;
    cands.push_back(p.gold);
    cands.insert(cands.end(), negatives.begin(), negatives.end());

    Tape tape;
    tape.reserve(512 + 256 * cands.size());
    std::map<std::string, Var> vars;
    for (const auto& [name, tensor] : model.params) vars.emplace(name, tape.leaf(tensor));
    std::map<std::string, Var> svars;
    for (const auto& [name, tensor] : model.spatial.params) {
      svars.emplace(name, tape.leaf(tensor));
    }

    JointParamVars jv = joint_param_vars(vars);
    SpnetParamVars pv = spnet_param_vars(tape, svars);
    auto [alpha, beta] = joint_alpha_beta_on_tape(tape, jv, model.config, p.eq);

    std::vector<Var> score_vars;
    for (const Entity* cand : cands) {
      Var s_l = spnet_score_on_tape(tape, pv, model.config, p.eq, cand->location,
                                    SpnetMode::Full);
      double s_t = scorer.score_text(*p.eq.question, *cand);
      score_vars.push_back(joint_score_on_tape(tape, alpha, beta, jv.w_T, jv.w_L, s_t, s_l));
    }

    Var loss_acc;
    size_t active = 0;
    for (size_t j = 1; j < cands.size(); ++j) {
      Var pair = relu(
          tape, add_scalar(tape, sub(tape, score_vars[j], score_vars[0]), config.margin));
      loss_acc = active == 0 ? pair : add(tape, loss_acc, pair);
      ++active;
    }
    Var loss = scale(tape, loss_acc, 1.0 / static_cast<double>(k));
    double loss_value = tape.value(loss)[0];
    tape.backward(loss);

    GradMap jgrads, sgrads;
    for (const auto& [name, var] : vars) jgrads.emplace(name, tape.grad(var));
    for (const auto& [name, var] : svars) sgrads.emplace(name, tape.grad(var));
    opt_joint.step(model.params, jgrads);
    opt_spatial.step(model.spatial.params, sgrads);
    return loss_value;
  }

  double dev_acc3(const std::vector<PreparedQuestion>& dev) {
    if (dev.empty()) return 0.0;
    std::vector<int> hits(dev.size(), 0);
    parallel_for(dev.size(), config.threads, [&](size_t i) {
      auto pool = dev[i].full_pool_with_gold();
      auto ranked = joint_rank(model, scorer, dev[i].eq, pool);
      for (size_t r = 0; r < std::min<size_t>(3, ranked.size()); ++r) {
        if (ranked[r].entity == dev[i].gold) hits[i] = 1;
      }
    });
    size_t total = 0;
    for (int h : hits) total += static_cast<size_t>(h);
    return static_cast<double>(total) / static_cast<double>(dev.size());
  }
};

bool split_is_hybrid(const DatasetSplit& split) {
  for (const QuestionInstance& q : split.questions) {
    if (!q.keyword.empty()) return true;
  }
  return false;
}

}  // namespace

json spatial_checkpoint(const SpatialModel& model, const std::string& kind, json meta) {
  return {{"format_version", kCheckpointVersion},
          {"kind", kind},
          {"config", config_to_json(model.config)},
          {"vocab", model.vocab.tokens()},
          {"params", params_to_json(model.params)},
          {"meta", std::move(meta)}};
}

json joint_checkpoint(const JointModel& model, json meta) {
  json params = params_to_json(model.params);
  json spatial = params_to_json(model.spatial.params);
  for (auto& [name, value] : spatial.items()) params["spatial." + name] = std::move(value);
  return {{"format_version", kCheckpointVersion},
          {"kind", "joint"},
          {"config", config_to_json(model.config)},
          {"vocab", model.vocab.tokens()},
          {"params", std::move(params)},
          {"meta", std::move(meta)}};
}

void save_checkpoint(const json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": invalid JSON: " + e.what());
  }
  std::string version = doc.value("format_version", "");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported format version '" + version +
                             "', expected '" + std::string(kCheckpointVersion) + "'");
  }
  LoadedModel loaded;
  loaded.kind = doc.value("kind", "");
  loaded.meta = doc.value("meta", json::object());
  SpNetConfig config = config_from_json(doc.at("config"));
  Vocab vocab = Vocab::from_tokens(doc.at("vocab").get<std::vector<std::string>>());
  const json& params = doc.at("params");

  if (loaded.kind == "spnet" || loaded.kind == "spnet-ablation") {
    SpatialModel model = SpatialModel::init(config, std::move(vocab), 0);
    params_from_json(model.params, params, "");
    loaded.spatial = std::move(model);
  } else if (loaded.kind == "joint") {
    SpatialModel spatial = SpatialModel::init(config, vocab, 0);
    params_from_json(spatial.params, params, "spatial.");
    JointModel model = JointModel::init(spatial, 0);
    params_from_json(model.params, params, "");
    loaded.joint = std::move(model);
  } else {
    throw std::runtime_error("load_checkpoint: unknown model kind '" + loaded.kind + "'");
  }
  return loaded;
}

TrainOutput train(const TrainConfig& config, const Dataset& dataset, const Catalog& catalog,
                  const SpatialModel* pretrained) {
  config.validate();
  bool joint = config.model_kind == "joint";
  if (joint && !pretrained) {
    throw std::invalid_argument("train: joint training requires a pretrained spatial model");
  }
  if (dataset.train.questions.empty()) throw std::invalid_argument("train: empty train split");

  Vocab vocab = joint ? pretrained->vocab : Vocab::build(dataset.train);

  std::vector<PreparedQuestion> train_qs(dataset.train.questions.size());
  parallel_for(train_qs.size(), config.threads, [&](size_t i) {
    train_qs[i] = prepare_question(dataset.train.questions[i], vocab, catalog);
  });

  // fixed dev subsample for the per-epoch selection metric
  std::vector<size_t> dev_idx;
  {
    size_t n_dev = dataset.dev.questions.size();
    size_t want = config.dev_sample == 0 ? n_dev : std::min(config.dev_sample, n_dev);
    Rng rng(mix_seed(config.seed, fnv1a64("dev-sample")));
    dev_idx = rng.sample_indices(n_dev, want);
    std::sort(dev_idx.begin(), dev_idx.end());
  }
  std::vector<PreparedQuestion> dev_qs(dev_idx.size());
  parallel_for(dev_qs.size(), config.threads, [&](size_t i) {
    dev_qs[i] = prepare_question(dataset.dev.questions[dev_idx[i]], vocab, catalog);
  });

  bool hybrid = split_is_hybrid(dataset.train);

  SpatialModel spatial_model =
      joint ? *pretrained
            : SpatialModel::init(config.net, std::move(vocab), config.seed);
  JointModel joint_model =
      joint ? JointModel::init(*pretrained, mix_seed(config.seed, fnv1a64("joint")))
            : JointModel{};

  SpatialTrainer sp_trainer(spatial_model,
                            config.model_kind == "spnet-ablation" ? SpnetMode::Ablation
                                                                  : SpnetMode::Full,
                            config);
  JointTrainer j_trainer(joint_model, config, hybrid);

  auto eval_dev = [&]() { return joint ? j_trainer.dev_acc3(dev_qs) : sp_trainer.dev_acc3(dev_qs); };
  auto snapshot = [&](size_t epoch, double acc) {
    json meta = {{"epoch", epoch}, {"dev_acc3", acc}, {"dev_sample", dev_qs.size()}};
    return joint ? joint_checkpoint(joint_model, meta)
                 : spatial_checkpoint(spatial_model, config.model_kind, meta);
  };

  TrainOutput out;
  double baseline = eval_dev();
  out.history.push_back({0, 0.0, baseline, 0});
  out.best_epoch = 0;
  out.best_dev_acc3 = baseline;
  out.best_checkpoint = snapshot(0, baseline);

  std::vector<size_t> order(train_qs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng(mix_seed(config.seed, mix_seed(fnv1a64("epoch"), epoch)));
    epoch_rng.shuffle(order);

    double total_loss = 0.0;
    size_t steps = 0, skipped = 0;
    for (size_t qi : order) {
      const PreparedQuestion& p = train_qs[qi];
      if (config.negatives_per_question == 0) break;  // k = 0: no updates at all
      auto negatives =
          draw_negatives(p, config.negatives_per_question, config.hard_frac, epoch_rng);
      if (negatives.empty()) {
        ++skipped;
        continue;
      }
      double loss = joint ? j_trainer.step(p, negatives) : sp_trainer.step(p, negatives);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      total_loss += loss;
      ++steps;
    }
    double mean_loss = steps > 0 ? total_loss / static_cast<double>(steps) : 0.0;

    double acc = eval_dev();
    out.history.push_back({epoch, mean_loss, acc, skipped});
    if (acc > out.best_dev_acc3) {
      out.best_dev_acc3 = acc;
      out.best_epoch = epoch;
      out.best_checkpoint = snapshot(epoch, acc);
    }
    if (epoch - out.best_epoch >= config.patience) break;
  }
  return out;
}

}  // namespace poirank
