#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "poirank/datagen.hpp"
#include "poirank/evaluator.hpp"
#include "poirank/geo.hpp"
#include "poirank/parallel.hpp"
#include "poirank/trainer.hpp"
#include "poirank/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace poirank;

namespace {

json g_config;  // from --config, merged under parsed flags

// flags > config file > defaults
template <class T>
void merge_config(CLI::App* cmd, const std::string& flag, T& value) {
  if (cmd->count("--" + flag) == 0 && g_config.contains(flag)) {
    value = g_config.at(flag).get<T>();
  }
}

json run_config_echo(const json& resolved) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"run_config", resolved}};
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool split_has_keyword(const DatasetSplit& split) {
  for (const QuestionInstance& q : split.questions) {
    if (!q.keyword.empty()) return true;
  }
  return false;
}

// ---- gen-catalog ----

struct GenCatalogArgs {
  std::string out;
  int cities = 50;
  int min_size = 10;
  int max_size = 16200;
  uint64_t seed = 7;
};

int run_gen_catalog(const GenCatalogArgs& a) {
  CatalogConfig cfg{a.cities, a.min_size, a.max_size, a.seed};
  Catalog catalog = generate_catalog(cfg);
  save_catalog(catalog, a.out);
  json resolved = {{"command", "gen-catalog"}, {"out", a.out},           {"cities", a.cities},
                   {"min_size", a.min_size},   {"max_size", a.max_size}, {"seed", a.seed}};
  write_json(run_config_echo(resolved), a.out + ".meta.json");

  size_t min_city = SIZE_MAX, max_city = 0;
  for (const auto& [_, entities] : catalog.cities) {
    min_city = std::min(min_city, entities.size());
    max_city = std::max(max_city, entities.size());
  }
  std::printf("catalog: %zu cities, %zu entities, city sizes %zu-%zu -> %s\n",
              catalog.cities.size(), catalog.total_entities(), min_city, max_city,
              a.out.c_str());
  return 0;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string catalog;
  std::string out_dir;
  uint64_t seed = 1;
  bool hybrid = false;
  std::string sizes = "6000,1500,1500";
  size_t negatives = 500;
  double hard_frac = 0.35;
  size_t threads = 2;
};

int run_gen_data(const GenDataArgs& a) {
  Catalog catalog = load_catalog(a.catalog);
  auto sizes = split_csv(a.sizes);
  if (sizes.size() != 3) throw CLI::ValidationError("--sizes expects train,dev,test");

  DatagenConfig cfg;
  cfg.train_size = std::stoull(sizes[0]);
  cfg.dev_size = std::stoull(sizes[1]);
  cfg.test_size = std::stoull(sizes[2]);
  cfg.seed = a.seed;
  cfg.hybrid = a.hybrid;
  cfg.negatives = a.negatives;
  cfg.hard_frac = a.hard_frac;
  cfg.threads = a.threads;

  Dataset dataset = generate_dataset(catalog, cfg);
  fs::create_directories(a.out_dir);
  save_split(dataset.train, a.out_dir + "/train.jsonl");
  save_split(dataset.dev, a.out_dir + "/dev.jsonl");
  save_split(dataset.test, a.out_dir + "/test.jsonl");

  // stats over all three splits
  std::map<std::string, size_t> category_counts;
  std::map<std::string, size_t> universe_histogram;
  for (const std::string& b : universe_buckets()) universe_histogram[b] = 0;
  size_t with_distractor = 0, total = 0;
  for (const DatasetSplit* split : {&dataset.train, &dataset.dev, &dataset.test}) {
    for (const QuestionInstance& q : split->questions) {
      ++total;
      ++category_counts[template_category_name(template_by_id(q.template_id).category)];
      if (q.has_distractor()) ++with_distractor;
      size_t universe = catalog.universe(q.city_id, q.poi_type).size() - q.mention_count();
      ++universe_histogram[universe_bucket(universe)];
    }
  }
  json resolved = {{"command", "gen-data"},   {"catalog", a.catalog},
                   {"out_dir", a.out_dir},    {"seed", a.seed},
                   {"hybrid", a.hybrid},      {"sizes", a.sizes},
                   {"negatives", a.negatives}, {"hard_frac", a.hard_frac}};
  json stats = {{"total_questions", total},
                {"split_sizes",
                 {{"train", dataset.train.questions.size()},
                  {"dev", dataset.dev.questions.size()},
                  {"test", dataset.test.questions.size()}}},
                {"category_counts", category_counts},
                {"distractor_share",
                 total ? static_cast<double>(with_distractor) / static_cast<double>(total) : 0.0},
                {"universe_histogram", universe_histogram},
                {"hybrid", a.hybrid}};
  stats.update(run_config_echo(resolved));
  write_json(stats, a.out_dir + "/stats.json");
  std::printf("dataset: %zu/%zu/%zu questions -> %s (distractor share %.4f)\n",
              dataset.train.questions.size(), dataset.dev.questions.size(),
              dataset.test.questions.size(), a.out_dir.c_str(),
              stats["distractor_share"].get<double>());
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string model = "spnet";
  std::string data_dir;
  std::string catalog;
  std::string out;
  std::string metrics;
  std::string init_spatial;
  size_t epochs = 30;
  size_t k = 5;
  double margin = 1.0;
  double lr = 1e-3;
  uint64_t seed = 1;
  size_t patience = 5;
  size_t dev_sample = 250;
  double hard_frac = 0.35;
  size_t threads = 2;
};

int run_train(const TrainArgs& a) {
  Catalog catalog = load_catalog(a.catalog);
  Dataset dataset;
  dataset.train = load_split(a.data_dir + "/train.jsonl", "train");
  dataset.dev = load_split(a.data_dir + "/dev.jsonl", "dev");

  TrainConfig cfg;
  cfg.model_kind = a.model;
  cfg.epochs = a.epochs;
  cfg.negatives_per_question = a.k;
  cfg.margin = a.margin;
  cfg.adam.lr = a.lr;
  cfg.seed = a.seed;
  cfg.patience = a.patience;
  cfg.dev_sample = a.dev_sample;
  cfg.hard_frac = a.hard_frac;
  cfg.threads = a.threads;

  std::optional<SpatialModel> pretrained;
  if (a.model == "joint") {
    if (a.init_spatial.empty()) {
      throw CLI::ValidationError("--init-spatial is required for joint training");
    }
    LoadedModel loaded = load_checkpoint(a.init_spatial);
    if (!loaded.spatial) {
      throw std::runtime_error("train: --init-spatial must be a spnet checkpoint, got kind '" +
                               loaded.kind + "'");
    }
    pretrained = std::move(*loaded.spatial);
  }

  TrainOutput result = train(cfg, dataset, catalog, pretrained ? &*pretrained : nullptr);

  json resolved = {{"command", "train"},   {"model", a.model},       {"data", a.data_dir},
                   {"catalog", a.catalog}, {"out", a.out},           {"epochs", a.epochs},
                   {"k", a.k},             {"margin", a.margin},     {"lr", a.lr},
                   {"seed", a.seed},       {"patience", a.patience}, {"dev_sample", a.dev_sample},
                   {"hard_frac", a.hard_frac}};
  result.best_checkpoint["meta"].update(run_config_echo(resolved));
  save_checkpoint(result.best_checkpoint, a.out);

  json history = json::array();
  for (const EpochStats& e : result.history) {
    history.push_back({{"epoch", e.epoch},
                       {"mean_loss", e.mean_loss},
                       {"dev_acc3", e.dev_acc3},
                       {"skipped_questions", e.skipped_questions}});
  }
  json metrics = {{"history", std::move(history)},
                  {"best_epoch", result.best_epoch},
                  {"best_dev_acc3", result.best_dev_acc3}};
  metrics.update(run_config_echo(resolved));
  std::string metrics_path = a.metrics.empty() ? a.out + ".metrics.json" : a.metrics;
  write_json(metrics, metrics_path);
  std::printf("train: best epoch %zu, dev acc@3 %.4f -> %s\n", result.best_epoch,
              result.best_dev_acc3, a.out.c_str());
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string model_file;
  std::string baseline;
  std::string data;
  std::string catalog;
  std::string out_report;
  size_t threads = 2;
};

int run_eval(const EvalArgs& a) {
  if (a.model_file.empty() == a.baseline.empty()) {
    throw CLI::ValidationError("exactly one of --model-file / --baseline is required");
  }
  Catalog catalog = load_catalog(a.catalog);
  DatasetSplit split = load_split(a.data, "eval");
  bool hybrid = split_has_keyword(split);

  LexicalScorer lexical(hybrid);
  std::unique_ptr<Ranker> ranker;
  LoadedModel loaded;
  Vocab vocab;
  if (!a.baseline.empty()) {
    if (a.baseline == "sd") {
      ranker = std::make_unique<SortByDistanceRanker>();
    } else if (a.baseline == "lexical") {
      ranker = std::make_unique<LexicalRanker>(lexical);
    } else {
      throw CLI::ValidationError("unknown baseline '" + a.baseline + "'");
    }
  } else {
    loaded = load_checkpoint(a.model_file);
    if (loaded.joint) {
      vocab = loaded.joint->vocab;
      ranker = std::make_unique<JointRanker>(*loaded.joint, lexical);
    } else {
      vocab = loaded.spatial->vocab;
      ranker = std::make_unique<SpnetRanker>(*loaded.spatial, loaded.spatial_mode());
    }
  }

  MetricsReport report = evaluate(*ranker, split, catalog, vocab, a.threads);
  json resolved = {{"command", "eval"},
                   {"model_file", a.model_file},
                   {"baseline", a.baseline},
                   {"data", a.data},
                   {"catalog", a.catalog},
                   {"out_report", a.out_report}};
  json doc = report.to_json();
  doc.update(run_config_echo(resolved));
  write_json(doc, a.out_report);
  std::fputs(report.text_table().c_str(), stdout);
  return 0;
}

// ---- rank ----

struct RankArgs {
  std::string model_file;
  std::string question_file;
  std::string catalog;
  size_t top = 10;
};

int run_rank(const RankArgs& a) {
  Catalog catalog = load_catalog(a.catalog);
  DatasetSplit split = load_split(a.question_file, "rank");
  LoadedModel loaded = load_checkpoint(a.model_file);
  bool hybrid = split_has_keyword(split);
  LexicalScorer lexical(hybrid);

  for (const QuestionInstance& q : split.questions) {
    auto universe = catalog.universe(q.city_id, q.poi_type);
    const Vocab& vocab = loaded.joint ? loaded.joint->vocab : loaded.spatial->vocab;
    EncodedQuestion eq = encode_tokens(vocab, q, catalog);
    std::erase_if(universe, [&](const Entity* e) {
      for (const auto& m : eq.mentions) {
        if (m.entity_id == e->id) return true;
      }
      return false;
    });
    std::printf("question %s (%zu candidates)\n", q.qid.c_str(), universe.size());
    std::printf("%4s %-16s %-28s %12s %10s %10s %10s %10s\n", "rank", "entity", "name", "score",
                "s_text", "s_spatial", "alpha", "beta");
    size_t top = std::min(a.top, universe.size());
    if (loaded.joint) {
      auto ranked = joint_rank(*loaded.joint, lexical, eq, universe);
      for (size_t i = 0; i < top; ++i) {
        const auto& b = ranked[i].breakdown;
        std::printf("%4zu %-16s %-28s %12.6f %10.6f %10.6f %10.6f %10.6f\n", i + 1,
                    ranked[i].entity->id.c_str(), ranked[i].entity->name.c_str(), b.total,
                    b.s_text, b.s_spatial, b.alpha, b.beta);
      }
    } else {
      auto ranked = rank_universe(*loaded.spatial, eq, universe, loaded.spatial_mode());
      for (size_t i = 0; i < top; ++i) {
        std::printf("%4zu %-16s %-28s %12.6f %10s %10.6f %10s %10s\n", i + 1,
                    ranked[i].entity->id.c_str(), ranked[i].entity->name.c_str(),
                    ranked[i].score, "-", ranked[i].score, "-", "-");
      }
    }
  }
  return 0;
}

// ---- probe ----

struct ProbeArgs {
  std::string model_file;
  std::string question_file;
  std::string catalog;
  std::string candidates;
  std::string out;
};

int run_probe(const ProbeArgs& a) {
  Catalog catalog = load_catalog(a.catalog);
  DatasetSplit split = load_split(a.question_file, "probe");
  LoadedModel loaded = load_checkpoint(a.model_file);
  const SpatialModel& model = loaded.joint ? loaded.joint->spatial : *loaded.spatial;

  std::vector<const Entity*> candidates;
  for (const std::string& id : split_csv(a.candidates)) {
    const Entity* e = catalog.find(id);
    if (!e) throw std::runtime_error("probe: unknown candidate entity " + id);
    candidates.push_back(e);
  }
  if (candidates.empty()) throw CLI::ValidationError("--candidates must name at least one entity");

  std::vector<ProbeRecord> records;
  for (const QuestionInstance& q : split.questions) {
    EncodedQuestion eq = encode_tokens(model.vocab, q, catalog);
    auto rows = probe_weights(model, eq, candidates);
    records.insert(records.end(), rows.begin(), rows.end());
  }
  write_probe_csv(records, a.out);
  json resolved = {{"command", "probe"},
                   {"model_file", a.model_file},
                   {"question_file", a.question_file},
                   {"catalog", a.catalog},
                   {"candidates", a.candidates},
                   {"out", a.out}};
  write_json(run_config_echo(resolved), a.out + ".meta.json");
  std::printf("probe: %zu rows -> %s\n", records.size(), a.out.c_str());
  return 0;
}

// ---- grad-check ----

struct GradCheckArgs {
  std::string dims = "tiny";
  uint64_t seed = 13;
  bool corrupt_tanh = false;
};

int run_grad_check(const GradCheckArgs& a) {
  if (a.dims != "tiny") throw CLI::ValidationError("only --dims tiny is supported");
  debug::corrupt_tanh_backward = a.corrupt_tanh;

  // Small in-memory world: one city, a handful of entities.
  Catalog catalog;
  std::vector<Entity> entities;
  for (int i = 0; i < 4; ++i) {
    Entity e;
    e.id = "c000_R_0000" + std::to_string(i);
    e.name = "Probe Spot " + std::to_string(i);
    e.city_id = "c000";
    e.poi_type = PoiType::Restaurant;
    e.location = {10.0 + 0.01 * i, 20.0 - 0.02 * i};
    entities.push_back(e);
  }
  catalog.cities["c000"] = entities;
  catalog.rebuild_index();

  QuestionInstance q;
  q.qid = "gradcheck-0";
  q.city_id = "c000";
  q.poi_type = PoiType::Restaurant;
  q.template_id = 34;
  q.tokens = {"cafe", "close", "to", "probe", "spot", "far", "from", "probe", "spot"};
  q.bio_tags = {BioTag::O, BioTag::O, BioTag::O, BioTag::B, BioTag::I,
                BioTag::O, BioTag::O, BioTag::B, BioTag::I};
  q.mentions = {{3, 5, "c000_R_00000", ConstraintSign::Near},
                {7, 9, "c000_R_00001", ConstraintSign::Far}};
  q.gold_id = "c000_R_00002";

  SpNetConfig tiny;
  tiny.emb_dim = 5;
  tiny.gru_hidden = 4;
  tiny.drl_dims = {6, 3, 1};

  Vocab vocab = Vocab::from_tokens({"cafe", "close", "to", "probe", "spot", "far", "from"});
  const Entity& candidate = catalog.cities["c000"][2];

  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    uint64_t seed = mix_seed(a.seed, static_cast<uint64_t>(trial));
    SpatialModel model = SpatialModel::init(tiny, vocab, seed);
    EncodedQuestion eq = encode_tokens(model.vocab, q, catalog);

    double err = 0.0;
    if (trial % 2 == 0) {
      SpnetMode mode = trial % 4 == 0 ? SpnetMode::Full : SpnetMode::Ablation;
      err = grad_check(
          [&](Tape& tape, const std::map<std::string, Var>& vars) {
            SpnetParamVars pv = spnet_param_vars(tape, vars);
            return spnet_score_on_tape(tape, pv, tiny, eq, candidate.location, mode);
          },
          model.params);
    } else {
      JointModel jm = JointModel::init(model, seed);
      // single combined store so the check sweeps the spatial branch too
      ParamStore all;
      for (const auto& [name, tensor] : jm.params) all.insert(name, tensor);
      for (const auto& [name, tensor] : jm.spatial.params) all.insert("spatial." + name, tensor);
      err = grad_check(
          [&](Tape& tape, const std::map<std::string, Var>& vars) {
            std::map<std::string, Var> jvars, svars;
            for (const auto& [name, var] : vars) {
              if (name.rfind("spatial.", 0) == 0) {
                svars.emplace(name.substr(8), var);
              } else {
                jvars.emplace(name, var);
              }
            }
            JointParamVars jv = joint_param_vars(jvars);
            SpnetParamVars pv = spnet_param_vars(tape, svars);
            auto [alpha, beta] = joint_alpha_beta_on_tape(tape, jv, tiny, eq);
            Var s_l =
                spnet_score_on_tape(tape, pv, tiny, eq, candidate.location, SpnetMode::Full);
            return joint_score_on_tape(tape, alpha, beta, jv.w_T, jv.w_L, 0.37, s_l);
          },
          all);
    }
    worst = std::max(worst, err);
    std::printf("trial %d: max rel err %.3e\n", trial, err);
  }
  debug::corrupt_tanh_backward = false;
  std::printf("grad-check: max rel err %.3e (%s)\n", worst, worst < 1e-3 ? "PASS" : "FAIL");
  return worst < 1e-3 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolName) + " " + kToolVersion +
               " - geo-spatial POI question ranking toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values")
      ->expected(1);

  GenCatalogArgs gc;
  auto* cmd_gc = app.add_subcommand("gen-catalog", "Generate a synthetic POI catalog (JSONL)");
  cmd_gc->add_option("--out", gc.out, "output catalog path")->required();
  cmd_gc->add_option("--cities", gc.cities, "number of cities")->check(CLI::PositiveNumber);
  cmd_gc->add_option("--min-size", gc.min_size, "min city size");
  cmd_gc->add_option("--max-size", gc.max_size, "max city size");
  cmd_gc->add_option("--seed", gc.seed, "generation seed");

  GenDataArgs gd;
  auto* cmd_gd = app.add_subcommand("gen-data", "Generate template question splits (JSONL)");
  cmd_gd->add_option("--catalog", gd.catalog, "catalog path")->required();
  cmd_gd->add_option("--out-dir", gd.out_dir, "output directory")->required();
  cmd_gd->add_option("--seed", gd.seed, "generation seed");
  cmd_gd->add_flag("--hybrid", gd.hybrid, "attach keywords and keyword-matching golds");
  cmd_gd->add_option("--sizes", gd.sizes, "train,dev,test sizes");
  cmd_gd->add_option("--negatives", gd.negatives, "negative pool size per question");
  cmd_gd->add_option("--hard-frac", gd.hard_frac, "hard share of the negative pool");
  cmd_gd->add_option("--threads", gd.threads, "worker threads");

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "Max-margin training");
  cmd_tr->add_option("--model", tr.model, "spnet | spnet-ablation | joint")
      ->check(CLI::IsMember({"spnet", "spnet-ablation", "joint"}))
      ->required();
  cmd_tr->add_option("--data", tr.data_dir, "dataset directory")->required();
  cmd_tr->add_option("--catalog", tr.catalog, "catalog path")->required();
  cmd_tr->add_option("--out", tr.out, "best checkpoint output path")->required();
  cmd_tr->add_option("--metrics", tr.metrics, "per-epoch metrics JSON path");
  cmd_tr->add_option("--init-spatial", tr.init_spatial, "pretrained spnet checkpoint (joint)");
  cmd_tr->add_option("--epochs", tr.epochs, "max epochs");
  cmd_tr->add_option("--negatives", tr.k, "negatives per question per epoch");
  cmd_tr->add_option("--margin", tr.margin, "hinge margin");
  cmd_tr->add_option("--lr", tr.lr, "Adam learning rate");
  cmd_tr->add_option("--seed", tr.seed, "training seed");
  cmd_tr->add_option("--patience", tr.patience, "early-stop patience on dev acc@3");
  cmd_tr->add_option("--dev-sample", tr.dev_sample, "dev questions per epoch metric (0 = all)");
  cmd_tr->add_option("--hard-frac", tr.hard_frac, "hard share of per-epoch negative draws");
  cmd_tr->add_option("--threads", tr.threads, "worker threads");

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "Evaluate a checkpoint or baseline on a split");
  cmd_ev->add_option("--model-file", ev.model_file, "checkpoint path");
  cmd_ev->add_option("--baseline", ev.baseline, "sd | lexical");
  cmd_ev->add_option("--data", ev.data, "split JSONL path")->required();
  cmd_ev->add_option("--catalog", ev.catalog, "catalog path")->required();
  cmd_ev->add_option("--out-report", ev.out_report, "report JSON path")->required();
  cmd_ev->add_option("--threads", ev.threads, "worker threads");

  RankArgs rk;
  auto* cmd_rk = app.add_subcommand("rank", "Print top-N candidates with score breakdowns");
  cmd_rk->add_option("--model-file", rk.model_file, "checkpoint path")->required();
  cmd_rk->add_option("--question-file", rk.question_file, "question JSONL path")->required();
  cmd_rk->add_option("--catalog", rk.catalog, "catalog path")->required();
  cmd_rk->add_option("--top", rk.top, "rows to print")->check(CLI::PositiveNumber);

  ProbeArgs pr;
  auto* cmd_pr = app.add_subcommand("probe", "Dump DRL distance weights per (candidate, mention)");
  cmd_pr->add_option("--model-file", pr.model_file, "checkpoint path")->required();
  cmd_pr->add_option("--question-file", pr.question_file, "question JSONL path")->required();
  cmd_pr->add_option("--catalog", pr.catalog, "catalog path")->required();
  cmd_pr->add_option("--candidates", pr.candidates, "comma-separated entity ids")->required();
  cmd_pr->add_option("--out", pr.out, "CSV output path")->required();

  GradCheckArgs gck;
  auto* cmd_gck = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  cmd_gck->add_option("--dims", gck.dims, "model size preset");
  cmd_gck->add_option("--seed", gck.seed, "trial seed");
  cmd_gck->add_flag("--corrupt-tanh", gck.corrupt_tanh,
                    "deliberately corrupt the tanh backward rule (must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config file " + config_path);
      in >> g_config;
    }

    if (cmd_gc->parsed()) {
      merge_config(cmd_gc, "cities", gc.cities);
      merge_config(cmd_gc, "min-size", gc.min_size);
      merge_config(cmd_gc, "max-size", gc.max_size);
      merge_config(cmd_gc, "seed", gc.seed);
      return run_gen_catalog(gc);
    }
    if (cmd_gd->parsed()) {
      merge_config(cmd_gd, "seed", gd.seed);
      merge_config(cmd_gd, "sizes", gd.sizes);
      merge_config(cmd_gd, "negatives", gd.negatives);
      merge_config(cmd_gd, "hard-frac", gd.hard_frac);
      merge_config(cmd_gd, "threads", gd.threads);
      return run_gen_data(gd);
    }
    if (cmd_tr->parsed()) {
      merge_config(cmd_tr, "epochs", tr.epochs);
      merge_config(cmd_tr, "negatives", tr.k);
      merge_config(cmd_tr, "margin", tr.margin);
      merge_config(cmd_tr, "lr", tr.lr);
      merge_config(cmd_tr, "seed", tr.seed);
      merge_config(cmd_tr, "patience", tr.patience);
      merge_config(cmd_tr, "dev-sample", tr.dev_sample);
      merge_config(cmd_tr, "hard-frac", tr.hard_frac);
      merge_config(cmd_tr, "threads", tr.threads);
      return run_train(tr);
    }
    if (cmd_ev->parsed()) {
      merge_config(cmd_ev, "threads", ev.threads);
      return run_eval(ev);
    }
    if (cmd_rk->parsed()) {
      merge_config(cmd_rk, "top", rk.top);
      return run_rank(rk);
    }
    if (cmd_pr->parsed()) return run_probe(pr);
    if (cmd_gck->parsed()) {
      merge_config(cmd_gck, "seed", gck.seed);
      return run_grad_check(gck);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
