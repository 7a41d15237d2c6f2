#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "poirank/datagen.hpp"
#include "poirank/geo.hpp"
#include "poirank/params.hpp"
#include "poirank/tape.hpp"

namespace poirank {

struct SpNetConfig {
  size_t emb_dim = 50;
  size_t gru_hidden = 32;             // per direction
  std::vector<size_t> drl_dims{64, 32, 1};  // last must be 1
  double dist_scale = 0.1;            // km -> feature scale, used in inputs and d'

  size_t input_dim() const { return emb_dim + 4; }  // embedding + BIO one-hot + distance
  size_t state_dim() const { return 2 * gru_hidden; }
  void validate() const;
};

// Token index map built from the training split only; index 0 is UNK.
class Vocab {
 public:
  static constexpr int32_t kUnkIndex = 0;

  Vocab() = default;
  static Vocab build(const DatasetSplit& train_split);
  static Vocab from_tokens(std::vector<std::string> sorted_tokens);

  int32_t lookup(const std::string& token) const;
  size_t size() const { return tokens_.size() + 1; }  // rows incl. UNK
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;  // sorted; token i maps to index i + 1
  std::unordered_map<std::string, int32_t> index_;
};

enum class SpnetMode { Full, Ablation };

// Question encoder + distance-reasoning layer + dot-product scorer, plus the
// no-DRL ablation head on the final hidden states.
struct SpatialModel {
  SpNetConfig config;
  Vocab vocab;
  ParamStore params;

  static SpatialModel init(SpNetConfig config, Vocab vocab, uint64_t seed);
};

// Question with tokens mapped to vocab ids and mentions resolved against the
// catalog. Everything the scorer needs except the candidate.
struct EncodedQuestion {
  const QuestionInstance* question = nullptr;
  std::vector<int32_t> token_ids;
  struct MentionRef {
    size_t span_begin, span_end;
    GeoPoint location;
    std::string entity_id;
    ConstraintSign sign;
  };
  std::vector<MentionRef> mentions;

  size_t length() const { return token_ids.size(); }
};

EncodedQuestion encode_tokens(const Vocab& vocab, const QuestionInstance& q,
                              const Catalog& catalog);

// Scaled distance input feature per token: dist_scale * manhattan_km on every
// token of a mention span, zero elsewhere.
std::vector<double> distance_features(const EncodedQuestion& eq, const GeoPoint& candidate,
                                      double dist_scale);

// m-dimensional d': scaled distance at each mention's B position, zero elsewhere.
std::vector<double> distance_vector(const EncodedQuestion& eq, const GeoPoint& candidate,
                                    double dist_scale);

// ---- single-candidate reference path ----

// Bi-GRU states over the question given explicit per-token distance features;
// shared by the spatial model and the joint model's own encoder.
Tensor encode_states(const ParamStore& params, const std::string& emb_name,
                     const std::string& fw_prefix, const std::string& bw_prefix,
                     const SpNetConfig& config, const EncodedQuestion& eq,
                     const std::vector<double>& dist_features);

// Bi-GRU states q_0..q_m as a (state_dim x m) matrix.
Tensor encode_question(const SpatialModel& model, const EncodedQuestion& eq,
                       const GeoPoint& candidate);

// Per-position distance weights w in (-1, 1), length m.
Tensor drl_weights(const SpatialModel& model, const Tensor& states);

double spatial_score(const Tensor& weights, const std::vector<double>& dvec);

double score_candidate(const SpatialModel& model, const EncodedQuestion& eq,
                       const Entity& candidate);
double ablation_score(const SpatialModel& model, const EncodedQuestion& eq,
                      const Entity& candidate);

// ---- batched inference path ----

// Scores every candidate in one pass (shared GRU work across the universe).
// With weights_out != nullptr (Full mode), stores the DRL weight for mention
// j and candidate c at (j, c).
std::vector<double> score_universe(const SpatialModel& model, const EncodedQuestion& eq,
                                   const std::vector<const Entity*>& candidates, SpnetMode mode,
                                   Tensor* weights_out = nullptr);

struct RankedCandidate {
  const Entity* entity;
  double score;
};

// Descending by score, ties broken by ascending entity id.
std::vector<RankedCandidate> rank_universe(const SpatialModel& model, const EncodedQuestion& eq,
                                           const std::vector<const Entity*>& universe,
                                           SpnetMode mode);

void sort_ranked(std::vector<RankedCandidate>& ranked);

// ---- tape path (training / gradient checks) ----

struct SpnetParamVars {
  Var emb;
  GruParamVars fw, bw;
  std::vector<std::pair<Var, Var>> drl;   // (W, b) per layer
  std::vector<std::pair<Var, Var>> head;  // ablation head
};

SpnetParamVars spnet_param_vars(Tape& tape, const std::map<std::string, Var>& vars);

// Score of one candidate as a tape scalar; used by the trainer and grad checks.
Var spnet_score_on_tape(Tape& tape, const SpnetParamVars& pv, const SpNetConfig& config,
                        const EncodedQuestion& eq, const GeoPoint& candidate, SpnetMode mode);

}  // namespace poirank
