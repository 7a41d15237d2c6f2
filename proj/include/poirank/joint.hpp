#pragma once

#include <memory>
#include <utility>

#include "poirank/spnet.hpp"

namespace poirank {

// Pluggable textual branch. Implementations must be pure and deterministic.
class TextualScorer {
 public:
  virtual ~TextualScorer() = default;
  virtual double score_text(const QuestionInstance& q, const Entity& e) const = 0;
};

// Token-overlap stand-in for a learned textual reasoner: fraction of the
// candidate's descriptor bag (name tokens, type metonym tokens, keyword) that
// appears in the question, with stopword matches discounted.
class LexicalScorer : public TextualScorer {
 public:
  explicit LexicalScorer(bool include_keywords) : include_keywords_(include_keywords) {}

  double score_text(const QuestionInstance& q, const Entity& e) const override;

  // Exposed for tests: raw bag score against an explicit token set.
  static double bag_score(const std::vector<std::string>& question_tokens,
                          const std::vector<std::string>& bag);

  std::vector<std::string> descriptor_bag(const Entity& e) const;

 private:
  bool include_keywords_;
};

inline constexpr size_t kAttentionDim = 32;

// Joint scoring layer: its own question encoder (same architecture as the
// spatial reasoner), additive self-attention pooling, the alpha/beta head and
// the rescaling scalars w_T / w_L, plus the owned spatial branch.
struct JointModel {
  SpNetConfig config;
  Vocab vocab;
  ParamStore params;     // jenc.*, att.*, ab.*, w_T, w_L
  SpatialModel spatial;  // spatial branch producing S_L

  // Encoder weights start as copies of the pretrained spatial reasoner;
  // attention and alpha/beta head are fresh; w_T = w_L = 1.
  static JointModel init(const SpatialModel& pretrained, uint64_t seed);
};

// S = alpha * sigmoid(w_T S_T) * tanh(w_L S_L) + beta * sigmoid(w_T S_T).
// tanh(0) = 0 makes S_L a selector: no location mentions -> S_L = 0 -> the
// score reduces to the textual branch alone.
double joint_score(double s_text, double s_spatial, double alpha, double beta, double w_t,
                   double w_l);

// Question states from the joint model's own encoder; candidate-independent
// (distance features are zero).
Tensor joint_encode(const JointModel& model, const EncodedQuestion& eq);

// a_i = softmax(v . tanh(W q_i)); pooled = sum a_i q_i.
Tensor attention_pool(const JointModel& model, const Tensor& states);

std::pair<double, double> alpha_beta(const JointModel& model, const Tensor& pooled);

struct ScoreBreakdown {
  double s_text = 0.0;
  double s_spatial = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

struct JointRanked {
  const Entity* entity;
  ScoreBreakdown breakdown;
};

std::vector<JointRanked> joint_rank(const JointModel& model, const TextualScorer& scorer,
                                    const EncodedQuestion& eq,
                                    const std::vector<const Entity*>& universe);

// ---- tape path ----

struct JointParamVars {
  Var emb;
  GruParamVars fw, bw;
  Var att_W, att_v;
  std::vector<std::pair<Var, Var>> ab;
  Var w_T, w_L;
};

JointParamVars joint_param_vars(const std::map<std::string, Var>& vars);

// alpha/beta as tape scalars; built once per question tape.
std::pair<Var, Var> joint_alpha_beta_on_tape(Tape& tape, const JointParamVars& jv,
                                             const SpNetConfig& config, const EncodedQuestion& eq);

Var joint_score_on_tape(Tape& tape, Var alpha, Var beta, Var w_T, Var w_L, double s_text,
                        Var s_spatial);

}  // namespace poirank
