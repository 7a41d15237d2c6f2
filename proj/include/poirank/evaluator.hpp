#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "poirank/joint.hpp"
#include "poirank/spnet.hpp"

namespace poirank {

struct SliceStats {
  size_t count = 0;
  double acc3 = 0.0, acc5 = 0.0, acc30 = 0.0, mrr = 0.0, dist_g = 0.0;
};

struct MetricsReport {
  SliceStats aggregate;
  std::map<std::string, SliceStats> by_category;        // close / far / combination
  std::map<std::string, SliceStats> by_distractor;      // with / without
  std::map<std::string, SliceStats> by_universe_bucket; // 0-200 .. 5000-20000
  std::map<std::string, SliceStats> by_mention_count;   // all tagged mentions
  std::map<std::string, SliceStats> by_reasoned_mention_count;  // distractors excluded

  nlohmann::json to_json() const;
  std::string text_table() const;
};

inline const std::vector<std::string>& universe_buckets() {
  static const std::vector<std::string> buckets = {"0-200", "200-500", "500-1000", "1000-5000",
                                                   "5000-20000"};
  return buckets;
}
std::string universe_bucket(size_t universe_size);

int acc_at_n(const std::vector<const Entity*>& ranked, const std::string& gold_id, size_t n);
double mrr(const std::vector<const Entity*>& ranked, const std::string& gold_id);
// Mean Manhattan distance of the top-3 (or fewer) ranked entities to the gold.
double dist_g(const std::vector<const Entity*>& ranked, const Entity& gold);

// Ranking strategy under evaluation; must order the whole universe.
class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual std::vector<const Entity*> rank(const EncodedQuestion& eq,
                                          const std::vector<const Entity*>& universe) const = 0;
};

class SpnetRanker : public Ranker {
 public:
  SpnetRanker(const SpatialModel& model, SpnetMode mode) : model_(model), mode_(mode) {}
  std::vector<const Entity*> rank(const EncodedQuestion& eq,
                                  const std::vector<const Entity*>& universe) const override;

 private:
  const SpatialModel& model_;
  SpnetMode mode_;
};

class JointRanker : public Ranker {
 public:
  JointRanker(const JointModel& model, const TextualScorer& scorer)
      : model_(model), scorer_(scorer) {}
  std::vector<const Entity*> rank(const EncodedQuestion& eq,
                                  const std::vector<const Entity*>& universe) const override;

 private:
  const JointModel& model_;
  const TextualScorer& scorer_;
};

// Ascending minimum distance over every tagged mention, distractors included;
// the baseline cannot see constraint signs.
class SortByDistanceRanker : public Ranker {
 public:
  std::vector<const Entity*> rank(const EncodedQuestion& eq,
                                  const std::vector<const Entity*>& universe) const override;
};

class LexicalRanker : public Ranker {
 public:
  explicit LexicalRanker(const TextualScorer& scorer) : scorer_(scorer) {}
  std::vector<const Entity*> rank(const EncodedQuestion& eq,
                                  const std::vector<const Entity*>& universe) const override;

 private:
  const TextualScorer& scorer_;
};

// Ranks every question's city/type universe (mention entities excluded) and
// aggregates metrics with per-slice breakdowns.
MetricsReport evaluate(const Ranker& ranker, const DatasetSplit& split, const Catalog& catalog,
                       const Vocab& vocab, size_t threads = 1);

struct ProbeRecord {
  std::string qid;
  std::string candidate_id;
  std::string mention_text;
  double distance_km = 0.0;
  double weight = 0.0;
};

// Distance weights the DRL assigns to each (candidate, mention) pair.
std::vector<ProbeRecord> probe_weights(const SpatialModel& model, const EncodedQuestion& eq,
                                       const std::vector<const Entity*>& candidates);

void write_probe_csv(const std::vector<ProbeRecord>& records, const std::string& path);

// Two-sided p-value for the per-question accuracy difference between two
// systems, by resampling question indices with replacement.
double paired_bootstrap_pvalue(const std::vector<int>& hits_a, const std::vector<int>& hits_b,
                               size_t iterations, uint64_t seed);

}  // namespace poirank
