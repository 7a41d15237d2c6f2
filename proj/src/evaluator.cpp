#include "poirank/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "poirank/parallel.hpp"
#include "poirank/rng.hpp"

namespace poirank {

using nlohmann::json;

std::string universe_bucket(size_t universe_size) {
  if (universe_size < 200) return "0-200";
  if (universe_size < 500) return "200-500";
  if (universe_size < 1000) return "500-1000";
  if (universe_size < 5000) return "1000-5000";
  return "5000-20000";
}

int acc_at_n(const std::vector<const Entity*>& ranked, const std::string& gold_id, size_t n) {
  if (ranked.empty()) throw std::invalid_argument("acc_at_n: empty ranking");
  size_t limit = std::min(n, ranked.size());
  for (size_t i = 0; i < limit; ++i) {
    if (ranked[i]->id == gold_id) return 1;
  }
  return 0;
}

double mrr(const std::vector<const Entity*>& ranked, const std::string& gold_id) {
  for (size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i]->id == gold_id) return 1.0 / static_cast<double>(i + 1);
  }
  throw std::runtime_error("mrr: gold entity " + gold_id +
                           " not present in the ranked universe");
}

double dist_g(const std::vector<const Entity*>& ranked, const Entity& gold) {
  if (ranked.empty()) throw std::invalid_argument("dist_g: empty ranking");
  size_t n = std::min<size_t>(3, ranked.size());
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    total += manhattan_km(ranked[i]->location, gold.location);
  }
  return total / static_cast<double>(n);
}

std::vector<const Entity*> SpnetRanker::rank(const EncodedQuestion& eq,
                                             const std::vector<const Entity*>& universe) const {
  auto ranked = rank_universe(model_, eq, universe, mode_);
  std::vector<const Entity*> out;
  out.reserve(ranked.size());
  for (const RankedCandidate& r : ranked) out.push_back(r.entity);
  return out;
}

std::vector<const Entity*> JointRanker::rank(const EncodedQuestion& eq,
                                             const std::vector<const Entity*>& universe) const {
  auto ranked = joint_rank(model_, scorer_, eq, universe);
  std::vector<const Entity*> out;
  out.reserve(ranked.size());
  for (const JointRanked& r : ranked) out.push_back(r.entity);
  return out;
}

std::vector<const Entity*> SortByDistanceRanker::rank(
    const EncodedQuestion& eq, const std::vector<const Entity*>& universe) const {
  std::vector<std::pair<double, const Entity*>> scored;
  scored.reserve(universe.size());
  if (eq.mentions.empty()) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "sort-by-distance: question without mentions, falling back to id order\n";
      warned = true;
    }
    for (const Entity* e : universe) scored.emplace_back(0.0, e);
  } else {
    for (const Entity* e : universe) {
      double best = manhattan_km(e->location, eq.mentions[0].location);
      for (size_t j = 1; j < eq.mentions.size(); ++j) {
        best = std::min(best, manhattan_km(e->location, eq.mentions[j].location));
      }
      scored.emplace_back(best, e);
    }
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->id < b.second->id;
  });
  std::vector<const Entity*> out;
  out.reserve(scored.size());
  for (const auto& [_, e] : scored) out.push_back(e);
  return out;
}

std::vector<const Entity*> LexicalRanker::rank(const EncodedQuestion& eq,
                                               const std::vector<const Entity*>& universe) const {
  std::vector<std::pair<double, const Entity*>> scored;
  scored.reserve(universe.size());
  for (const Entity* e : universe) {
    scored.emplace_back(scorer_.score_text(*eq.question, *e), e);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<const Entity*> out;
  out.reserve(scored.size());
  for (const auto& [_, e] : scored) out.push_back(e);
  return out;
}

namespace {

struct QuestionResult {
  int acc3 = 0, acc5 = 0, acc30 = 0;
  double rr = 0.0, dist = 0.0;
  std::string category, distractor, bucket, mentions, reasoned;
};

void accumulate(SliceStats& s, const QuestionResult& r) {
  ++s.count;
  s.acc3 += r.acc3;
  s.acc5 += r.acc5;
  s.acc30 += r.acc30;
  s.mrr += r.rr;
  s.dist_g += r.dist;
}

void normalize(SliceStats& s) {
  if (s.count == 0) return;
  auto n = static_cast<double>(s.count);
  s.acc3 /= n;
  s.acc5 /= n;
  s.acc30 /= n;
  s.mrr /= n;
  s.dist_g /= n;
}

json slice_json(const SliceStats& s) {
  return {{"count", s.count}, {"acc3", s.acc3},       {"acc5", s.acc5},
          {"acc30", s.acc30}, {"mrr", s.mrr},         {"dist_g", s.dist_g}};
}

json slice_map_json(const std::map<std::string, SliceStats>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = slice_json(v);
  return out;
}

}  // namespace

MetricsReport evaluate(const Ranker& ranker, const DatasetSplit& split, const Catalog& catalog,
                       const Vocab& vocab, size_t threads) {
  size_t n = split.questions.size();
  std::vector<QuestionResult> results(n);

  parallel_for(n, threads, [&](size_t i) {
    const QuestionInstance& q = split.questions[i];
    EncodedQuestion eq = encode_tokens(vocab, q, catalog);
    auto universe = catalog.universe(q.city_id, q.poi_type);
    std::erase_if(universe, [&](const Entity* e) {
      for (const auto& m : eq.mentions) {
        if (m.entity_id == e->id) return true;
      }
      return false;
    });
    const Entity* gold = catalog.find(q.gold_id);
    if (!gold) {
      throw std::runtime_error("evaluate: question " + q.qid + " gold " + q.gold_id +
                               " not in catalog");
    }
    auto ranked = ranker.rank(eq, universe);
    if (ranked.size() != universe.size()) {
      throw std::runtime_error("evaluate: ranking is not a permutation of the universe");
    }
    QuestionResult r;
    r.acc3 = acc_at_n(ranked, q.gold_id, 3);
    r.acc5 = acc_at_n(ranked, q.gold_id, 5);
    r.acc30 = acc_at_n(ranked, q.gold_id, 30);
    r.rr = mrr(ranked, q.gold_id);
    r.dist = dist_g(ranked, *gold);
    r.category = template_category_name(template_by_id(q.template_id).category);
    r.distractor = q.has_distractor() ? "with" : "without";
    r.bucket = universe_bucket(universe.size());
    r.mentions = std::to_string(q.mention_count());
    r.reasoned = std::to_string(q.reasoned_mention_count());
    results[i] = std::move(r);
  });

  MetricsReport report;
  for (const std::string& b : universe_buckets()) report.by_universe_bucket[b];  // keep all keys
  for (const QuestionResult& r : results) {
    accumulate(report.aggregate, r);
    accumulate(report.by_category[r.category], r);
    accumulate(report.by_distractor[r.distractor], r);
    accumulate(report.by_universe_bucket[r.bucket], r);
    accumulate(report.by_mention_count[r.mentions], r);
    accumulate(report.by_reasoned_mention_count[r.reasoned], r);
  }
  normalize(report.aggregate);
  auto normalize_map = [](std::map<std::string, SliceStats>& m) {
    for (auto& [_, s] : m) normalize(s);
  };
  normalize_map(report.by_category);
  normalize_map(report.by_distractor);
  normalize_map(report.by_universe_bucket);
  normalize_map(report.by_mention_count);
  normalize_map(report.by_reasoned_mention_count);
  return report;
}

json MetricsReport::to_json() const {
  return {{"aggregate", slice_json(aggregate)},
          {"by_category", slice_map_json(by_category)},
          {"by_distractor", slice_map_json(by_distractor)},
          {"by_universe_bucket", slice_map_json(by_universe_bucket)},
          {"by_mention_count", slice_map_json(by_mention_count)},
          {"by_reasoned_mention_count", slice_map_json(by_reasoned_mention_count)}};
}

namespace {

void table_row(std::ostringstream& out, const std::string& name, const SliceStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %8zu %8.4f %8.4f %8.4f %8.4f %10.3f\n", name.c_str(),
                s.count, s.acc3, s.acc5, s.acc30, s.mrr, s.dist_g);
  out << buf;
}

}  // namespace

std::string MetricsReport::text_table() const {
  std::ostringstream out;
  char header[160];
  std::snprintf(header, sizeof(header), "%-24s %8s %8s %8s %8s %8s %10s\n", "slice", "count",
                "acc@3", "acc@5", "acc@30", "mrr", "dist_g(km)");
  out << header;
  table_row(out, "aggregate", aggregate);
  auto section = [&](const std::string& title, const std::map<std::string, SliceStats>& m) {
    for (const auto& [k, v] : m) table_row(out, title + ":" + k, v);
  };
  section("category", by_category);
  section("distractor", by_distractor);
  section("universe", by_universe_bucket);
  section("mentions", by_mention_count);
  section("reasoned", by_reasoned_mention_count);
  return out.str();
}

std::vector<ProbeRecord> probe_weights(const SpatialModel& model, const EncodedQuestion& eq,
                                       const std::vector<const Entity*>& candidates) {
  std::vector<ProbeRecord> records;
  if (candidates.empty() || eq.mentions.empty()) return records;
  Tensor weights;
  score_universe(model, eq, candidates, SpnetMode::Full, &weights);
  const QuestionInstance& q = *eq.question;
  for (size_t c = 0; c < candidates.size(); ++c) {
    for (size_t j = 0; j < eq.mentions.size(); ++j) {
      ProbeRecord r;
      r.qid = q.qid;
      r.candidate_id = candidates[c]->id;
      std::string text;
      for (size_t i = eq.mentions[j].span_begin; i < eq.mentions[j].span_end; ++i) {
        if (!text.empty()) text += ' ';
        text += q.tokens[i];
      }
      r.mention_text = text;
      r.distance_km = manhattan_km(candidates[c]->location, eq.mentions[j].location);
      r.weight = weights.at2(j, c);
      records.push_back(std::move(r));
    }
  }
  return records;
}

void write_probe_csv(const std::vector<ProbeRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_probe_csv: cannot open " + path);
  out << "qid,candidate_id,mention,distance_km,weight\n";
  char buf[64];
  for (const ProbeRecord& r : records) {
    out << r.qid << ',' << r.candidate_id << ',' << r.mention_text << ',';
    std::snprintf(buf, sizeof(buf), "%.9g", r.distance_km);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.9g", r.weight);
    out << buf << '\n';
  }
}

double paired_bootstrap_pvalue(const std::vector<int>& hits_a, const std::vector<int>& hits_b,
                               size_t iterations, uint64_t seed) {
  if (hits_a.size() != hits_b.size() || hits_a.empty()) {
    throw std::invalid_argument("paired_bootstrap_pvalue: mismatched or empty inputs");
  }
  size_t n = hits_a.size();
  double observed = 0.0;
  for (size_t i = 0; i < n; ++i) observed += hits_a[i] - hits_b[i];
  observed = std::fabs(observed) / static_cast<double>(n);

  Rng rng(seed);
  size_t extreme = 0;
  for (size_t it = 0; it < iterations; ++it) {
    double diff = 0.0;
    for (size_t i = 0; i < n; ++i) {
      size_t idx = rng.uniform_int(n);
      // under the null the labels are exchangeable within a pair
      bool swap = rng.uniform01() < 0.5;
      int a = swap ? hits_b[idx] : hits_a[idx];
      int b = swap ? hits_a[idx] : hits_b[idx];
      diff += a - b;
    }
    if (std::fabs(diff) / static_cast<double>(n) >= observed) ++extreme;
  }
  return (static_cast<double>(extreme) + 1.0) / (static_cast<double>(iterations) + 1.0);
}

}  // namespace poirank
