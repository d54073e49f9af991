#pragma once

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "m2po/common.hpp"
#include "m2po/datamodel.hpp"
#include "m2po/reward.hpp"

namespace m2po {

// Synthetic translation task: a bijective token map between two small
// vocabularies. The ground-truth reference for a source is the multiset
// of mapped tokens in ascending order, so target-side structure is an
// order-1 chain a tabular policy can actually learn.
struct SynthTask {
  int src_vocab = 12;
  int tgt_vocab = 12;
  std::vector<int> token_map;  // source token -> target token, bijective
  int len_min = 4;
  int len_max = 8;
  std::uint64_t seed = 0;

  void validate() const {
    require(src_vocab >= 2 && tgt_vocab >= 2, "vocab sizes must be >= 2");
    require(src_vocab == tgt_vocab,
            "bijective map requires equal vocab sizes");
    require(static_cast<int>(token_map.size()) == src_vocab,
            "token map size mismatch");
    std::vector<bool> hit(tgt_vocab, false);
    for (int t : token_map) {
      require(t >= 0 && t < tgt_vocab && !hit[t], "token map not bijective");
      hit[t] = true;
    }
    require(len_min >= 1 && len_min <= len_max, "empty length range");
    require(len_max <= src_vocab, "len_max exceeds source vocab");
  }
};

inline SynthTask make_task(std::uint64_t seed, int vocab = 12,
                           int len_min = 4, int len_max = 8) {
  SynthTask task;
  task.src_vocab = vocab;
  task.tgt_vocab = vocab;
  task.len_min = len_min;
  task.len_max = len_max;
  task.seed = seed;
  task.token_map.resize(vocab);
  std::iota(task.token_map.begin(), task.token_map.end(), 0);
  Rng rng(hash_combine(seed, 0x6d6170));  // independent stream for the map
  rng.shuffle(task.token_map);
  task.validate();
  return task;
}

inline TokenSeq reference_for(const SynthTask& task, const TokenSeq& source) {
  TokenSeq ref;
  ref.reserve(source.size());
  for (int s : source) {
    require(s >= 0 && s < task.src_vocab, "source token out of vocab");
    ref.push_back(task.token_map[s]);
  }
  std::sort(ref.begin(), ref.end());
  return ref;
}

// ---- oracle scorers ----------------------------------------------------

// 100 * recall * precision over token sets: recall = fraction of source
// tokens whose mapped image appears in the candidate, precision = fraction
// of candidate tokens that are images of some source token. The product
// form pins a full hallucination at exactly 0.
inline double coverage_oracle(const TokenSeq& source, const TokenSeq& candidate,
                              const SynthTask& task) {
  if (candidate.empty()) return 0.0;
  std::set<int> src_images;
  for (int s : source) {
    require(s >= 0 && s < task.src_vocab, "source token out of vocab");
    src_images.insert(task.token_map[s]);
  }
  std::set<int> cand_set(candidate.begin(), candidate.end());
  for (int c : candidate)
    require(c >= 0 && c < task.tgt_vocab, "candidate token out of vocab");
  std::size_t hit = 0;
  for (int img : src_images)
    if (cand_set.count(img)) ++hit;
  std::size_t aligned = 0;
  for (int c : cand_set)
    if (src_images.count(c)) ++aligned;
  const double recall = static_cast<double>(hit) / src_images.size();
  const double precision = static_cast<double>(aligned) / cand_set.size();
  return 100.0 * recall * precision;
}

// Deliberately flawed QE: blends target-side fluency (which is blind to
// faithfulness) with coverage, plus extra noise in the mid-coverage band
// where partial errors live. Deterministic per (inputs, seed).
struct OracleQEConfig {
  double fluency_weight = 0.4;
  double faithfulness_weight = 0.6;
  double midrange_noise_sd = 25.0;  // applied when true coverage in [30,70]
  double base_noise_sd = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(fluency_weight >= 0.0 && faithfulness_weight >= 0.0,
            "oracle QE weights must be >= 0");
    require(midrange_noise_sd >= 0.0 && base_noise_sd >= 0.0,
            "noise sd must be >= 0");
  }
};

namespace detail {

inline std::uint64_t seq_hash(std::uint64_t h, const TokenSeq& t) {
  h = hash_combine(h, t.size());
  for (int v : t) h = hash_combine(h, static_cast<std::uint64_t>(v) + 7);
  return h;
}

// Fixed pseudo-random bigram table; most pairs are "plausible" so random
// in-vocab corruptions still look fluent.
inline bool plausible_bigram(std::uint64_t seed, int a, int b) {
  std::uint64_t h = hash_combine(hash_combine(seed ^ 0xb16a, a), b);
  return h % 10 < 9;
}

}  // namespace detail

inline double flawed_qe_oracle(const TokenSeq& source, const TokenSeq& candidate,
                               const OracleQEConfig& cfg, const SynthTask& task) {
  cfg.validate();
  const double cov = coverage_oracle(source, candidate, task);

  // fluency: in-vocab fraction times plausible-bigram fraction
  double fluency = 0.0;
  if (!candidate.empty()) {
    std::size_t in_vocab = 0;
    for (int c : candidate)
      if (c >= 0 && c < task.tgt_vocab) ++in_vocab;
    double bigram_frac = 1.0;
    if (candidate.size() >= 2) {
      std::size_t ok = 0;
      for (std::size_t i = 0; i + 1 < candidate.size(); ++i)
        if (detail::plausible_bigram(cfg.seed, candidate[i], candidate[i + 1]))
          ++ok;
      bigram_frac = static_cast<double>(ok) / (candidate.size() - 1);
    }
    fluency = 100.0 * (static_cast<double>(in_vocab) / candidate.size()) *
              bigram_frac;
  }

  const double sd =
      (cov >= 30.0 && cov <= 70.0) ? cfg.midrange_noise_sd : cfg.base_noise_sd;
  double noise = 0.0;
  if (sd > 0.0) {
    Rng rng(detail::seq_hash(detail::seq_hash(hash_u64(cfg.seed ^ 0x9e), source),
                             candidate));
    noise = sd * rng.next_gaussian();
  }
  const double raw =
      cfg.fluency_weight * fluency + cfg.faithfulness_weight * cov + noise;
  return std::clamp(raw, 0.0, 100.0);
}

// ScorerInterface adapters so the reward module stays oblivious to which
// oracle backs it.
class CoverageScorer final : public ScorerInterface {
 public:
  explicit CoverageScorer(SynthTask task) : task_(std::move(task)) {}
  double score(const TokenSeq& source, const TokenSeq& candidate) const override {
    return coverage_oracle(source, candidate, task_);
  }

 private:
  SynthTask task_;
};

class FlawedQeScorer final : public ScorerInterface {
 public:
  FlawedQeScorer(SynthTask task, OracleQEConfig cfg)
      : task_(std::move(task)), cfg_(cfg) {}
  double score(const TokenSeq& source, const TokenSeq& candidate) const override {
    return flawed_qe_oracle(source, candidate, cfg_, task_);
  }

 private:
  SynthTask task_;
  OracleQEConfig cfg_;
};

// ---- corpus generation -------------------------------------------------

struct SeverityMix {
  double none = 0.25;
  double partial_hallucination = 0.2;
  double full_hallucination = 0.15;
  double partial_omission = 0.25;
  double full_omission = 0.15;

  void validate() const {
    const double vals[] = {none, partial_hallucination, full_hallucination,
                           partial_omission, full_omission};
    double sum = 0.0;
    for (double v : vals) {
      require(v >= 0.0, "severity_mix proportions must be >= 0");
      sum += v;
    }
    require(std::abs(sum - 1.0) < 1e-9, "severity_mix must sum to 1");
  }
};

namespace detail {

enum class MixCategory { none, partial_hal, full_hal, partial_om, full_om };

inline MixCategory draw_category(const SeverityMix& mix, Rng& rng) {
  const double u = rng.next_double();
  double acc = mix.none;
  if (u < acc) return MixCategory::none;
  acc += mix.partial_hallucination;
  if (u < acc) return MixCategory::partial_hal;
  acc += mix.full_hallucination;
  if (u < acc) return MixCategory::full_hal;
  acc += mix.partial_omission;
  if (u < acc) return MixCategory::partial_om;
  return MixCategory::full_om;
}

inline int random_unaligned(const std::vector<int>& unaligned, Rng& rng) {
  return unaligned[rng.next_below(unaligned.size())];
}

}  // namespace detail

// One pool per source: candidate 0 is the reference; the remaining K-1
// candidates are drawn from severity_mix. "none" draws are token-order
// permutations of the reference (coverage-equivalent by construction);
// corrupted draws replace or drop a fraction of the aligned content.
// All randomness flows from per-pool derived seeds so parallel and serial
// generation agree bit for bit.
inline std::vector<CandidatePool> gen_corpus(const SynthTask& task,
                                             int n_sources, int k_per_source,
                                             const SeverityMix& mix,
                                             const std::string& direction =
                                                 "syn→syn",
                                             const std::string& id_prefix =
                                                 "src") {
  task.validate();
  mix.validate();
  require(n_sources >= 1, "n_sources must be >= 1");
  require(k_per_source >= 2, "k_per_source must be >= 2");
  require(task.len_max < task.tgt_vocab,
          "need len_max < target vocab so unaligned tokens exist");

  std::vector<CandidatePool> pools;
  pools.reserve(n_sources);
  for (int s = 0; s < n_sources; ++s) {
    Rng rng(hash_combine(task.seed, static_cast<std::uint64_t>(s) + 1));
    CandidatePool pool;
    pool.source.id = id_prefix + "-" + std::to_string(s);
    pool.source.direction = direction;

    const int len = task.len_min +
                    static_cast<int>(rng.next_below(task.len_max - task.len_min + 1));
    std::vector<int> all(task.src_vocab);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    pool.source.tokens.assign(all.begin(), all.begin() + len);

    const TokenSeq ref = reference_for(task, pool.source.tokens);
    std::set<int> image_set(ref.begin(), ref.end());
    std::vector<int> unaligned;
    for (int t = 0; t < task.tgt_vocab; ++t)
      if (!image_set.count(t)) unaligned.push_back(t);

    Candidate reference;
    reference.tokens = ref;
    reference.provenance = Provenance::oracle_reference;
    pool.candidates.push_back(reference);

    for (int j = 1; j < k_per_source; ++j) {
      Candidate c;
      const auto cat = detail::draw_category(mix, rng);
      switch (cat) {
        case detail::MixCategory::none: {
          c.tokens = ref;
          rng.shuffle(c.tokens);
          c.provenance = Provenance::oracle_reference;
          break;
        }
        case detail::MixCategory::partial_hal: {
          c.tokens = ref;
          const double f = 0.2 + 0.3 * rng.next_double();
          std::size_t n = std::clamp<std::size_t>(
              static_cast<std::size_t>(std::lround(f * ref.size())), 1,
              ref.size() - 1);
          std::vector<std::size_t> pos(ref.size());
          std::iota(pos.begin(), pos.end(), 0);
          rng.shuffle(pos);
          for (std::size_t i = 0; i < n; ++i)
            c.tokens[pos[i]] = detail::random_unaligned(unaligned, rng);
          c.provenance = Provenance::corrupted;
          c.corruption = CorruptionLabel{Severity::partial, Severity::none};
          break;
        }
        case detail::MixCategory::full_hal: {
          c.tokens.resize(ref.size());
          for (std::size_t i = 0; i < ref.size(); ++i)
            c.tokens[i] = detail::random_unaligned(unaligned, rng);
          c.provenance = Provenance::corrupted;
          c.corruption = CorruptionLabel{Severity::full, Severity::none};
          break;
        }
        case detail::MixCategory::partial_om: {
          const double f = 0.2 + 0.3 * rng.next_double();
          std::size_t n = std::clamp<std::size_t>(
              static_cast<std::size_t>(std::lround(f * ref.size())), 1,
              ref.size() - 1);
          std::vector<std::size_t> pos(ref.size());
          std::iota(pos.begin(), pos.end(), 0);
          rng.shuffle(pos);
          std::set<std::size_t> drop(pos.begin(), pos.begin() + n);
          for (std::size_t i = 0; i < ref.size(); ++i)
            if (!drop.count(i)) c.tokens.push_back(ref[i]);
          c.provenance = Provenance::corrupted;
          c.corruption = CorruptionLabel{Severity::none, Severity::partial};
          break;
        }
        case detail::MixCategory::full_om: {
          // all aligned content dropped; one unaligned filler keeps the
          // candidate nonempty, coverage is 0 either way
          c.tokens.push_back(detail::random_unaligned(unaligned, rng));
          c.provenance = Provenance::corrupted;
          c.corruption = CorruptionLabel{Severity::none, Severity::full};
          break;
        }
      }
      pool.candidates.push_back(std::move(c));
    }
    pool.scorecards.assign(pool.candidates.size(), ScoreCard{});
    validate_pool(pool);
    pools.push_back(std::move(pool));
  }
  return pools;
}

// ---- analytics ---------------------------------------------------------

inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  require(x.size() == y.size(), "pearson: length mismatch");
  require(x.size() >= 2, "pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, "pearson: undefined for zero variance");
  return sxy / std::sqrt(sxx * syy);
}

struct SeverityCell {
  bool present = false;
  long count = 0;
  double mean = 0.0;
};

struct MetricAxisStats {
  SeverityCell none, partial, full;
  double corr_with_partial = 0.0;
  double corr_without_partial = 0.0;
  double gain = 0.0;  // corr_without - corr_with
};

struct MotivationReport {
  MetricAxisStats qe_hallucination, qe_omission;
  MetricAxisStats coverage_hallucination, coverage_omission;
};

namespace detail {

inline int severity_rank(Severity s) {
  switch (s) {
    case Severity::none: return 2;
    case Severity::partial: return 1;
    case Severity::full: return 0;
  }
  return 0;
}

inline void cell_add(SeverityCell& c, double v) {
  c.present = true;
  c.count += 1;
  c.mean += v;
}

inline void cell_finish(SeverityCell& c) {
  if (c.present) c.mean /= static_cast<double>(c.count);
}

// One metric, one error axis. `axis_severity` extracts this axis's
// severity; candidates corrupted on the other axis are excluded.
inline MetricAxisStats axis_stats(const std::vector<Severity>& severities,
                                  const std::vector<double>& scores) {
  MetricAxisStats st;
  std::vector<double> ranks, vals, ranks_np, vals_np;
  for (std::size_t i = 0; i < severities.size(); ++i) {
    const Severity s = severities[i];
    const double v = scores[i];
    switch (s) {
      case Severity::none: cell_add(st.none, v); break;
      case Severity::partial: cell_add(st.partial, v); break;
      case Severity::full: cell_add(st.full, v); break;
    }
    ranks.push_back(severity_rank(s));
    vals.push_back(v);
    if (s != Severity::partial) {
      ranks_np.push_back(severity_rank(s));
      vals_np.push_back(v);
    }
  }
  cell_finish(st.none);
  cell_finish(st.partial);
  cell_finish(st.full);
  st.corr_with_partial = pearson(ranks, vals);
  st.corr_without_partial = pearson(ranks_np, vals_np);
  st.gain = st.corr_without_partial - st.corr_with_partial;
  return st;
}

}  // namespace detail

// Per-severity mean scores and severity-rank correlations, with and
// without the partial examples. "Human labels" are the known severity
// ranks none=2, partial=1, full=0.
inline MotivationReport motivation_report(
    const std::vector<CandidatePool>& corpus, const ScorerInterface& qe,
    const ScorerInterface& coverage) {
  require(!corpus.empty(), "motivation_report: empty corpus");
  std::vector<Severity> hal_sev, om_sev;
  std::vector<double> hal_qe, hal_cov, om_qe, om_cov;
  for (const CandidatePool& pool : corpus) {
    for (const Candidate& c : pool.candidates) {
      const CorruptionLabel label = c.corruption.value_or(CorruptionLabel{});
      const double q = qe.score(pool.source.tokens, c.tokens);
      const double v = coverage.score(pool.source.tokens, c.tokens);
      if (label.omission == Severity::none) {
        hal_sev.push_back(label.hallucination);
        hal_qe.push_back(q);
        hal_cov.push_back(v);
      }
      if (label.hallucination == Severity::none) {
        om_sev.push_back(label.omission);
        om_qe.push_back(q);
        om_cov.push_back(v);
      }
    }
  }
  MotivationReport rep;
  rep.qe_hallucination = detail::axis_stats(hal_sev, hal_qe);
  rep.qe_omission = detail::axis_stats(om_sev, om_qe);
  rep.coverage_hallucination = detail::axis_stats(hal_sev, hal_cov);
  rep.coverage_omission = detail::axis_stats(om_sev, om_cov);
  return rep;
}

// ---- report emitters ---------------------------------------------------

namespace detail {

inline void append_cell(std::string& out, const char* name,
                        const SeverityCell& c) {
  out += '"';
  out += name;
  out += "\":";
  if (!c.present) {
    out += "null";
  } else {
    out += "{\"count\":" + std::to_string(c.count) +
           ",\"mean\":" + format_double(c.mean) + "}";
  }
}

inline void append_axis(std::string& out, const char* name,
                        const MetricAxisStats& st) {
  out += '"';
  out += name;
  out += "\":{";
  append_cell(out, "none", st.none);
  out += ',';
  append_cell(out, "partial", st.partial);
  out += ',';
  append_cell(out, "full", st.full);
  out += ",\"corr_with_partial\":" + format_double(st.corr_with_partial);
  out += ",\"corr_without_partial\":" + format_double(st.corr_without_partial);
  out += ",\"gain\":" + format_double(st.gain);
  out += '}';
}

}  // namespace detail

inline std::string report_to_json(const MotivationReport& rep) {
  std::string out = "{";
  detail::append_axis(out, "qe_hallucination", rep.qe_hallucination);
  out += ',';
  detail::append_axis(out, "qe_omission", rep.qe_omission);
  out += ',';
  detail::append_axis(out, "coverage_hallucination", rep.coverage_hallucination);
  out += ',';
  detail::append_axis(out, "coverage_omission", rep.coverage_omission);
  out += "}\n";
  return out;
}

inline std::string report_to_text(const MotivationReport& rep) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  auto cell = [&](const SeverityCell& c) {
    std::ostringstream s;
    if (!c.present)
      s << "   --  ";
    else
      s << std::setw(7) << std::fixed << std::setprecision(2) << c.mean;
    return s.str();
  };
  auto row = [&](const std::string& name, const MetricAxisStats& h,
                 const MetricAxisStats& o) {
    os << std::left << std::setw(10) << name << std::right << cell(h.none)
       << cell(h.partial) << cell(h.full) << "  |" << cell(o.none)
       << cell(o.partial) << cell(o.full) << '\n';
  };
  os << "                Hallucination        |       Omission\n";
  os << "Metric        none partial    full  |   none partial    full\n";
  row("qe", rep.qe_hallucination, rep.qe_omission);
  row("coverage", rep.coverage_hallucination, rep.coverage_omission);
  os << '\n';
  auto corr = [&](const std::string& name, const MetricAxisStats& st) {
    os << std::left << std::setw(24) << name << std::right << " with="
       << std::setw(8) << st.corr_with_partial << "  without=" << std::setw(8)
       << st.corr_without_partial << "  gain=" << std::setw(8) << st.gain
       << '\n';
  };
  corr("qe/hallucination", rep.qe_hallucination);
  corr("qe/omission", rep.qe_omission);
  corr("coverage/hallucination", rep.coverage_hallucination);
  corr("coverage/omission", rep.coverage_omission);
  return os.str();
}

}  // namespace m2po
