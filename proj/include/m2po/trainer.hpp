#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "m2po/datamodel.hpp"
#include "m2po/fusion.hpp"
#include "m2po/losses.hpp"
#include "m2po/pairing.hpp"
#include "m2po/policy.hpp"
#include "m2po/reward.hpp"
#include "m2po/synthbench.hpp"

namespace m2po {

enum class TrainMode { m2po, single_pair_dpo, bc_only };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::m2po: return "m2po";
    case TrainMode::single_pair_dpo: return "single_pair_dpo";
    case TrainMode::bc_only: return "bc_only";
  }
  return "?";
}

inline TrainMode train_mode_from(const std::string& s) {
  if (s == "m2po") return TrainMode::m2po;
  if (s == "single_pair_dpo") return TrainMode::single_pair_dpo;
  if (s == "bc_only") return TrainMode::bc_only;
  throw std::invalid_argument("unknown train mode: " + s);
}

struct TrainConfig {
  int epochs = 2;
  int batch_size = 8;
  double learning_rate = 1e-2;  // desk scale; the 7B-scale default is 5e-5
  double weight_decay = 0.0;
  int k = 16;
  int buckets = 16;
  LossConfig loss;
  CurriculumSchedule schedule;  // total_steps filled in by train()
  PairingStrategy strategy = PairingStrategy::ManyVsMany;
  TrainMode mode = TrainMode::m2po;
  std::uint64_t seed = 0;
  // raw sequence log-probability by default; per-token normalization of
  // the dynamic *score* is available because raw log-probs favor short
  // candidates (the loss inputs stay un-normalized either way)
  bool length_normalize_dynamic = false;
  // static candidate pool by default; when set, part of each pool is
  // re-sampled from the current policy at every epoch after the first
  bool on_policy_refresh = false;

  void validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(k >= 2, "K must be >= 2");
    require(learning_rate > 0.0, "learning_rate must be > 0");
    loss.validate();
  }
};

struct StepRecord {
  long step = 0;
  double alpha = 0.0;
  double l_dmdpo = 0.0;
  double l_rank = 0.0;
  double l_bc = 0.0;
  double l_total = 0.0;
  double grad_norm = 0.0;
};

struct EvalResult {
  double mean_coverage = 0.0;
  double mean_qe = 0.0;
  double mean_static = 0.0;
  double exact_match = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  EvalResult heldout;
};

struct PoolPairRecord {
  std::string source_id;
  std::vector<PreferencePair> pairs;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<PoolPairRecord> final_pairs;
  std::string checkpoint_path;
};

struct TrainResult {
  PolicyParams params;
  RunMetrics metrics;
};

// r_d = log-probability of each candidate under the current policy
// (optionally per-token normalized, counting the EOS emission).
inline void refresh_dynamic_scores(std::vector<CandidatePool>& pools,
                                   const PolicyParams& params,
                                   bool length_normalize = false) {
  for (CandidatePool& pool : pools) {
    for (std::size_t i = 0; i < pool.k(); ++i) {
      double lp =
          log_prob(params, pool.source.tokens, pool.candidates[i].tokens);
      if (length_normalize)
        lp /= static_cast<double>(pool.candidates[i].tokens.size() + 1);
      pool.scorecards[i].r_d = lp;
    }
  }
}

// Greedy-decode every held-out source and score the decodes with the
// task oracles. Deterministic given params.
inline EvalResult evaluate(const PolicyParams& params,
                           const std::vector<CandidatePool>& pools,
                           const SynthTask& task, const OracleQEConfig& qe_cfg,
                           const StaticRewardConfig& reward_cfg) {
  require(!pools.empty(), "evaluate: empty corpus");
  EvalResult res;
  for (const CandidatePool& pool : pools) {
    const TokenSeq decoded = greedy_decode(params, pool.source.tokens);
    const double cov = coverage_oracle(pool.source.tokens, decoded, task);
    const double qe = flawed_qe_oracle(pool.source.tokens, decoded, qe_cfg, task);
    res.mean_coverage += cov;
    res.mean_qe += qe;
    res.mean_static += static_score(qe, cov, reward_cfg);
    if (decoded == reference_for(task, pool.source.tokens))
      res.exact_match += 1.0;
  }
  const double n = static_cast<double>(pools.size());
  res.mean_coverage /= n;
  res.mean_qe /= n;
  res.mean_static /= n;
  res.exact_match /= n;
  return res;
}

namespace detail {

struct PoolStep {
  LossBreakdown breakdown;
  std::vector<PreferencePair> pairs;
};

// One pool's fused scores, pairs, and composite loss under the given mode.
// Writes rs_hat / rd_hat / r_fused back onto the scorecards. Requires r_s
// and r_d to be filled.
inline PoolStep pool_step(CandidatePool& pool, double alpha,
                          const LossConfig& eff, PairingStrategy strategy,
                          TrainMode mode, const PolicyParams& params,
                          const PolicyParams* ref_params) {
  const std::size_t k = pool.k();
  PoolLossInputs in;
  in.static_raw.resize(k);
  in.logp.resize(k);
  std::vector<double> dynamic(k);
  for (std::size_t i = 0; i < k; ++i) {
    require(pool.scorecards[i].r_s.has_value(),
            "pool " + pool.source.id + " is not statically scored");
    require(pool.scorecards[i].r_d.has_value(),
            "pool " + pool.source.id + " has no dynamic scores");
    in.static_raw[i] = *pool.scorecards[i].r_s;
    dynamic[i] = *pool.scorecards[i].r_d;
    // r_d may be length-normalized; the loss always consumes the raw
    // sequence log-probability
    in.logp[i] = log_prob(params, pool.source.tokens, pool.candidates[i].tokens);
  }
  in.static_normalized = zscore(in.static_raw);
  std::vector<double> rd_hat = zscore(dynamic);
  in.fused.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    in.fused[i] = (1.0 - alpha) * in.static_normalized[i] + alpha * rd_hat[i];
    pool.scorecards[i].rs_hat = in.static_normalized[i];
    pool.scorecards[i].rd_hat = rd_hat[i];
    pool.scorecards[i].r_fused = in.fused[i];
  }
  const std::vector<std::size_t> ranking = rank_candidates(in.fused);
  if (mode == TrainMode::single_pair_dpo) {
    PreferencePair top_bottom;
    top_bottom.winner_idx = ranking.front();
    top_bottom.loser_idx = ranking.back();
    top_bottom.fused_gap =
        in.fused[top_bottom.winner_idx] - in.fused[top_bottom.loser_idx];
    in.pairs = {top_bottom};
  } else {
    in.pairs = build_pairs(ranking, strategy, in.fused);
  }
  if (eff.use_reference) {
    require(ref_params != nullptr, "use_reference set but no frozen reference");
    in.ref_logp.resize(k);
    for (std::size_t i = 0; i < k; ++i)
      in.ref_logp[i] =
          log_prob(*ref_params, pool.source.tokens, pool.candidates[i].tokens);
  }
  PoolStep out;
  out.breakdown = total_loss(in, eff);
  out.pairs = in.pairs;
  for (std::size_t i = 0; i < out.pairs.size(); ++i)
    out.pairs[i].weight = out.breakdown.pair_weights[i];
  return out;
}

inline LossConfig effective_loss_config(const LossConfig& base, TrainMode mode) {
  LossConfig eff = base;
  if (mode == TrainMode::bc_only) {
    eff.lambda_pref = 0.0;
    eff.lambda_rank = 0.0;
  } else if (mode == TrainMode::single_pair_dpo) {
    eff.lambda_rank = 0.0;
    eff.lambda_bc = 0.0;
  }
  return eff;
}

}  // namespace detail

// The per-batch pipeline: refresh r_d -> fuse with alpha_at(step) ->
// rank -> build pairs -> composite loss -> optimizer update. Batch loss
// and gradient are means over the pools in the batch so learning-rate
// behavior is batch-size invariant. Deterministic for a fixed seed.
inline TrainResult train(std::vector<CandidatePool> corpus,
                         const std::vector<CandidatePool>& heldout,
                         const SynthTask& task, const OracleQEConfig& qe_cfg,
                         const StaticRewardConfig& reward_cfg,
                         const TrainConfig& cfg) {
  cfg.validate();
  require(!corpus.empty(), "train: empty corpus");
  for (const CandidatePool& p : corpus)
    for (const ScoreCard& s : p.scorecards)
      require(s.r_s.has_value(),
              "train: corpus is not statically scored (pool " + p.source.id + ")");

  const long n = static_cast<long>(corpus.size());
  const long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  // denominator total_steps-1 so the recorded alpha sequence actually
  // reaches alpha_end on the final update
  CurriculumSchedule sched = cfg.schedule;
  sched.total_steps = std::max(1L, total_steps - 1);
  sched.validate();

  PolicyDims dims{task.src_vocab, task.tgt_vocab, cfg.buckets};
  PolicyParams params = PolicyParams::zeros(dims);
  PolicyParams ref_params = params;  // frozen copy of the starting point
  OptimizerState opt =
      OptimizerState::init(params.logits.size(), cfg.learning_rate);
  const LossConfig eff = detail::effective_loss_config(cfg.loss, cfg.mode);

  Rng order_rng(hash_combine(cfg.seed, 0x747261696e));
  RunMetrics metrics;
  std::vector<double> grad(params.logits.size(), 0.0);
  long step = 0;

  const FlawedQeScorer qe_scorer(task, qe_cfg);
  const CoverageScorer align_scorer(task);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.on_policy_refresh && epoch > 0) {
      // swap the last two candidates of every pool for fresh policy
      // samples and re-score them statically
      for (std::size_t pi = 0; pi < corpus.size(); ++pi) {
        CandidatePool& pool = corpus[pi];
        for (std::size_t slot = pool.k() - 2; slot < pool.k(); ++slot) {
          const std::uint64_t s =
              hash_combine(hash_combine(cfg.seed, epoch), pi * 31 + slot);
          SampleResult sr = sample(params, pool.source.tokens, s, 1.0);
          if (sr.tokens.empty()) sr.tokens.push_back(0);  // keep nonempty
          Candidate c;
          c.tokens = std::move(sr.tokens);
          c.provenance = Provenance::policy_sample;
          pool.candidates[slot] = std::move(c);
          const double q =
              qe_scorer.score(pool.source.tokens, pool.candidates[slot].tokens);
          const double a = align_scorer.score(pool.source.tokens,
                                              pool.candidates[slot].tokens);
          pool.scorecards[slot] = ScoreCard{};
          pool.scorecards[slot].r_qe = q;
          pool.scorecards[slot].s_align = a;
          pool.scorecards[slot].r_s = static_score(q, a, reward_cfg);
        }
      }
    }

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);

    for (long b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t end =
          std::min(begin + cfg.batch_size, corpus.size());
      const double batch_n = static_cast<double>(end - begin);

      const double alpha = cfg.mode == TrainMode::single_pair_dpo
                               ? 0.0
                               : alpha_at(step, sched);

      std::fill(grad.begin(), grad.end(), 0.0);
      StepRecord rec;
      rec.step = step;
      rec.alpha = alpha;
      for (std::size_t idx = begin; idx < end; ++idx) {
        CandidatePool& pool = corpus[order[idx]];
        for (std::size_t i = 0; i < pool.k(); ++i) {
          double lp = log_prob(params, pool.source.tokens,
                               pool.candidates[i].tokens);
          if (cfg.length_normalize_dynamic)
            lp /= static_cast<double>(pool.candidates[i].tokens.size() + 1);
          pool.scorecards[i].r_d = lp;
        }
        detail::PoolStep ps = detail::pool_step(
            pool, alpha, eff, cfg.strategy, cfg.mode, params,
            eff.use_reference ? &ref_params : nullptr);
        rec.l_dmdpo += ps.breakdown.l_dmdpo / batch_n;
        rec.l_rank += ps.breakdown.l_rank / batch_n;
        rec.l_bc += ps.breakdown.l_bc / batch_n;
        rec.l_total += ps.breakdown.l_total / batch_n;
        for (std::size_t i = 0; i < pool.k(); ++i) {
          const double c = ps.breakdown.grad_logp[i] / batch_n;
          if (c != 0.0)
            accumulate_grad_log_prob(params, pool.source.tokens,
                                     pool.candidates[i].tokens, c, grad);
        }
      }
      if (!std::isfinite(rec.l_total))
        throw std::runtime_error(
            "non-finite loss at step " + std::to_string(step) + " (epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(b) + ")");
      double gn = 0.0;
      for (double g : grad) gn += g * g;
      rec.grad_norm = std::sqrt(gn);
      metrics.steps.push_back(rec);
      apply_update(params, opt, grad, cfg.weight_decay);
      ++step;
    }

    EpochRecord er;
    er.epoch = epoch;
    if (!heldout.empty())
      er.heldout = evaluate(params, heldout, task, qe_cfg, reward_cfg);
    metrics.epochs.push_back(er);
  }

  // final pair snapshot at the end-of-training fused scores
  {
    const double alpha =
        cfg.mode == TrainMode::single_pair_dpo ? 0.0 : sched.alpha_end;
    for (CandidatePool& pool : corpus) {
      for (std::size_t i = 0; i < pool.k(); ++i) {
        double lp =
            log_prob(params, pool.source.tokens, pool.candidates[i].tokens);
        if (cfg.length_normalize_dynamic)
          lp /= static_cast<double>(pool.candidates[i].tokens.size() + 1);
        pool.scorecards[i].r_d = lp;
      }
      detail::PoolStep ps = detail::pool_step(
          pool, alpha, eff, cfg.strategy, cfg.mode, params,
          eff.use_reference ? &ref_params : nullptr);
      metrics.final_pairs.push_back({pool.source.id, std::move(ps.pairs)});
    }
  }

  return TrainResult{std::move(params), std::move(metrics)};
}

// ---- metrics serialization ---------------------------------------------

inline std::string step_record_to_json(const StepRecord& r) {
  std::string out = "{\"step\":" + std::to_string(r.step);
  out += ",\"alpha\":" + format_double(r.alpha);
  out += ",\"l_dmdpo\":" + format_double(r.l_dmdpo);
  out += ",\"l_rank\":" + format_double(r.l_rank);
  out += ",\"l_bc\":" + format_double(r.l_bc);
  out += ",\"l_total\":" + format_double(r.l_total);
  out += ",\"grad_norm\":" + format_double(r.grad_norm);
  out += "}";
  return out;
}

inline std::string eval_to_json(const EvalResult& e) {
  std::string out = "{\"mean_coverage\":" + format_double(e.mean_coverage);
  out += ",\"mean_qe\":" + format_double(e.mean_qe);
  out += ",\"mean_static\":" + format_double(e.mean_static);
  out += ",\"exact_match\":" + format_double(e.exact_match);
  out += "}";
  return out;
}

inline void write_metrics(const RunMetrics& m, const std::string& steps_path,
                          const std::string& summary_path) {
  {
    std::ofstream f(steps_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + steps_path);
    for (const StepRecord& r : m.steps) f << step_record_to_json(r) << '\n';
  }
  std::ofstream f(summary_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + summary_path);
  f << "{\"steps\":" << m.steps.size() << ",\"epochs\":[";
  for (std::size_t i = 0; i < m.epochs.size(); ++i) {
    if (i) f << ',';
    f << "{\"epoch\":" << m.epochs[i].epoch
      << ",\"heldout\":" << eval_to_json(m.epochs[i].heldout) << "}";
  }
  f << "],\"checkpoint\":" << nlohmann::json(m.checkpoint_path).dump() << "}\n";
}

inline void write_pairs(const RunMetrics& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const PoolPairRecord& rec : m.final_pairs) {
    f << "{\"source_id\":" << nlohmann::json(rec.source_id).dump()
      << ",\"pairs\":[";
    for (std::size_t i = 0; i < rec.pairs.size(); ++i) {
      if (i) f << ',';
      const PreferencePair& p = rec.pairs[i];
      f << "{\"winner\":" << p.winner_idx << ",\"loser\":" << p.loser_idx
        << ",\"gap\":" << format_double(p.fused_gap)
        << ",\"weight\":" << format_double(p.weight) << "}";
    }
    f << "]}\n";
  }
}

}  // namespace m2po
