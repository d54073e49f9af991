#pragma once

#include <vector>

#include "m2po/common.hpp"
#include "m2po/pairing.hpp"

namespace m2po {

enum class RankScoreSpace { raw, normalized };

struct LossConfig {
  double beta = 0.1;   // DPO temperature
  double tau_w = 0.3;  // pair-weight temperature
  double tau_s = 0.4;  // ranking temperature
  double lambda_pref = 1.0;
  double lambda_rank = 0.5;
  double lambda_bc = 1.0;
  // With raw 0-200 static scores and tau_s=0.4 the target distribution is
  // numerically one-hot, which collapses the listwise signal; default is
  // therefore the z-normalized space, with raw kept available.
  RankScoreSpace rank_score_space = RankScoreSpace::normalized;
  bool use_reference = false;

  void validate() const {
    require(beta > 0.0 && tau_w > 0.0 && tau_s > 0.0,
            "temperatures must be strictly positive");
    require(lambda_pref >= 0.0 && lambda_rank >= 0.0 && lambda_bc >= 0.0,
            "loss weights must be non-negative");
  }
};

struct LossBreakdown {
  double l_dmdpo = 0.0;
  double l_rank = 0.0;
  double l_bc = 0.0;
  double l_total = 0.0;
  std::vector<double> grad_logp;      // dL_total / d log pi(y_k | x)
  std::vector<double> pair_weights;   // the w_i
};

// w_i = softmax(gap_i / tau_w); strictly positive, sums to 1.
inline std::vector<double> pair_weights(const std::vector<double>& gaps,
                                        double tau_w) {
  require(!gaps.empty(), "pair_weights requires at least one pair");
  require(tau_w > 0.0, "tau_w must be strictly positive");
  std::vector<double> scaled(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) scaled[i] = gaps[i] / tau_w;
  return softmax(scaled);
}

struct PairLossResult {
  double loss = 0.0;
  std::vector<double> grad_logp;
  std::vector<double> weights;
};

// L_DM-DPO = -sum_i w_i log sigmoid(beta * delta_i), delta_i the winner/
// loser log-prob margin (minus the frozen reference margin when
// use_reference is set). Weights are a function of the fused-score gaps
// only; gradients treat them as constants.
inline PairLossResult dmdpo_loss(
    const std::vector<PreferencePair>& pairs,
    const std::vector<double>& logp, const LossConfig& cfg,
    const std::vector<double>& ref_logp = {}) {
  cfg.validate();
  require(!pairs.empty(), "dmdpo_loss requires a nonempty pair set");
  if (cfg.use_reference)
    require(ref_logp.size() == logp.size(),
            "use_reference set but reference log-probs missing");
  std::vector<double> gaps(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) gaps[i] = pairs[i].fused_gap;
  PairLossResult res;
  res.weights = pair_weights(gaps, cfg.tau_w);
  res.grad_logp.assign(logp.size(), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t w = pairs[i].winner_idx;
    const std::size_t l = pairs[i].loser_idx;
    require(w < logp.size() && l < logp.size(), "pair index out of range");
    double delta = logp[w] - logp[l];
    if (cfg.use_reference) delta -= ref_logp[w] - ref_logp[l];
    res.loss += -res.weights[i] * log_sigmoid(cfg.beta * delta);
    const double g = res.weights[i] * cfg.beta * sigmoid(-cfg.beta * delta);
    res.grad_logp[w] -= g;
    res.grad_logp[l] += g;
  }
  return res;
}

struct ScalarLossResult {
  double loss = 0.0;
  std::vector<double> grad_logp;
};

// ListNet cross-entropy between P_s = softmax(s_k / tau_s) and
// P_pi = softmax(logp_k / tau_s).
inline ScalarLossResult rank_loss(const std::vector<double>& scores,
                                  const std::vector<double>& logp,
                                  const LossConfig& cfg) {
  cfg.validate();
  const std::size_t k = scores.size();
  require(k >= 2 && logp.size() == k, "rank_loss requires K >= 2");
  std::vector<double> s_scaled(k), p_scaled(k);
  for (std::size_t i = 0; i < k; ++i) {
    s_scaled[i] = scores[i] / cfg.tau_s;
    p_scaled[i] = logp[i] / cfg.tau_s;
  }
  std::vector<double> p_s = softmax(s_scaled);
  std::vector<double> p_pi = softmax(p_scaled);
  ScalarLossResult res;
  res.grad_logp.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    res.loss += -p_s[i] * std::log(p_pi[i]);
    res.grad_logp[i] = (p_pi[i] - p_s[i]) / cfg.tau_s;
  }
  return res;
}

// L_BC = -log pi(y* | x), y* the single best candidate by fused score.
inline ScalarLossResult bc_loss(const std::vector<double>& logp,
                                std::size_t best_idx) {
  require(best_idx < logp.size(), "best_idx out of range");
  ScalarLossResult res;
  res.loss = -logp[best_idx];
  res.grad_logp.assign(logp.size(), 0.0);
  res.grad_logp[best_idx] = -1.0;
  return res;
}

// Pool-level inputs for the composite objective. Pairs carry fused gaps;
// fused scores determine the BC target; r_s / rs_hat feed the ranking loss
// per cfg.rank_score_space.
struct PoolLossInputs {
  std::vector<PreferencePair> pairs;
  std::vector<double> static_raw;         // r_s
  std::vector<double> static_normalized;  // rs_hat
  std::vector<double> fused;
  std::vector<double> logp;
  std::vector<double> ref_logp;  // only consulted when use_reference
};

inline std::size_t argmax_index(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline LossBreakdown total_loss(const PoolLossInputs& in,
                                const LossConfig& cfg) {
  cfg.validate();
  const std::size_t k = in.logp.size();
  require(k >= 2, "total_loss requires K >= 2");
  require(in.fused.size() == k, "fused length mismatch");

  PairLossResult pref = dmdpo_loss(in.pairs, in.logp, cfg, in.ref_logp);
  const std::vector<double>& rank_scores =
      cfg.rank_score_space == RankScoreSpace::raw ? in.static_raw
                                                  : in.static_normalized;
  ScalarLossResult rank = rank_loss(rank_scores, in.logp, cfg);
  ScalarLossResult bc = bc_loss(in.logp, argmax_index(in.fused));

  LossBreakdown out;
  out.l_dmdpo = pref.loss;
  out.l_rank = rank.loss;
  out.l_bc = bc.loss;
  out.l_total = cfg.lambda_pref * pref.loss + cfg.lambda_rank * rank.loss +
                cfg.lambda_bc * bc.loss;
  out.pair_weights = std::move(pref.weights);
  out.grad_logp.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out.grad_logp[i] = cfg.lambda_pref * pref.grad_logp[i] +
                       cfg.lambda_rank * rank.grad_logp[i] +
                       cfg.lambda_bc * bc.grad_logp[i];
  }
  return out;
}

}  // namespace m2po
