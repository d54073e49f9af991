#pragma once

#include <string>

#include "m2po/datamodel.hpp"

namespace m2po {

// Abstraction over external quality / alignment scorers. Implementations
// must be deterministic for fixed inputs and fixed scorer seed and return
// values in [0,100]. thread_safe() declares whether concurrent score()
// calls are allowed; callers fall back to sequential evaluation otherwise.
class ScorerInterface {
 public:
  virtual ~ScorerInterface() = default;
  virtual double score(const TokenSeq& source,
                       const TokenSeq& candidate) const = 0;
  virtual bool thread_safe() const { return true; }
};

struct StaticRewardConfig {
  double lambda_f = 1.0;  // factuality bonus weight
};

// r_s = r_qe + lambda_f * s_align. Out-of-range inputs are hard errors,
// not clamps: silent clamping would mask config mistakes.
inline double static_score(double r_qe, double s_align,
                           const StaticRewardConfig& cfg) {
  require(cfg.lambda_f >= 0.0, "lambda_f must be >= 0");
  require(r_qe >= 0.0 && r_qe <= 100.0, "r_qe out of [0,100]");
  require(s_align >= 0.0 && s_align <= 100.0, "s_align out of [0,100]");
  return r_qe + cfg.lambda_f * s_align;
}

// Fill r_qe, s_align, r_s on every scorecard; other fields untouched.
inline CandidatePool score_pool(const CandidatePool& pool,
                                const ScorerInterface& qe,
                                const ScorerInterface& align,
                                const StaticRewardConfig& cfg) {
  require(pool.k() >= 2, "pool " + pool.source.id + ": K < 2");
  require(pool.scorecards.size() == pool.k(),
          "pool " + pool.source.id + ": scorecards length mismatch");
  CandidatePool out = pool;
  for (std::size_t i = 0; i < out.k(); ++i) {
    double q, a;
    try {
      q = qe.score(out.source.tokens, out.candidates[i].tokens);
      a = align.score(out.source.tokens, out.candidates[i].tokens);
    } catch (const std::exception& e) {
      throw std::runtime_error("scorer failed on pool " + out.source.id +
                               " candidate " + std::to_string(i) + ": " +
                               e.what());
    }
    out.scorecards[i].r_qe = q;
    out.scorecards[i].s_align = a;
    out.scorecards[i].r_s = static_score(q, a, cfg);
  }
  return out;
}

}  // namespace m2po
