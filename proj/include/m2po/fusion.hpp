#pragma once

#include <vector>

#include "m2po/common.hpp"

namespace m2po {

// Linear ramp for the dynamic-score weight alpha_t.
struct CurriculumSchedule {
  double alpha_start = 0.1;
  double alpha_end = 0.9;
  long total_steps = 1;

  void validate() const {
    require(alpha_start >= 0.0 && alpha_end <= 1.0 &&
                alpha_start <= alpha_end,
            "require 0 <= alpha_start <= alpha_end <= 1");
    require(total_steps >= 1, "total_steps must be positive");
  }
};

struct FusionInputs {
  std::vector<double> static_scores;   // r_s
  std::vector<double> dynamic_scores;  // r_d (log-probabilities)
};

// Per-pool z-score with population (divide-by-K) standard deviation: the
// pool is the entire population of interest. Zero-variance pools normalize
// to all-zeros rather than erroring; degenerate pools contribute no
// preference gradient but must not crash training.
inline std::vector<double> zscore(const std::vector<double>& values) {
  const std::size_t k = values.size();
  require(k >= 2, "zscore requires K >= 2");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  double sigma = std::sqrt(var / static_cast<double>(k));
  std::vector<double> out(k, 0.0);
  if (sigma <= 1e-12) return out;
  for (std::size_t i = 0; i < k; ++i) out[i] = (values[i] - mean) / sigma;
  return out;
}

// alpha_t = alpha_start + (alpha_end - alpha_start) * t / total_steps,
// clamped to alpha_end beyond total_steps.
inline double alpha_at(long t, const CurriculumSchedule& sched) {
  sched.validate();
  require(t >= 0, "negative step index");
  if (t >= sched.total_steps) return sched.alpha_end;
  return sched.alpha_start +
         (sched.alpha_end - sched.alpha_start) * static_cast<double>(t) /
             static_cast<double>(sched.total_steps);
}

// r_fused = (1 - alpha) * zscore(r_s) + alpha * zscore(r_d), elementwise.
inline std::vector<double> fuse(const FusionInputs& inputs, double alpha) {
  require(inputs.static_scores.size() == inputs.dynamic_scores.size(),
          "static/dynamic score length mismatch");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha outside [0,1]");
  std::vector<double> zs = zscore(inputs.static_scores);
  std::vector<double> zd = zscore(inputs.dynamic_scores);
  std::vector<double> out(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i)
    out[i] = (1.0 - alpha) * zs[i] + alpha * zd[i];
  return out;
}

}  // namespace m2po
