#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "m2po/common.hpp"

namespace m2po {

struct PreferencePair {
  std::size_t winner_idx = 0;
  std::size_t loser_idx = 0;
  double fused_gap = 0.0;  // r_fused[winner] - r_fused[loser], >= 0
  double weight = 1.0;     // w_i, filled by the losses module
};

enum class PairingStrategy { ManyVsMany, ManyVsOne, OneVsMany };

inline const char* to_string(PairingStrategy s) {
  switch (s) {
    case PairingStrategy::ManyVsMany: return "many_vs_many";
    case PairingStrategy::ManyVsOne: return "many_vs_one";
    case PairingStrategy::OneVsMany: return "one_vs_many";
  }
  return "?";
}

inline PairingStrategy pairing_strategy_from(const std::string& s) {
  if (s == "many_vs_many") return PairingStrategy::ManyVsMany;
  if (s == "many_vs_one") return PairingStrategy::ManyVsOne;
  if (s == "one_vs_many") return PairingStrategy::OneVsMany;
  throw std::invalid_argument("unknown pairing strategy: " + s);
}

// Stable descending sort by fused score; ties broken by ascending index
// so rankings are reproducible across runs and platforms.
inline std::vector<std::size_t> rank_candidates(
    const std::vector<double>& fused) {
  require(fused.size() >= 2, "rank_candidates requires K >= 2");
  std::vector<std::size_t> order(fused.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return fused[a] > fused[b];
                   });
  return order;
}

// All strategies emit exactly floor(K/2) pairs so loss magnitudes stay
// comparable across strategies. For odd K the middle candidate is left
// unpaired (it still participates in the listwise ranking loss).
inline std::vector<PreferencePair> build_pairs(
    const std::vector<std::size_t>& ranking, PairingStrategy strategy,
    const std::vector<double>& fused) {
  const std::size_t k = ranking.size();
  require(k >= 2, "build_pairs requires K >= 2");
  require(fused.size() == k, "fused scores length mismatch");
  {
    std::vector<bool> seen(k, false);
    for (std::size_t r : ranking) {
      require(r < k && !seen[r], "ranking is not a permutation");
      seen[r] = true;
    }
  }
  const std::size_t m = k / 2;
  std::vector<PreferencePair> pairs;
  pairs.reserve(m);
  auto make = [&](std::size_t w_rank, std::size_t l_rank) {
    PreferencePair p;
    p.winner_idx = ranking[w_rank];
    p.loser_idx = ranking[l_rank];
    p.fused_gap = fused[p.winner_idx] - fused[p.loser_idx];
    pairs.push_back(p);
  };
  switch (strategy) {
    case PairingStrategy::ManyVsMany:
      // head-to-tail: best with worst, second-best with second-worst, ...
      for (std::size_t i = 0; i < m; ++i) make(i, k - 1 - i);
      break;
    case PairingStrategy::ManyVsOne:
      // top floor(K/2) each against the single worst
      for (std::size_t i = 0; i < m; ++i) make(i, k - 1);
      break;
    case PairingStrategy::OneVsMany:
      // the single best against the bottom floor(K/2)
      for (std::size_t i = 0; i < m; ++i) make(0, k - m + i);
      break;
  }
  return pairs;
}

}  // namespace m2po
