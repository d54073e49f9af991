#pragma once

#include <functional>
#include <vector>

#include "m2po/common.hpp"
#include "m2po/datamodel.hpp"

namespace testutil {

// Independent central-difference gradient, the oracle every analytic
// gradient in the library is checked against.
inline std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Relative error with an absolute floor for near-zero coordinates. The
// floor absorbs central-difference rounding noise, eps*|f|/(2h) ~ 2e-9
// for losses of magnitude ~30 at h=1e-6.
inline bool grad_close(const std::vector<double>& analytic,
                       const std::vector<double>& numeric,
                       double rel = 1e-6, double abs_floor = 5e-8) {
  if (analytic.size() != numeric.size()) return false;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (diff > std::max(rel * scale, abs_floor)) return false;
  }
  return true;
}

inline double max_grad_err(const std::vector<double>& analytic,
                           const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-3});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

// random but always-valid candidate pool, for round-trip property tests
inline m2po::CandidatePool random_pool(m2po::Rng& rng, int index) {
  m2po::CandidatePool pool;
  pool.source.id = "p" + std::to_string(index);
  pool.source.direction = rng.next_below(2) ? "syn→syn" : "rev";
  const std::size_t src_len = 1 + rng.next_below(8);
  for (std::size_t i = 0; i < src_len; ++i)
    pool.source.tokens.push_back(static_cast<int>(rng.next_below(12)));
  const std::size_t k = 2 + rng.next_below(7);
  for (std::size_t c = 0; c < k; ++c) {
    m2po::Candidate cand;
    const std::size_t len = 1 + rng.next_below(10);
    for (std::size_t i = 0; i < len; ++i)
      cand.tokens.push_back(static_cast<int>(rng.next_below(12)));
    switch (rng.next_below(3)) {
      case 0: cand.provenance = m2po::Provenance::policy_sample; break;
      case 1: cand.provenance = m2po::Provenance::oracle_reference; break;
      default: {
        cand.provenance = m2po::Provenance::corrupted;
        m2po::CorruptionLabel label;
        const auto sev = [&](std::uint64_t v) {
          return v == 0 ? m2po::Severity::none
                 : v == 1 ? m2po::Severity::partial
                          : m2po::Severity::full;
        };
        label.hallucination = sev(rng.next_below(3));
        label.omission = sev(rng.next_below(3));
        if (label.hallucination == m2po::Severity::full &&
            label.omission == m2po::Severity::full)
          label.omission = m2po::Severity::partial;
        cand.corruption = label;
        break;
      }
    }
    pool.candidates.push_back(std::move(cand));
    m2po::ScoreCard card;
    auto maybe = [&]() -> std::optional<double> {
      if (rng.next_below(4) == 0) return std::nullopt;
      // awkward magnitudes on purpose, to stress float round-tripping
      return (rng.next_double() - 0.5) * std::pow(10.0, rng.next_below(7));
    };
    card.r_qe = maybe();
    card.s_align = maybe();
    card.r_s = maybe();
    card.r_d = maybe();
    card.rs_hat = maybe();
    card.rd_hat = maybe();
    card.r_fused = maybe();
    pool.scorecards.push_back(card);
  }
  return pool;
}

inline bool pools_equal(const m2po::CandidatePool& a,
                        const m2po::CandidatePool& b) {
  auto opt_eq = [](const std::optional<double>& x,
                   const std::optional<double>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return *x == *y;  // bit-exact
  };
  if (a.source.id != b.source.id || a.source.tokens != b.source.tokens ||
      a.source.direction != b.source.direction)
    return false;
  if (a.candidates.size() != b.candidates.size()) return false;
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    const auto& ca = a.candidates[i];
    const auto& cb = b.candidates[i];
    if (ca.tokens != cb.tokens || ca.provenance != cb.provenance) return false;
    if (ca.corruption.has_value() != cb.corruption.has_value()) return false;
    if (ca.corruption &&
        (ca.corruption->hallucination != cb.corruption->hallucination ||
         ca.corruption->omission != cb.corruption->omission))
      return false;
    const auto& sa = a.scorecards[i];
    const auto& sb = b.scorecards[i];
    if (!opt_eq(sa.r_qe, sb.r_qe) || !opt_eq(sa.s_align, sb.s_align) ||
        !opt_eq(sa.r_s, sb.r_s) || !opt_eq(sa.r_d, sb.r_d) ||
        !opt_eq(sa.rs_hat, sb.rs_hat) || !opt_eq(sa.rd_hat, sb.rd_hat) ||
        !opt_eq(sa.r_fused, sb.r_fused))
      return false;
  }
  return true;
}

}  // namespace testutil
