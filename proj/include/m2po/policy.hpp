#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "m2po/common.hpp"

namespace m2po {

// Order-1 tabular conditional transducer: a logit row per
// (previous target token or BOS, hashed bag-of-source-tokens bucket),
// over the target vocabulary plus EOS. Exact log-probabilities, exact
// gradients, exhaustive enumeration all stay feasible.
struct PolicyDims {
  int src_vocab = 12;
  int tgt_vocab = 12;
  int buckets = 16;

  void validate() const {
    require(src_vocab >= 1 && tgt_vocab >= 1 && buckets >= 1,
            "policy dimensions must be positive");
  }

  int out_dim() const { return tgt_vocab + 1; }   // + EOS
  int contexts() const { return tgt_vocab + 1; }  // + BOS
  std::size_t table_size() const {
    return static_cast<std::size_t>(contexts()) * buckets * out_dim();
  }
};

struct PolicyParams {
  PolicyDims dims;
  std::vector<double> logits;  // [context][bucket][output], flat

  static PolicyParams zeros(const PolicyDims& d) {
    d.validate();
    PolicyParams p;
    p.dims = d;
    p.logits.assign(d.table_size(), 0.0);
    return p;
  }

  std::size_t row_offset(int context, int bucket) const {
    return (static_cast<std::size_t>(context) * dims.buckets + bucket) *
           dims.out_dim();
  }
};

inline int eos_id(const PolicyDims& d) { return d.tgt_vocab; }
inline int bos_context(const PolicyDims& d) { return d.tgt_vocab; }

// Order-invariant bag hash: sum of per-token hashes mod bucket count.
inline int source_bucket(const PolicyDims& dims,
                         const std::vector<int>& source) {
  std::uint64_t h = 0;
  for (int t : source) {
    require(t >= 0 && t < dims.src_vocab, "source token out of vocab");
    h += hash_u64(static_cast<std::uint64_t>(t) + 1);
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(dims.buckets));
}

namespace detail {

inline void check_target(const PolicyDims& dims,
                         const std::vector<int>& target) {
  for (int t : target)
    require(t >= 0 && t < dims.tgt_vocab, "target token out of vocab");
}

// log softmax of one logit row at a single output index
inline double row_log_prob(const PolicyParams& p, std::size_t row, int out) {
  const int n = p.dims.out_dim();
  double m = p.logits[row];
  for (int j = 1; j < n; ++j) m = std::max(m, p.logits[row + j]);
  double z = 0.0;
  for (int j = 0; j < n; ++j) z += std::exp(p.logits[row + j] - m);
  return p.logits[row + out] - m - std::log(z);
}

}  // namespace detail

// Exact sequence log-probability: sum of log softmax terms over the target
// tokens plus the terminating EOS emission.
inline double log_prob(const PolicyParams& params,
                       const std::vector<int>& source,
                       const std::vector<int>& target) {
  detail::check_target(params.dims, target);
  const int bucket = source_bucket(params.dims, source);
  int context = bos_context(params.dims);
  double lp = 0.0;
  for (int t : target) {
    lp += detail::row_log_prob(params, params.row_offset(context, bucket), t);
    context = t;
  }
  lp += detail::row_log_prob(params, params.row_offset(context, bucket),
                             eos_id(params.dims));
  return lp;
}

// d log_prob / d logits: onehot(emitted) - softmax(row) at each visited
// row, zero elsewhere. Accumulates coeff * gradient into grad_out.
inline void accumulate_grad_log_prob(const PolicyParams& params,
                                     const std::vector<int>& source,
                                     const std::vector<int>& target,
                                     double coeff,
                                     std::vector<double>& grad_out) {
  detail::check_target(params.dims, target);
  require(grad_out.size() == params.logits.size(), "gradient shape mismatch");
  const int bucket = source_bucket(params.dims, source);
  const int n = params.dims.out_dim();
  int context = bos_context(params.dims);
  auto visit = [&](int emitted) {
    const std::size_t row = params.row_offset(context, bucket);
    std::vector<double> row_logits(params.logits.begin() + row,
                                   params.logits.begin() + row + n);
    std::vector<double> probs = softmax(row_logits);
    for (int j = 0; j < n; ++j) grad_out[row + j] -= coeff * probs[j];
    grad_out[row + emitted] += coeff;
  };
  for (int t : target) {
    visit(t);
    context = t;
  }
  visit(eos_id(params.dims));
}

inline std::vector<double> grad_log_prob(const PolicyParams& params,
                                         const std::vector<int>& source,
                                         const std::vector<int>& target) {
  std::vector<double> grad(params.logits.size(), 0.0);
  accumulate_grad_log_prob(params, source, target, 1.0, grad);
  return grad;
}

struct SampleResult {
  std::vector<int> tokens;
  bool capped = false;  // hit the length cap and was force-terminated
};

// Ancestral sampling with temperature. Hard length cap (default 4x source
// length) with forced EOS so sampling always terminates.
inline SampleResult sample(const PolicyParams& params,
                           const std::vector<int>& source,
                           std::uint64_t rng_seed, double temperature,
                           std::size_t length_cap_factor = 4) {
  require(temperature > 0.0, "temperature must be > 0");
  const int bucket = source_bucket(params.dims, source);
  const int n = params.dims.out_dim();
  const std::size_t cap = length_cap_factor * source.size();
  Rng rng(rng_seed);
  SampleResult res;
  int context = bos_context(params.dims);
  while (true) {
    if (res.tokens.size() >= cap) {
      res.capped = true;
      break;
    }
    const std::size_t row = params.row_offset(context, bucket);
    std::vector<double> scaled(n);
    for (int j = 0; j < n; ++j) scaled[j] = params.logits[row + j] / temperature;
    std::vector<double> probs = softmax(scaled);
    double u = rng.next_double();
    int pick = n - 1;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += probs[j];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    if (pick == eos_id(params.dims)) break;
    res.tokens.push_back(pick);
    context = pick;
  }
  return res;
}

// Deterministic argmax decoding (ties to the lowest token id), the
// temperature -> 0 limit of sample().
inline std::vector<int> greedy_decode(const PolicyParams& params,
                                      const std::vector<int>& source,
                                      std::size_t length_cap_factor = 4) {
  const int bucket = source_bucket(params.dims, source);
  const int n = params.dims.out_dim();
  const std::size_t cap = length_cap_factor * source.size();
  std::vector<int> out;
  int context = bos_context(params.dims);
  while (out.size() < cap) {
    const std::size_t row = params.row_offset(context, bucket);
    int best = 0;
    for (int j = 1; j < n; ++j)
      if (params.logits[row + j] > params.logits[row + best]) best = j;
    if (best == eos_id(params.dims)) break;
    out.push_back(best);
    context = best;
  }
  return out;
}

// ---- optimizer ---------------------------------------------------------
// Moment-based adaptive update with bias correction and decoupled weight
// decay (AdamW-style), written out directly so updates are deterministic.

struct OptimizerState {
  std::vector<double> m;  // first moments
  std::vector<double> v;  // second moments
  long step = 0;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState init(std::size_t n, double lr) {
    OptimizerState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.learning_rate = lr;
    return s;
  }
};

inline void apply_update(PolicyParams& params, OptimizerState& state,
                         const std::vector<double>& grads,
                         double weight_decay = 0.0) {
  require(grads.size() == params.logits.size() &&
              state.m.size() == params.logits.size() &&
              state.v.size() == params.logits.size(),
          "optimizer shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params.logits[i] -= state.learning_rate *
                        (mhat / (std::sqrt(vhat) + state.epsilon) +
                         weight_decay * params.logits[i]);
  }
}

// ---- checkpoints -------------------------------------------------------
// Versioned JSON table dump; loading validates shapes. Floats are written
// with the shared 17-significant-digit formatter so checkpoints are
// byte-stable.

inline void save_checkpoint(const PolicyParams& params,
                            const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "{\"format_version\":1,\"src_vocab\":" << params.dims.src_vocab
    << ",\"tgt_vocab\":" << params.dims.tgt_vocab
    << ",\"buckets\":" << params.dims.buckets << ",\"logits\":[";
  for (std::size_t i = 0; i < params.logits.size(); ++i) {
    if (i) f << ',';
    f << format_double(params.logits[i]);
  }
  f << "]}\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad checkpoint " + path + ": " + e.what());
  }
  require(j.at("format_version").get<int>() == 1,
          "unsupported checkpoint version in " + path);
  PolicyDims d;
  d.src_vocab = j.at("src_vocab").get<int>();
  d.tgt_vocab = j.at("tgt_vocab").get<int>();
  d.buckets = j.at("buckets").get<int>();
  d.validate();
  PolicyParams p;
  p.dims = d;
  p.logits = j.at("logits").get<std::vector<double>>();
  require(p.logits.size() == d.table_size(),
          "checkpoint logit table has wrong shape: " + path);
  for (double v : p.logits)
    require(std::isfinite(v), "non-finite logit in checkpoint: " + path);
  return p;
}

}  // namespace m2po
