#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "m2po/common.hpp"
#include "m2po/reward.hpp"
#include "m2po/synthbench.hpp"
#include "m2po/trainer.hpp"

namespace m2po {

// One human-editable JSON config with per-command sections; CLI flags and
// --set overrides are applied to the parsed JSON before validation.
struct GenConfig {
  int n_sources = 200;
  int k = 16;
  SeverityMix severity_mix;
  std::string direction = "syn→syn";
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  SynthTask task;              // token_map derived from seed
  GenConfig gen;
  OracleQEConfig qe_oracle;
  StaticRewardConfig reward;
  TrainConfig train;           // holds LossConfig and CurriculumSchedule
  double heldout_fraction = 0.2;
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  detail::read_field(j, "seed", cfg.seed);

  int vocab = 12, len_min = 4, len_max = 8;
  if (j.contains("task")) {
    const auto& t = j.at("task");
    detail::read_field(t, "vocab", vocab);
    detail::read_field(t, "len_min", len_min);
    detail::read_field(t, "len_max", len_max);
  }
  cfg.task = make_task(cfg.seed, vocab, len_min, len_max);

  if (j.contains("gen")) {
    const auto& g = j.at("gen");
    detail::read_field(g, "n_sources", cfg.gen.n_sources);
    detail::read_field(g, "k", cfg.gen.k);
    detail::read_field(g, "direction", cfg.gen.direction);
    if (g.contains("severity_mix")) {
      const auto& m = g.at("severity_mix");
      detail::read_field(m, "none", cfg.gen.severity_mix.none);
      detail::read_field(m, "partial_hallucination",
                         cfg.gen.severity_mix.partial_hallucination);
      detail::read_field(m, "full_hallucination",
                         cfg.gen.severity_mix.full_hallucination);
      detail::read_field(m, "partial_omission",
                         cfg.gen.severity_mix.partial_omission);
      detail::read_field(m, "full_omission",
                         cfg.gen.severity_mix.full_omission);
    }
  }

  if (j.contains("qe_oracle")) {
    const auto& q = j.at("qe_oracle");
    detail::read_field(q, "fluency_weight", cfg.qe_oracle.fluency_weight);
    detail::read_field(q, "faithfulness_weight",
                       cfg.qe_oracle.faithfulness_weight);
    detail::read_field(q, "midrange_noise_sd", cfg.qe_oracle.midrange_noise_sd);
    detail::read_field(q, "base_noise_sd", cfg.qe_oracle.base_noise_sd);
  }
  cfg.qe_oracle.seed = hash_combine(cfg.seed, 0x7165);

  if (j.contains("reward"))
    detail::read_field(j.at("reward"), "lambda_f", cfg.reward.lambda_f);

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::read_field(l, "beta", cfg.train.loss.beta);
    detail::read_field(l, "tau_w", cfg.train.loss.tau_w);
    detail::read_field(l, "tau_s", cfg.train.loss.tau_s);
    detail::read_field(l, "lambda_pref", cfg.train.loss.lambda_pref);
    detail::read_field(l, "lambda_rank", cfg.train.loss.lambda_rank);
    detail::read_field(l, "lambda_bc", cfg.train.loss.lambda_bc);
    detail::read_field(l, "use_reference", cfg.train.loss.use_reference);
    if (l.contains("rank_score_space")) {
      const std::string s = l.at("rank_score_space").get<std::string>();
      if (s == "raw")
        cfg.train.loss.rank_score_space = RankScoreSpace::raw;
      else if (s == "normalized")
        cfg.train.loss.rank_score_space = RankScoreSpace::normalized;
      else
        throw std::invalid_argument("loss.rank_score_space: unknown value " + s);
    }
  }

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::read_field(s, "alpha_start", cfg.train.schedule.alpha_start);
    detail::read_field(s, "alpha_end", cfg.train.schedule.alpha_end);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::read_field(t, "epochs", cfg.train.epochs);
    detail::read_field(t, "batch_size", cfg.train.batch_size);
    detail::read_field(t, "learning_rate", cfg.train.learning_rate);
    detail::read_field(t, "weight_decay", cfg.train.weight_decay);
    detail::read_field(t, "buckets", cfg.train.buckets);
    detail::read_field(t, "heldout_fraction", cfg.heldout_fraction);
    detail::read_field(t, "length_normalize_dynamic",
                       cfg.train.length_normalize_dynamic);
    detail::read_field(t, "on_policy_refresh", cfg.train.on_policy_refresh);
    if (t.contains("mode"))
      cfg.train.mode = train_mode_from(t.at("mode").get<std::string>());
    if (t.contains("pairing"))
      cfg.train.strategy =
          pairing_strategy_from(t.at("pairing").get<std::string>());
  }
  cfg.train.k = cfg.gen.k;
  cfg.train.seed = cfg.seed;

  // validate everything up front so bad configs fail before any work
  cfg.task.validate();
  cfg.gen.severity_mix.validate();
  require(cfg.gen.n_sources >= 1, "gen.n_sources must be >= 1");
  require(cfg.gen.k >= 2, "gen.k must be >= 2");
  cfg.qe_oracle.validate();
  require(cfg.reward.lambda_f >= 0.0, "reward.lambda_f must be >= 0");
  cfg.train.validate();
  CurriculumSchedule probe = cfg.train.schedule;
  probe.total_steps = 1;
  probe.validate();
  require(cfg.heldout_fraction >= 0.0 && cfg.heldout_fraction < 1.0,
          "train.heldout_fraction must be in [0,1)");
  return cfg;
}

inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("bad config " + path + ": " + e.what());
  }
  return j;
}

// "a/b/c=value" applied as a JSON pointer override; the value is parsed
// as JSON, falling back to a plain string.
inline void apply_override(nlohmann::json& j, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  require(eq != std::string::npos && eq > 0,
          "override must look like section/key=value: " + spec);
  std::string ptr = "/" + spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  j[nlohmann::json::json_pointer(ptr)] = value;
}

}  // namespace m2po
