#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "m2po/common.hpp"

namespace m2po {

using TokenSeq = std::vector<int>;

struct SourceUnit {
  std::string id;
  TokenSeq tokens;
  std::string direction;
};

enum class Provenance { policy_sample, oracle_reference, corrupted };

enum class Severity { none, partial, full };

struct CorruptionLabel {
  Severity hallucination = Severity::none;
  Severity omission = Severity::none;
};

struct Candidate {
  TokenSeq tokens;
  Provenance provenance = Provenance::policy_sample;
  std::optional<CorruptionLabel> corruption;
};

// Score fields are filled in stages (static offline, dynamic online);
// unset fields serialize as null.
struct ScoreCard {
  std::optional<double> r_qe;      // quality score, [0,100]
  std::optional<double> s_align;   // factuality bonus, [0,100]
  std::optional<double> r_s;       // static score
  std::optional<double> r_d;       // candidate log-probability, <= 0
  std::optional<double> rs_hat;    // z-normalized static score
  std::optional<double> rd_hat;    // z-normalized dynamic score
  std::optional<double> r_fused;   // fused score
};

struct CandidatePool {
  SourceUnit source;
  std::vector<Candidate> candidates;
  std::vector<ScoreCard> scorecards;

  std::size_t k() const { return candidates.size(); }
};

// ---- enum names --------------------------------------------------------

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::policy_sample: return "policy_sample";
    case Provenance::oracle_reference: return "oracle_reference";
    case Provenance::corrupted: return "corrupted";
  }
  return "?";
}

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::none: return "none";
    case Severity::partial: return "partial";
    case Severity::full: return "full";
  }
  return "?";
}

inline Provenance provenance_from(const std::string& s) {
  if (s == "policy_sample") return Provenance::policy_sample;
  if (s == "oracle_reference") return Provenance::oracle_reference;
  if (s == "corrupted") return Provenance::corrupted;
  throw std::invalid_argument("unknown provenance: " + s);
}

inline Severity severity_from(const std::string& s) {
  if (s == "none") return Severity::none;
  if (s == "partial") return Severity::partial;
  if (s == "full") return Severity::full;
  throw std::invalid_argument("unknown severity: " + s);
}

// ---- invariant validation ----------------------------------------------

inline void validate_pool(const CandidatePool& pool) {
  require(!pool.source.id.empty(), "source id empty");
  require(!pool.source.tokens.empty(),
          "pool " + pool.source.id + ": source tokens empty");
  require(pool.candidates.size() == pool.scorecards.size(),
          "pool " + pool.source.id +
              ": candidates/scorecards length mismatch");
  require(pool.candidates.size() >= 2,
          "pool " + pool.source.id + ": K < 2");
  for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
    const Candidate& c = pool.candidates[i];
    require(!c.tokens.empty(), "pool " + pool.source.id + " candidate " +
                                   std::to_string(i) + ": tokens empty");
    bool is_corrupted = c.provenance == Provenance::corrupted;
    require(c.corruption.has_value() == is_corrupted,
            "pool " + pool.source.id + " candidate " + std::to_string(i) +
                ": corruption label present iff provenance=corrupted");
    if (c.corruption) {
      require(!(c.corruption->hallucination == Severity::full &&
                c.corruption->omission == Severity::full),
              "pool " + pool.source.id + " candidate " + std::to_string(i) +
                  ": cannot be full hallucination and full omission");
    }
  }
}

// ---- JSONL persistence -------------------------------------------------
// The writer is hand-rolled: fixed field order, 17-significant-digit
// floats, so two writes of the same dataset are byte-identical. The reader
// goes through nlohmann::json and re-validates every invariant.

namespace detail {

inline void append_tokens(std::string& out, const TokenSeq& t) {
  out += '[';
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(t[i]);
  }
  out += ']';
}

inline void append_json_string(std::string& out, const std::string& s) {
  out += nlohmann::json(s).dump();
}

inline void append_opt(std::string& out, const std::optional<double>& v) {
  if (v)
    out += format_double(*v);
  else
    out += "null";
}

}  // namespace detail

inline std::string pool_to_jsonl(const CandidatePool& pool) {
  std::string out = "{\"source\":{\"id\":";
  detail::append_json_string(out, pool.source.id);
  out += ",\"tokens\":";
  detail::append_tokens(out, pool.source.tokens);
  out += ",\"direction\":";
  detail::append_json_string(out, pool.source.direction);
  out += "},\"candidates\":[";
  for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
    const Candidate& c = pool.candidates[i];
    if (i) out += ',';
    out += "{\"tokens\":";
    detail::append_tokens(out, c.tokens);
    out += ",\"provenance\":\"";
    out += to_string(c.provenance);
    out += "\",\"corruption\":";
    if (c.corruption) {
      out += "{\"hallucination\":\"";
      out += to_string(c.corruption->hallucination);
      out += "\",\"omission\":\"";
      out += to_string(c.corruption->omission);
      out += "\"}";
    } else {
      out += "null";
    }
    out += '}';
  }
  out += "],\"scorecards\":[";
  for (std::size_t i = 0; i < pool.scorecards.size(); ++i) {
    const ScoreCard& s = pool.scorecards[i];
    if (i) out += ',';
    out += "{\"r_qe\":";
    detail::append_opt(out, s.r_qe);
    out += ",\"s_align\":";
    detail::append_opt(out, s.s_align);
    out += ",\"r_s\":";
    detail::append_opt(out, s.r_s);
    out += ",\"r_d\":";
    detail::append_opt(out, s.r_d);
    out += ",\"rs_hat\":";
    detail::append_opt(out, s.rs_hat);
    out += ",\"rd_hat\":";
    detail::append_opt(out, s.rd_hat);
    out += ",\"r_fused\":";
    detail::append_opt(out, s.r_fused);
    out += '}';
  }
  out += "]}";
  return out;
}

inline void write_pools(const std::vector<CandidatePool>& pools,
                        const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const CandidatePool& pool : pools) {
    f << pool_to_jsonl(pool) << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline CandidatePool pool_from_json(const nlohmann::json& j) {
  CandidatePool pool;
  const auto& src = j.at("source");
  pool.source.id = src.at("id").get<std::string>();
  pool.source.tokens = src.at("tokens").get<TokenSeq>();
  pool.source.direction = src.at("direction").get<std::string>();
  for (const auto& jc : j.at("candidates")) {
    Candidate c;
    c.tokens = jc.at("tokens").get<TokenSeq>();
    c.provenance = provenance_from(jc.at("provenance").get<std::string>());
    const auto& corr = jc.at("corruption");
    if (!corr.is_null()) {
      CorruptionLabel label;
      label.hallucination =
          severity_from(corr.at("hallucination").get<std::string>());
      label.omission = severity_from(corr.at("omission").get<std::string>());
      c.corruption = label;
    }
    pool.candidates.push_back(std::move(c));
  }
  auto opt = [](const nlohmann::json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  for (const auto& js : j.at("scorecards")) {
    ScoreCard s;
    s.r_qe = opt(js.at("r_qe"));
    s.s_align = opt(js.at("s_align"));
    s.r_s = opt(js.at("r_s"));
    s.r_d = opt(js.at("r_d"));
    s.rs_hat = opt(js.at("rs_hat"));
    s.rd_hat = opt(js.at("rd_hat"));
    s.r_fused = opt(js.at("r_fused"));
    pool.scorecards.push_back(s);
  }
  return pool;
}

inline std::vector<CandidatePool> read_pools(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<CandidatePool> pools;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed JSON line: " + e.what());
    }
    CandidatePool pool;
    try {
      pool = pool_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad pool record: " + e.what());
    }
    validate_pool(pool);
    require(seen_ids.insert(pool.source.id).second,
            "duplicate source id: " + pool.source.id);
    pools.push_back(std::move(pool));
  }
  return pools;
}

// ---- vocabulary files --------------------------------------------------
// One token per line; line index = token id.

inline void write_vocab(const std::vector<std::string>& tokens,
                        const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const std::string& t : tokens) f << t << '\n';
}

inline std::vector<std::string> read_vocab(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(f, line)) tokens.push_back(line);
  require(!tokens.empty(), "vocabulary file empty: " + path);
  return tokens;
}

}  // namespace m2po
