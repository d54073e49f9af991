// Command-line surface for the synthetic preference-optimization pipeline:
//   gen      build a corrupted candidate corpus
//   score    fill static scores via the oracle scorers
//   train    run preference training and emit metrics + checkpoint
//   eval     greedy-decode a checkpoint against a corpus
//   analyze  severity/correlation report + scatter data
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "m2po/config.hpp"
#include "m2po/datamodel.hpp"
#include "m2po/policy.hpp"
#include "m2po/reward.hpp"
#include "m2po/synthbench.hpp"
#include "m2po/trainer.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed_flag = -1;
};

m2po::PipelineConfig load_config(const CommonArgs& args) {
  nlohmann::json j = m2po::load_config_json(args.config_path);
  for (const std::string& o : args.overrides) m2po::apply_override(j, o);
  if (const char* env = std::getenv("M2PO_SEED")) {
    if (!j.contains("seed")) j["seed"] = std::stoull(env);
  }
  if (args.seed_flag >= 0) j["seed"] = static_cast<std::uint64_t>(args.seed_flag);
  return m2po::config_from_json(j);
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON")
      ->required();
  cmd->add_option("--set", args.overrides,
                  "config override, e.g. --set train/mode=bc_only");
  cmd->add_option("--seed", args.seed_flag, "override the config seed");
}

std::vector<std::string> synthetic_vocab(char prefix, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(std::string(1, prefix) + std::to_string(i));
  return v;
}

int cmd_gen(const CommonArgs& args, const std::string& out) {
  const m2po::PipelineConfig cfg = load_config(args);
  const auto pools = m2po::gen_corpus(cfg.task, cfg.gen.n_sources, cfg.gen.k,
                                      cfg.gen.severity_mix, cfg.gen.direction);
  m2po::write_pools(pools, out);
  m2po::write_vocab(synthetic_vocab('s', cfg.task.src_vocab),
                    out + ".src_vocab.txt");
  m2po::write_vocab(synthetic_vocab('t', cfg.task.tgt_vocab),
                    out + ".tgt_vocab.txt");
  std::size_t candidates = 0;
  for (const auto& p : pools) candidates += p.k();
  std::cout << "wrote " << pools.size() << " pools, " << candidates
            << " candidates to " << out << "\n";
  return 0;
}

int cmd_score(const CommonArgs& args, const std::string& corpus,
              const std::string& out) {
  const m2po::PipelineConfig cfg = load_config(args);
  auto pools = m2po::read_pools(corpus);
  const m2po::FlawedQeScorer qe(cfg.task, cfg.qe_oracle);
  const m2po::CoverageScorer align(cfg.task);
  for (auto& p : pools) p = m2po::score_pool(p, qe, align, cfg.reward);
  m2po::write_pools(pools, out);
  std::cout << "scored " << pools.size() << " pools to " << out << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& corpus,
              const std::string& out_dir) {
  const m2po::PipelineConfig cfg = load_config(args);
  auto pools = m2po::read_pools(corpus);
  const std::size_t n_heldout = static_cast<std::size_t>(
      cfg.heldout_fraction * static_cast<double>(pools.size()));
  m2po::require(pools.size() > n_heldout, "held-out split leaves no training pools");
  std::vector<m2po::CandidatePool> heldout(pools.end() - n_heldout, pools.end());
  pools.resize(pools.size() - n_heldout);

  std::filesystem::create_directories(out_dir);
  m2po::TrainResult res = m2po::train(std::move(pools), heldout, cfg.task,
                                      cfg.qe_oracle, cfg.reward, cfg.train);
  const std::string ckpt = out_dir + "/checkpoint.json";
  m2po::save_checkpoint(res.params, ckpt);
  // recorded relative to the summary so run directories stay relocatable
  // (and byte-identical across output locations)
  res.metrics.checkpoint_path = "checkpoint.json";
  m2po::write_metrics(res.metrics, out_dir + "/metrics.jsonl",
                      out_dir + "/summary.json");
  m2po::write_pairs(res.metrics, out_dir + "/pairs.jsonl");
  if (!res.metrics.epochs.empty()) {
    std::cout << "final heldout "
              << m2po::eval_to_json(res.metrics.epochs.back().heldout) << "\n";
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& corpus, const std::string& out) {
  const m2po::PipelineConfig cfg = load_config(args);
  const m2po::PolicyParams params = m2po::load_checkpoint(checkpoint);
  const auto pools = m2po::read_pools(corpus);
  const m2po::EvalResult res =
      m2po::evaluate(params, pools, cfg.task, cfg.qe_oracle, cfg.reward);
  const std::string json = m2po::eval_to_json(res) + "\n";
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    f << json;
  }
  std::cout << json;
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& corpus,
                const std::string& out_dir) {
  const m2po::PipelineConfig cfg = load_config(args);
  const auto pools = m2po::read_pools(corpus);
  const m2po::FlawedQeScorer qe(cfg.task, cfg.qe_oracle);
  const m2po::CoverageScorer cov(cfg.task);
  const m2po::MotivationReport rep = m2po::motivation_report(pools, qe, cov);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/report.json", std::ios::binary);
    f << m2po::report_to_json(rep);
  }
  {
    std::ofstream f(out_dir + "/report.txt", std::ios::binary);
    f << m2po::report_to_text(rep);
  }
  {
    // one row per candidate; header is fixed
    std::ofstream f(out_dir + "/scatter.csv", std::ios::binary);
    f << "source_id,candidate,hallucination,omission,coverage,qe\n";
    for (const auto& pool : pools) {
      for (std::size_t i = 0; i < pool.k(); ++i) {
        const auto label =
            pool.candidates[i].corruption.value_or(m2po::CorruptionLabel{});
        f << pool.source.id << ',' << i << ','
          << m2po::to_string(label.hallucination) << ','
          << m2po::to_string(label.omission) << ','
          << m2po::format_double(
                 cov.score(pool.source.tokens, pool.candidates[i].tokens))
          << ','
          << m2po::format_double(
                 qe.score(pool.source.tokens, pool.candidates[i].tokens))
          << '\n';
      }
    }
  }
  std::cout << m2po::report_to_text(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic multi-pair preference optimization pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, score_args, train_args, eval_args, analyze_args;
  std::string gen_out, score_in, score_out, train_in, train_out;
  std::string eval_ckpt, eval_in, eval_out, analyze_in, analyze_out;

  CLI::App* gen = app.add_subcommand("gen", "generate a candidate corpus");
  add_common(gen, gen_args);
  gen->add_option("--out", gen_out, "output corpus JSONL")->required();

  CLI::App* score = app.add_subcommand("score", "fill static scores");
  add_common(score, score_args);
  score->add_option("--corpus", score_in, "input corpus JSONL")->required();
  score->add_option("--out", score_out, "output scored JSONL")->required();

  CLI::App* train = app.add_subcommand("train", "run preference training");
  add_common(train, train_args);
  train->add_option("--corpus", train_in, "scored corpus JSONL")->required();
  train->add_option("--out-dir", train_out, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  eval->add_option("--corpus", eval_in, "corpus JSONL")->required();
  eval->add_option("--out", eval_out, "optional metrics JSON output");

  CLI::App* analyze = app.add_subcommand("analyze", "motivation report");
  add_common(analyze, analyze_args);
  analyze->add_option("--corpus", analyze_in, "scored corpus JSONL")->required();
  analyze->add_option("--out-dir", analyze_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args, gen_out);
    if (score->parsed()) return cmd_score(score_args, score_in, score_out);
    if (train->parsed()) return cmd_train(train_args, train_in, train_out);
    if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt, eval_in, eval_out);
    if (analyze->parsed()) return cmd_analyze(analyze_args, analyze_in, analyze_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
