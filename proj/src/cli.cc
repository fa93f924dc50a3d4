#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "xattn/commands.h"

namespace xattn {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

void emit(const std::string& out_path, const std::string& contents) {
  if (out_path.empty() || out_path == "-") {
    std::cout << contents;
    std::cout.flush();
  } else {
    write_file(out_path, contents);
  }
}

std::vector<std::string> read_vocab(const std::string& path) {
  std::vector<std::string> words;
  for (const auto& line : corpus_documents(read_file(path))) {
    for (auto& w : split_words(line)) words.push_back(std::move(w));
  }
  return words;
}

void add_lime_flags(CLI::App* cmd, LimeConfig& cfg) {
  cmd->add_option("--n", cfg.samples, "LIME perturbation samples")->capture_default_str();
  cmd->add_option("--nu", cfg.bandwidth, "LIME kernel bandwidth")->capture_default_str();
  cmd->add_option("--lambda", cfg.lambda, "ridge penalty")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Explainers for a single-layer attention classifier"};
  app.require_subcommand(1);

  std::string out_path;

  // gen-model
  GenModelOptions gen;
  std::string vocab_path;
  auto* gen_cmd = app.add_subcommand("gen-model", "write a randomly initialized model file");
  gen_cmd->add_option("--out", out_path, "model file to write")->required();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--vocab", vocab_path, "vocabulary file, whitespace separated words")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--vocab-size", gen.dims.vocab_size, "synthetic vocabulary size D")
      ->capture_default_str();
  gen_cmd->add_option("--max-len", gen.dims.max_len, "T_max")->capture_default_str();
  gen_cmd->add_option("--embed-dim", gen.dims.embed_dim, "d_e (even)")->capture_default_str();
  gen_cmd->add_option("--att-dim", gen.dims.att_dim, "d_att")->capture_default_str();
  gen_cmd->add_option("--out-dim", gen.dims.out_dim, "d_out")->capture_default_str();
  gen_cmd->add_option("--heads", gen.dims.num_heads, "K")->capture_default_str();

  // explain
  std::string model_path, text, html_path;
  ExplainOptions explain;
  auto* explain_cmd = app.add_subcommand("explain", "explain one document");
  explain_cmd->add_option("--model", model_path, "model file")->required();
  explain_cmd->add_option("--text", text, "document text")->required();
  explain_cmd->add_option("--methods", explain.methods, "comma separated tags or all")
      ->delimiter(',');
  add_lime_flags(explain_cmd, explain.lime);
  explain_cmd->add_option("--html", html_path, "also write a heatmap here");
  explain_cmd->add_flag("--gxi-word-only", explain.gxi_word_only,
                        "gradient x input against the word embedding only");
  explain_cmd->add_flag("--heads", explain.include_heads, "include per-head attention");
  explain_cmd->add_flag("--timings", explain.timings, "include wall-clock timings");
  explain_cmd->add_option("--out", out_path, "report file (default stdout)");

  // lime
  LimeOptions lime;
  std::string lime_mode = "empirical";
  auto* lime_cmd = app.add_subcommand("lime", "LIME coefficients for one document");
  lime_cmd->add_option("--model", model_path, "model file")->required();
  lime_cmd->add_option("--text", text, "document text")->required();
  add_lime_flags(lime_cmd, lime.cfg);
  lime_cmd->add_option("--mode", lime_mode, "empirical, exact, sampled or approx")
      ->check(CLI::IsMember({"empirical", "exact", "sampled", "approx"}))
      ->capture_default_str();
  lime_cmd->add_option("--mc-per-size", lime.mc_per_size, "subsets per size in sampled mode")
      ->capture_default_str();
  lime_cmd->add_option("--out", out_path, "report file (default stdout)");

  // compare
  std::string corpus_path;
  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "compare explainers over a corpus");
  compare_cmd->add_option("--model", model_path, "model file")->required();
  compare_cmd->add_option("--corpus", corpus_path, "one document per line")->required();
  add_lime_flags(compare_cmd, compare.lime);
  compare_cmd->add_flag("--gxi-word-only", compare.gxi_word_only,
                        "gradient x input against the word embedding only");
  compare_cmd->add_option("--out", out_path, "CSV file (default stdout)");

  // verify
  std::string suite = "all";
  VerifyOptions verify;
  bool corrupt = false;
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle checks");
  verify_cmd->add_option("suite", suite, "gradient, lemmas, expectation, scaling, lime, "
                                         "structure or all")
      ->capture_default_str();
  verify_cmd->add_option("--seed", verify.seed, "random seed")->capture_default_str();
  verify_cmd->add_option("--out", out_path, "JSON report file");
  verify_cmd->add_flag("--corrupt-gradient", corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) {
      if (!vocab_path.empty()) gen.vocab = read_vocab(vocab_path);
      save_model(gen_model(gen), out_path);
      return kExitOk;
    }
    if (*explain_cmd) {
      const ExplainResult r = explain_text(load_model(model_path), text, explain);
      if (r.original_length > r.text.tokens.size()) {
        std::cerr << "warning: document truncated from " << r.original_length << " to "
                  << r.text.tokens.size() << " tokens\n";
      }
      if (!r.text.oov_positions.empty()) {
        std::cerr << "warning: " << r.text.oov_positions.size()
                  << " out-of-vocabulary token(s) mapped to UNK\n";
      }
      emit(out_path, r.report_json);
      if (!html_path.empty()) write_file(html_path, r.html);
      return kExitOk;
    }
    if (*lime_cmd) {
      lime.mode = parse_lime_mode(lime_mode);
      emit(out_path, lime_report_json(load_model(model_path), text, lime));
      return kExitOk;
    }
    if (*compare_cmd) {
      const ModelFile model = load_model(model_path);
      emit(out_path, compare_csv(model, corpus_documents(read_file(corpus_path)), compare));
      return kExitOk;
    }
    if (*verify_cmd) {
      if (corrupt) verify.gradient = corrupted_gradient;
      const std::vector<VerifyRecord> records = run_suite(suite, verify);
      for (const auto& r : records) {
        std::printf("%s  %-12s %-75s error %.3e  tol %.1e\n", r.passed ? "PASS" : "FAIL",
                    r.suite.c_str(), r.name.c_str(), r.max_error, r.tolerance);
      }
      std::fflush(stdout);
      if (!out_path.empty()) write_file(out_path, verify_report_json(records, verify.seed));
      return all_passed(records) ? kExitOk : kExitVerifyFailed;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace xattn
