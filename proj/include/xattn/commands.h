// The work behind each CLI subcommand, callable without a process boundary.
#ifndef XATTN_COMMANDS_H_
#define XATTN_COMMANDS_H_

#include <span>
#include <string>
#include <vector>

#include "xattn/io.h"
#include "xattn/lime.h"

namespace xattn {

// Expands "all" to default_methods(). Throws on unknown tags.
std::vector<Method> resolve_methods(const std::vector<std::string>& tags);

struct ExplainOptions {
  std::vector<std::string> methods{"all"};
  LimeConfig lime;
  bool gxi_word_only = false;
  bool include_heads = false;
  bool timings = false;
  std::size_t mc_per_size = 2000;  // lime-limit-exact above the enumeration guard
};

struct ExplainResult {
  TokenizedText text;  // truncated to T_max
  std::size_t original_length = 0;
  double output = 0.0;
  std::vector<Explanation> explanations;
  std::optional<double> lime_intercept;
  std::string report_json;
  std::string html;
};

ExplainResult explain_text(const ModelFile& model, std::string_view text,
                           const ExplainOptions& opts);

enum class LimeMode { kEmpirical, kExact, kSampled, kApprox };
LimeMode parse_lime_mode(std::string_view name);

struct LimeOptions {
  LimeConfig cfg;
  LimeMode mode = LimeMode::kEmpirical;
  std::size_t mc_per_size = 2000;
};

std::string lime_report_json(const ModelFile& model, std::string_view text,
                             const LimeOptions& opts);

struct CompareOptions {
  LimeConfig lime;
  bool gxi_word_only = false;
  std::size_t exact_max_words = 14;
};

// Long-format CSV, header doc,kind,method_a,method_b,position,token,value.
std::string compare_csv(const ModelFile& model, const std::vector<std::string>& documents,
                        const CompareOptions& opts);

// Non-blank lines of a corpus file.
std::vector<std::string> corpus_documents(std::string_view contents);

// NaN when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);
// Pearson on average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

// Parses argv and runs a subcommand. Returns the process exit status:
// 0 success, 1 verification failure, 2 usage or IO error.
int run_cli(int argc, const char* const* argv);

}  // namespace xattn

#endif  // XATTN_COMMANDS_H_
