// Self-checks run by `verify`: every closed form in the library against an
// independent oracle, one record per check.
#ifndef XATTN_VERIFY_H_
#define XATTN_VERIFY_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xattn/gradient_explain.h"

namespace xattn {

struct VerifyRecord {
  std::string suite;
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  GradientFn gradient = [](const Document& doc, const ModelParams& params) {
    return gradient_closed_form(doc, params);
  };
  std::size_t gradient_models = 100;
  std::size_t structure_instances = 1000;
  std::size_t lime_models = 10;
  std::size_t lime_samples = 50000;
  std::size_t cond_exp_trials = 30;
  std::size_t scaling_trials = 40;
  std::size_t scaling_mc_per_size = 2000;
};

// "gradient", "lemmas", "expectation", "scaling", "lime", "structure".
const std::vector<std::string>& suite_names();

// `name` is one of suite_names() or "all". Throws std::invalid_argument on an
// unknown suite.
std::vector<VerifyRecord> run_suite(std::string_view name, const VerifyOptions& opts);

std::vector<VerifyRecord> verify_gradient(const VerifyOptions& opts);
std::vector<VerifyRecord> verify_lemmas(const VerifyOptions& opts);
std::vector<VerifyRecord> verify_expectation(const VerifyOptions& opts);
std::vector<VerifyRecord> verify_scaling(const VerifyOptions& opts);
std::vector<VerifyRecord> verify_lime(const VerifyOptions& opts);
std::vector<VerifyRecord> verify_structure(const VerifyOptions& opts);

bool all_passed(const std::vector<VerifyRecord>& records);

// Closed-form gradient with the sign of the attention term flipped. Test
// fixture for the harness itself.
GradientField corrupted_gradient(const Document& doc, const ModelParams& params);

// Desk-scale dimensions shared by the gradient and LIME checks.
ModelDims verify_dims();

}  // namespace xattn

#endif  // XATTN_VERIFY_H_
