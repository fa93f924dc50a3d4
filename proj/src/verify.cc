#include "xattn/verify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xattn/attention_explain.h"
#include "xattn/init.h"
#include "xattn/lime.h"
#include "xattn/oracles.h"
#include "xattn/parallel.h"
#include "xattn/random.h"

namespace xattn {
namespace {

VerifyRecord make_record(std::string suite, std::string name, double error, double tolerance,
                         bool passed, std::string detail = {}) {
  return VerifyRecord{std::move(suite), std::move(name), error, tolerance, passed,
                      std::move(detail)};
}

// Strictly below the tolerance.
VerifyRecord below(std::string suite, std::string name, double error, double tolerance,
                   std::string detail = {}) {
  const bool ok = std::isfinite(error) && error < tolerance;
  return make_record(std::move(suite), std::move(name), error, tolerance, ok,
                     std::move(detail));
}

std::string join(const std::vector<double>& values) {
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
  return os.str();
}

// Largest ratio between consecutive entries; < 1 iff strictly decreasing.
double worst_step_ratio(const std::vector<double>& values) {
  double worst = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) worst = std::max(worst, values[i] / values[i - 1]);
  return worst;
}

ModelParams seeded_model(const ModelDims& dims, std::uint64_t seed, std::uint64_t index) {
  return random_params(dims, splitmix64(seed ^ splitmix64(index)));
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> kNames = {"gradient", "lemmas",    "expectation",
                                                  "scaling", "lime",      "structure"};
  return kNames;
}

ModelDims verify_dims() { return ModelDims{100, 32, 16, 8, 8, 4}; }

bool all_passed(const std::vector<VerifyRecord>& records) {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.passed; });
}

GradientField corrupted_gradient(const Document& doc, const ModelParams& params) {
  const EmbeddedDocument embedded = embed(doc, params);
  const AttentionRecord record = forward_from_embeddings(embedded, params);
  GradientField field = gradient_closed_form(record, embedded.length, params);
  // full = value term + attention term; return value term - attention term.
  const double inv_k = 1.0 / static_cast<double>(params.dims.num_heads);
  for (double& g : field.grads.data()) g = -g;
  for (std::size_t i = 0; i < params.dims.num_heads; ++i) {
    const Vector value_dir = transpose_matvec(params.heads[i].value, params.heads[i].readout);
    for (std::size_t t = 0; t < embedded.length; ++t) {
      axpy(2.0 * inv_k * record.heads[i].alpha[t], value_dir, field.grads.row(t));
    }
  }
  return field;
}

std::vector<VerifyRecord> verify_gradient(const VerifyOptions& opts) {
  const ModelDims dims = verify_dims();
  constexpr std::size_t kLength = 12;
  std::vector<double> worst(opts.gradient_models, 0.0);
  parallel_for(opts.gradient_models, [&](std::size_t m) {
    const ModelParams params = seeded_model(dims, opts.seed, m);
    std::mt19937_64 rng = stream_for(opts.seed + 1, m);
    const Document doc(random_tokens(rng, dims.vocab_size, kLength, false));
    const GradientField closed = opts.gradient(doc, params);
    const GradientField probe = finite_diff_gradient(doc, params);
    if (closed.grads.rows() != probe.grads.rows() || closed.grads.cols() != probe.grads.cols()) {
      worst[m] = std::numeric_limits<double>::infinity();
      return;
    }
    for (std::size_t t = 0; t < probe.grads.rows(); ++t) {
      double diff = 0.0;
      for (std::size_t c = 0; c < probe.grads.cols(); ++c) {
        diff += std::pow(closed.grads(t, c) - probe.grads(t, c), 2);
      }
      const double scale = std::max(norm2(probe.grads.row(t)), 1e-300);
      worst[m] = std::max(worst[m], std::sqrt(diff) / scale);
    }
  });
  const double max_err = *std::max_element(worst.begin(), worst.end());
  return {below("gradient", "closed form vs central differences (per-row relative L2)",
                max_err, 1e-6,
                std::to_string(opts.gradient_models) + " models, K=4 d_e=16 d_att=8 d_out=8 "
                                                       "T_max=32 T=12, step 1e-5")};
}

std::vector<VerifyRecord> verify_lemmas(const VerifyOptions& opts) {
  std::vector<VerifyRecord> out;

  std::size_t checked = 0, mismatches = 0;
  double gap = 0.0;
  for (std::size_t n = 3; n <= 10; ++n) {
    for (std::size_t s = 0; s <= n; ++s) {
      for (SubsetEvent e : all_subset_events()) {
        const Rational f = proba_formula(e, n, s), g = proba_enumerate(e, n, s);
        ++checked;
        if (!(f == g)) ++mismatches;
        gap = std::max(gap, std::abs(f.to_double() - g.to_double()));
      }
    }
  }
  out.push_back(make_record("lemmas", "subset probabilities: formula == enumeration", gap, 0.0,
                            mismatches == 0,
                            std::to_string(checked) + " exact rational comparisons, n in 3..10"));

  checked = mismatches = 0;
  gap = 0.0;
  for (std::size_t n = 4; n <= 10; ++n) {
    for (std::size_t s = 0; s < n; ++s) {
      for (ConditionalEvent e : all_conditional_events()) {
        const Rational f = cond_proba_formula(e, n, s), g = cond_proba_enumerate(e, n, s);
        ++checked;
        if (!(f == g)) ++mismatches;
        gap = std::max(gap, std::abs(f.to_double() - g.to_double()));
      }
    }
  }
  // n = 3 leaves only two free indices besides ell.
  for (std::size_t s = 0; s < 3; ++s) {
    const EventIndices idx{0, 1, 2, 2};
    for (ConditionalEvent e : all_conditional_events()) {
      const Rational f = cond_proba_formula(e, 3, s, idx), g = cond_proba_enumerate(e, 3, s, idx);
      ++checked;
      if (!(f == g)) ++mismatches;
      gap = std::max(gap, std::abs(f.to_double() - g.to_double()));
    }
  }
  out.push_back(make_record("lemmas", "conditional probabilities: formula == enumeration", gap,
                            0.0, mismatches == 0,
                            std::to_string(checked) + " exact rational comparisons, n in 3..10"));

  std::mt19937_64 rng = stream_for(opts.seed, 0x1e77a);
  std::uniform_int_distribution<std::size_t> pick_n(3, 10);
  std::normal_distribution<double> normal(0.0, 1.0);
  double var_gap = 0.0;
  std::size_t var_checks = 0;
  for (std::size_t p = 0; p < 200; ++p) {
    CoefficientPair pair;
    const std::size_t n = pick_n(rng);
    for (std::size_t i = 0; i < n; ++i) {
      pair.a.push_back(normal(rng));
      pair.b.push_back(normal(rng));
    }
    pair.ell = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t s = 1; s <= n - 1; ++s) {
      const MeanVariance f = cond_variance_formula(pair, s);
      const MeanVariance g = cond_variance_enumerate(pair, s);
      var_gap = std::max({var_gap, std::abs(f.mean - g.mean), std::abs(f.variance - g.variance)});
      ++var_checks;
    }
  }
  out.push_back(below("lemmas", "conditional mean and variance: formula vs enumeration",
                      var_gap, 1e-9,
                      std::to_string(var_checks) + " (pair, s) cases over 200 random pairs"));

  double quad_gap = 0.0;
  for (double a : {0.01, 0.1, 1.0, 10.0}) {
    quad_gap = std::max(quad_gap, std::abs(integral_closed_form(a) - integral_quadrature(a)));
  }
  out.push_back(below("lemmas", "integral: closed form vs 1e6-panel trapezoid", quad_gap, 1e-8,
                      "a in {0.01, 0.1, 1, 10}"));
  const double small_a = 1e-3;
  out.push_back(below("lemmas", "integral: small-a expansion 1/2 - a/3",
                      std::abs(integral_closed_form(small_a) - (0.5 - small_a / 3.0)), 1e-5,
                      "a = 1e-3"));
  return out;
}

std::vector<VerifyRecord> verify_expectation(const VerifyOptions& opts) {
  std::vector<VerifyRecord> out;
  ScalingConfig cfg;
  cfg.seed = opts.seed;

  // Both branches on one d = 6 instance, and the single-point routine
  // agreeing with the sweep.
  {
    ModelDims dims = cfg.base_dims;
    dims.max_len = 36;
    ModelParams params = seeded_model(dims, opts.seed, 0x9e01);
    std::mt19937_64 rng = stream_for(opts.seed, 0x9e01);
    const Document doc(random_tokens(rng, dims.vocab_size, 6, true));
    clamp_attention_logits(params, doc, cfg.logit_clamp);
    const CondExpSweep sweep = cond_exp_sweep(doc, params);
    double consistency = 0.0;
    for (const CondExpPoint& p : sweep.points) {
      if (p.head != 0) continue;
      const CondExpPoint single = cond_exp_check(doc, params, p.head, p.position, p.word);
      for (std::size_t c = 0; c < p.exact.size(); ++c) {
        consistency = std::max(consistency, std::abs(single.exact[c] - p.exact[c]));
      }
    }
    out.push_back(below("expectation", "single-point enumeration matches sweep (d=6)",
                        consistency, 1e-12));
    const bool both = sweep.same_word_points > 0 && sweep.other_word_points > 0;
    out.push_back(make_record(
        "expectation", "both branches exercised (d=6)", sweep.max_error, 0.0, both,
        std::to_string(sweep.same_word_points) + " same-word and " +
            std::to_string(sweep.other_word_points) + " other-word points"));
    out.push_back(make_record(
        "expectation", "expected-ratio bound holds at every enumerated instance",
        sweep.worst_ratio_slack, 1.0, sweep.ratio_violations == 0,
        std::to_string(sweep.ratio_checks) + " checks, " +
            std::to_string(sweep.ratio_violations) + " violations"));
  }

  // Perturbation is a no-op when every word embeds as h.
  {
    ModelDims dims = cfg.base_dims;
    dims.max_len = 36;
    ModelParams params = seeded_model(dims, opts.seed, 0x9e02);
    for (std::size_t r = 0; r < dims.vocab_size; ++r) {
      std::copy(params.unk_embedding.begin(), params.unk_embedding.end(),
                params.embeddings.row(r).begin());
    }
    std::mt19937_64 rng = stream_for(opts.seed, 0x9e02);
    const Document doc(random_tokens(rng, dims.vocab_size, 6, true));
    const CondExpSweep sweep = cond_exp_sweep(doc, params);
    double scale = 0.0;
    for (const auto& p : sweep.points) scale = std::max(scale, norm2(p.exact));
    out.push_back(below("expectation", "exact == closed form when words embed as h",
                        sweep.max_error, 1e-12 * std::max(1.0, scale)));
  }

  cfg.lengths = {6, 9, 12};
  cfg.trials = opts.cond_exp_trials;
  const std::vector<ScalingRow> rows = cond_exp_scaling(cfg);
  std::vector<double> medians;
  for (const auto& r : rows) medians.push_back(r.median);
  out.push_back(below("expectation", "median max error strictly decreasing over T = 6, 9, 12",
                      worst_step_ratio(medians), 1.0, "medians " + join(medians)));

  std::vector<double> ratios;
  std::size_t not_improved = 0;
  for (std::size_t k = 0; k < cfg.trials; ++k) {
    ratios.push_back(rows.back().errors[k] / rows.front().errors[k]);
    if (rows.back().errors[k] >= rows.front().errors[k]) ++not_improved;
  }
  out.push_back(below("expectation", "median paired ratio error(T=12) / error(T=6)",
                      median(ratios), 1.0));
  const double fraction = static_cast<double>(not_improved) / static_cast<double>(cfg.trials);
  out.push_back(below("expectation", "fraction of trials with error(T=12) >= error(T=6)",
                      fraction, 0.5));
  return out;
}

std::vector<VerifyRecord> verify_scaling(const VerifyOptions& opts) {
  ScalingConfig cfg;
  cfg.seed = opts.seed;
  cfg.lengths = {16, 32, 64};
  cfg.trials = opts.scaling_trials;
  cfg.mc_per_size = opts.scaling_mc_per_size;
  const std::vector<ScalingRow> rows = lime_attention_scaling(cfg);
  std::vector<double> medians;
  for (const auto& r : rows) medians.push_back(r.median);
  return {below("scaling",
                "median normalized L2 error strictly decreasing over d = T = 16, 32, 64",
                worst_step_ratio(medians), 1.0,
                "medians " + join(medians) + ", T_max = T^2, " +
                    std::to_string(cfg.trials) + " models, logits clamped to [-3, 3]")};
}

std::vector<VerifyRecord> verify_lime(const VerifyOptions& opts) {
  std::vector<VerifyRecord> out;
  const ModelDims dims = verify_dims();
  double gap_small_total = 0.0, gap_large_total = 0.0;
  std::size_t docs = 0;
  for (std::size_t length : {6, 8, 10}) {
    std::vector<double> gap_limit(opts.lime_models), gap_large(opts.lime_models),
        gap_small(opts.lime_models);
    for (std::size_t m = 0; m < opts.lime_models; ++m) {
      const std::uint64_t key = (length << 16) | m;
      const ModelParams params = seeded_model(dims, opts.seed, key);
      std::mt19937_64 rng = stream_for(opts.seed + 2, key);
      const Document doc(random_tokens(rng, dims.vocab_size, length, true));
      const LimeResult exact = exact_limit_coefficients(doc, params);
      const Vector population = population_lime(doc, params, 25.0);
      LimeConfig lime_cfg;
      lime_cfg.bandwidth = 25.0;
      lime_cfg.lambda = 1.0;
      lime_cfg.seed = splitmix64(opts.seed ^ key);
      auto linf = [&](std::size_t samples, auto target) {
        lime_cfg.samples = samples;
        const LimeResult fit = empirical_lime(doc, params, lime_cfg);
        double worst = 0.0;
        for (std::size_t j = 0; j < length; ++j) {
          worst = std::max(worst, std::abs(fit.word_coefficients[j] - target(j)));
        }
        return worst;
      };
      auto limit = [&](std::size_t j) { return exact.word_coefficients[j]; };
      auto surrogate = [&](std::size_t j) { return population[j + 1]; };
      gap_limit[m] = linf(opts.lime_samples, limit);
      gap_large[m] = linf(opts.lime_samples, surrogate);
      gap_small[m] = linf(2000, surrogate);
    }
    gap_large_total += std::accumulate(gap_large.begin(), gap_large.end(), 0.0);
    gap_small_total += std::accumulate(gap_small.begin(), gap_small.end(), 0.0);
    docs += opts.lime_models;
    out.push_back(below("lime",
                        "empirical vs exact limit, worst per-document Linf, d = " +
                            std::to_string(length),
                        *std::max_element(gap_limit.begin(), gap_limit.end()), 0.05,
                        std::to_string(opts.lime_models) + " models, n = " +
                            std::to_string(opts.lime_samples) + ", nu = 25, lambda = 1"));
  }
  const double mean_large = gap_large_total / static_cast<double>(docs);
  const double mean_small = gap_small_total / static_cast<double>(docs);
  out.push_back(below("lime",
                      "mean Linf gap to the n -> infinity surrogate shrinks from n = 2000 to "
                      "n = 50000",
                      mean_large / mean_small, 1.0,
                      "mean gaps " + join({mean_small, mean_large})));
  return out;
}

std::vector<VerifyRecord> verify_structure(const VerifyOptions& opts) {
  struct Worst {
    double negative = 0.0, max_below_avg = 0.0, softmax = 0.0, absent = 0.0;
  };
  std::vector<Worst> worst(opts.structure_instances);
  parallel_for(opts.structure_instances, [&](std::size_t n) {
    std::mt19937_64 rng = stream_for(opts.seed ^ 0x57c7, n);
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    ModelDims dims;
    dims.num_heads = pick(1, 4);
    dims.embed_dim = 2 * pick(1, 8);
    dims.att_dim = pick(1, 8);
    dims.out_dim = pick(1, 8);
    dims.max_len = pick(4, 32);
    dims.vocab_size = pick(2, 20);
    const ModelParams params = random_params(dims, rng());
    const Document doc(random_tokens(rng, dims.vocab_size, pick(1, 12), false));
    Worst& w = worst[n];

    const EmbeddedDocument embedded = embed(doc, params);
    const AttentionRecord record = forward_from_embeddings(embedded, params);
    const std::size_t len = embedded.length;
    const GradientField field = gradient_closed_form(record, len, params);
    const Explanation avg = alpha_avg(record, len), mx = alpha_max(record, len);
    for (const Explanation& e : {avg, mx, g_l1(field), g_l2(field)}) {
      for (double x : e.weights) w.negative = std::max(w.negative, -x);
    }
    for (std::size_t t = 0; t < len; ++t) {
      w.max_below_avg = std::max(w.max_below_avg, avg.weights[t] - mx.weights[t]);
    }

    auto check_sum = [&](std::span<const double> row) {
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      w.softmax = std::max(w.softmax, std::abs(sum - 1.0));
    };
    for (const auto& hr : record.heads) check_sum(hr.alpha);
    const UnkQuantities unk = unk_quantities(doc, params);
    for (const auto& uq : unk.heads) check_sum(uq.alpha_unk);
    for (std::size_t i = 0; i < dims.num_heads; ++i) {
      const Matrix a = attention_matrix(doc, params, i);
      for (std::size_t r = 0; r < a.rows(); ++r) check_sum(a.row(r));
    }

    const Document kept = doc.truncated(dims.max_len);
    std::vector<bool> present(dims.vocab_size, false);
    for (TokenId id : kept.ids()) present[id] = true;
    for (const LimeResult& r : {exact_limit_coefficients(doc, params),
                                approx_limit_coefficients(doc, params)}) {
      const Vector vocab = vocabulary_coefficients(kept, r.word_coefficients, dims.vocab_size);
      for (std::size_t id = 0; id < dims.vocab_size; ++id) {
        if (!present[id]) w.absent = std::max(w.absent, std::abs(vocab[id]));
      }
    }
  });

  Worst total;
  for (const Worst& w : worst) {
    total.negative = std::max(total.negative, w.negative);
    total.max_below_avg = std::max(total.max_below_avg, w.max_below_avg);
    total.softmax = std::max(total.softmax, w.softmax);
    total.absent = std::max(total.absent, w.absent);
  }
  const std::string detail = std::to_string(opts.structure_instances) + " random instances";
  return {
      make_record("structure", "alpha-avg, alpha-max, g-l1, g-l2 are non-negative",
                  total.negative, 0.0, total.negative <= 0.0, detail),
      make_record("structure", "alpha-max >= alpha-avg entry-wise", total.max_below_avg, 0.0,
                  total.max_below_avg <= 0.0, detail),
      make_record("structure", "softmax rows sum to 1", total.softmax, 1e-10,
                  total.softmax <= 1e-10, detail),
      make_record("structure", "absent-word LIME coefficients are exactly 0", total.absent, 0.0,
                  total.absent == 0.0, detail),
  };
}

std::vector<VerifyRecord> run_suite(std::string_view name, const VerifyOptions& opts) {
  if (name == "gradient") return verify_gradient(opts);
  if (name == "lemmas") return verify_lemmas(opts);
  if (name == "expectation") return verify_expectation(opts);
  if (name == "scaling") return verify_scaling(opts);
  if (name == "lime") return verify_lime(opts);
  if (name == "structure") return verify_structure(opts);
  if (name == "all") {
    std::vector<VerifyRecord> out;
    for (const auto& suite : suite_names()) {
      auto part = run_suite(suite, opts);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  throw std::invalid_argument("unknown suite: " + std::string(name));
}

}  // namespace xattn
