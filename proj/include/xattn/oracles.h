// Brute-force and quadrature oracles for the combinatorial and analytic
// identities behind the LIME analysis: subset probabilities under a uniform
// size-s subset S of [n], the conditional law of the random sum
// H_S = sum_i a_i 1{i not in S} + b_i 1{i in S}, an elementary integral, and
// the conditional expectation of one attention-times-value term under word
// removal.

#ifndef XATTN_ORACLES_H_
#define XATTN_ORACLES_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xattn/linalg.h"
#include "xattn/model.h"

namespace xattn {

// Exact rational with a positive denominator, always reduced.
class Rational {
 public:
  Rational(__int128 num = 0, __int128 den = 1);
  __int128 num() const { return num_; }
  __int128 den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;

 private:
  __int128 num_;
  __int128 den_;
};

// Events over distinct indices a, b, c of [n].
enum class SubsetEvent {
  kANotIn,              // a not in S
  kANotInBNotIn,        // a, b not in S
  kANotInBIn,           // a not in S, b in S
  kANotInBNotInCNotIn,  // a, b, c not in S
  kANotInBInCNotIn,     // a, c not in S, b in S
};

// Events conditional on a distinguished index ell not being in S.
enum class ConditionalEvent {
  kANotIn,
  kAIn,
  kANotInBNotIn,
};

std::string event_name(SubsetEvent e);
std::string event_name(ConditionalEvent e);
const std::vector<SubsetEvent>& all_subset_events();
const std::vector<ConditionalEvent>& all_conditional_events();

struct EventIndices {
  std::size_t a = 0, b = 1, c = 2, ell = 3;
};

inline constexpr std::size_t kMaxEnumerationSize = 20;

// Closed forms. Throw std::invalid_argument when the indices the event uses
// are not distinct or out of range, or s > n.
Rational proba_formula(SubsetEvent e, std::size_t n, std::size_t s,
                       const EventIndices& idx = {});
// Throws std::invalid_argument also when s == n (conditioning impossible).
Rational cond_proba_formula(ConditionalEvent e, std::size_t n, std::size_t s,
                            const EventIndices& idx = {});

// Counting over all C(n, s) subsets, n <= kMaxEnumerationSize.
Rational proba_enumerate(SubsetEvent e, std::size_t n, std::size_t s,
                         const EventIndices& idx = {});
Rational cond_proba_enumerate(ConditionalEvent e, std::size_t n, std::size_t s,
                              const EventIndices& idx = {});

struct CoefficientPair {
  Vector a;
  Vector b;
  std::size_t ell = 0;
};

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

// Conditional mean and variance of H_S given |S| = s and ell not in S:
//   mean = ((n-1-s)/(n-1)) sum a + (s/(n-1)) sum b + (s/(n-1)) (a_ell - b_ell)
//   var  = (n s (n-s-1) / ((n-1)(n-2)))
//          * [ Var(a-b) - (a_ell - b_ell - (mean a - mean b))^2 / (n-1) ]
// with Var the 1/n empirical variance. Throws for n < 3 or s > n - 1.
MeanVariance cond_variance_formula(const CoefficientPair& pair, std::size_t s);
MeanVariance cond_variance_enumerate(const CoefficientPair& pair, std::size_t s);

// int_0^1 x / (1 + a x) dx = (a - log(1 + a)) / a^2. Throws for a <= 0.
double integral_closed_form(double a);
double integral_quadrature(double a, std::size_t panels = 1'000'000);

// Scales every head's W_q so that all [CLS] logits against document keys and
// UNK keys at every slot lie in [-bound, bound]. Returns the smallest factor
// applied (1 when nothing changed).
double clamp_attention_logits(ModelParams& params, const Document& doc, double bound);

// For one head, document position t and dictionary word ell:
//   exact  = (1/d) sum_{s=1}^{d-1} E[A_t V_t | |S| = s, ell not in S]
// by enumerating every removal set S avoiding ell, and `approx` the
// closed-form Riemann sum whose branch depends on whether xi_t is ell.
struct CondExpPoint {
  std::size_t head = 0, position = 0, word = 0;
  bool same_word = false;
  Vector exact;
  Vector approx;
  double error = 0.0;  // L2 norm of exact - approx
};

inline constexpr std::size_t kCondExpMaxWords = 14;

CondExpPoint cond_exp_check(const Document& doc, const ModelParams& params, std::size_t head,
                       std::size_t position, std::size_t word);

// Every (head, position, word) triple from one enumeration pass, plus the
// expected-ratio bound for X = G_t W_l V_t and Y = sum_u G_u at each subset
// size. Constants: c = min Y / T_max, C = max(1, max|X|, max Y / T_max).
struct CondExpSweep {
  std::vector<CondExpPoint> points;
  double max_error = 0.0;
  std::size_t same_word_points = 0;
  std::size_t other_word_points = 0;
  std::size_t ratio_checks = 0;
  std::size_t ratio_violations = 0;
  double worst_ratio_slack = 0.0;  // max of |E[X/Y] - EX/EY| / bound
};

CondExpSweep cond_exp_sweep(const Document& doc, const ModelParams& params);

// The n -> infinity solution of the LIME surrogate at bandwidth nu: the
// weighted least-squares problem with every removal set weighted by its
// sampling probability, solved exactly by enumeration. Entry 0 is the
// intercept. Throws std::invalid_argument unless 2 <= d <= kExactLimitMaxWords.
Vector population_lime(const Document& doc, const ModelParams& params, double bandwidth);

// Test regime for the large-document asymptotics: d = T = T_max^epsilon.
struct ScalingConfig {
  double epsilon = 0.5;
  std::vector<std::size_t> lengths;
  std::size_t trials = 20;
  double logit_clamp = 3.0;
  std::uint64_t seed = 0;
  // Monte Carlo subsets per removal size when d exceeds the enumeration guard.
  std::size_t mc_per_size = 2000;
  std::size_t exact_max_words = 14;
  ModelDims base_dims{256, 0, 16, 8, 8, 4};

  std::size_t max_len_for(std::size_t length) const;
};

struct ScalingRow {
  std::size_t length = 0;
  std::size_t max_len = 0;
  std::vector<double> errors;  // one per trial
  double median = 0.0;
};

double median(std::vector<double> values);

// Normalized L2 gap ||approx - oracle||_2 / sum|oracle| between the closed-form
// LIME approximation and the limit-coefficient oracle.
std::vector<ScalingRow> lime_attention_scaling(const ScalingConfig& cfg);
// Max CondExpPoint error per trial.
std::vector<ScalingRow> cond_exp_scaling(const ScalingConfig& cfg);

}  // namespace xattn

#endif  // XATTN_ORACLES_H_
