#include "xattn/oracles.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xattn/init.h"
#include "xattn/lime.h"
#include "xattn/parallel.h"
#include "xattn/random.h"

namespace xattn {
namespace {

__int128 abs128(__int128 x) { return x < 0 ? -x : x; }

__int128 gcd128(__int128 a, __int128 b) {
  a = abs128(a);
  b = abs128(b);
  while (b != 0) {
    const __int128 r = a % b;
    a = b;
    b = r;
  }
  return a;
}

}  // namespace

Rational::Rational(__int128 num, __int128 den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const __int128 g = gcd128(num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

std::string Rational::str() const {
  auto to_string = [](__int128 v) {
    if (v == 0) return std::string("0");
    const bool neg = v < 0;
    if (neg) v = -v;
    std::string s;
    while (v > 0) {
      s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    if (neg) s.push_back('-');
    return std::string(s.rbegin(), s.rend());
  };
  return to_string(num_) + "/" + to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
}

std::string event_name(SubsetEvent e) {
  switch (e) {
    case SubsetEvent::kANotIn: return "P(a notin S)";
    case SubsetEvent::kANotInBNotIn: return "P(a,b notin S)";
    case SubsetEvent::kANotInBIn: return "P(a notin S, b in S)";
    case SubsetEvent::kANotInBNotInCNotIn: return "P(a,b,c notin S)";
    case SubsetEvent::kANotInBInCNotIn: return "P(a,c notin S, b in S)";
  }
  return "?";
}

std::string event_name(ConditionalEvent e) {
  switch (e) {
    case ConditionalEvent::kANotIn: return "P(a notin S | ell notin S)";
    case ConditionalEvent::kAIn: return "P(a in S | ell notin S)";
    case ConditionalEvent::kANotInBNotIn: return "P(a,b notin S | ell notin S)";
  }
  return "?";
}

const std::vector<SubsetEvent>& all_subset_events() {
  static const std::vector<SubsetEvent> kAll = {
      SubsetEvent::kANotIn, SubsetEvent::kANotInBNotIn, SubsetEvent::kANotInBIn,
      SubsetEvent::kANotInBNotInCNotIn, SubsetEvent::kANotInBInCNotIn};
  return kAll;
}

const std::vector<ConditionalEvent>& all_conditional_events() {
  static const std::vector<ConditionalEvent> kAll = {
      ConditionalEvent::kANotIn, ConditionalEvent::kAIn, ConditionalEvent::kANotInBNotIn};
  return kAll;
}

namespace {

std::size_t arity(SubsetEvent e) {
  switch (e) {
    case SubsetEvent::kANotIn: return 1;
    case SubsetEvent::kANotInBNotIn:
    case SubsetEvent::kANotInBIn: return 2;
    default: return 3;
  }
}

std::size_t arity(ConditionalEvent e) { return e == ConditionalEvent::kANotInBNotIn ? 2 : 1; }

void check_indices(std::vector<std::size_t> used, std::size_t n, std::size_t s) {
  if (s > n) throw std::invalid_argument("subset size exceeds ground set");
  if (n > kMaxEnumerationSize) throw std::invalid_argument("ground set too large");
  for (std::size_t i : used) {
    if (i >= n) throw std::invalid_argument("index out of range");
  }
  std::sort(used.begin(), used.end());
  if (std::adjacent_find(used.begin(), used.end()) != used.end()) {
    throw std::invalid_argument("indices not distinct");
  }
}

std::vector<std::size_t> used_indices(SubsetEvent e, const EventIndices& idx) {
  std::vector<std::size_t> all = {idx.a, idx.b, idx.c};
  all.resize(arity(e));
  return all;
}

std::vector<std::size_t> used_indices(ConditionalEvent e, const EventIndices& idx) {
  std::vector<std::size_t> all = {idx.a, idx.b};
  all.resize(arity(e));
  all.push_back(idx.ell);
  return all;
}

bool holds(SubsetEvent e, std::uint32_t mask, const EventIndices& idx) {
  auto in = [&](std::size_t i) { return ((mask >> i) & 1U) != 0; };
  switch (e) {
    case SubsetEvent::kANotIn: return !in(idx.a);
    case SubsetEvent::kANotInBNotIn: return !in(idx.a) && !in(idx.b);
    case SubsetEvent::kANotInBIn: return !in(idx.a) && in(idx.b);
    case SubsetEvent::kANotInBNotInCNotIn: return !in(idx.a) && !in(idx.b) && !in(idx.c);
    case SubsetEvent::kANotInBInCNotIn: return !in(idx.a) && in(idx.b) && !in(idx.c);
  }
  return false;
}

bool holds(ConditionalEvent e, std::uint32_t mask, const EventIndices& idx) {
  auto in = [&](std::size_t i) { return ((mask >> i) & 1U) != 0; };
  switch (e) {
    case ConditionalEvent::kANotIn: return !in(idx.a);
    case ConditionalEvent::kAIn: return in(idx.a);
    case ConditionalEvent::kANotInBNotIn: return !in(idx.a) && !in(idx.b);
  }
  return false;
}

// Visits every subset of [n] with exactly s elements.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t s, Fn fn) {
  const std::uint32_t end = std::uint32_t{1} << n;
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) == s) fn(mask);
  }
}

}  // namespace

Rational proba_formula(SubsetEvent e, std::size_t n, std::size_t s, const EventIndices& idx) {
  check_indices(used_indices(e, idx), n, s);
  const __int128 N = static_cast<__int128>(n);
  const __int128 k = static_cast<__int128>(s);
  switch (e) {
    case SubsetEvent::kANotIn: return Rational(N - k, N);
    case SubsetEvent::kANotInBNotIn: return Rational((N - k) * (N - 1 - k), N * (N - 1));
    case SubsetEvent::kANotInBIn: return Rational(k * (N - k), N * (N - 1));
    case SubsetEvent::kANotInBNotInCNotIn:
      return Rational((N - k) * (N - k - 1) * (N - k - 2), N * (N - 1) * (N - 2));
    case SubsetEvent::kANotInBInCNotIn:
      return Rational(k * (N - k - 1) * (N - k), N * (N - 1) * (N - 2));
  }
  return Rational(0);
}

Rational cond_proba_formula(ConditionalEvent e, std::size_t n, std::size_t s,
                            const EventIndices& idx) {
  check_indices(used_indices(e, idx), n, s);
  if (s == n) throw std::invalid_argument("conditioning event is impossible when s == n");
  const __int128 N = static_cast<__int128>(n);
  const __int128 k = static_cast<__int128>(s);
  switch (e) {
    case ConditionalEvent::kANotIn: return Rational(N - 1 - k, N - 1);
    case ConditionalEvent::kAIn: return Rational(k, N - 1);
    case ConditionalEvent::kANotInBNotIn:
      return Rational((N - k - 1) * (N - k - 2), (N - 1) * (N - 2));
  }
  return Rational(0);
}

Rational proba_enumerate(SubsetEvent e, std::size_t n, std::size_t s, const EventIndices& idx) {
  check_indices(used_indices(e, idx), n, s);
  __int128 hits = 0, total = 0;
  for_each_subset(n, s, [&](std::uint32_t mask) {
    ++total;
    if (holds(e, mask, idx)) ++hits;
  });
  return Rational(hits, total);
}

Rational cond_proba_enumerate(ConditionalEvent e, std::size_t n, std::size_t s,
                              const EventIndices& idx) {
  check_indices(used_indices(e, idx), n, s);
  if (s == n) throw std::invalid_argument("conditioning event is impossible when s == n");
  __int128 hits = 0, total = 0;
  for_each_subset(n, s, [&](std::uint32_t mask) {
    if ((mask >> idx.ell) & 1U) return;
    ++total;
    if (holds(e, mask, idx)) ++hits;
  });
  return Rational(hits, total);
}

namespace {

void check_pair(const CoefficientPair& pair, std::size_t s) {
  const std::size_t n = pair.a.size();
  if (pair.b.size() != n) throw std::invalid_argument("coefficient lengths differ");
  if (n < 3) throw std::invalid_argument("conditional variance needs n >= 3");
  if (pair.ell >= n) throw std::invalid_argument("ell out of range");
  if (s > n - 1) throw std::invalid_argument("subset size must be at most n - 1");
}

}  // namespace

MeanVariance cond_variance_formula(const CoefficientPair& pair, std::size_t s) {
  check_pair(pair, s);
  const double n = static_cast<double>(pair.a.size());
  const double k = static_cast<double>(s);
  const double sum_a = std::accumulate(pair.a.begin(), pair.a.end(), 0.0);
  const double sum_b = std::accumulate(pair.b.begin(), pair.b.end(), 0.0);
  const double diff_ell = pair.a[pair.ell] - pair.b[pair.ell];

  MeanVariance out;
  out.mean = (n - 1 - k) / (n - 1) * sum_a + k / (n - 1) * sum_b + k / (n - 1) * diff_ell;

  const double diff_mean = (sum_a - sum_b) / n;
  double emp_var = 0.0;
  for (std::size_t i = 0; i < pair.a.size(); ++i) {
    const double c = pair.a[i] - pair.b[i] - diff_mean;
    emp_var += c * c;
  }
  emp_var /= n;
  const double dev = diff_ell - diff_mean;
  out.variance = n * k * (n - k - 1) / ((n - 1) * (n - 2)) * (emp_var - dev * dev / (n - 1));
  return out;
}

MeanVariance cond_variance_enumerate(const CoefficientPair& pair, std::size_t s) {
  check_pair(pair, s);
  const std::size_t n = pair.a.size();
  if (n > kMaxEnumerationSize) throw std::invalid_argument("ground set too large");
  std::vector<double> values;
  for_each_subset(n, s, [&](std::uint32_t mask) {
    if ((mask >> pair.ell) & 1U) return;
    double h = 0.0;
    for (std::size_t i = 0; i < n; ++i) h += ((mask >> i) & 1U) ? pair.b[i] : pair.a[i];
    values.push_back(h);
  });
  MeanVariance out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  for (double v : values) out.variance += (v - out.mean) * (v - out.mean);
  out.variance /= static_cast<double>(values.size());
  return out;
}

double integral_closed_form(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("integral lemma needs a > 0");
  return (a - std::log1p(a)) / (a * a);
}

double integral_quadrature(double a, std::size_t panels) {
  if (!(a > 0.0)) throw std::invalid_argument("integral lemma needs a > 0");
  if (panels == 0) throw std::invalid_argument("need at least one panel");
  const double h = 1.0 / static_cast<double>(panels);
  auto f = [a](double x) { return x / (1.0 + a * x); };
  double acc = 0.5 * (f(0.0) + f(1.0));
  for (std::size_t i = 1; i < panels; ++i) acc += f(static_cast<double>(i) * h);
  return acc * h;
}

double clamp_attention_logits(ModelParams& params, const Document& doc, double bound) {
  const EmbeddedDocument embedded = embed(doc, params);
  const Matrix unk = unk_rows(params);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.dims.att_dim));
  double smallest = 1.0;
  for (auto& head : params.heads) {
    const Vector direction = transpose_matvec(head.key, cls_query(params, head));
    double largest = 0.0;
    for (std::size_t t = 0; t < params.dims.max_len; ++t) {
      largest = std::max(largest, std::abs(dot(direction, embedded.rows.row(t))) * inv_scale);
      largest = std::max(largest, std::abs(dot(direction, unk.row(t))) * inv_scale);
    }
    if (largest > bound) {
      const double factor = bound / largest;
      for (double& w : head.query.data()) w *= factor;
      smallest = std::min(smallest, factor);
    }
  }
  return smallest;
}

namespace {

// Per-head slot quantities with a shared exponent shift.
struct CondExpHead {
  Vector g, g_unk;  // document slots [0, T)
  Matrix v, v_unk;  // T x d_out
  Vector y, y_unk;  // W_l v
  double pad_weight = 0.0;
  double sum_g = 0.0, sum_g_unk = 0.0;  // over all T_max slots
};

struct CondExpContext {
  std::size_t length = 0, words = 0, max_len = 0, out_dim = 0;
  std::vector<std::size_t> word_of;
  std::vector<CondExpHead> heads;
  Vector size_weight;  // (1/d) / C(d-1, s): uniform size, uniform subset avoiding ell
};

CondExpContext make_context(const Document& doc, const ModelParams& params) {
  const Document kept = doc.truncated(params.dims.max_len);
  CondExpContext ctx;
  ctx.length = kept.size();
  ctx.words = kept.num_words();
  ctx.max_len = params.dims.max_len;
  ctx.out_dim = params.dims.out_dim;
  if (ctx.words < 2 || ctx.words > kCondExpMaxWords) {
    throw std::invalid_argument("conditional expectation check needs 2 <= d <= " +
                                std::to_string(kCondExpMaxWords));
  }
  for (std::size_t t = 0; t < ctx.length; ++t) ctx.word_of.push_back(kept.word_of(t));

  const AttentionRecord record = forward(kept, params);
  const UnkQuantities unk = unk_quantities(kept, params);
  for (std::size_t i = 0; i < params.dims.num_heads; ++i) {
    const auto& hr = record.heads[i];
    const auto& uq = unk.heads[i];
    const auto& readout = params.heads[i].readout;
    CondExpHead h;
    h.v = Matrix(ctx.length, ctx.out_dim);
    h.v_unk = Matrix(ctx.length, ctx.out_dim);
    for (std::size_t t = 0; t < ctx.max_len; ++t) {
      h.sum_g += uq.g[t];
      h.sum_g_unk += uq.g_unk[t];
      if (t >= ctx.length) {
        h.pad_weight += uq.g[t];
        continue;
      }
      h.g.push_back(uq.g[t]);
      h.g_unk.push_back(uq.g_unk[t]);
      std::copy(hr.values.row(t).begin(), hr.values.row(t).end(), h.v.row(t).begin());
      std::copy(uq.values_unk.row(t).begin(), uq.values_unk.row(t).end(),
                h.v_unk.row(t).begin());
      h.y.push_back(dot(readout, hr.values.row(t)));
      h.y_unk.push_back(dot(readout, uq.values_unk.row(t)));
    }
    ctx.heads.push_back(std::move(h));
  }
  const std::size_t d = ctx.words;
  ctx.size_weight.assign(d + 1, 0.0);
  for (std::size_t s = 1; s < d; ++s) {
    double binom = 1.0;
    for (std::size_t k = 1; k <= s; ++k) binom = binom * static_cast<double>(d - 1 - s + k) / k;
    ctx.size_weight[s] = 1.0 / (static_cast<double>(d) * binom);
  }
  return ctx;
}

Vector cond_exp_approx(const CondExpContext& ctx, std::size_t head, std::size_t t, bool same_word) {
  const CondExpHead& h = ctx.heads[head];
  const double d = static_cast<double>(ctx.words);
  Vector out(ctx.out_dim, 0.0);
  for (std::size_t s = 1; s + 1 <= ctx.words; ++s) {
    const double x = static_cast<double>(s) / (d - 1.0);
    const double den = (1.0 - x) * h.sum_g + x * h.sum_g_unk;
    if (same_word) {
      axpy(h.g[t] / (d * den), h.v.row(t), out);
    } else {
      axpy((1.0 - x) * h.g[t] / (d * den), h.v.row(t), out);
      axpy(x * h.g_unk[t] / (d * den), h.v_unk.row(t), out);
    }
  }
  return out;
}

double vector_gap(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace

CondExpPoint cond_exp_check(const Document& doc, const ModelParams& params, std::size_t head,
                       std::size_t position, std::size_t word) {
  const CondExpContext ctx = make_context(doc, params);
  if (head >= ctx.heads.size() || position >= ctx.length || word >= ctx.words) {
    throw std::out_of_range("cond_exp_check: head, position or word out of range");
  }
  const CondExpHead& h = ctx.heads[head];
  const std::size_t d = ctx.words;
  double kept_mass = 0.0, removed_mass = 0.0;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
    if ((mask >> word) & 1U) continue;
    const double w = ctx.size_weight[std::popcount(mask)];
    double den = h.pad_weight;
    for (std::size_t u = 0; u < ctx.length; ++u) {
      den += ((mask >> ctx.word_of[u]) & 1U) ? h.g_unk[u] : h.g[u];
    }
    const bool removed = (mask >> ctx.word_of[position]) & 1U;
    const double attention = (removed ? h.g_unk[position] : h.g[position]) / den;
    (removed ? removed_mass : kept_mass) += w * attention;
  }
  CondExpPoint p;
  p.head = head;
  p.position = position;
  p.word = word;
  p.same_word = ctx.word_of[position] == word;
  p.exact.assign(ctx.out_dim, 0.0);
  axpy(kept_mass, h.v.row(position), p.exact);
  axpy(removed_mass, h.v_unk.row(position), p.exact);
  p.approx = cond_exp_approx(ctx, head, position, p.same_word);
  p.error = vector_gap(p.exact, p.approx);
  return p;
}

CondExpSweep cond_exp_sweep(const Document& doc, const ModelParams& params) {
  const CondExpContext ctx = make_context(doc, params);
  const std::size_t d = ctx.words, len = ctx.length, k = ctx.heads.size();
  const double n = static_cast<double>(ctx.max_len);

  // Per (head, t, word) attention mass split by whether xi_t was removed.
  const std::size_t cells = k * len * d;
  Vector kept_mass(cells, 0.0), removed_mass(cells, 0.0);
  // Per (head, t, word, s) moments of X = G_t y_t and Y = sum_u G_u.
  struct Moments {
    double count = 0, ratio = 0, x = 0, y = 0, y2 = 0;
    double max_abs_x = 0, min_y = INFINITY, max_y = 0;
  };
  std::vector<Moments> moments(cells * d);

  Vector g_now(len), y_now(len);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
    const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
    if (s == d) continue;
    const double w = ctx.size_weight[s];
    for (std::size_t i = 0; i < k; ++i) {
      const CondExpHead& h = ctx.heads[i];
      double den = h.pad_weight;
      for (std::size_t u = 0; u < len; ++u) {
        const bool removed = (mask >> ctx.word_of[u]) & 1U;
        g_now[u] = removed ? h.g_unk[u] : h.g[u];
        y_now[u] = removed ? h.y_unk[u] : h.y[u];
        den += g_now[u];
      }
      for (std::size_t t = 0; t < len; ++t) {
        const bool removed_t = (mask >> ctx.word_of[t]) & 1U;
        const double attention = g_now[t] / den;
        const double x = g_now[t] * y_now[t];
        for (std::size_t ell = 0; ell < d; ++ell) {
          if ((mask >> ell) & 1U) continue;
          const std::size_t cell = (i * len + t) * d + ell;
          (removed_t ? removed_mass : kept_mass)[cell] += w * attention;
          Moments& m = moments[cell * d + s];
          m.count += 1;
          m.ratio += x / den;
          m.x += x;
          m.y += den;
          m.y2 += den * den;
          m.max_abs_x = std::max(m.max_abs_x, std::abs(x));
          m.min_y = std::min(m.min_y, den);
          m.max_y = std::max(m.max_y, den);
        }
      }
    }
  }

  CondExpSweep out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t ell = 0; ell < d; ++ell) {
        const std::size_t cell = (i * len + t) * d + ell;
        CondExpPoint p;
        p.head = i;
        p.position = t;
        p.word = ell;
        p.same_word = ctx.word_of[t] == ell;
        p.exact.assign(ctx.out_dim, 0.0);
        axpy(kept_mass[cell], ctx.heads[i].v.row(t), p.exact);
        axpy(removed_mass[cell], ctx.heads[i].v_unk.row(t), p.exact);
        p.approx = cond_exp_approx(ctx, i, t, p.same_word);
        p.error = vector_gap(p.exact, p.approx);
        out.max_error = std::max(out.max_error, p.error);
        (p.same_word ? out.same_word_points : out.other_word_points) += 1;
        out.points.push_back(std::move(p));

        for (std::size_t s = 1; s < d; ++s) {
          const Moments& m = moments[cell * d + s];
          if (m.count == 0) continue;
          const double ex = m.x / m.count, ey = m.y / m.count;
          const double var_y = std::max(0.0, m.y2 / m.count - ey * ey);
          const double lhs = std::abs(m.ratio / m.count - ex / ey);
          const double c = m.min_y / n;
          const double big_c = std::max({1.0, m.max_abs_x, m.max_y / n});
          const double bound = big_c * var_y / (c * c * c * n * n * n) +
                               big_c * big_c * std::sqrt(var_y) / (c * c * n * n);
          const double tolerance = 1e-12 * std::abs(ex / ey) + 1e-15;
          ++out.ratio_checks;
          if (lhs > bound + tolerance) ++out.ratio_violations;
          if (bound > 0) out.worst_ratio_slack = std::max(out.worst_ratio_slack, lhs / bound);
        }
      }
    }
  }
  return out;
}

Vector population_lime(const Document& doc, const ModelParams& params, double bandwidth) {
  const Document kept = doc.truncated(params.dims.max_len);
  const std::size_t d = kept.num_words();
  if (d < 2 || d > kExactLimitMaxWords) {
    throw std::invalid_argument("population LIME needs 2 <= d <= " +
                                std::to_string(kExactLimitMaxWords));
  }
  const PerturbationEvaluator evaluator(kept, params);
  Matrix normal(d + 1, d + 1);
  Vector rhs(d + 1, 0.0);
  Vector z(d + 1);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
    const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
    double binom = 1.0;
    for (std::size_t k = 1; k <= s; ++k) binom = binom * static_cast<double>(d - s + k) / k;
    const double w = proximity_weight(d - s, d, bandwidth) / (static_cast<double>(d) * binom);
    const double y = evaluator.evaluate_mask(mask);
    z[0] = 1.0;
    for (std::size_t j = 0; j < d; ++j) z[j + 1] = ((mask >> j) & 1U) ? 0.0 : 1.0;
    for (std::size_t a = 0; a <= d; ++a) {
      rhs[a] += w * z[a] * y;
      for (std::size_t b = 0; b <= d; ++b) normal(a, b) += w * z[a] * z[b];
    }
  }
  return cholesky_solve(normal, rhs);
}

std::size_t ScalingConfig::max_len_for(std::size_t length) const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0,1)");
  return static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(length), 1.0 / epsilon)));
}

double median(std::vector<double> values) {
  if (values.empty()) return NAN;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

struct ScalingInstance {
  ModelParams params;
  Document doc;
};

ScalingInstance scaling_instance(const ScalingConfig& cfg, std::size_t length,
                                 std::size_t trial) {
  ModelDims dims = cfg.base_dims;
  dims.max_len = cfg.max_len_for(length);
  dims.vocab_size = std::max(dims.vocab_size, length);
  const std::uint64_t key = (static_cast<std::uint64_t>(length) << 32) | trial;
  ScalingInstance inst{random_params(dims, splitmix64(cfg.seed ^ splitmix64(key))), Document()};
  std::mt19937_64 rng = stream_for(cfg.seed + 1, key);
  inst.doc = Document(random_tokens(rng, dims.vocab_size, length, /*distinct=*/true));
  clamp_attention_logits(inst.params, inst.doc, cfg.logit_clamp);
  return inst;
}

template <typename TrialFn>
std::vector<ScalingRow> run_scaling(const ScalingConfig& cfg, TrialFn trial_fn) {
  std::vector<ScalingRow> rows;
  for (std::size_t length : cfg.lengths) {
    ScalingRow row;
    row.length = length;
    row.max_len = cfg.max_len_for(length);
    row.errors.assign(cfg.trials, 0.0);
    parallel_for(cfg.trials, [&](std::size_t trial) {
      const ScalingInstance inst = scaling_instance(cfg, length, trial);
      row.errors[trial] = trial_fn(inst, trial);
    });
    row.median = median(row.errors);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<ScalingRow> lime_attention_scaling(const ScalingConfig& cfg) {
  return run_scaling(cfg, [&](const ScalingInstance& inst, std::size_t trial) {
    const std::size_t d = inst.doc.num_words();
    const LimeResult oracle =
        d <= cfg.exact_max_words
            ? exact_limit_coefficients(inst.doc, inst.params)
            : sampled_limit_coefficients(inst.doc, inst.params, cfg.mc_per_size,
                                         splitmix64(cfg.seed ^ (0xabcdefULL + trial)));
    const LimeResult approx = approx_limit_coefficients(inst.doc, inst.params);
    double l1 = 0.0, gap = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      l1 += std::abs(oracle.word_coefficients[j]);
      const double diff = approx.word_coefficients[j] - oracle.word_coefficients[j];
      gap += diff * diff;
    }
    return std::sqrt(gap) / l1;
  });
}

std::vector<ScalingRow> cond_exp_scaling(const ScalingConfig& cfg) {
  return run_scaling(cfg, [&](const ScalingInstance& inst, std::size_t) {
    return cond_exp_sweep(inst.doc, inst.params).max_error;
  });
}

}  // namespace xattn
