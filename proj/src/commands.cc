#include "xattn/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "xattn/attention_explain.h"
#include "xattn/gradient_explain.h"
#include "xattn/parallel.h"

namespace xattn {
namespace {

using json = nlohmann::ordered_json;

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string number(double x) {
  if (std::isnan(x)) return "nan";
  return json(x).dump();
}

struct Truncated {
  TokenizedText text;
  std::size_t original_length = 0;
};

Truncated tokenize_truncated(const ModelFile& model, std::string_view raw) {
  Truncated out;
  out.text = Tokenizer(model)(raw);
  out.original_length = out.text.tokens.size();
  const std::size_t max_len = model.params.dims.max_len;
  if (out.original_length > max_len) {
    out.text.doc = out.text.doc.truncated(max_len);
    out.text.tokens.resize(max_len);
    std::erase_if(out.text.oov_positions, [&](std::size_t t) { return t >= max_len; });
  }
  return out;
}

// Lazily computed pieces shared by the explainers of one document.
class ExplainContext {
 public:
  ExplainContext(const ModelParams& params, const Document& doc)
      : params_(params), doc_(doc), embedded_(embed(doc, params)),
        record_(forward_from_embeddings(embedded_, params)) {}

  const AttentionRecord& record() const { return record_; }
  const EmbeddedDocument& embedded() const { return embedded_; }

  const GradientField& gradient() {
    if (!gradient_) gradient_ = gradient_closed_form(record_, embedded_.length, params_);
    return *gradient_;
  }

  Explanation compute(Method m, const LimeConfig& lime, bool gxi_word_only,
                      std::size_t mc_per_size) {
    const std::size_t len = embedded_.length;
    switch (m) {
      case Method::kAlphaAvg: return alpha_avg(record_, len);
      case Method::kAlphaMax: return alpha_max(record_, len);
      case Method::kGradAvg: return g_avg(gradient());
      case Method::kGradL1: return g_l1(gradient());
      case Method::kGradL2: return g_l2(gradient());
      case Method::kGradTimesInput:
        return gxi_word_only ? g_times_word(gradient(), doc_, params_)
                             : g_times_input(gradient(), embedded_);
      case Method::kLimeEmpirical: {
        if (doc_.empty()) return Explanation{m, {}, std::nullopt};
        const LimeResult r = empirical_lime(doc_, params_, lime);
        lime_intercept = r.intercept;
        empirical_words = r.word_coefficients;
        return r.explanation;
      }
      case Method::kLimeLimitExact: {
        if (doc_.empty()) return Explanation{m, {}, std::nullopt};
        const LimeResult r = doc_.num_words() <= kExactLimitMaxWords
                                 ? exact_limit_coefficients(doc_, params_)
                                 : sampled_limit_coefficients(doc_, params_, mc_per_size,
                                                              lime.seed);
        return r.explanation;
      }
      case Method::kLimeLimitApprox: {
        const LimeResult r = approx_limit_coefficients(doc_, params_);
        approx_words = r.word_coefficients;
        return r.explanation;
      }
    }
    throw std::logic_error("unhandled method");
  }

  std::optional<double> lime_intercept;
  Vector empirical_words;
  Vector approx_words;

 private:
  const ModelParams& params_;
  const Document& doc_;
  EmbeddedDocument embedded_;
  AttentionRecord record_;
  std::optional<GradientField> gradient_;
};

json lime_metadata(const LimeConfig& cfg) {
  return {{"seed", cfg.seed},
          {"samples", cfg.samples},
          {"bandwidth", cfg.bandwidth},
          {"lambda", cfg.lambda}};
}

}  // namespace

std::vector<Method> resolve_methods(const std::vector<std::string>& tags) {
  std::vector<Method> out;
  for (const auto& tag : tags) {
    if (tag == "all") {
      for (Method m : default_methods()) out.push_back(m);
    } else {
      out.push_back(parse_method(tag));
    }
  }
  if (out.empty()) throw std::invalid_argument("no methods requested");
  return out;
}

ExplainResult explain_text(const ModelFile& model, std::string_view text,
                           const ExplainOptions& opts) {
  const std::vector<Method> methods = resolve_methods(opts.methods);
  opts.lime.validate();
  Stopwatch total;
  ExplainResult result;
  Truncated tok = tokenize_truncated(model, text);
  result.text = std::move(tok.text);
  result.original_length = tok.original_length;

  ExplainContext ctx(model.params, result.text.doc);
  result.output = ctx.record().output;
  json timings = json::object();
  json rows = json::array();
  for (Method m : methods) {
    Stopwatch sw;
    Explanation e = ctx.compute(m, opts.lime, opts.gxi_word_only, opts.mc_per_size);
    e.tokens = result.text.tokens;
    timings[std::string(method_tag(m))] = sw.elapsed_ms();
    rows.push_back({{"method", method_tag(m)}, {"weights", e.weights}});
    result.explanations.push_back(std::move(e));
  }
  result.lime_intercept = ctx.lime_intercept;

  json heads = nullptr;
  if (opts.include_heads) {
    heads = json::array();
    for (const auto& hr : ctx.record().heads) {
      heads.push_back(Vector(hr.alpha.begin(), hr.alpha.begin() + result.text.tokens.size()));
    }
  }
  json metadata = {{"lime", lime_metadata(opts.lime)},
                   {"gxi_word_only", opts.gxi_word_only},
                   {"max_len", model.params.dims.max_len}};
  if (opts.timings) {
    timings["total"] = total.elapsed_ms();
    metadata["timings_ms"] = timings;
  } else {
    metadata["timings_ms"] = nullptr;
  }
  json report = {
      {"tokens", result.text.tokens},
      {"oov_positions", result.text.oov_positions},
      {"original_length", result.original_length},
      {"output", result.output},
      {"label", classify_positive(result.output) ? "positive" : "negative"},
      {"explanations", rows},
      {"lime_intercept",
       result.lime_intercept ? json(*result.lime_intercept) : json(nullptr)},
      {"attention_heads", heads},
      {"metadata", metadata},
  };
  result.report_json = report.dump(2) + "\n";
  result.html = render_heatmap_html(result.text.tokens, result.explanations);
  return result;
}

LimeMode parse_lime_mode(std::string_view name) {
  if (name == "empirical") return LimeMode::kEmpirical;
  if (name == "exact") return LimeMode::kExact;
  if (name == "sampled") return LimeMode::kSampled;
  if (name == "approx") return LimeMode::kApprox;
  throw std::invalid_argument("unknown LIME mode: " + std::string(name));
}

std::string lime_report_json(const ModelFile& model, std::string_view text,
                             const LimeOptions& opts) {
  opts.cfg.validate();
  const Truncated tok = tokenize_truncated(model, text);
  const Document& doc = tok.text.doc;
  if (doc.empty()) throw std::invalid_argument("cannot run LIME on an empty document");
  LimeResult r;
  const char* mode = "";
  switch (opts.mode) {
    case LimeMode::kEmpirical:
      r = empirical_lime(doc, model.params, opts.cfg);
      mode = "empirical";
      break;
    case LimeMode::kExact:
      r = exact_limit_coefficients(doc, model.params);
      mode = "exact";
      break;
    case LimeMode::kSampled:
      r = sampled_limit_coefficients(doc, model.params, opts.mc_per_size, opts.cfg.seed);
      mode = "sampled";
      break;
    case LimeMode::kApprox:
      r = approx_limit_coefficients(doc, model.params);
      mode = "approx";
      break;
  }
  json words = json::array();
  for (std::size_t j = 0; j < doc.num_words(); ++j) {
    words.push_back({{"word", model.vocab[doc.dictionary()[j]]},
                     {"coefficient", r.word_coefficients[j]}});
  }
  json metadata = lime_metadata(opts.cfg);
  metadata["mc_per_size"] = opts.mc_per_size;
  json report = {
      {"tokens", tok.text.tokens},
      {"oov_positions", tok.text.oov_positions},
      {"original_length", tok.original_length},
      {"mode", mode},
      {"words", words},
      {"weights", r.explanation.weights},
      {"intercept", opts.mode == LimeMode::kEmpirical ? json(r.intercept) : json(nullptr)},
      {"metadata", metadata},
  };
  return report.dump(2) + "\n";
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

namespace {

Vector average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  Vector ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  return pearson(average_ranks(a), average_ranks(b));
}

std::vector<std::string> corpus_documents(std::string_view contents) {
  std::vector<std::string> docs;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) docs.push_back(line);
  }
  return docs;
}

std::string compare_csv(const ModelFile& model, const std::vector<std::string>& documents,
                        const CompareOptions& opts) {
  opts.lime.validate();
  std::vector<Method> methods = default_methods();
  methods.push_back(Method::kLimeLimitApprox);

  std::vector<std::string> blocks(documents.size());
  parallel_for(documents.size(), [&](std::size_t k) {
    const Truncated tok = tokenize_truncated(model, documents[k]);
    const Document& doc = tok.text.doc;
    std::ostringstream os;
    const std::string id = std::to_string(k);
    auto line = [&](std::string_view kind, std::string_view a, std::string_view b,
                    const std::string& position, std::string_view token, double value) {
      os << id << ',' << kind << ',' << a << ',' << b << ',' << position << ','
         << csv_field(token) << ',' << number(value) << '\n';
    };

    ExplainContext ctx(model.params, doc);
    std::vector<Explanation> rows;
    for (Method m : methods) rows.push_back(ctx.compute(m, opts.lime, opts.gxi_word_only, 0));
    for (const auto& e : rows) {
      for (std::size_t t = 0; t < e.weights.size(); ++t) {
        line("weight", method_tag(e.method), "", std::to_string(t), tok.text.tokens[t],
             e.weights[t]);
      }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        line("pearson", method_tag(rows[i].method), method_tag(rows[j].method), "", "",
             pearson(rows[i].weights, rows[j].weights));
        line("spearman", method_tag(rows[i].method), method_tag(rows[j].method), "", "",
             spearman(rows[i].weights, rows[j].weights));
      }
    }
    if (!doc.empty()) {
      double gap = 0.0;
      for (std::size_t j = 0; j < doc.num_words(); ++j) {
        gap += std::pow(ctx.empirical_words[j] - ctx.approx_words[j], 2);
      }
      line("l2_gap", method_tag(Method::kLimeEmpirical), method_tag(Method::kLimeLimitApprox),
           "", "", std::sqrt(gap));
      if (doc.num_words() <= opts.exact_max_words) {
        const LimeResult exact = exact_limit_coefficients(doc, model.params);
        double linf = 0.0;
        for (std::size_t j = 0; j < doc.num_words(); ++j) {
          linf = std::max(linf, std::abs(ctx.empirical_words[j] - exact.word_coefficients[j]));
        }
        line("linf_gap", method_tag(Method::kLimeEmpirical),
             method_tag(Method::kLimeLimitExact), "", "", linf);
      }
    }
    blocks[k] = os.str();
  });

  std::string out = "doc,kind,method_a,method_b,position,token,value\n";
  for (const auto& b : blocks) out += b;
  return out;
}

}  // namespace xattn
