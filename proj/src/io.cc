#include "xattn/io.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "xattn/init.h"

namespace xattn {
namespace {

using json = nlohmann::ordered_json;

std::string number(double x) { return json(x).dump(); }

std::string row_text(std::span<const double> row) {
  std::string out = "[";
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ", ";
    out += number(row[i]);
  }
  return out + "]";
}

void write_matrix(std::ostringstream& os, const Matrix& m, const std::string& indent) {
  os << "[\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << indent << "  " << row_text(m.row(r)) << (r + 1 < m.rows() ? ",\n" : "\n");
  }
  os << indent << "]";
}

Vector vector_from(const json& j, std::size_t expected, const char* what) {
  if (!j.is_array()) throw IoError(std::string(what) + ": expected an array");
  Vector out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw IoError(std::string(what) + ": expected numbers");
    out.push_back(x.get<double>());
  }
  if (out.size() != expected) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) +
                                " entries, got " + std::to_string(out.size()));
  }
  return out;
}

Matrix matrix_from(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array()) throw IoError(std::string(what) + ": expected an array of rows");
  if (j.size() != rows) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) +
                                " rows, got " + std::to_string(j.size()));
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = vector_from(j[r], cols, what);
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw IoError(std::string("model file: missing field \"") + key + "\"");
  }
  return j.at(key);
}

std::size_t size_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned()) throw IoError(std::string("model file: ") + key +
                                             " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

void ModelFile::validate() const {
  params.validate();
  if (vocab.size() != params.dims.vocab_size) {
    throw std::invalid_argument("vocabulary has " + std::to_string(vocab.size()) +
                                " words but D = " + std::to_string(params.dims.vocab_size));
  }
  if (unk_id >= vocab.size()) throw std::invalid_argument("unk_id out of range");
  std::unordered_set<std::string> seen;
  for (const auto& w : vocab) {
    if (w.empty()) throw std::invalid_argument("empty vocabulary entry");
    if (!seen.insert(w).second) throw std::invalid_argument("duplicate vocabulary entry: " + w);
  }
}

std::string serialize_model(const ModelFile& model) {
  model.validate();
  const ModelDims& d = model.params.dims;
  json dims = {{"vocab_size", d.vocab_size}, {"max_len", d.max_len},
               {"embed_dim", d.embed_dim},   {"att_dim", d.att_dim},
               {"out_dim", d.out_dim},       {"num_heads", d.num_heads}};
  std::ostringstream os;
  os << "{\n";
  os << "  \"format_version\": " << kModelFormatVersion << ",\n";
  os << "  \"dims\": " << dims.dump() << ",\n";
  os << "  \"vocab\": " << json(model.vocab).dump() << ",\n";
  os << "  \"unk_id\": " << model.unk_id << ",\n";
  os << "  \"unk_embedding\": " << row_text(model.params.unk_embedding) << ",\n";
  os << "  \"cls_embedding\": " << row_text(model.params.cls_embedding) << ",\n";
  os << "  \"W_e\": ";
  write_matrix(os, model.params.embeddings, "  ");
  os << ",\n  \"heads\": [\n";
  for (std::size_t i = 0; i < model.params.heads.size(); ++i) {
    const AttentionHead& h = model.params.heads[i];
    os << "    {\n";
    os << "      \"W_k\": ";
    write_matrix(os, h.key, "      ");
    os << ",\n      \"W_q\": ";
    write_matrix(os, h.query, "      ");
    os << ",\n      \"W_v\": ";
    write_matrix(os, h.value, "      ");
    os << ",\n      \"W_l\": " << row_text(h.readout) << "\n";
    os << "    }" << (i + 1 < model.params.heads.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

ModelFile parse_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("model file is not valid JSON: ") + e.what());
  }
  const json& version = field(j, "format_version");
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
    throw IoError("unsupported model format_version " + version.dump());
  }
  ModelFile model;
  const json& dims = field(j, "dims");
  ModelDims& d = model.params.dims;
  d.vocab_size = size_field(dims, "vocab_size");
  d.max_len = size_field(dims, "max_len");
  d.embed_dim = size_field(dims, "embed_dim");
  d.att_dim = size_field(dims, "att_dim");
  d.out_dim = size_field(dims, "out_dim");
  d.num_heads = size_field(dims, "num_heads");

  const json& vocab = field(j, "vocab");
  if (!vocab.is_array()) throw IoError("model file: vocab must be an array");
  for (const auto& w : vocab) {
    if (!w.is_string()) throw IoError("model file: vocab entries must be strings");
    model.vocab.push_back(w.get<std::string>());
  }
  model.unk_id = static_cast<TokenId>(size_field(j, "unk_id"));
  model.params.unk_embedding = vector_from(field(j, "unk_embedding"), d.embed_dim, "unk_embedding");
  model.params.cls_embedding = vector_from(field(j, "cls_embedding"), d.embed_dim, "cls_embedding");
  model.params.embeddings = matrix_from(field(j, "W_e"), d.vocab_size, d.embed_dim, "W_e");

  const json& heads = field(j, "heads");
  if (!heads.is_array()) throw IoError("model file: heads must be an array");
  if (heads.size() != d.num_heads) {
    throw std::invalid_argument("expected " + std::to_string(d.num_heads) + " heads, got " +
                                std::to_string(heads.size()));
  }
  for (const auto& h : heads) {
    AttentionHead head;
    head.key = matrix_from(field(h, "W_k"), d.att_dim, d.embed_dim, "W_k");
    head.query = matrix_from(field(h, "W_q"), d.att_dim, d.embed_dim, "W_q");
    head.value = matrix_from(field(h, "W_v"), d.out_dim, d.embed_dim, "W_v");
    head.readout = vector_from(field(h, "W_l"), d.out_dim, "W_l");
    model.params.heads.push_back(std::move(head));
  }
  model.validate();
  return model;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path);
  return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("error while writing " + path);
}

ModelFile load_model(const std::string& path) { return parse_model(read_file(path)); }

void save_model(const ModelFile& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

ModelFile gen_model(const GenModelOptions& opts) {
  ModelFile model;
  if (opts.vocab.empty()) {
    if (opts.dims.vocab_size == 0) throw std::invalid_argument("vocabulary size must be >= 1");
    model.vocab.push_back("[UNK]");
    for (std::size_t i = 1; i < opts.dims.vocab_size; ++i) {
      model.vocab.push_back("w" + std::to_string(i));
    }
  } else {
    std::unordered_set<std::string> seen;
    const bool has_unk =
        std::find(opts.vocab.begin(), opts.vocab.end(), "[UNK]") != opts.vocab.end();
    if (!has_unk) {
      model.vocab.push_back("[UNK]");
      seen.insert("[UNK]");
    }
    for (const auto& w : opts.vocab) {
      if (!w.empty() && seen.insert(w).second) model.vocab.push_back(w);
    }
  }
  model.unk_id = static_cast<TokenId>(
      std::find(model.vocab.begin(), model.vocab.end(), "[UNK]") - model.vocab.begin());

  ModelDims dims = opts.dims;
  dims.vocab_size = model.vocab.size();
  model.params = random_params(dims, opts.seed);
  std::copy(model.params.unk_embedding.begin(), model.params.unk_embedding.end(),
            model.params.embeddings.row(model.unk_id).begin());
  model.validate();
  return model;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) out.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

Tokenizer::Tokenizer(const ModelFile& model) : unk_id_(model.unk_id) {
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    ids_.emplace(model.vocab[i], static_cast<TokenId>(i));
  }
}

TokenizedText Tokenizer::operator()(std::string_view text) const {
  TokenizedText out;
  std::vector<TokenId> ids;
  for (auto& word : split_words(text)) {
    const auto it = ids_.find(word);
    if (it == ids_.end()) {
      out.oov_positions.push_back(ids.size());
      ids.push_back(unk_id_);
    } else {
      ids.push_back(it->second);
    }
    out.tokens.push_back(std::move(word));
  }
  out.doc = Document(std::move(ids));
  return out;
}

namespace {

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << x;
  return os.str();
}

}  // namespace

std::string render_heatmap_html(const std::vector<std::string>& tokens,
                                const std::vector<Explanation>& rows) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
     << "<title>token heatmap</title>\n<style>\n"
     << "body { font-family: sans-serif; }\n"
     << "td.method { font-family: monospace; padding-right: 1em; vertical-align: top; }\n"
     << "span.tok { padding: 1px 3px; margin: 1px; border-radius: 3px; line-height: 1.8; }\n"
     << "</style>\n</head>\n<body>\n<table>\n";
  for (const Explanation& row : rows) {
    double scale = 0.0;
    for (double w : row.weights) scale = std::max(scale, std::abs(w));
    os << "<tr><td class=\"method\">" << method_tag(row.method) << "</td><td>";
    for (std::size_t t = 0; t < tokens.size() && t < row.weights.size(); ++t) {
      const double w = row.weights[t];
      const double opacity = scale > 0.0 ? std::abs(w) / scale : 0.0;
      const char* rgb = w >= 0.0 ? "0, 160, 0" : "210, 0, 0";
      os << "<span class=\"tok\" title=\"" << number(w) << "\" style=\"background-color: rgba("
         << rgb << ", " << fixed(opacity, 4) << ")\">" << html_escape(tokens[t]) << "</span> ";
    }
    os << "</td></tr>\n";
  }
  os << "</table>\n</body>\n</html>\n";
  return os.str();
}

std::string verify_report_json(const std::vector<VerifyRecord>& records, std::uint64_t seed) {
  json checks = json::array();
  for (const auto& r : records) {
    checks.push_back({{"suite", r.suite},
                      {"name", r.name},
                      {"max_error", r.max_error},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed},
                      {"detail", r.detail}});
  }
  json report = {{"seed", seed}, {"passed", all_passed(records)}, {"checks", checks}};
  return report.dump(2) + "\n";
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace xattn
