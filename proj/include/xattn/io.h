// Model files, tokenization and report emitters.
#ifndef XATTN_IO_H_
#define XATTN_IO_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xattn/explanation.h"
#include "xattn/model.h"
#include "xattn/verify.h"

namespace xattn {

// Unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  ModelParams params;
  std::vector<std::string> vocab;  // index = token id
  TokenId unk_id = 0;

  // Throws std::invalid_argument on shape, vocabulary or UNK id problems.
  void validate() const;
};

// Canonical text form: one matrix row per line, shortest round-trip reals.
std::string serialize_model(const ModelFile& model);
// Throws IoError on malformed input and std::invalid_argument on invalid
// contents.
ModelFile parse_model(std::string_view text);

ModelFile load_model(const std::string& path);
void save_model(const ModelFile& model, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

struct GenModelOptions {
  ModelDims dims{1000, 256, 128, 64, 64, 8};
  std::uint64_t seed = 0;
  // One word per line; "[UNK]" is prepended when missing. Empty means
  // synthetic words w1 .. w{D-1} after "[UNK]".
  std::vector<std::string> vocab;
};

// Random weights; the UNK row of W_e is set to h.
ModelFile gen_model(const GenModelOptions& opts);

struct TokenizedText {
  Document doc;
  std::vector<std::string> tokens;
  std::vector<std::size_t> oov_positions;
};

// Lowercase, split on whitespace, strip leading and trailing punctuation.
std::vector<std::string> split_words(std::string_view text);

class Tokenizer {
 public:
  explicit Tokenizer(const ModelFile& model);
  TokenizedText operator()(std::string_view text) const;

 private:
  std::unordered_map<std::string, TokenId> ids_;
  TokenId unk_id_;
};

// Background green for positive weights, red for negative, opacity
// |w| / max |w| within each row.
std::string render_heatmap_html(const std::vector<std::string>& tokens,
                                const std::vector<Explanation>& rows);

std::string verify_report_json(const std::vector<VerifyRecord>& records, std::uint64_t seed);

// RFC 4180 quoting when the field needs it.
std::string csv_field(std::string_view field);

}  // namespace xattn

#endif  // XATTN_IO_H_
