#ifndef XATTN_EXPLANATION_H_
#define XATTN_EXPLANATION_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xattn/linalg.h"

namespace xattn {

enum class Method {
  kAlphaAvg,
  kAlphaMax,
  kGradAvg,
  kGradL1,
  kGradL2,
  kGradTimesInput,
  kLimeEmpirical,
  kLimeLimitExact,
  kLimeLimitApprox,
};

// "alpha-avg", "g-l1", "lime-limit-exact", ...
std::string_view method_tag(Method m);
// Throws std::invalid_argument("unknown method: <tag>").
Method parse_method(std::string_view tag);
// The seven methods shown side by side by `explain --methods all`.
const std::vector<Method>& default_methods();

// Per-token weights aligned with document positions (padding excluded).
struct Explanation {
  Method method = Method::kAlphaAvg;
  Vector weights;
  std::optional<std::vector<std::string>> tokens;
};

}  // namespace xattn

#endif  // XATTN_EXPLANATION_H_
