#include "xattn/explanation.h"

#include <array>
#include <stdexcept>
#include <string>
#include <utility>

namespace xattn {
namespace {

constexpr std::array<std::pair<Method, std::string_view>, 9> kTags = {{
    {Method::kAlphaAvg, "alpha-avg"},
    {Method::kAlphaMax, "alpha-max"},
    {Method::kGradAvg, "g-avg"},
    {Method::kGradL1, "g-l1"},
    {Method::kGradL2, "g-l2"},
    {Method::kGradTimesInput, "gxi"},
    {Method::kLimeEmpirical, "lime-empirical"},
    {Method::kLimeLimitExact, "lime-limit-exact"},
    {Method::kLimeLimitApprox, "lime-limit-approx"},
}};

}  // namespace

std::string_view method_tag(Method m) {
  for (const auto& [method, tag] : kTags) {
    if (method == m) return tag;
  }
  return "unknown";
}

Method parse_method(std::string_view tag) {
  for (const auto& [method, name] : kTags) {
    if (name == tag) return method;
  }
  throw std::invalid_argument("unknown method: " + std::string(tag));
}

const std::vector<Method>& default_methods() {
  static const std::vector<Method> kDefault = {
      Method::kAlphaAvg, Method::kAlphaMax,       Method::kLimeEmpirical, Method::kGradAvg,
      Method::kGradL1,   Method::kGradL2,         Method::kGradTimesInput,
  };
  return kDefault;
}

}  // namespace xattn
