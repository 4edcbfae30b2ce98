#include "sigbench/signature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sigbench {

namespace {

constexpr std::array<std::string_view, 8> kForgeryNames = {
    "genuine",          "random",          "blind",
    "static_trained",   "static_blueprint", "dynamic_trained",
    "dynamic_blueprint", "regained",
};

}  // namespace

std::string_view to_string(ForgeryType t) { return kForgeryNames[static_cast<std::size_t>(t)]; }

std::optional<ForgeryType> parse_forgery_type(std::string_view name) {
  for (std::size_t i = 0; i < kForgeryNames.size(); ++i) {
    if (kForgeryNames[i] == name) return static_cast<ForgeryType>(i);
  }
  return std::nullopt;
}

bool is_presentation_attack(ForgeryType t) {
  return t != ForgeryType::Genuine && t != ForgeryType::Random;
}

bool is_static_level(ForgeryType t) {
  return t == ForgeryType::StaticTrained || t == ForgeryType::StaticBlueprint;
}

bool is_dynamic_level(ForgeryType t) {
  return t == ForgeryType::DynamicTrained || t == ForgeryType::DynamicBlueprint;
}

std::string_view to_string(WritingInput w) {
  return w == WritingInput::Stylus ? "stylus" : "finger";
}

std::string_view to_string(Scenario s) { return s == Scenario::Office ? "office" : "mobile"; }

std::optional<WritingInput> parse_writing_input(std::string_view name) {
  if (name == "stylus") return WritingInput::Stylus;
  if (name == "finger") return WritingInput::Finger;
  return std::nullopt;
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "office") return Scenario::Office;
  if (name == "mobile") return Scenario::Mobile;
  return std::nullopt;
}

std::vector<std::string> validate_signature(const Signature& sig) {
  std::vector<std::string> out;
  const std::size_t n = sig.x.size();
  const bool lengths_ok = sig.y.size() == n && sig.pressure.size() == n &&
                          sig.timestamp.size() == n && sig.pen_status.size() == n;
  if (!lengths_ok) {
    out.emplace_back("channel length mismatch");
  }
  std::size_t common = n;
  for (std::size_t len : {sig.y.size(), sig.pressure.size(), sig.timestamp.size(),
                          sig.pen_status.size()}) {
    common = std::min(common, len);
  }
  if (lengths_ok && n < 2) out.emplace_back("fewer than 2 samples");

  bool any_down = false;
  for (std::size_t i = 0; i < common; ++i) {
    if (!std::isfinite(sig.x[i]) || !std::isfinite(sig.y[i]) || !std::isfinite(sig.pressure[i]) ||
        !std::isfinite(sig.timestamp[i])) {
      out.push_back("non-finite value at index " + std::to_string(i));
    }
    if (i > 0 && sig.timestamp[i] < sig.timestamp[i - 1]) {
      out.push_back("timestamp not non-decreasing at index " + std::to_string(i));
    }
    const int p = sig.pen_status[i];
    if (p != 0 && p != 1) {
      out.push_back("pen_status not binary at index " + std::to_string(i));
    }
    if (p == 1) any_down = true;
    if (sig.pressure[i] < 0.0) {
      out.push_back("negative pressure at index " + std::to_string(i));
    } else if (sig.meta.writing_input == WritingInput::Finger && sig.pressure[i] != 0.0) {
      out.push_back("non-zero pressure on finger input at index " + std::to_string(i));
    }
  }
  if (common > 0 && !any_down) out.emplace_back("no pen-down sample");

  const bool wants_forger = is_presentation_attack(sig.meta.forgery_type);
  if (wants_forger != sig.meta.forger_id.has_value()) {
    out.emplace_back(wants_forger ? "forger_id missing for presentation attack"
                                  : "forger_id present on non-attack signature");
  }
  return out;
}

std::vector<StrokeRange> segment_strokes(const Signature& sig) {
  std::vector<StrokeRange> strokes;
  const auto& pen = sig.pen_status;
  std::size_t i = 0;
  while (i < pen.size()) {
    if (pen[i] != 1) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < pen.size() && pen[j + 1] == 1) ++j;
    strokes.push_back({i, j});
    i = j + 1;
  }
  if (strokes.empty()) throw std::invalid_argument("signature has no pen-down sample");
  return strokes;
}

}  // namespace sigbench
