#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigbench {

/// Impostor taxonomy. Random is the bona fide (zero-effort) scenario;
/// the six remaining non-genuine values are presentation attacks.
enum class ForgeryType {
  Genuine,
  Random,
  Blind,
  StaticTrained,
  StaticBlueprint,
  DynamicTrained,
  DynamicBlueprint,
  Regained,
};

inline constexpr std::array<ForgeryType, 8> kAllForgeryTypes = {
    ForgeryType::Genuine,         ForgeryType::Random,
    ForgeryType::Blind,           ForgeryType::StaticTrained,
    ForgeryType::StaticBlueprint, ForgeryType::DynamicTrained,
    ForgeryType::DynamicBlueprint, ForgeryType::Regained,
};

std::string_view to_string(ForgeryType t);
std::optional<ForgeryType> parse_forgery_type(std::string_view name);

/// True for the six presentation-attack levels.
bool is_presentation_attack(ForgeryType t);
bool is_static_level(ForgeryType t);
bool is_dynamic_level(ForgeryType t);

enum class WritingInput { Stylus, Finger };
enum class Scenario { Office, Mobile };

std::string_view to_string(WritingInput w);
std::string_view to_string(Scenario s);
std::optional<WritingInput> parse_writing_input(std::string_view name);
std::optional<Scenario> parse_scenario(std::string_view name);

struct SignatureMeta {
  std::string subject_id;
  int session = 1;
  WritingInput writing_input = WritingInput::Stylus;
  Scenario scenario = Scenario::Office;
  std::string device_id;
  ForgeryType forgery_type = ForgeryType::Genuine;
  // Present iff forgery_type is a presentation attack.
  std::optional<std::string> forger_id;

  friend bool operator==(const SignatureMeta&, const SignatureMeta&) = default;
};

/// One on-line signature: five parallel channels plus metadata.
///
/// Pen-up samples live in the same channels with pen_status == 0.
/// Timestamps are milliseconds and may repeat.
struct Signature {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> pressure;
  std::vector<double> timestamp;
  std::vector<int> pen_status;
  SignatureMeta meta;

  std::size_t size() const { return x.size(); }

  friend bool operator==(const Signature&, const Signature&) = default;
};

/// Every invariant violation found, in a fixed order. Empty means valid.
std::vector<std::string> validate_signature(const Signature& sig);

/// Inclusive index range [first, last] of one pen-down run.
struct StrokeRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t length() const { return last - first + 1; }
  friend bool operator==(const StrokeRange&, const StrokeRange&) = default;
};

/// Maximal runs of pen-down samples. Throws std::invalid_argument when the
/// signature has no pen-down sample.
std::vector<StrokeRange> segment_strokes(const Signature& sig);

}  // namespace sigbench
