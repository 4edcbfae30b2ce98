#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigbench/signature.hpp"

namespace sigbench::pad {

inline constexpr std::size_t kNumFeatures = 4;

/// Global features: they use pen status, timestamps and pressure only, so
/// they do not change under spatial scaling.
struct PadFeatures {
  std::size_t stroke_count = 1;
  double signing_time = 0.0;  // ms, last minus first timestamp
  std::size_t sample_count = 0;
  double mean_pressure = 0.0;  // over pen-down samples

  std::array<double, kNumFeatures> as_array() const;
};

/// Throws std::invalid_argument when the signature has no pen-down sample
/// or zero signing time.
PadFeatures extract_pad_features(const Signature& sig);

struct PadModel {
  std::array<double, kNumFeatures> weights{};
  double bias = 0.0;
  std::array<double, kNumFeatures> feature_mean{};
  std::array<double, kNumFeatures> feature_scale{1.0, 1.0, 1.0, 1.0};
  double threshold = 0.5;
  std::uint64_t seed = 0;

  /// Probability of bona fide.
  double probability(const PadFeatures& f) const;
};

struct FitOptions {
  std::size_t iterations = 2000;
  double learning_rate = 0.1;
};

/// Logistic regression (label 1 = bona fide) by full-batch gradient descent
/// from zero weights on z-scored features. Throws std::invalid_argument when
/// either list is empty.
PadModel fit_pad(std::span<const PadFeatures> genuine, std::span<const PadFeatures> attacks,
                 std::uint64_t seed, const FitOptions& opts = {});

enum class PadDecision { BonaFide, Attack };

struct GateResult {
  PadDecision decision = PadDecision::BonaFide;
  double probability = 0.5;
};

/// BonaFide iff probability >= threshold.
GateResult pad_gate(const PadModel& model, const PadFeatures& features);
GateResult pad_gate(const PadModel& model, const Signature& sig);

/// Verification score after the gate: 0 for a detected attack.
double gated_score(const GateResult& gate, double verification_score);

struct SweepPoint {
  double threshold = 0.0;
  double attack_accept_rate = 0.0;    // attacks classified bona fide
  double bonafide_reject_rate = 0.0;  // bona fide classified attack
};

/// Error rates of the gate at every distinct probability on a labeled set.
std::vector<SweepPoint> sweep_threshold(const PadModel& model,
                                        std::span<const PadFeatures> genuine,
                                        std::span<const PadFeatures> attacks);

std::string to_json(const PadModel& model);
/// Throws ParseError.
PadModel pad_model_from_json(std::string_view text);

}  // namespace sigbench::pad
