#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigbench/signature.hpp"
#include "sigbench/util.hpp"

namespace sigbench::timefunc {

inline constexpr std::size_t kNumFunctions = 23;

/// Column order of a TimeFunctionMatrix. Derivatives are taken with respect
/// to the sample index.
enum class Fn : std::size_t {
  X,
  Y,
  Pressure,
  PathTangent,       // theta = atan2(dy, dx)
  Velocity,          // sqrt(dx^2 + dy^2)
  LogCurvatureRadius,
  Acceleration,      // sqrt(dv^2 + (v * dtheta)^2)
  dX,
  dY,
  dPressure,
  dPathTangent,
  dVelocity,
  dLogCurvatureRadius,
  dAcceleration,
  ddX,
  ddY,
  VelocityMinMaxRatio5,
  SegmentAngle,      // alpha = atan2(y[n+1]-y[n], x[n+1]-x[n])
  dSegmentAngle,
  SinSegmentAngle,
  CosSegmentAngle,
  LengthWidthRatio5,
  LengthWidthRatio7,
};

constexpr std::size_t col(Fn f) { return static_cast<std::size_t>(f); }

const std::array<std::string_view, kNumFunctions>& function_names();

/// Channels of the baseline matcher: x, y and their first and second derivatives.
inline constexpr std::array<std::size_t, 6> kBaselineChannels = {
    col(Fn::X), col(Fn::Y), col(Fn::dX), col(Fn::dY), col(Fn::ddX), col(Fn::ddY)};

/// Channels that drive the pair pre-alignment of the recurrent matcher.
inline constexpr std::array<std::size_t, 2> kAlignmentChannels = {col(Fn::dX), col(Fn::dY)};

struct TimeFunctionMatrix {
  Matrix values;  // N x 23
  SignatureMeta source_meta;

  std::size_t rows() const { return values.rows(); }
};

enum class PenUpPolicy {
  Auto,     // include for stylus, exclude for finger
  Include,
  Exclude,
};

struct ExtractOptions {
  PenUpPolicy pen_up = PenUpPolicy::Auto;
  // Linear resampling to a uniform rate (Hz) before extraction.
  std::optional<double> resample_hz;
  bool normalize = true;
};

inline constexpr double kEpsilon = 1e-8;
inline constexpr double kLogCurvatureClamp = 10.0;
inline constexpr double kLengthWidthCap = 50.0;

/// Second-order regression derivative with edge-replicated padding:
/// d[n] = (f[n+1] - f[n-1] + 2 (f[n+2] - f[n-2])) / 10. Requires N >= 5.
std::vector<double> derivative(std::span<const double> f);

/// (f - mean) / sigma with population sigma; all zeros when sigma <= 1e-12.
std::vector<double> znormalize(std::span<const double> f);

/// Linear interpolation of x, y, pressure onto a uniform time grid; pen
/// status is taken from the last original sample at or before each grid time.
Signature resample_uniform(const Signature& sig, double hz);

/// Keeps the samples selected by the pen-up policy.
Signature select_samples(const Signature& sig, PenUpPolicy policy);

/// The 23 functions before z-normalization.
Matrix raw_time_functions(const Signature& sig, const ExtractOptions& opts = {});

TimeFunctionMatrix extract_time_functions(const Signature& sig, const ExtractOptions& opts = {});

/// Debug dump: header of function names, one row per sample.
std::string to_csv(const TimeFunctionMatrix& m);

}  // namespace sigbench::timefunc
