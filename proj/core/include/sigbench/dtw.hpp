#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sigbench/timefunc.hpp"
#include "sigbench/util.hpp"

namespace sigbench::dtw {

enum class Normalization {
  PathLength,       // accumulated cost / number of path steps
  ReferenceLength,  // accumulated cost / rows of the first argument
};

struct DtwOptions {
  // Sakoe-Chiba half-width on |i - j|; widened to |N - M| so the end cell
  // stays reachable. Unset means no band.
  std::optional<std::size_t> band;
  Normalization normalization = Normalization::PathLength;
};

struct AlignmentResult {
  double distance = 0.0;  // normalized accumulated cost
  double cost_raw = 0.0;  // accumulated cost along the path
  std::vector<std::pair<std::size_t, std::size_t>> path;
};

/// Minimum-cost monotone alignment with steps (1,0), (0,1), (1,1), unit
/// weights, and Euclidean local cost over the selected columns. The
/// backtrace prefers the diagonal on ties, then the step in A, then in B.
///
/// Throws std::invalid_argument on empty input or an invalid channel.
AlignmentResult dtw_align(const Matrix& a, const Matrix& b, std::span<const std::size_t> channels,
                          const DtwOptions& opts = {});

/// Mean over enrolments of exp(-distance). Result in (0, 1].
double dtw_score(std::span<const timefunc::TimeFunctionMatrix> enrolments,
                 const timefunc::TimeFunctionMatrix& probe, std::span<const std::size_t> channels,
                 const DtwOptions& opts = {});

}  // namespace sigbench::dtw
