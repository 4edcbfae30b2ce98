#include "sigbench/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sigbench::dtw {

AlignmentResult dtw_align(const Matrix& a, const Matrix& b, std::span<const std::size_t> channels,
                          const DtwOptions& opts) {
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw_align: empty input");
  if (channels.empty()) throw std::invalid_argument("dtw_align: no channels selected");
  for (std::size_t c : channels) {
    if (c >= a.cols() || c >= b.cols()) {
      throw std::invalid_argument("dtw_align: invalid channel index " + std::to_string(c));
    }
  }

  std::size_t band = std::max(n, m);
  if (opts.band) band = std::max(*opts.band, n > m ? n - m : m - n);
  auto in_band = [&](std::size_t i, std::size_t j) {
    return (i > j ? i - j : j - i) <= band;
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // acc(i, j): minimum accumulated cost of a path from (0,0) to (i,j).
  Matrix acc(n, m, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ra = a.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      if (!in_band(i, j)) continue;
      const auto rb = b.row(j);
      double sq = 0.0;
      for (std::size_t c : channels) {
        const double d = ra[c] - rb[c];
        sq += d * d;
      }
      const double local = std::sqrt(sq);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0 && j > 0) best = acc(i - 1, j - 1);
        if (i > 0) best = std::min(best, acc(i - 1, j));
        if (j > 0) best = std::min(best, acc(i, j - 1));
      }
      acc(i, j) = best + local;
    }
  }

  AlignmentResult out;
  out.cost_raw = acc(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = acc(i - 1, j - 1);
      const double up = acc(i - 1, j);
      const double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());

  const double denom = opts.normalization == Normalization::PathLength
                           ? static_cast<double>(out.path.size())
                           : static_cast<double>(n);
  out.distance = out.cost_raw / denom;
  return out;
}

double dtw_score(std::span<const timefunc::TimeFunctionMatrix> enrolments,
                 const timefunc::TimeFunctionMatrix& probe, std::span<const std::size_t> channels,
                 const DtwOptions& opts) {
  if (enrolments.empty()) throw std::invalid_argument("dtw_score: no enrolment signatures");
  double sum = 0.0;
  for (const auto& e : enrolments) {
    sum += std::exp(-dtw_align(e.values, probe.values, channels, opts).distance);
  }
  return sum / static_cast<double>(enrolments.size());
}

}  // namespace sigbench::dtw
