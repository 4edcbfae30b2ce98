#include "sigbench/timefunc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sigbench::timefunc {

const std::array<std::string_view, kNumFunctions>& function_names() {
  static const std::array<std::string_view, kNumFunctions> names = {
      "x",        "y",          "pressure",   "theta",          "velocity",
      "log_rho",  "accel",      "dx",         "dy",             "dpressure",
      "dtheta",   "dvelocity",  "dlog_rho",   "daccel",         "ddx",
      "ddy",      "vratio5",    "alpha",      "dalpha",         "sin_alpha",
      "cos_alpha", "lw_ratio5", "lw_ratio7",
  };
  return names;
}

std::vector<double> derivative(std::span<const double> f) {
  const std::size_t n = f.size();
  if (n < 5) throw std::invalid_argument("derivative requires at least 5 samples");
  auto at = [&](std::ptrdiff_t i) {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1);
    return f[static_cast<std::size_t>(i)];
  };
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::ptrdiff_t>(k);
    d[k] = (at(i + 1) - at(i - 1) + 2.0 * (at(i + 2) - at(i - 2))) / 10.0;
  }
  return d;
}

std::vector<double> znormalize(std::span<const double> f) {
  std::vector<double> out(f.size(), 0.0);
  if (f.empty()) return out;
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.size());
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12)) return out;
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f[i] - mean) / sd;
  return out;
}

Signature resample_uniform(const Signature& sig, double hz) {
  if (!(hz > 0.0)) throw std::invalid_argument("resample rate must be positive");
  if (sig.size() < 2) throw std::invalid_argument("too few samples to resample");
  const double step = 1000.0 / hz;
  const double t0 = sig.timestamp.front();
  const double t1 = sig.timestamp.back();
  const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / step)) + 1;

  Signature out;
  out.meta = sig.meta;
  std::size_t j = 0;  // last original sample with timestamp <= t
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) * step;
    while (j + 1 < sig.size() && sig.timestamp[j + 1] <= t) ++j;
    double x = sig.x[j], y = sig.y[j], p = sig.pressure[j];
    if (j + 1 < sig.size()) {
      const double span = sig.timestamp[j + 1] - sig.timestamp[j];
      if (span > 0.0) {
        const double a = (t - sig.timestamp[j]) / span;
        x += a * (sig.x[j + 1] - x);
        y += a * (sig.y[j + 1] - y);
        p += a * (sig.pressure[j + 1] - p);
      }
    }
    out.x.push_back(x);
    out.y.push_back(y);
    out.pressure.push_back(p);
    out.timestamp.push_back(t);
    out.pen_status.push_back(sig.pen_status[j]);
  }
  return out;
}

Signature select_samples(const Signature& sig, PenUpPolicy policy) {
  bool include_up = policy == PenUpPolicy::Include;
  if (policy == PenUpPolicy::Auto) include_up = sig.meta.writing_input == WritingInput::Stylus;
  if (include_up) return sig;
  Signature out;
  out.meta = sig.meta;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (sig.pen_status[i] != 1) continue;
    out.x.push_back(sig.x[i]);
    out.y.push_back(sig.y[i]);
    out.pressure.push_back(sig.pressure[i]);
    out.timestamp.push_back(sig.timestamp[i]);
    out.pen_status.push_back(1);
  }
  return out;
}

namespace {

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

// Continuous version of a wrapped angle sequence, for differentiation.
std::vector<double> unwrap(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.size());
  if (wrapped.empty()) return out;
  out[0] = wrapped[0];
  for (std::size_t i = 1; i < wrapped.size(); ++i) {
    out[i] = out[i - 1] + wrap_angle(wrapped[i] - wrapped[i - 1]);
  }
  return out;
}

std::vector<double> length_width_ratio(std::span<const double> x, std::span<const double> y,
                                       std::size_t half) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double length = 0.0;
    double xmin = x[lo], xmax = x[lo];
    for (std::size_t k = lo; k < hi; ++k) {
      length += std::hypot(x[k + 1] - x[k], y[k + 1] - y[k]);
      xmin = std::min(xmin, x[k + 1]);
      xmax = std::max(xmax, x[k + 1]);
    }
    out[i] = std::min(length / (xmax - xmin + kEpsilon), kLengthWidthCap);
  }
  return out;
}

}  // namespace

Matrix raw_time_functions(const Signature& input, const ExtractOptions& opts) {
  Signature sig = opts.resample_hz ? resample_uniform(input, *opts.resample_hz) : input;
  sig = select_samples(sig, opts.pen_up);
  const std::size_t n = sig.size();
  if (n < 5) throw std::invalid_argument("too few samples: need at least 5, have " +
                                         std::to_string(n));

  const auto dx = derivative(sig.x);
  const auto dy = derivative(sig.y);

  std::vector<double> v(n), theta(n);
  double prev_theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::sqrt(dx[i] * dx[i] + dy[i] * dy[i]);
    theta[i] = v[i] < kEpsilon ? prev_theta : std::atan2(dy[i], dx[i]);
    prev_theta = theta[i];
  }
  const auto dtheta = derivative(unwrap(theta));
  const auto dv = derivative(v);

  std::vector<double> rho(n), accel(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = std::clamp(std::log((v[i] + kEpsilon) / (std::abs(dtheta[i]) + kEpsilon)),
                        -kLogCurvatureClamp, kLogCurvatureClamp);
    accel[i] = std::sqrt(dv[i] * dv[i] + (v[i] * dtheta[i]) * (v[i] * dtheta[i]));
  }

  std::vector<double> vratio(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, i + 2);
    const auto [mn, mx] = std::minmax_element(v.begin() + lo, v.begin() + hi + 1);
    vratio[i] = *mx < kEpsilon ? 1.0 : *mn / *mx;
  }

  std::vector<double> alpha(n);
  double prev_alpha = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double ddx = sig.x[i + 1] - sig.x[i];
    const double ddy = sig.y[i + 1] - sig.y[i];
    alpha[i] = (ddx == 0.0 && ddy == 0.0) ? prev_alpha : std::atan2(ddy, ddx);
    prev_alpha = alpha[i];
  }
  alpha[n - 1] = alpha[n - 2];

  Matrix m(n, kNumFunctions);
  m.set_column(col(Fn::X), sig.x);
  m.set_column(col(Fn::Y), sig.y);
  m.set_column(col(Fn::Pressure), sig.pressure);
  m.set_column(col(Fn::PathTangent), theta);
  m.set_column(col(Fn::Velocity), v);
  m.set_column(col(Fn::LogCurvatureRadius), rho);
  m.set_column(col(Fn::Acceleration), accel);
  m.set_column(col(Fn::dX), dx);
  m.set_column(col(Fn::dY), dy);
  m.set_column(col(Fn::dPressure), derivative(sig.pressure));
  m.set_column(col(Fn::dPathTangent), dtheta);
  m.set_column(col(Fn::dVelocity), dv);
  m.set_column(col(Fn::dLogCurvatureRadius), derivative(rho));
  m.set_column(col(Fn::dAcceleration), derivative(accel));
  m.set_column(col(Fn::ddX), derivative(dx));
  m.set_column(col(Fn::ddY), derivative(dy));
  m.set_column(col(Fn::VelocityMinMaxRatio5), vratio);
  m.set_column(col(Fn::SegmentAngle), alpha);
  m.set_column(col(Fn::dSegmentAngle), derivative(unwrap(alpha)));
  std::vector<double> s(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::sin(alpha[i]);
    c[i] = std::cos(alpha[i]);
  }
  m.set_column(col(Fn::SinSegmentAngle), s);
  m.set_column(col(Fn::CosSegmentAngle), c);
  m.set_column(col(Fn::LengthWidthRatio5), length_width_ratio(sig.x, sig.y, 2));
  m.set_column(col(Fn::LengthWidthRatio7), length_width_ratio(sig.x, sig.y, 3));

  for (double val : m.data()) {
    if (!std::isfinite(val)) throw NumericError("non-finite time function value");
  }
  return m;
}

TimeFunctionMatrix extract_time_functions(const Signature& sig, const ExtractOptions& opts) {
  TimeFunctionMatrix out;
  out.values = raw_time_functions(sig, opts);
  out.source_meta = sig.meta;
  if (opts.normalize) {
    for (std::size_t c = 0; c < kNumFunctions; ++c) {
      out.values.set_column(c, znormalize(out.values.column(c)));
    }
  }
  return out;
}

std::string to_csv(const TimeFunctionMatrix& m) {
  std::ostringstream out;
  const auto& names = function_names();
  for (std::size_t c = 0; c < kNumFunctions; ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (std::size_t r = 0; r < m.values.rows(); ++r) {
    for (std::size_t c = 0; c < m.values.cols(); ++c) {
      out << (c ? "," : "") << format_sig(m.values(r, c), 10);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sigbench::timefunc
