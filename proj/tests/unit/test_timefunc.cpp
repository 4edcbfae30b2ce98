#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "sigbench/timefunc.hpp"

using namespace sigbench;
using namespace sigbench::timefunc;

namespace {

Signature from_xy(const std::vector<double>& x, const std::vector<double>& y) {
  Signature s;
  s.x = x;
  s.y = y;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.pressure.push_back(100.0 + static_cast<double>(i % 3));
    s.timestamp.push_back(10.0 * static_cast<double>(i));
    s.pen_status.push_back(1);
  }
  return s;
}

void expect_normalized(const Matrix& m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto v = m.column(c);
    double mean = 0.0;
    for (double x : v) {
      ASSERT_TRUE(std::isfinite(x));
      mean += x;
    }
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    EXPECT_LT(std::abs(mean), 1e-9) << "column " << c;
    EXPECT_TRUE(sd == 0.0 || std::abs(sd - 1.0) < 1e-9) << "column " << c << " sd " << sd;
  }
}

}  // namespace

TEST(Derivative, ConstantAndRamp) {
  EXPECT_EQ(derivative(std::vector<double>{5, 5, 5, 5, 5}), std::vector<double>(5, 0.0));
  std::vector<double> ramp(9);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  const auto d = derivative(ramp);
  for (std::size_t n = 2; n <= 6; ++n) EXPECT_DOUBLE_EQ(d[n], 1.0);
  EXPECT_THROW(derivative(std::vector<double>{1, 2, 3, 4}), std::invalid_argument);
}

TEST(Derivative, SquaresWithEdgeReplication) {
  // Padded sequence 0 0 | 0 1 4 9 16 | 16 16.
  const auto d = derivative(std::vector<double>{0, 1, 4, 9, 16});
  const std::vector<double> expected{0.9, 2.2, 4.0, 4.2, 3.1};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(d[i], expected[i], 1e-15) << i;
}

TEST(Derivative, Linearity) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 5 + rng.index(40);
    std::vector<double> f(n), g(n), h(n);
    const double a = rng.normal(), b = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = rng.normal(0, 100);
      g[i] = rng.normal(0, 100);
      h[i] = a * f[i] + b * g[i];
    }
    const auto df = derivative(f), dg = derivative(g), dh = derivative(h);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(dh[i], a * df[i] + b * dg[i], 1e-9);
  }
}

TEST(Znormalize, Examples) {
  const auto z = znormalize(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(z[0], -1.2247448713915890, 1e-15);
  EXPECT_DOUBLE_EQ(z[1], 0.0);
  EXPECT_NEAR(z[2], 1.2247448713915890, 1e-15);
  EXPECT_EQ(znormalize(std::vector<double>{7, 7, 7}), std::vector<double>(3, 0.0));
  const auto again = znormalize(z);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(again[i], z[i], 1e-9);
}

TEST(Extract, TooFewSamples) {
  const auto s = from_xy({1, 2, 3, 4}, {1, 2, 3, 4});
  try {
    extract_time_functions(s);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("too few samples"), std::string::npos);
  }
}

TEST(Extract, ConstantPositionConvention) {
  const auto s = from_xy(std::vector<double>(12, 50.0), std::vector<double>(12, 70.0));
  const auto raw = raw_time_functions(s);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    EXPECT_EQ(raw(i, col(Fn::Velocity)), 0.0);
    EXPECT_EQ(raw(i, col(Fn::PathTangent)), 0.0);
  }
  const auto tf = extract_time_functions(s);
  for (Fn f : {Fn::PathTangent, Fn::Velocity, Fn::LogCurvatureRadius, Fn::Acceleration}) {
    for (std::size_t i = 0; i < tf.rows(); ++i) EXPECT_EQ(tf.values(i, col(f)), 0.0);
  }
}

TEST(Extract, UniformCircle) {
  const std::size_t n = 100;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    x[i] = 1000.0 + 500.0 * std::cos(phi);
    y[i] = 1000.0 + 500.0 * std::sin(phi);
  }
  const auto raw = raw_time_functions(from_xy(x, y));
  const double v0 = raw(n / 2, col(Fn::Velocity));
  const double r0 = raw(n / 2, col(Fn::LogCurvatureRadius));
  EXPECT_GT(v0, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    EXPECT_NEAR(raw(i, col(Fn::Velocity)) / v0, 1.0, 1e-6) << i;
  }
  for (std::size_t i = 4; i + 4 < n; ++i) {
    EXPECT_NEAR(raw(i, col(Fn::LogCurvatureRadius)), r0, 1e-6) << i;
  }
}

TEST(Extract, ShapeFinitenessAndNormalization) {
  Rng rng(8);
  for (int k = 0; k < 10000; ++k) {
    const auto input = k % 4 == 0 ? WritingInput::Finger : WritingInput::Stylus;
    const auto sig = sigbench::testing::random_signature(rng, 6 + rng.index(60), input);
    const auto tf = extract_time_functions(sig);
    ASSERT_EQ(tf.values.cols(), kNumFunctions);
    expect_normalized(tf.values);
    if (::testing::Test::HasFailure()) break;
  }
}

TEST(Extract, TranslationInvariance) {
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const auto sig = sigbench::testing::random_signature(rng, 40);
    auto moved = sig;
    const double dx = std::round(rng.uniform(-5000, 5000));
    const double dy = std::round(rng.uniform(-5000, 5000));
    for (auto& v : moved.x) v += dx;
    for (auto& v : moved.y) v += dy;
    const auto ra = raw_time_functions(sig), rb = raw_time_functions(moved);
    for (std::size_t i = 0; i < ra.rows(); ++i) {
      EXPECT_NEAR(rb(i, col(Fn::X)) - ra(i, col(Fn::X)), dx, 1e-9);
      for (std::size_t c = col(Fn::Pressure); c < kNumFunctions; ++c) {
        EXPECT_NEAR(ra(i, c), rb(i, c), 1e-9);
      }
    }
    const auto a = extract_time_functions(sig).values, b = extract_time_functions(moved).values;
    for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-9);
  }
}

TEST(Extract, Deterministic) {
  Rng rng(1);
  const auto sig = sigbench::testing::random_signature(rng, 80);
  EXPECT_EQ(extract_time_functions(sig).values, extract_time_functions(sig).values);
}

TEST(Extract, PenUpPolicy) {
  Rng rng(6);
  auto sig = sigbench::testing::random_signature(rng, 80);
  std::size_t down = 0;
  for (int p : sig.pen_status) down += p == 1 ? 1 : 0;
  ASSERT_LT(down, sig.size());
  EXPECT_EQ(extract_time_functions(sig).rows(), sig.size());
  ExtractOptions ex;
  ex.pen_up = PenUpPolicy::Exclude;
  EXPECT_EQ(extract_time_functions(sig, ex).rows(), down);

  auto finger = sig;
  finger.meta.writing_input = WritingInput::Finger;
  for (auto& p : finger.pressure) p = 0.0;
  EXPECT_EQ(extract_time_functions(finger).rows(), down);
  ExtractOptions in;
  in.pen_up = PenUpPolicy::Include;
  EXPECT_EQ(extract_time_functions(finger, in).rows(), finger.size());
}

TEST(Extract, SourceMetaAndCsv) {
  Rng rng(3);
  auto sig = sigbench::testing::random_signature(rng, 10);
  sig.meta.subject_id = "0042";
  const auto tf = extract_time_functions(sig);
  EXPECT_EQ(tf.source_meta, sig.meta);
  const auto csv = to_csv(tf);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 22);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Resample, UniformGrid) {
  Signature s = from_xy({0, 10, 20, 30, 40, 50}, {0, 0, 0, 0, 0, 0});
  s.timestamp = {0, 5, 20, 20, 35, 50};
  const auto r = resample_uniform(s, 100.0);
  ASSERT_EQ(r.size(), 6u);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(r.timestamp[i], 10.0 * static_cast<double>(i));
  EXPECT_TRUE(validate_signature(r).empty());
  EXPECT_THROW(resample_uniform(s, 0.0), std::invalid_argument);
}
