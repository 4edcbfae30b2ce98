#include "sigbench/pad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "sigbench/util.hpp"

namespace sigbench::pad {

std::array<double, kNumFeatures> PadFeatures::as_array() const {
  return {static_cast<double>(stroke_count), signing_time, static_cast<double>(sample_count),
          mean_pressure};
}

PadFeatures extract_pad_features(const Signature& sig) {
  PadFeatures f;
  f.stroke_count = segment_strokes(sig).size();
  f.sample_count = sig.size();
  f.signing_time = sig.timestamp.back() - sig.timestamp.front();
  if (!(f.signing_time > 0.0)) throw std::invalid_argument("signature has zero signing time");
  double sum = 0.0;
  std::size_t down = 0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (sig.pen_status[i] != 1) continue;
    sum += sig.pressure[i];
    ++down;
  }
  if (down == 0) throw std::invalid_argument("signature has no pen-down sample");
  f.mean_pressure = sum / static_cast<double>(down);
  return f;
}

double PadModel::probability(const PadFeatures& f) const {
  const auto x = f.as_array();
  double a = bias;
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    a += weights[k] * (x[k] - feature_mean[k]) / feature_scale[k];
  }
  return logistic(a);
}

PadModel fit_pad(std::span<const PadFeatures> genuine, std::span<const PadFeatures> attacks,
                 std::uint64_t seed, const FitOptions& opts) {
  if (genuine.empty() || attacks.empty()) {
    throw std::invalid_argument("fit_pad: both bona fide and attack samples are required");
  }
  PadModel model;
  model.seed = seed;

  const std::size_t n = genuine.size() + attacks.size();
  std::vector<std::array<double, kNumFeatures>> x;
  std::vector<double> y;
  x.reserve(n);
  for (const auto& f : genuine) {
    x.push_back(f.as_array());
    y.push_back(1.0);
  }
  for (const auto& f : attacks) {
    x.push_back(f.as_array());
    y.push_back(0.0);
  }

  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    double mean = 0.0;
    for (const auto& row : x) mean += row[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& row : x) var += (row[k] - mean) * (row[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.feature_mean[k] = mean;
    model.feature_scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  for (auto& row : x) {
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      row[k] = (row[k] - model.feature_mean[k]) / model.feature_scale[k];
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    std::array<double, kNumFeatures> gw{};
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double a = model.bias;
      for (std::size_t k = 0; k < kNumFeatures; ++k) a += model.weights[k] * x[i][k];
      const double err = logistic(a) - y[i];
      for (std::size_t k = 0; k < kNumFeatures; ++k) gw[k] += err * x[i][k];
      gb += err;
    }
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      model.weights[k] -= opts.learning_rate * gw[k] * inv_n;
    }
    model.bias -= opts.learning_rate * gb * inv_n;
  }
  return model;
}

GateResult pad_gate(const PadModel& model, const PadFeatures& features) {
  GateResult g;
  g.probability = model.probability(features);
  g.decision = g.probability >= model.threshold ? PadDecision::BonaFide : PadDecision::Attack;
  return g;
}

GateResult pad_gate(const PadModel& model, const Signature& sig) {
  return pad_gate(model, extract_pad_features(sig));
}

double gated_score(const GateResult& gate, double verification_score) {
  return gate.decision == PadDecision::Attack ? 0.0 : verification_score;
}

std::vector<SweepPoint> sweep_threshold(const PadModel& model,
                                        std::span<const PadFeatures> genuine,
                                        std::span<const PadFeatures> attacks) {
  std::vector<double> pg, pa;
  for (const auto& f : genuine) pg.push_back(model.probability(f));
  for (const auto& f : attacks) pa.push_back(model.probability(f));
  std::vector<double> thresholds = pg;
  thresholds.insert(thresholds.end(), pa.begin(), pa.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    SweepPoint sp{t, 0.0, 0.0};
    for (double p : pa) sp.attack_accept_rate += p >= t ? 1.0 : 0.0;
    for (double p : pg) sp.bonafide_reject_rate += p < t ? 1.0 : 0.0;
    if (!pa.empty()) sp.attack_accept_rate /= static_cast<double>(pa.size());
    if (!pg.empty()) sp.bonafide_reject_rate /= static_cast<double>(pg.size());
    out.push_back(sp);
  }
  return out;
}

std::string to_json(const PadModel& model) {
  nlohmann::json j;
  j["format"] = "sigbench-pad";
  j["version"] = 1;
  j["features"] = {"stroke_count", "signing_time", "sample_count", "mean_pressure"};
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["feature_mean"] = model.feature_mean;
  j["feature_scale"] = model.feature_scale;
  j["threshold"] = model.threshold;
  j["seed"] = model.seed;
  return j.dump(2) + "\n";
}

PadModel pad_model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "sigbench-pad") {
      throw ParseError("not a sigbench PAD model");
    }
    PadModel m;
    m.weights = j.at("weights").get<std::array<double, kNumFeatures>>();
    m.bias = j.at("bias").get<double>();
    m.feature_mean = j.at("feature_mean").get<std::array<double, kNumFeatures>>();
    m.feature_scale = j.at("feature_scale").get<std::array<double, kNumFeatures>>();
    m.threshold = j.at("threshold").get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(m.weights.begin(), m.weights.end(), finite) || !std::isfinite(m.bias) ||
        !std::all_of(m.feature_mean.begin(), m.feature_mean.end(), finite)) {
      throw ParseError("PAD model has non-finite coefficients");
    }
    for (double s : m.feature_scale) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ParseError("PAD feature scale must be positive");
    }
    if (!(m.threshold > 0.0 && m.threshold < 1.0)) {
      throw ParseError("PAD threshold must lie in (0,1)");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed PAD model: ") + e.what());
  }
}

}  // namespace sigbench::pad
