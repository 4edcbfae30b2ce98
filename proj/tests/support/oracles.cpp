#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace sigbench::oracle {

DtwEnumeration enumerate_dtw(const Matrix& a, const Matrix& b,
                             std::span<const std::size_t> channels) {
  const std::size_t n = a.rows(), m = b.rows();
  auto local = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c : channels) {
      const double d = a(i, c) - b(j, c);
      s += d * d;
    }
    return std::sqrt(s);
  };

  struct Found {
    double cost;
    std::size_t len;
  };
  std::vector<Found> found;
  std::function<void(std::size_t, std::size_t, double, std::size_t)> walk =
      [&](std::size_t i, std::size_t j, double cost, std::size_t len) {
        cost += local(i, j);
        ++len;
        if (i == n - 1 && j == m - 1) {
          found.push_back({cost, len});
          return;
        }
        if (i + 1 < n) walk(i + 1, j, cost, len);
        if (j + 1 < m) walk(i, j + 1, cost, len);
        if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, cost, len);
      };
  walk(0, 0, 0.0, 0);

  DtwEnumeration e;
  e.paths = found.size();
  e.min_cost = std::numeric_limits<double>::infinity();
  for (const auto& f : found) e.min_cost = std::min(e.min_cost, f.cost);
  for (const auto& f : found) {
    if (f.cost <= e.min_cost + 1e-12) e.min_cost_lengths.push_back(f.len);
  }
  return e;
}

bool dtw_matches(const DtwEnumeration& e, double distance, double tol) {
  return std::any_of(e.min_cost_lengths.begin(), e.min_cost_lengths.end(), [&](std::size_t len) {
    return std::abs(distance - e.min_cost / static_cast<double>(len)) <= tol;
  });
}

Rates recount(const eval::ScoreSet& s, double t) {
  std::size_t fa = 0, fr = 0;
  for (double v : s.impostor) {
    if (v >= t) ++fa;
  }
  for (double v : s.genuine) {
    if (v < t) ++fr;
  }
  return {static_cast<double>(fa) / static_cast<double>(s.impostor.size()),
          static_cast<double>(fr) / static_cast<double>(s.genuine.size())};
}

std::vector<double> candidate_thresholds(const eval::ScoreSet& s) {
  std::set<double> t(s.genuine.begin(), s.genuine.end());
  t.insert(s.impostor.begin(), s.impostor.end());
  t.insert(-std::numeric_limits<double>::infinity());
  t.insert(std::numeric_limits<double>::infinity());
  return {t.begin(), t.end()};
}

double sweep_eer(const eval::ScoreSet& s) {
  const auto ts = candidate_thresholds(s);
  Rates prev{};
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const Rates r = recount(s, ts[k]);
    if (r.far == r.frr) return r.far;
    if (r.far < r.frr) {
      if (k == 0) return r.far;
      // Intersection of the segment (prev -> r) with FAR = FRR.
      const double d0 = prev.far - prev.frr;
      const double d1 = r.far - r.frr;
      const double lambda = d0 / (d0 - d1);
      return prev.far + lambda * (r.far - prev.far);
    }
    prev = r;
  }
  return prev.far;
}

double sweep_frr_at_far(const eval::ScoreSet& s, double target) {
  for (double t : candidate_thresholds(s)) {
    const Rates r = recount(s, t);
    if (r.far <= target) return r.frr;
  }
  return 1.0;
}

double bce_loss(const tarnn::TaRnnParams& p, std::span<const tarnn::TrainingExample> batch) {
  double loss = 0.0;
  for (const auto& ex : batch) {
    tarnn::ForwardCache cache;
    tarnn::forward(p, ex.pair.a, ex.pair.b, &cache);
    const double z = cache.logit;
    // -[y log s + (1-y) log(1-s)] with s = sigmoid(z)
    const double log1pexp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += log1pexp - static_cast<double>(ex.label) * z;
  }
  return loss / static_cast<double>(batch.size());
}

std::vector<double> numeric_gradient(const tarnn::TaRnnParams& p,
                                     std::span<const tarnn::TrainingExample> batch, double step) {
  tarnn::TaRnnParams q = p;
  auto w = q.flat();
  std::vector<double> g(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double orig = w[k];
    w[k] = orig + step;
    const double up = bce_loss(q, batch);
    w[k] = orig - step;
    const double down = bce_loss(q, batch);
    w[k] = orig;
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace sigbench::oracle
