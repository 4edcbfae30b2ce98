#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "oracles.hpp"
#include "sigbench/eval.hpp"

using namespace sigbench;
using namespace sigbench::eval;

namespace {

ScoreSet random_set(Rng& rng, std::size_t ng, std::size_t ni, bool ties) {
  ScoreSet s;
  auto draw = [&](double mu) {
    const double v = rng.normal(mu, 1.0);
    return ties ? std::round(v * 4.0) / 4.0 : v;
  };
  for (std::size_t i = 0; i < ng; ++i) s.genuine.push_back(draw(1.0));
  for (std::size_t i = 0; i < ni; ++i) s.impostor.push_back(draw(0.0));
  return s;
}

io::ScoreRecord record(io::Task task, ForgeryType type, double score) {
  io::ScoreRecord r;
  r.comparison.enrolment_refs = {"e"};
  r.comparison.probe_ref = "p";
  r.comparison.task = task;
  r.comparison.forgery_type = type;
  r.comparison.truth = type == ForgeryType::Genuine ? io::Truth::Genuine : io::Truth::Impostor;
  r.score = score;
  return r;
}

}  // namespace

TEST(Det, Examples) {
  EXPECT_NEAR(compute_det({{0.8, 0.6, 0.4}, {0.7, 0.5, 0.3}, {}}).eer, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(compute_det({{0.9, 0.8}, {0.1, 0.2}, {}}).eer, 0.0);
  EXPECT_EQ(compute_det({{0.5, 0.5}, {0.5, 0.5}, {}}).eer, 0.5);
  EXPECT_EQ(compute_det({{0.1}, {0.9}, {}}).eer, 1.0);
}

TEST(Det, CurveShape) {
  const auto c = compute_det({{0.8, 0.6, 0.4}, {0.7, 0.5, 0.3}, {}});
  ASSERT_EQ(c.points.size(), 8u);
  EXPECT_EQ(c.points.front().threshold, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(c.points.front().far, 1.0);
  EXPECT_EQ(c.points.front().frr, 0.0);
  EXPECT_EQ(c.points.back().far, 0.0);
  EXPECT_EQ(c.points.back().frr, 1.0);
  EXPECT_EQ(c.n_genuine, 3u);
}

TEST(Det, Errors) {
  EXPECT_THROW(compute_det({{}, {0.1}, {}}), std::invalid_argument);
  EXPECT_THROW(compute_det({{0.1}, {}, {}}), std::invalid_argument);
  EXPECT_THROW(compute_det({{std::nan("")}, {0.1}, {}}), std::invalid_argument);
}

TEST(Det, MatchesRecountOracle) {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_set(rng, 1 + rng.index(60), 1 + rng.index(60), k % 2 == 0);
    const auto c = compute_det(s);
    for (const auto& p : c.points) {
      const auto r = oracle::recount(s, p.threshold);
      EXPECT_EQ(p.far, r.far);
      EXPECT_EQ(p.frr, r.frr);
    }
    EXPECT_NEAR(c.eer, oracle::sweep_eer(s), 1e-9);
    for (double t : kDefaultOperatingTargets) {
      EXPECT_NEAR(frr_at_far(c, t).value, oracle::sweep_frr_at_far(s, t), 1e-12);
    }
  }
}

TEST(Det, Monotone) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto c = compute_det(random_set(rng, 30, 40, k % 2 == 1));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_LT(c.points[i - 1].threshold, c.points[i].threshold);
      EXPECT_LE(c.points[i].far, c.points[i - 1].far);
      EXPECT_GE(c.points[i].frr, c.points[i - 1].frr);
    }
    EXPECT_GE(c.eer, 0.0);
    EXPECT_LE(c.eer, 1.0);
  }
}

TEST(Det, EerInvariantUnderIncreasingTransform) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    auto s = random_set(rng, 25, 35, k % 2 == 0);
    auto t = s;
    for (auto& v : t.genuine) v = std::exp(0.5 * v) + 3.0;
    for (auto& v : t.impostor) v = std::exp(0.5 * v) + 3.0;
    EXPECT_NEAR(compute_det(s).eer, compute_det(t).eer, 1e-12);
  }
}

TEST(OperatingPoints, SeparableAndSentinel) {
  const auto sep = compute_det({{0.8, 0.9}, {0.1, 0.2}, {}});
  const auto op = frr_at_far(sep, 0.01);
  EXPECT_EQ(op.value, 0.0);
  EXPECT_FALSE(op.unreachable);
  EXPECT_EQ(op.threshold, 0.8);
  const auto fa = far_at_frr(sep, 0.01);
  EXPECT_EQ(fa.value, 0.0);
  EXPECT_FALSE(fa.unreachable);

  const auto bad = compute_det({{0.1}, {0.9}, {}});
  const auto u = frr_at_far(bad, 0.01);
  EXPECT_TRUE(u.unreachable);
  EXPECT_EQ(u.value, 1.0);
  const auto v = far_at_frr(bad, 0.01);
  EXPECT_FALSE(v.unreachable);
  EXPECT_EQ(v.threshold, 0.1);
  EXPECT_EQ(v.value, 1.0);

  EXPECT_THROW(frr_at_far(sep, 0.0), std::invalid_argument);
  EXPECT_THROW(far_at_frr(sep, 1.0), std::invalid_argument);
}

TEST(Probit, ClampedAndSymmetric) {
  EXPECT_EQ(normal_deviate(0.0), -4.0);
  EXPECT_EQ(normal_deviate(1.0), 4.0);
  EXPECT_EQ(normal_deviate(1e-12), -4.0);
  EXPECT_NEAR(normal_deviate(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_deviate(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_deviate(0.1), -normal_deviate(0.9), 1e-12);
}

TEST(DetCsv, SentinelsRendered) {
  const auto csv = det_to_csv(compute_det({{0.8}, {0.2}, {}}));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,far,frr,probit_far,probit_frr");
  EXPECT_NE(csv.find("\n-inf,1,0,4,-4\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\ninf,0,1,-4,4\n"), std::string::npos) << csv;
}

TEST(Protocol, StatusesAndCounts) {
  std::vector<io::ScoreRecord> scores;
  Rng rng(4);
  const std::array<ForgeryType, 4> imp{ForgeryType::Random, ForgeryType::StaticTrained,
                                       ForgeryType::DynamicBlueprint, ForgeryType::Random};
  for (int i = 0; i < 40; ++i) {
    scores.push_back(record(io::Task::Task1, ForgeryType::Genuine, rng.uniform(0.4, 1.0)));
    scores.push_back(record(io::Task::Task1, imp[static_cast<std::size_t>(i) % imp.size()],
                            rng.uniform(0.0, 0.6)));
  }
  scores.push_back(record(io::Task::Task2, ForgeryType::Genuine, 0.7));

  const auto rep = evaluate_protocol(scores);
  ASSERT_EQ(rep.tasks.size(), 3u);
  EXPECT_EQ(rep.task(io::Task::Task1).status, TaskStatus::Ok);
  EXPECT_EQ(rep.task(io::Task::Task2).status, TaskStatus::SingleClass);
  EXPECT_EQ(rep.task(io::Task::Task3).status, TaskStatus::Absent);

  const auto& t1 = rep.task(io::Task::Task1);
  std::size_t per_type = 0;
  for (const auto& c : t1.per_type) {
    per_type += c.curve.n_impostor;
    EXPECT_EQ(c.curve.n_genuine, 40u);
  }
  EXPECT_EQ(per_type, t1.overall->n_impostor);
  std::size_t per_group = 0;
  for (const auto& c : t1.per_group) per_group += c.curve.n_impostor;
  EXPECT_EQ(per_group, t1.overall->n_impostor);
  ASSERT_EQ(t1.per_group.size(), 2u);
  EXPECT_EQ(t1.per_group[0].name, "random");
  EXPECT_EQ(t1.per_group[0].curve.n_impostor, 20u);
  EXPECT_EQ(t1.frr_at_far.size(), kDefaultOperatingTargets.size());

  const auto j = nlohmann::json::parse(report_to_json(rep));
  EXPECT_EQ(j["format"], "sigbench-report");
  EXPECT_EQ(j["tasks"][0]["status"], "ok");
  EXPECT_EQ(j["tasks"][1]["status"], "single_class");
  EXPECT_EQ(j["tasks"][2]["status"], "absent");
  EXPECT_DOUBLE_EQ(j["tasks"][0]["eer"].get<double>(), t1.overall->eer);
  EXPECT_FALSE(report_summary(rep).empty());
}

TEST(Protocol, InfiniteThresholdsAreJsonNull) {
  std::vector<io::ScoreRecord> scores{record(io::Task::Task1, ForgeryType::Genuine, 0.1),
                                      record(io::Task::Task1, ForgeryType::Random, 0.9)};
  const auto j = nlohmann::json::parse(report_to_json(evaluate_protocol(scores)));
  const auto& op = j["tasks"][0]["frr_at_far"][0];
  EXPECT_TRUE(op["threshold"].is_null());
  EXPECT_TRUE(op["unreachable"].get<bool>());
}
