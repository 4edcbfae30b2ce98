#include "sigbench/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "sigbench/util.hpp"

namespace sigbench::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_finite(const std::vector<double>& v, const char* what) {
  for (double s : v) {
    if (!std::isfinite(s)) throw std::invalid_argument(std::string("non-finite ") + what + " score");
  }
}

}  // namespace

DetCurve compute_det(const ScoreSet& scores) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw std::invalid_argument("compute_det: both classes must be non-empty");
  }
  check_finite(scores.genuine, "genuine");
  check_finite(scores.impostor, "impostor");

  std::vector<double> gen = scores.genuine;
  std::vector<double> imp = scores.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size() + 2);
  thresholds.push_back(-kInf);
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
  thresholds.push_back(kInf);
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  DetCurve curve;
  curve.n_genuine = gen.size();
  curve.n_impostor = imp.size();
  curve.points.reserve(thresholds.size());
  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  std::size_t gi = 0, ii = 0;  // counts of scores strictly below the threshold
  for (double t : thresholds) {
    while (gi < gen.size() && gen[gi] < t) ++gi;
    while (ii < imp.size() && imp[ii] < t) ++ii;
    curve.points.push_back({t, static_cast<double>(imp.size() - ii) / ni,
                            static_cast<double>(gi) / ng});
  }
  curve.eer = compute_eer(curve);
  return curve;
}

double compute_eer(const DetCurve& curve) {
  const auto& p = curve.points;
  if (p.empty()) throw std::invalid_argument("compute_eer: empty curve");
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k].far - p[k].frr;
    if (d > 0.0) continue;
    if (d == 0.0 || k == 0) return p[k].far;
    const double dprev = p[k - 1].far - p[k - 1].frr;
    const double lambda = dprev / (dprev - d);
    return p[k - 1].far + lambda * (p[k].far - p[k - 1].far);
  }
  return p.back().far;
}

OperatingPoint frr_at_far(const DetCurve& curve, double far_target) {
  if (!(far_target > 0.0 && far_target < 1.0)) {
    throw std::invalid_argument("far_target must lie in (0,1)");
  }
  OperatingPoint op;
  op.target = far_target;
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& pt = curve.points[k];
    if (pt.far > far_target) continue;
    op.threshold = pt.threshold;
    if (k + 1 == curve.points.size()) {
      op.unreachable = true;
      op.value = 1.0;
    } else {
      op.value = pt.frr;
    }
    return op;
  }
  op.unreachable = true;
  op.threshold = kInf;
  return op;
}

OperatingPoint far_at_frr(const DetCurve& curve, double frr_target) {
  if (!(frr_target > 0.0 && frr_target < 1.0)) {
    throw std::invalid_argument("frr_target must lie in (0,1)");
  }
  OperatingPoint op;
  op.target = frr_target;
  for (std::size_t k = curve.points.size(); k-- > 0;) {
    const auto& pt = curve.points[k];
    if (pt.frr > frr_target) continue;
    op.threshold = pt.threshold;
    if (k == 0) {
      op.unreachable = true;
      op.value = 1.0;
    } else {
      op.value = pt.far;
    }
    return op;
  }
  op.unreachable = true;
  op.threshold = -kInf;
  return op;
}

double normal_deviate(double p) {
  constexpr double kClamp = 4.0;
  if (p <= 0.0) return -kClamp;
  if (p >= 1.0) return kClamp;
  const boost::math::normal_distribution<double> standard;
  return std::clamp(boost::math::quantile(standard, p), -kClamp, kClamp);
}

std::string det_to_csv(const DetCurve& curve) {
  std::ostringstream out;
  out << "threshold,far,frr,probit_far,probit_frr\n";
  for (const auto& p : curve.points) {
    const std::string t = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf")
                                                  : format_sig(p.threshold, 17);
    out << t << ',' << format_sig(p.far, 17) << ',' << format_sig(p.frr, 17) << ','
        << format_sig(normal_deviate(p.far), 17) << ',' << format_sig(normal_deviate(p.frr), 17)
        << '\n';
  }
  return out.str();
}

EvalReport evaluate_protocol(std::span<const io::ScoreRecord> scores,
                             std::span<const double> targets) {
  EvalReport report;
  for (io::Task task : io::kAllTasks) {
    TaskReport tr;
    tr.task = task;
    ScoreSet all;
    std::array<ScoreSet, kAllForgeryTypes.size()> by_type;
    ScoreSet random_group, skilled_group;
    std::size_t records = 0;
    for (const auto& r : scores) {
      if (r.comparison.task != task) continue;
      ++records;
      if (r.comparison.truth == io::Truth::Genuine) {
        all.genuine.push_back(r.score);
        continue;
      }
      const ForgeryType type = r.comparison.forgery_type;
      all.impostor.push_back(r.score);
      all.impostor_types.push_back(type);
      by_type[static_cast<std::size_t>(type)].impostor.push_back(r.score);
      auto& group = is_presentation_attack(type) ? skilled_group : random_group;
      group.impostor.push_back(r.score);
    }
    if (records == 0) {
      tr.status = TaskStatus::Absent;
    } else if (all.genuine.empty() || all.impostor.empty()) {
      tr.status = TaskStatus::SingleClass;
    } else {
      tr.status = TaskStatus::Ok;
      tr.overall = compute_det(all);
      for (ForgeryType type : kAllForgeryTypes) {
        auto& set = by_type[static_cast<std::size_t>(type)];
        if (set.impostor.empty()) continue;
        set.genuine = all.genuine;
        tr.per_type.push_back({std::string(to_string(type)), compute_det(set)});
      }
      for (auto* g : {&random_group, &skilled_group}) {
        if (g->impostor.empty()) continue;
        g->genuine = all.genuine;
        tr.per_group.push_back({g == &random_group ? "random" : "skilled", compute_det(*g)});
      }
      for (double t : targets) {
        tr.frr_at_far.push_back(frr_at_far(*tr.overall, t));
        tr.far_at_frr.push_back(far_at_frr(*tr.overall, t));
      }
    }
    report.tasks.push_back(std::move(tr));
  }
  return report;
}

namespace {

std::string_view status_name(TaskStatus s) {
  switch (s) {
    case TaskStatus::Absent: return "absent";
    case TaskStatus::SingleClass: return "single_class";
    case TaskStatus::Ok: return "ok";
  }
  return "absent";
}

nlohmann::json curve_summary(const DetCurve& c) {
  return {{"eer", c.eer}, {"n_genuine", c.n_genuine}, {"n_impostor", c.n_impostor}};
}

nlohmann::json ops_json(const std::vector<OperatingPoint>& ops, const char* target_key,
                        const char* value_key) {
  auto arr = nlohmann::json::array();
  for (const auto& op : ops) {
    nlohmann::json j = {{target_key, op.target}, {value_key, op.value},
                        {"unreachable", op.unreachable}};
    // +-inf sentinels are not representable in JSON.
    j["threshold"] = std::isfinite(op.threshold) ? nlohmann::json(op.threshold) : nlohmann::json();
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["format"] = "sigbench-report";
  j["version"] = 1;
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (const auto& tr : report.tasks) {
    nlohmann::json t = {{"task", io::task_number(tr.task)}, {"status", status_name(tr.status)}};
    if (tr.overall) {
      t["overall"] = curve_summary(*tr.overall);
      t["eer"] = tr.overall->eer;
      auto& per_type = t["per_type"] = nlohmann::json::object();
      for (const auto& nc : tr.per_type) per_type[nc.name] = curve_summary(nc.curve);
      auto& per_group = t["per_group"] = nlohmann::json::object();
      for (const auto& nc : tr.per_group) per_group[nc.name] = curve_summary(nc.curve);
      t["frr_at_far"] = ops_json(tr.frr_at_far, "far", "frr");
      t["far_at_frr"] = ops_json(tr.far_at_frr, "frr", "far");
    }
    tasks.push_back(std::move(t));
  }
  return j.dump(2) + "\n";
}

std::string report_summary(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& tr : report.tasks) {
    out << "Task " << io::task_number(tr.task) << ": " << status_name(tr.status);
    if (!tr.overall) {
      out << '\n';
      continue;
    }
    out << "  EER " << format_fixed(100.0 * tr.overall->eer, 2) << "%  (" << tr.overall->n_genuine
        << " genuine / " << tr.overall->n_impostor << " impostor)\n";
    for (const auto& nc : tr.per_group) {
      out << "    group " << nc.name << ": EER " << format_fixed(100.0 * nc.curve.eer, 2) << "%\n";
    }
    for (const auto& nc : tr.per_type) {
      out << "    " << nc.name << ": EER " << format_fixed(100.0 * nc.curve.eer, 2) << "%\n";
    }
    for (const auto& op : tr.frr_at_far) {
      out << "    FRR @ FAR " << format_fixed(100.0 * op.target, 1) << "% = "
          << format_fixed(100.0 * op.value, 2) << '%' << (op.unreachable ? " (unreachable)" : "")
          << '\n';
    }
  }
  return out.str();
}

}  // namespace sigbench::eval
