#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigbench/data_io.hpp"
#include "sigbench/signature.hpp"

namespace sigbench::eval {

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<ForgeryType> impostor_types;  // parallel to impostor; may be empty
};

struct DetPoint {
  double threshold = 0.0;  // accept iff score >= threshold
  double far = 0.0;
  double frr = 0.0;
};

/// Points ordered by increasing threshold: -inf, every distinct score, +inf.
struct DetCurve {
  std::vector<DetPoint> points;
  double eer = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

/// Throws std::invalid_argument if either class is empty or a score is
/// not finite.
DetCurve compute_det(const ScoreSet& scores);

/// Crossing of FAR and FRR, linearly interpolated between the two
/// bracketing thresholds.
double compute_eer(const DetCurve& curve);

struct OperatingPoint {
  double target = 0.0;
  double threshold = 0.0;
  double value = 1.0;        // FRR for a FAR query, FAR for an FRR query
  bool unreachable = false;  // only satisfied at the infinite sentinel
};

/// FRR at the smallest threshold with FAR <= far_target.
OperatingPoint frr_at_far(const DetCurve& curve, double far_target);
/// FAR at the largest threshold with FRR <= frr_target.
OperatingPoint far_at_frr(const DetCurve& curve, double frr_target);

/// Inverse standard-normal CDF clamped to [-4, 4], for DET plot axes.
double normal_deviate(double p);

/// (threshold, FAR, FRR, probit(FAR), probit(FRR)) rows.
std::string det_to_csv(const DetCurve& curve);

enum class TaskStatus { Absent, SingleClass, Ok };

struct NamedCurve {
  std::string name;  // forgery type name, or "random"/"skilled" for groups
  DetCurve curve;
};

struct TaskReport {
  io::Task task = io::Task::Task1;
  TaskStatus status = TaskStatus::Absent;
  std::optional<DetCurve> overall;
  std::vector<NamedCurve> per_type;   // in enum order
  std::vector<NamedCurve> per_group;  // "random" (bona fide) and "skilled" (attacks)
  std::vector<OperatingPoint> frr_at_far;
  std::vector<OperatingPoint> far_at_frr;
};

struct EvalReport {
  std::vector<TaskReport> tasks;  // always three, in task order

  const TaskReport& task(io::Task t) const { return tasks[static_cast<std::size_t>(t) - 1]; }
};

inline const std::vector<double> kDefaultOperatingTargets = {0.005, 0.01, 0.05, 0.1};

EvalReport evaluate_protocol(std::span<const io::ScoreRecord> scores,
                             std::span<const double> targets = kDefaultOperatingTargets);

/// Report JSON; floats rendered with 17 significant digits.
std::string report_to_json(const EvalReport& report);

/// Human-readable summary table.
std::string report_summary(const EvalReport& report);

}  // namespace sigbench::eval
