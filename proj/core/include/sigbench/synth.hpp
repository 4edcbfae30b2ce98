#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sigbench/data_io.hpp"
#include "sigbench/signature.hpp"

namespace sigbench::synth {

// Trajectories are sums of damped sinusoids per stroke:
//   x(u) = x0 + dx*u + sum_k Ax_k e^{-d u} sin(2 pi f_k u + px_k)
// and likewise for y, with u in [0,1] along the stroke. Dynamics map time
// to u through w(tau) = tau + c1 sin(pi tau)/pi + c2 sin(2 pi tau)/(2 pi),
// which is monotone for |c1| + |c2| < 1.

inline constexpr std::size_t kComponents = 3;
inline constexpr double kSampleIntervalMs = 10.0;

struct Component {
  double amp_x = 0.0;
  double amp_y = 0.0;
  double freq = 1.0;  // cycles per stroke
  double phase_x = 0.0;
  double phase_y = 0.0;

  friend bool operator==(const Component&, const Component&) = default;
};

struct StrokeShape {
  double start_x = 0.0;
  double start_y = 0.0;
  double drift_x = 0.0;
  double drift_y = 0.0;
  double damping = 0.0;
  std::array<Component, kComponents> components{};

  friend bool operator==(const StrokeShape&, const StrokeShape&) = default;
};

struct StrokeDynamics {
  double duration_ms = 500.0;
  std::array<double, 2> warp{};  // c1, c2
  double pressure_base = 100.0;
  double pressure_peak = 800.0;
  double pressure_shape = 1.0;  // exponent on sin(pi tau)

  friend bool operator==(const StrokeDynamics&, const StrokeDynamics&) = default;
};

struct Variability {
  double amplitude = 0.05;  // multiplicative sd on amplitudes and drift
  double phase = 0.07;      // additive sd on phases (rad)
  double timing = 0.05;     // multiplicative sd on durations
  double warp = 0.06;       // additive sd on warp coefficients
  double tremor = 3.0;      // additive per-sample noise (device units)
  double session_scale = 0.03;
  double session_rotation = 0.02;  // rad
  double session_shift = 100.0;    // device units

  friend bool operator==(const Variability&, const Variability&) = default;
};

struct SubjectModel {
  std::uint64_t seed = 0;
  std::string subject_id;
  std::vector<StrokeShape> shapes;
  std::vector<StrokeDynamics> dynamics;  // parallel to shapes
  std::vector<double> pen_up_ms;         // gaps between strokes (size strokes - 1)
  double nominal_duration_ms = 0.0;      // pen-down time plus gaps
  Variability variability;

  std::size_t stroke_count() const { return shapes.size(); }
  friend bool operator==(const SubjectModel&, const SubjectModel&) = default;
};

/// Deterministic in the seed. subject_id defaults to the seed in decimal.
SubjectModel make_subject(std::uint64_t seed);

/// Per-level imitation noise. Frozen preset; the corpus-level ordering
/// (dynamic closer than static closer than random) is tuned against it.
struct LevelNoise {
  double amplitude = 0.0;
  double phase = 0.0;
  double timing = 0.0;
  double warp = 0.0;
};

struct ForgeryPreset {
  LevelNoise static_trained{0.07, 0.09, 0.0, 0.0};
  LevelNoise static_blueprint{0.06, 0.08, 0.0, 0.0};
  LevelNoise dynamic_trained{0.08, 0.10, 0.07, 0.10};
  LevelNoise dynamic_blueprint{0.065, 0.085, 0.03, 0.08};
  LevelNoise regained{0.09, 0.12, 0.15, 0.0};
  // Static imitators write slower than the owner.
  double static_slowdown_min = 1.1;
  double static_slowdown_max = 1.35;
  // Share of the owner's velocity profile a static imitator picks up by
  // copying the shape (0 = entirely their own).
  double static_profile_blend = 0.65;
  // Signing-time multiplier for dynamic-blueprint forgeries (pointer
  // following). 1.0 reproduces the owner's pace.
  double dynamic_blueprint_time_factor = 1.0;
};

Signature sample_genuine(const SubjectModel& model, int session, int index,
                         WritingInput input = WritingInput::Stylus);

/// Session and index of the forger's genuine sample used as a random forgery.
std::pair<int, int> random_forgery_source(int index);

/// Throws std::invalid_argument for level == Genuine.
Signature sample_forgery(const SubjectModel& target, const SubjectModel& forger, ForgeryType level,
                         int index, WritingInput input = WritingInput::Stylus,
                         const ForgeryPreset& preset = {});

// ---- corpus ---------------------------------------------------------------

struct CorpusConfig {
  std::size_t subjects = 20;
  std::uint64_t seed = 7;
  bool stylus = true;  // office/stylus set, used by tasks 1 and 3
  bool finger = true;  // mobile/finger set, used by tasks 2 and 3
  bool extended = false;  // add blind and regained forgeries
  std::size_t genuine_per_session = 4;
  std::size_t forgeries_per_level = 4;
  std::size_t forgers_per_subject = 4;
  std::size_t random_per_subject = 16;
  ForgeryPreset preset;
};

struct CorpusSample {
  std::string id;  // filename relative to the corpus root
  int index = 0;
  Signature signature;
};

struct Corpus {
  std::vector<SubjectModel> subjects;
  std::vector<CorpusSample> samples;  // ordered by (subject, input, type, session, index)
  std::vector<io::ComparisonRecord> comparisons;

  const CorpusSample* find(const std::string& id) const;
};

std::string subject_label(std::size_t subject_index);

/// Filename in the "synth" layout preset.
std::string sample_filename(const SignatureMeta& meta, int index);

Corpus generate_corpus(const CorpusConfig& config);

/// Writes every signature file, comparisons.csv and corpus.json under `root`.
void write_corpus(const Corpus& corpus, const CorpusConfig& config,
                  const std::filesystem::path& root);

}  // namespace sigbench::synth
