#include "sigbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sigbench/util.hpp"

namespace sigbench::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// RNG stream keys.
enum : std::uint64_t {
  kModelKey = 0x6d6f64,
  kGenuineKey = 0x67656e,
  kSessionKey = 0x736573,
  kForgeryKey = 0x666f72,
  kRenderKey = 0x72656e,
};

struct Stroke {
  StrokeShape shape;
  StrokeDynamics dyn;
};

struct Realization {
  std::vector<Stroke> strokes;
  std::vector<double> gaps_ms;
  double scale = 1.0;
  double rotation = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tremor = 0.0;
};

std::uint64_t input_key(WritingInput in) { return in == WritingInput::Stylus ? 1 : 2; }

std::uint64_t as_key(int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }

StrokeShape perturb_shape(StrokeShape s, double amp_sd, double phase_sd, Rng& r) {
  for (auto& c : s.components) {
    c.amp_x *= r.normal(1.0, amp_sd);
    c.amp_y *= r.normal(1.0, amp_sd);
    c.phase_x += r.normal(0.0, phase_sd);
    c.phase_y += r.normal(0.0, phase_sd);
  }
  s.drift_x *= r.normal(1.0, amp_sd);
  s.drift_y *= r.normal(1.0, amp_sd);
  s.start_x += r.normal(0.0, 300.0 * amp_sd);
  s.start_y += r.normal(0.0, 300.0 * amp_sd);
  return s;
}

void clamp_warp(std::array<double, 2>& c) {
  constexpr double kMax = 0.9;
  const double total = std::abs(c[0]) + std::abs(c[1]);
  if (total > kMax) {
    c[0] *= kMax / total;
    c[1] *= kMax / total;
  }
}

void jitter_dynamics(StrokeDynamics& d, double global_time, double timing_sd, double warp_sd,
                     Rng& r) {
  d.duration_ms *= global_time * r.normal(1.0, 0.5 * timing_sd);
  d.warp[0] += r.normal(0.0, warp_sd);
  d.warp[1] += r.normal(0.0, warp_sd);
  clamp_warp(d.warp);
  d.pressure_peak *= r.normal(1.0, 0.05);
}

void session_transform(Realization& real, const Variability& v, Rng& r) {
  real.scale = r.normal(1.0, v.session_scale);
  real.rotation = r.normal(0.0, v.session_rotation);
  real.tx = 3000.0 + r.normal(0.0, v.session_shift);
  real.ty = 3000.0 + r.normal(0.0, v.session_shift);
}

double warp(double tau, const std::array<double, 2>& c) {
  const double pi = std::numbers::pi;
  return tau + c[0] * std::sin(pi * tau) / pi + c[1] * std::sin(2.0 * pi * tau) / (2.0 * pi);
}

std::pair<double, double> shape_point(const StrokeShape& s, double u) {
  const double env = std::exp(-s.damping * u);
  double x = s.start_x + s.drift_x * u;
  double y = s.start_y + s.drift_y * u;
  for (const auto& c : s.components) {
    x += c.amp_x * env * std::sin(kTwoPi * c.freq * u + c.phase_x);
    y += c.amp_y * env * std::sin(kTwoPi * c.freq * u + c.phase_y);
  }
  return {x, y};
}

Signature render(const Realization& real, SignatureMeta meta, std::uint64_t noise_seed) {
  Rng noise(mix_seed(noise_seed, {kRenderKey}));
  const bool finger = meta.writing_input == WritingInput::Finger;
  // Finger coordinates are screen pixels, a coarser grid than tablet units.
  const double unit = finger ? 0.25 : 1.0;
  const double cr = std::cos(real.rotation), sr = std::sin(real.rotation);

  Signature sig;
  sig.meta = std::move(meta);
  auto push = [&](double x, double y, double p, int pen) {
    const double xr = real.scale * (cr * x - sr * y) + real.tx;
    const double yr = real.scale * (sr * x + cr * y) + real.ty;
    const double jx = pen == 1 ? noise.normal(0.0, real.tremor) : 0.0;
    const double jy = pen == 1 ? noise.normal(0.0, real.tremor) : 0.0;
    sig.x.push_back(std::round((xr + jx) * unit));
    sig.y.push_back(std::round((yr + jy) * unit));
    sig.pressure.push_back(finger ? 0.0 : std::max(0.0, std::round(p)));
    sig.timestamp.push_back(kSampleIntervalMs * static_cast<double>(sig.timestamp.size()));
    sig.pen_status.push_back(pen);
  };

  const std::size_t ns = real.strokes.size();
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& st = real.strokes[s];
    const auto n = static_cast<std::size_t>(
        std::max(5.0, std::round(st.dyn.duration_ms / kSampleIntervalMs) + 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
      const auto [x, y] = shape_point(st.shape, warp(tau, st.dyn.warp));
      const double lift = std::pow(std::sin(std::numbers::pi * tau), st.dyn.pressure_shape);
      const double p = st.dyn.pressure_base + (st.dyn.pressure_peak - st.dyn.pressure_base) * lift;
      push(x, y, p, 1);
    }
    if (s + 1 == ns) break;
    const auto [x0, y0] = shape_point(st.shape, 1.0);
    const auto [x1, y1] = shape_point(real.strokes[s + 1].shape, 0.0);
    const auto m = static_cast<std::size_t>(
        std::max(1.0, std::round(real.gaps_ms[s] / kSampleIntervalMs)));
    for (std::size_t j = 1; j <= m; ++j) {
      const double a = static_cast<double>(j) / static_cast<double>(m + 1);
      push(x0 + a * (x1 - x0), y0 + a * (y1 - y0), 0.0, 0);
    }
  }
  return sig;
}

SignatureMeta base_meta(const std::string& subject, int session, WritingInput input,
                        ForgeryType type) {
  SignatureMeta m;
  m.subject_id = subject;
  m.session = session;
  m.writing_input = input;
  m.scenario = input == WritingInput::Stylus ? Scenario::Office : Scenario::Mobile;
  m.device_id = "synthetic";
  m.forgery_type = type;
  return m;
}

double total_duration(const Realization& real) {
  double t = 0.0;
  for (const auto& s : real.strokes) t += s.dyn.duration_ms;
  for (double g : real.gaps_ms) t += g;
  return t;
}

void scale_time(Realization& real, double factor) {
  for (auto& s : real.strokes) s.dyn.duration_ms *= factor;
  for (auto& g : real.gaps_ms) g *= factor;
}

const LevelNoise& level_noise(const ForgeryPreset& p, ForgeryType level) {
  switch (level) {
    case ForgeryType::StaticTrained: return p.static_trained;
    case ForgeryType::StaticBlueprint: return p.static_blueprint;
    case ForgeryType::DynamicTrained: return p.dynamic_trained;
    case ForgeryType::DynamicBlueprint: return p.dynamic_blueprint;
    case ForgeryType::Regained: return p.regained;
    default: break;
  }
  throw std::invalid_argument("no imitation noise for this level");
}

}  // namespace

SubjectModel make_subject(std::uint64_t seed) {
  Rng r(mix_seed(seed, {kModelKey}));
  SubjectModel m;
  m.seed = seed;
  m.subject_id = std::to_string(seed);

  const int strokes = r.uniform_int(2, 4);
  const double pen_down = r.uniform(1300.0, 2000.0);
  std::vector<double> share(static_cast<std::size_t>(strokes));
  double share_sum = 0.0;
  for (auto& s : share) share_sum += (s = r.uniform(0.6, 1.4));

  double cursor = 0.0;
  for (int s = 0; s < strokes; ++s) {
    StrokeShape sh;
    sh.start_x = cursor;
    sh.start_y = r.normal(0.0, 150.0);
    sh.drift_x = r.uniform(400.0, 1400.0);
    sh.drift_y = r.normal(0.0, 250.0);
    sh.damping = r.uniform(0.0, 1.0);
    const std::array<std::pair<double, double>, kComponents> bands = {
        std::pair{0.5, 1.5}, std::pair{1.5, 3.0}, std::pair{3.0, 5.0}};
    for (std::size_t k = 0; k < kComponents; ++k) {
      auto& c = sh.components[k];
      const double div = static_cast<double>(k + 1);
      c.freq = r.uniform(bands[k].first, bands[k].second);
      c.amp_x = r.uniform(150.0, 600.0) / div;
      c.amp_y = r.uniform(300.0, 900.0) / div;
      c.phase_x = r.uniform(0.0, kTwoPi);
      c.phase_y = r.uniform(0.0, kTwoPi);
    }
    cursor = sh.start_x + sh.drift_x + r.uniform(100.0, 400.0);
    m.shapes.push_back(sh);

    StrokeDynamics d;
    d.duration_ms = pen_down * share[static_cast<std::size_t>(s)] / share_sum;
    d.warp = {r.uniform(-0.5, 0.5), r.uniform(-0.3, 0.3)};
    d.pressure_base = r.uniform(60.0, 200.0);
    d.pressure_peak = r.uniform(500.0, 1000.0);
    d.pressure_shape = r.uniform(0.5, 2.0);
    m.dynamics.push_back(d);
  }
  for (int s = 0; s + 1 < strokes; ++s) m.pen_up_ms.push_back(r.uniform(80.0, 180.0));

  m.nominal_duration_ms = pen_down;
  for (double g : m.pen_up_ms) m.nominal_duration_ms += g;
  return m;
}

namespace {

Realization genuine_realization(const SubjectModel& model, int session, int index,
                                WritingInput input, Rng& r) {
  const auto& v = model.variability;
  Realization real;
  const double g = r.normal(1.0, v.timing);
  for (std::size_t s = 0; s < model.stroke_count(); ++s) {
    Stroke st{perturb_shape(model.shapes[s], v.amplitude, v.phase, r), model.dynamics[s]};
    jitter_dynamics(st.dyn, g, v.timing, v.warp, r);
    real.strokes.push_back(st);
  }
  for (double gap : model.pen_up_ms) real.gaps_ms.push_back(gap * g * r.normal(1.0, 0.1));
  Rng rs(mix_seed(model.seed, {kSessionKey, as_key(session), input_key(input)}));
  session_transform(real, v, rs);
  real.tx += r.normal(0.0, 20.0);
  real.ty += r.normal(0.0, 20.0);
  real.tremor = v.tremor;
  (void)index;
  return real;
}

}  // namespace

Signature sample_genuine(const SubjectModel& model, int session, int index, WritingInput input) {
  const std::uint64_t key =
      mix_seed(model.seed, {kGenuineKey, as_key(session), as_key(index), input_key(input)});
  Rng r(key);
  const auto real = genuine_realization(model, session, index, input, r);
  return render(real, base_meta(model.subject_id, session, input, ForgeryType::Genuine), key);
}

std::pair<int, int> random_forgery_source(int index) { return {2, index}; }

Signature sample_forgery(const SubjectModel& target, const SubjectModel& forger, ForgeryType level,
                         int index, WritingInput input, const ForgeryPreset& preset) {
  if (level == ForgeryType::Genuine) {
    throw std::invalid_argument("sample_forgery: genuine is not a forgery level");
  }
  if (level == ForgeryType::Random) {
    const auto [session, idx] = random_forgery_source(index);
    return sample_genuine(forger, session, idx, input);
  }

  const std::uint64_t key =
      mix_seed(target.seed, {kForgeryKey, static_cast<std::uint64_t>(level), forger.seed,
                             as_key(index), input_key(input)});
  Rng r(key);
  const auto& fv = forger.variability;
  Realization real;
  const int session = (is_static_level(level) || level == ForgeryType::Blind) ? 1 : 2;

  if (level == ForgeryType::Blind) {
    // Own style, with only the target's stroke count and duration known.
    const std::size_t nf = forger.stroke_count();
    double width = 0.0;
    {
      const auto& last = forger.shapes.back();
      width = last.start_x + last.drift_x - forger.shapes.front().start_x + 300.0;
    }
    const double g = r.normal(1.0, fv.timing);
    for (std::size_t s = 0; s < target.stroke_count(); ++s) {
      StrokeShape sh = forger.shapes[s % nf];
      sh.start_x += static_cast<double>(s / nf) * width;
      Stroke st{perturb_shape(sh, fv.amplitude, fv.phase, r), forger.dynamics[s % nf]};
      jitter_dynamics(st.dyn, g, fv.timing, fv.warp, r);
      real.strokes.push_back(st);
    }
    for (std::size_t s = 0; s + 1 < target.stroke_count(); ++s) {
      real.gaps_ms.push_back(forger.pen_up_ms.empty()
                                 ? 120.0
                                 : forger.pen_up_ms[s % forger.pen_up_ms.size()]);
    }
    scale_time(real, target.nominal_duration_ms / total_duration(real));
  } else {
    const LevelNoise& ln = level_noise(preset, level);
    for (std::size_t s = 0; s < target.stroke_count(); ++s) {
      real.strokes.push_back({perturb_shape(target.shapes[s], ln.amplitude, ln.phase, r),
                              target.dynamics[s]});
    }
    real.gaps_ms = target.pen_up_ms;

    if (is_static_level(level)) {
      // Shape from the image; pace, velocity profile and pressure are the
      // forger's own, and slower.
      const double slow = r.uniform(preset.static_slowdown_min, preset.static_slowdown_max);
      for (std::size_t s = 0; s < real.strokes.size(); ++s) {
        auto& d = real.strokes[s].dyn;
        const auto& own = forger.dynamics[s % forger.stroke_count()];
        const double b = preset.static_profile_blend;
        d.warp = {b * d.warp[0] + (1.0 - b) * own.warp[0], b * d.warp[1] + (1.0 - b) * own.warp[1]};
        d.pressure_base = own.pressure_base;
        d.pressure_peak = own.pressure_peak;
        d.pressure_shape = own.pressure_shape;
        d.duration_ms *= r.normal(1.0, 0.1);
        jitter_dynamics(d, slow, fv.timing, fv.warp, r);
      }
      for (std::size_t s = 0; s < real.gaps_ms.size(); ++s) {
        const double own = forger.pen_up_ms.empty()
                               ? 120.0
                               : forger.pen_up_ms[s % forger.pen_up_ms.size()];
        real.gaps_ms[s] = own * slow * r.normal(1.0, 0.2);
      }
    } else if (is_dynamic_level(level)) {
      const double g = r.normal(1.0, ln.timing);
      for (auto& st : real.strokes) jitter_dynamics(st.dyn, g, ln.timing, ln.warp, r);
      for (auto& gap : real.gaps_ms) gap *= g * r.normal(1.0, 0.1);
      if (level == ForgeryType::DynamicBlueprint) {
        scale_time(real, preset.dynamic_blueprint_time_factor);
      }
    } else {  // Regained: smoothed, constant-velocity replay with flat pressure
      for (auto& st : real.strokes) {
        st.dyn.duration_ms *= r.normal(1.0, ln.timing);
        st.dyn.warp = {0.0, 0.0};
        st.dyn.pressure_base = 0.5 * (st.dyn.pressure_base + st.dyn.pressure_peak);
        st.dyn.pressure_shape = 1.0;
      }
    }
  }

  Rng rs(mix_seed(key, {kSessionKey}));
  session_transform(real, fv, rs);
  real.tremor = is_static_level(level) ? 1.5 * fv.tremor : fv.tremor;

  SignatureMeta meta = base_meta(target.subject_id, session, input, level);
  meta.forger_id = forger.subject_id;
  return render(real, std::move(meta), key);
}

// ---- corpus ---------------------------------------------------------------

const CorpusSample* Corpus::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string subject_label(std::size_t subject_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", subject_index + 1);
  return buf;
}

std::string sample_filename(const SignatureMeta& meta, int index) {
  static constexpr std::array<const char*, 8> kCodes = {"g",  "r",  "bl", "st",
                                                        "sb", "dt", "db", "rg"};
  std::string name = "u" + meta.subject_id + "_" +
                     (meta.writing_input == WritingInput::Stylus ? "sty" : "fin") + "_" +
                     kCodes[static_cast<std::size_t>(meta.forgery_type)] + "_s" +
                     std::to_string(meta.session) + "_" + std::to_string(index);
  if (meta.forger_id) name += "_f" + *meta.forger_id;
  return name + ".txt";
}

Corpus generate_corpus(const CorpusConfig& config) {
  if (config.subjects < 2) throw std::invalid_argument("corpus needs at least 2 subjects");
  if (config.genuine_per_session < 2) {
    throw std::invalid_argument("corpus needs at least 2 genuine samples per session");
  }
  if (!config.stylus && !config.finger) {
    throw std::invalid_argument("corpus needs at least one writing input");
  }
  Corpus corpus;
  const std::size_t n = config.subjects;
  for (std::size_t s = 0; s < n; ++s) {
    auto m = make_subject(mix_seed(config.seed, {s}));
    m.subject_id = subject_label(s);
    corpus.subjects.push_back(std::move(m));
  }
  const std::size_t n_forgers = std::min(config.forgers_per_subject, n - 1);
  const int g_count = static_cast<int>(config.genuine_per_session);

  std::vector<ForgeryType> levels = {ForgeryType::StaticTrained, ForgeryType::StaticBlueprint,
                                     ForgeryType::DynamicTrained, ForgeryType::DynamicBlueprint};
  if (config.extended) {
    levels.insert(levels.begin(), ForgeryType::Blind);
    levels.push_back(ForgeryType::Regained);
  }

  std::vector<WritingInput> inputs;
  if (config.stylus) inputs.push_back(WritingInput::Stylus);
  if (config.finger) inputs.push_back(WritingInput::Finger);

  auto add = [&](Signature sig, int index) {
    std::string id = sample_filename(sig.meta, index);
    corpus.samples.push_back({std::move(id), index, std::move(sig)});
    return corpus.samples.back().id;
  };

  std::vector<io::ComparisonRecord> by_modality;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& target = corpus.subjects[t];
    for (WritingInput input : inputs) {
      std::vector<std::string> enrol, probes_gen;
      for (int session : {1, 2}) {
        for (int i = 0; i < g_count; ++i) {
          auto id = add(sample_genuine(target, session, i, input), i);
          (session == 1 ? enrol : probes_gen).push_back(std::move(id));
        }
      }
      const io::Task task = input == WritingInput::Stylus ? io::Task::Task1 : io::Task::Task2;
      auto record = [&](std::string probe, io::Truth truth, ForgeryType type) {
        corpus.comparisons.push_back({enrol, std::move(probe), truth, type, task});
      };
      for (auto& id : probes_gen) record(id, io::Truth::Genuine, ForgeryType::Genuine);

      for (ForgeryType level : levels) {
        for (std::size_t k = 0; k < config.forgeries_per_level; ++k) {
          const auto& forger = corpus.subjects[(t + 1 + k % n_forgers) % n];
          const int idx = static_cast<int>(k);
          auto id = add(sample_forgery(target, forger, level, idx, input, config.preset), idx);
          record(std::move(id), io::Truth::Impostor, level);
        }
      }

      // Random forgeries reuse other subjects' session-2 genuine files.
      for (std::size_t k = 0; k < config.random_per_subject; ++k) {
        const std::size_t other = (t + 1 + k % (n - 1)) % n;
        const int idx = static_cast<int>((k / (n - 1)) % config.genuine_per_session);
        const auto [session, src] = random_forgery_source(idx);
        SignatureMeta meta = base_meta(corpus.subjects[other].subject_id, session, input,
                                       ForgeryType::Genuine);
        record(sample_filename(meta, src), io::Truth::Impostor, ForgeryType::Random);
      }
    }
  }

  // Task 3 pools both modalities.
  const std::size_t base = corpus.comparisons.size();
  for (std::size_t i = 0; i < base; ++i) {
    auto rec = corpus.comparisons[i];
    rec.task = io::Task::Task3;
    corpus.comparisons.push_back(std::move(rec));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const CorpusConfig& config,
                  const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  for (const auto& s : corpus.samples) {
    write_file_atomic(root / s.id, io::format_svc_text(s.signature));
  }
  std::ostringstream cmp;
  io::write_comparisons(corpus.comparisons, cmp);
  write_file_atomic(root / "comparisons.csv", cmp.str());

  nlohmann::json j;
  j["format"] = "sigbench-corpus";
  j["version"] = 1;
  j["layout"] = "synth";
  j["seed"] = config.seed;
  j["subjects"] = config.subjects;
  j["stylus"] = config.stylus;
  j["finger"] = config.finger;
  j["extended"] = config.extended;
  j["genuine_per_session"] = config.genuine_per_session;
  j["forgeries_per_level"] = config.forgeries_per_level;
  j["forgers_per_subject"] = config.forgers_per_subject;
  j["random_per_subject"] = config.random_per_subject;
  j["dynamic_blueprint_time_factor"] = config.preset.dynamic_blueprint_time_factor;
  j["samples"] = corpus.samples.size();
  j["comparisons"] = corpus.comparisons.size();
  write_file_atomic(root / "corpus.json", j.dump(2) + "\n");
}

}  // namespace sigbench::synth
