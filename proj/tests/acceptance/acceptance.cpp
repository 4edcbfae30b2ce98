// Acceptance gates. One line per criterion; exit status 1 if any required
// gate fails. Tolerances and budgets are fixed here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sigbench/data_io.hpp"
#include "sigbench/dtw.hpp"
#include "sigbench/eval.hpp"
#include "sigbench/pad.hpp"
#include "sigbench/synth.hpp"
#include "sigbench/tarnn.hpp"
#include "sigbench/timefunc.hpp"
#include "sigbench/util.hpp"

using namespace sigbench;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void gate(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::ostringstream line;
  line << (pass ? "[PASS] " : "[FAIL] ") << name << " (" << o.details << "; " << format_fixed(secs, 2)
       << " s of " << format_fixed(budget_s, 0) << " s";
  if (!in_time) line << ", over budget";
  line << ")";
  std::printf("%s\n", line.str().c_str());
  std::fflush(stdout);
}

std::string pct(double v) { return format_fixed(100.0 * v, 2) + "%"; }

// ---- DTW ------------------------------------------------------------------

Outcome dtw_oracle() {
  Rng rng(20240601);
  const std::vector<std::size_t> ch{0, 1};
  int bad = 0;
  double worst = 0.0;
  const int pairs = 1000;
  for (int k = 0; k < pairs; ++k) {
    const auto a = sigbench::testing::random_matrix(rng, 1 + rng.index(6), 2);
    const auto b = sigbench::testing::random_matrix(rng, 1 + rng.index(6), 2);
    const auto e = oracle::enumerate_dtw(a, b, ch);
    const auto r = dtw::dtw_align(a, b, ch);
    double best = 1e300;
    for (std::size_t len : e.min_cost_lengths) {
      best = std::min(best, std::abs(r.distance - e.min_cost / static_cast<double>(len)));
    }
    worst = std::max(worst, best);
    if (!oracle::dtw_matches(e, r.distance, 1e-9)) ++bad;
  }
  return {bad == 0, std::to_string(pairs) + " pairs, " + std::to_string(bad) +
                        " mismatches, max |diff| " + format_sig(worst, 3) + ", tol 1e-9"};
}

// ---- EER / DET ------------------------------------------------------------

Outcome det_oracle() {
  Rng rng(77);
  int bad = 0;
  double worst = 0.0;
  const int sets = 200;
  for (int k = 0; k < sets; ++k) {
    eval::ScoreSet s;
    const std::size_t ng = 1 + rng.index(500), ni = 1 + rng.index(500);
    const bool ties = k % 3 == 0;
    const double shift = rng.uniform(0.0, 2.0);
    auto draw = [&](double mu) {
      const double v = rng.normal(mu, 1.0);
      return ties ? std::round(v * 5.0) / 5.0 : v;
    };
    for (std::size_t i = 0; i < ng; ++i) s.genuine.push_back(draw(shift));
    for (std::size_t i = 0; i < ni; ++i) s.impostor.push_back(draw(0.0));
    const auto c = eval::compute_det(s);
    bool ok = true;
    for (const auto& p : c.points) {
      const auto r = oracle::recount(s, p.threshold);
      const double d = std::max(std::abs(p.far - r.far), std::abs(p.frr - r.frr));
      worst = std::max(worst, d);
      ok = ok && d <= 1e-9;
    }
    const double de = std::abs(c.eer - oracle::sweep_eer(s));
    worst = std::max(worst, de);
    ok = ok && de <= 1e-9 && std::abs(eval::compute_eer(c) - c.eer) <= 1e-9;
    if (!ok) ++bad;
  }
  eval::ScoreSet same;
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform();
    same.genuine.push_back(v);
    same.impostor.push_back(v);
  }
  eval::ScoreSet sep;
  for (int i = 0; i < 100; ++i) {
    sep.genuine.push_back(rng.uniform(0.6, 1.0));
    sep.impostor.push_back(rng.uniform(0.0, 0.4));
  }
  const double e_same = eval::compute_det(same).eer;
  const double e_sep = eval::compute_det(sep).eer;
  const bool exact = e_same == 0.5 && e_sep == 0.0;
  return {bad == 0 && exact, std::to_string(sets) + " sets, " + std::to_string(bad) +
                                 " mismatches, max |diff| " + format_sig(worst, 3) +
                                 ", EER identical " + format_sig(e_same, 17) + ", separable " +
                                 format_sig(e_sep, 17)};
}

// ---- gradient check -------------------------------------------------------

Outcome gradient_check() {
  Rng rng(5150);
  double worst = 0.0;
  std::size_t coords = 0;
  for (auto readout : {tarnn::Readout::MeanPool, tarnn::Readout::LastStep}) {
    tarnn::Architecture arch;
    arch.hidden1 = 4;
    arch.hidden2 = 2;
    arch.readout = readout;
    const auto p = sigbench::testing::random_params(arch, readout == tarnn::Readout::MeanPool ? 1 : 2);
    std::vector<tarnn::TrainingExample> batch;
    for (int label : {1, 0}) {
      tarnn::TrainingExample ex;
      ex.pair.a = sigbench::testing::random_matrix(rng, 10, arch.input_size);
      ex.pair.b = sigbench::testing::random_matrix(rng, 10, arch.input_size);
      ex.label = label;
      batch.push_back(std::move(ex));
    }
    const auto analytic = tarnn::loss_and_gradients(p, batch).gradient;
    const auto numeric = oracle::numeric_gradient(p, batch, 1e-5);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = analytic.flat()[i], n = numeric[i];
      // Relative error, with an absolute floor for coordinates whose gradient vanishes.
      const double rel = std::abs(g - n) / std::max({std::abs(g), std::abs(n), 1e-6});
      worst = std::max(worst, rel);
    }
    coords += p.size();
  }
  return {worst < 1e-4, std::to_string(coords) + " coordinates (mean-pool and last-step), L=10, "
                        "H1=4, H2=2, step 1e-5, max rel err " + format_sig(worst, 3) +
                        " < 1e-4"};
}

// ---- synthetic corpus helpers ---------------------------------------------

using FeatureMap = std::map<std::string, timefunc::TimeFunctionMatrix>;

FeatureMap extract(const synth::Corpus& c, WritingInput only) {
  FeatureMap out;
  for (const auto& s : c.samples) {
    if (s.signature.meta.writing_input != only) continue;
    out.emplace(s.id, timefunc::extract_time_functions(s.signature));
  }
  return out;
}

std::vector<timefunc::TimeFunctionMatrix> enrolments(const FeatureMap& f,
                                                     const io::ComparisonRecord& r) {
  std::vector<timefunc::TimeFunctionMatrix> out;
  for (const auto& id : r.enrolment_refs) out.push_back(f.at(id));
  return out;
}

const std::string& enrolled_subject(const synth::Corpus& c, const io::ComparisonRecord& r) {
  return c.find(r.enrolment_refs.front())->signature.meta.subject_id;
}

// ---- synthetic ordering ---------------------------------------------------

Outcome synthetic_ordering() {
  const synth::CorpusConfig cfg;  // frozen: 20 subjects, seed 7
  const auto corpus = synth::generate_corpus(cfg);
  const auto features = extract(corpus, WritingInput::Stylus);
  eval::ScoreSet random, stat, dyn;
  std::map<ForgeryType, eval::ScoreSet> by_level;
  std::vector<double> genuine;
  for (const auto& r : corpus.comparisons) {
    if (r.task != io::Task::Task1) continue;
    const double s = dtw::dtw_score(enrolments(features, r), features.at(r.probe_ref),
                                    timefunc::kBaselineChannels);
    if (r.truth == io::Truth::Genuine) {
      genuine.push_back(s);
      continue;
    }
    by_level[r.forgery_type].impostor.push_back(s);
    if (r.forgery_type == ForgeryType::Random) random.impostor.push_back(s);
    else if (is_static_level(r.forgery_type)) stat.impostor.push_back(s);
    else if (is_dynamic_level(r.forgery_type)) dyn.impostor.push_back(s);
  }
  for (auto* set : {&random, &stat, &dyn}) set->genuine = genuine;
  const double er = eval::compute_det(random).eer;
  const double es = eval::compute_det(stat).eer;
  const double ed = eval::compute_det(dyn).eer;
  std::string levels;
  for (auto& [type, set] : by_level) {
    set.genuine = genuine;
    levels += std::string(levels.empty() ? "" : ", ") + std::string(to_string(type)) + " " +
              pct(eval::compute_det(set).eer);
  }
  const bool pass = es - er >= 0.02 && ed - es >= 0.02;
  return {pass, "Task 1 DTW EER random " + pct(er) + " < static " + pct(es) + " < dynamic " +
                    pct(ed) + ", gaps >= 2 points; per level: " + levels};
}

// ---- TA-RNN training ------------------------------------------------------

struct TarnnSetup {
  synth::Corpus corpus;
  FeatureMap features;
  std::vector<std::string> fit, val;
  std::set<std::string> test;
};

TarnnSetup tarnn_setup() {
  synth::CorpusConfig cfg;
  cfg.finger = false;
  TarnnSetup s{synth::generate_corpus(cfg), {}, {}, {}, {}};
  s.features = extract(s.corpus, WritingInput::Stylus);
  std::vector<std::string> ids;
  for (const auto& m : s.corpus.subjects) ids.push_back(m.subject_id);
  Rng rng(mix_seed(1, {0x5b117}));
  rng.shuffle(ids);
  // 14 training subjects (the last 3 select the checkpoint), 6 test subjects.
  s.fit.assign(ids.begin(), ids.begin() + 11);
  s.val.assign(ids.begin() + 11, ids.begin() + 14);
  s.test.insert(ids.begin() + 14, ids.end());
  return s;
}

std::vector<tarnn::SubjectSamples> group(const TarnnSetup& s, const std::vector<std::string>& who) {
  std::map<std::string, tarnn::SubjectSamples> by;
  for (const auto& smp : s.corpus.samples) {
    const auto& m = smp.signature.meta;
    if (m.writing_input != WritingInput::Stylus) continue;
    if (m.forgery_type == ForgeryType::Genuine) by[m.subject_id].genuine.push_back(s.features.at(smp.id));
    else if (is_presentation_attack(m.forgery_type)) by[m.subject_id].skilled.push_back(s.features.at(smp.id));
  }
  std::vector<tarnn::SubjectSamples> out;
  for (const auto& id : who) out.push_back(by.at(id));
  return out;
}

tarnn::TrainResult train_once(const TarnnSetup& s) {
  tarnn::TrainConfig tc;
  tc.seed = 1;
  tc.max_epochs = 10;
  tc.patience = 10;
  const auto fit = group(s, s.fit), val = group(s, s.val);
  const auto fit_pairs = tarnn::make_training_pairs(fit, 8, mix_seed(1, {1}));
  const auto val_pairs = tarnn::make_training_pairs(val, 8, mix_seed(1, {2}));
  return tarnn::train(tc, tarnn::Architecture{}, fit_pairs, val_pairs);
}

Outcome tarnn_training() {
  const auto s = tarnn_setup();
  const auto r1 = train_once(s);
  const auto r2 = train_once(s);
  const bool identical = r1.params == r2.params && r1.log.size() == r2.log.size();

  eval::ScoreSet set;
  for (const auto& r : s.corpus.comparisons) {
    if (r.task != io::Task::Task1 || !s.test.contains(enrolled_subject(s.corpus, r))) continue;
    if (r.truth == io::Truth::Impostor && r.forgery_type != ForgeryType::Random) continue;
    const double score = tarnn::score_pair(r1.params, enrolments(s.features, r), s.features.at(r.probe_ref));
    (r.truth == io::Truth::Genuine ? set.genuine : set.impostor).push_back(score);
  }
  const double eer = eval::compute_det(set).eer;
  const double l0 = r1.log.front().heldout_loss;
  const double lf = r1.log.back().heldout_loss;
  const bool pass = eer <= 0.15 && lf < l0 && identical;
  return {pass, "test-subject random-forgery EER " + pct(eer) + " <= 15% (" +
                    std::to_string(set.genuine.size()) + " genuine, " +
                    std::to_string(set.impostor.size()) + " random), held-out loss " +
                    format_fixed(l0, 4) + " -> " + format_fixed(lf, 4) + " over " +
                    std::to_string(r1.log.size() - 1) + " epochs (best " +
                    std::to_string(r1.best_epoch) + "), reruns bit-identical: " +
                    (identical ? "yes" : "no")};
}

// ---- PAD gate -------------------------------------------------------------

Outcome pad_gate() {
  synth::CorpusConfig cfg;
  cfg.preset.dynamic_blueprint_time_factor = 2.2;
  const auto corpus = synth::generate_corpus(cfg);
  std::vector<std::string> ids;
  for (const auto& m : corpus.subjects) ids.push_back(m.subject_id);
  Rng rng(mix_seed(1, {0x5b117}));
  rng.shuffle(ids);
  const std::set<std::string> train(ids.begin(), ids.begin() + 14);

  std::vector<pad::PadFeatures> tr_bona, tr_attack, te_bona, te_attack;
  double t_gen = 0.0, t_db = 0.0;
  for (const auto& smp : corpus.samples) {
    const auto& m = smp.signature.meta;
    const bool db = m.forgery_type == ForgeryType::DynamicBlueprint;
    if (m.forgery_type != ForgeryType::Genuine && !db) continue;
    const auto f = pad::extract_pad_features(smp.signature);
    const bool is_train = train.contains(m.subject_id);
    if (db) {
      (is_train ? tr_attack : te_attack).push_back(f);
      t_db += f.signing_time;
    } else {
      (is_train ? tr_bona : te_bona).push_back(f);
      t_gen += f.signing_time;
    }
  }
  const double n_db = static_cast<double>(tr_attack.size() + te_attack.size());
  const double n_gen = static_cast<double>(tr_bona.size() + te_bona.size());
  const double ratio = (t_db / n_db) / (t_gen / n_gen);

  const auto model = pad::fit_pad(tr_bona, tr_attack, 1);
  std::size_t detected = 0, rejected = 0;
  for (const auto& f : te_attack) detected += pad::pad_gate(model, f).decision == pad::PadDecision::Attack;
  for (const auto& f : te_bona) rejected += pad::pad_gate(model, f).decision == pad::PadDecision::Attack;
  const double det = static_cast<double>(detected) / static_cast<double>(te_attack.size());
  const double rej = static_cast<double>(rejected) / static_cast<double>(te_bona.size());
  const bool pass = ratio >= 2.0 && det >= 0.95 && rej <= 0.05 && model.threshold == 0.5;
  return {pass, "signing-time ratio " + format_fixed(ratio, 2) + " >= 2, tau 0.5, test subjects: " +
                    "detection " + pct(det) + " >= 95% (" + std::to_string(te_attack.size()) +
                    " attacks), bona fide rejection " + pct(rej) + " <= 5% (" +
                    std::to_string(te_bona.size()) + " genuine)"};
}

// ---- optional real data ---------------------------------------------------

void deepsigndb_check() {
  const char* root = std::getenv("SIGBENCH_DEEPSIGNDB");
  if (root == nullptr || !std::filesystem::exists(root)) {
    std::printf("[SKIPPED] DeepSignDB DTW baseline (optional; set SIGBENCH_DEEPSIGNDB to a "
                "dataset root with comparisons.csv)\n");
    return;
  }
  try {
    const auto ds = io::load_dataset(root, io::FilenamePattern::preset("deepsigndb"));
    std::ifstream in(std::filesystem::path(root) / "comparisons.csv");
    if (!in) throw std::runtime_error("comparisons.csv not found");
    const auto cmp = io::read_comparisons(in);
    std::map<std::string, timefunc::TimeFunctionMatrix> f;
    for (const auto& s : ds.signatures) f.emplace(s.id, timefunc::extract_time_functions(s.signature));
    std::vector<io::ScoreRecord> scores;
    for (const auto& r : cmp) {
      std::vector<timefunc::TimeFunctionMatrix> e;
      for (const auto& id : r.enrolment_refs) e.push_back(f.at(id));
      scores.push_back({r, dtw::dtw_score(e, f.at(r.probe_ref), timefunc::kBaselineChannels)});
    }
    std::printf("[INFO] DeepSignDB DTW baseline:\n%s",
                eval::report_summary(eval::evaluate_protocol(scores)).c_str());
  } catch (const std::exception& e) {
    std::printf("[INFO] DeepSignDB DTW baseline not run: %s\n", e.what());
  }
}

}  // namespace

int main() {
  gate("DTW oracle", 5, dtw_oracle);
  gate("EER/DET oracle", 10, det_oracle);
  gate("TA-RNN gradient check", 60, gradient_check);
  gate("Synthetic forgery ordering", 120, synthetic_ordering);
  gate("TA-RNN toy training", 600, tarnn_training);
  gate("PAD gate on slow blueprint forgeries", 120, pad_gate);
  deepsigndb_check();
  std::printf("%s: %d required gate(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
