#include "cli.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigbench/data_io.hpp"
#include "sigbench/dtw.hpp"
#include "sigbench/eval.hpp"
#include "sigbench/pad.hpp"
#include "sigbench/synth.hpp"
#include "sigbench/timefunc.hpp"
#include "sigbench/util.hpp"

#ifndef SIGBENCH_VERSION
#define SIGBENCH_VERSION "0.0.0"
#endif

namespace sigbench::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n) on `jobs` threads. The exception of the lowest
// failing index is rethrown, so failures do not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool uses_tarnn(const std::string& m) { return m == "tarnn" || m == "tarnn+pad"; }
bool uses_pad(const std::string& m) { return m == "dtw+pad" || m == "tarnn+pad"; }

json config_to_json(const RunConfig& c) {
  json j;
  j["data"] = c.data_root;
  j["layout"] = c.layout;
  j["comparisons"] = c.comparisons;
  j["tasks"] = c.tasks;
  j["matcher"] = c.matcher;
  j["channels"] = c.channels;
  j["pen_up"] = c.pen_up;
  j["band"] = c.band ? json(*c.band) : json();
  j["out"] = c.out_dir;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["checkpoint"] = c.checkpoint;
  j["pad_model"] = c.pad_model;
  j["pad_attacks"] = c.pad_attacks;
  j["train_fraction"] = c.train_fraction;
  j["positives_per_subject"] = c.positives_per_subject;
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},                 {"adam_epsilon", c.train.adam_epsilon},
                {"batch_size", c.train.batch_size},       {"max_epochs", c.train.max_epochs},
                {"sequence_cap", c.train.sequence_cap},   {"patience", c.train.patience}};
  return j;
}

timefunc::PenUpPolicy parse_pen_up(const std::string& s) {
  if (s == "auto") return timefunc::PenUpPolicy::Auto;
  if (s == "include") return timefunc::PenUpPolicy::Include;
  if (s == "exclude") return timefunc::PenUpPolicy::Exclude;
  throw InputError("invalid pen-up policy: " + s);
}

std::vector<std::size_t> resolve_channels(const std::string& spec) {
  if (spec == "baseline") {
    return {timefunc::kBaselineChannels.begin(), timefunc::kBaselineChannels.end()};
  }
  std::vector<std::size_t> out;
  if (spec == "all") {
    for (std::size_t k = 0; k < timefunc::kNumFunctions; ++k) out.push_back(k);
    return out;
  }
  const auto& names = timefunc::function_names();
  for (const auto& tok : split(spec, ',')) {
    const auto name = trim(tok);
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("unknown time function: " + std::string(name));
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  if (out.empty()) throw InputError("empty channel set");
  return out;
}

io::FilenamePattern resolve_layout(const std::string& layout) {
  try {
    if (layout.find('{') != std::string::npos) return io::FilenamePattern::from_template(layout);
    return io::FilenamePattern::preset(layout);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string(what) + " not specified");
  if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
}

io::Dataset load_data(const RunConfig& cfg) {
  require_path(cfg.data_root, "dataset root");
  if (!fs::is_directory(cfg.data_root)) {
    throw InputError("dataset root is not a directory: " + cfg.data_root);
  }
  io::Dataset ds;
  try {
    ds = io::load_dataset(cfg.data_root, resolve_layout(cfg.layout));
  } catch (const ParseError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
  if (ds.signatures.empty()) {
    throw InputError("no signature files matching layout '" + cfg.layout + "' under " +
                     cfg.data_root);
  }
  return ds;
}

std::string comparisons_path(const RunConfig& cfg) {
  return cfg.comparisons.empty() ? (fs::path(cfg.data_root) / "comparisons.csv").string()
                                 : cfg.comparisons;
}

std::vector<io::ComparisonRecord> load_comparisons(const RunConfig& cfg, const io::Dataset& ds,
                                                   std::uint64_t* hash) {
  const auto path = comparisons_path(cfg);
  require_path(path, "comparison list");
  const std::string text = read_file(path);
  if (hash) *hash = fnv1a(text);
  std::istringstream in(text);
  auto records = io::read_comparisons(in);
  std::vector<io::ComparisonRecord> kept;
  for (auto& r : records) {
    if (!cfg.tasks.empty() &&
        std::find(cfg.tasks.begin(), cfg.tasks.end(), io::task_number(r.task)) == cfg.tasks.end()) {
      continue;
    }
    auto refs = r.enrolment_refs;
    refs.push_back(r.probe_ref);
    for (const auto& id : refs) {
      const auto* s = ds.find(id);
      if (!s) throw InputError("comparison references unknown signature: " + id);
      if (!io::task_accepts(r.task, s->signature.meta)) {
        throw InputError("signature " + id + " is not admissible in Task " +
                         std::to_string(io::task_number(r.task)));
      }
    }
    kept.push_back(std::move(r));
  }
  if (kept.empty()) throw InputError("no comparisons selected from " + path);
  return kept;
}

std::uint64_t dataset_hash(const io::Dataset& ds) {
  std::uint64_t h = fnv1a("");
  for (const auto& s : ds.signatures) {
    h = fnv1a(s.id, h);
    h = fnv1a(io::format_svc_text(s.signature), h);
  }
  return h;
}

using FeatureMap = std::map<std::string, timefunc::TimeFunctionMatrix>;

FeatureMap extract_all(const io::Dataset& ds, const timefunc::ExtractOptions& opts,
                       std::size_t jobs) {
  std::vector<timefunc::TimeFunctionMatrix> out(ds.signatures.size());
  parallel_for(ds.signatures.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = timefunc::extract_time_functions(ds.signatures[i].signature, opts);
    } catch (const std::invalid_argument& e) {
      throw InputError(ds.signatures[i].id + ": " + e.what());
    }
  });
  FeatureMap m;
  for (std::size_t i = 0; i < out.size(); ++i) m.emplace(ds.signatures[i].id, std::move(out[i]));
  return m;
}

struct Split {
  std::vector<std::string> train;  // in shuffled order
  std::set<std::string> test;
};

Split split_subjects(const io::Dataset& ds, double fraction, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& s : ds.signatures) ids.insert(s.signature.meta.subject_id);
  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, {0x5b117}));
  rng.shuffle(order);
  const auto n = order.size();
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
  Split sp;
  sp.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  sp.test.insert(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return sp;
}

tarnn::TrainResult train_tarnn(const RunConfig& cfg, const io::Dataset& ds,
                               const FeatureMap& features,
                               const std::vector<std::string>& subjects) {
  if (subjects.size() < 2) throw InputError("TA-RNN training needs at least 2 training subjects");
  std::map<std::string, tarnn::SubjectSamples> by_subject;
  for (const auto& s : ds.signatures) {
    const auto& meta = s.signature.meta;
    if (std::find(subjects.begin(), subjects.end(), meta.subject_id) == subjects.end()) continue;
    auto& bucket = by_subject[meta.subject_id];
    const auto& tf = features.at(s.id);
    if (meta.forgery_type == ForgeryType::Genuine) bucket.genuine.push_back(tf);
    else if (is_presentation_attack(meta.forgery_type)) bucket.skilled.push_back(tf);
  }
  // Last fifth of the (shuffled) training subjects is held out for model
  // selection.
  const std::size_t n_held = std::max<std::size_t>(1, subjects.size() / 5);
  std::vector<tarnn::SubjectSamples> fit, held;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    auto& dst = i + n_held < subjects.size() ? fit : held;
    dst.push_back(by_subject[subjects[i]]);
  }
  tarnn::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.jobs = cfg.jobs;
  const auto fit_pairs = tarnn::make_training_pairs(fit, cfg.positives_per_subject,
                                                    mix_seed(cfg.seed, {1}), tc.sequence_cap);
  const auto held_pairs = tarnn::make_training_pairs(held, cfg.positives_per_subject,
                                                     mix_seed(cfg.seed, {2}), tc.sequence_cap);
  try {
    return tarnn::train(tc, tarnn::Architecture{}, fit_pairs, held_pairs);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("cannot train TA-RNN: ") + e.what());
  }
}

std::set<ForgeryType> resolve_pad_attacks(const std::string& spec) {
  std::set<ForgeryType> out;
  if (spec == "skilled") {
    for (ForgeryType t : kAllForgeryTypes) {
      if (is_presentation_attack(t)) out.insert(t);
    }
    return out;
  }
  for (const auto& name : split(spec, ',')) {
    const auto t = parse_forgery_type(trim(name));
    if (!t || !is_presentation_attack(*t)) {
      throw InputError("pad_attacks: not a presentation-attack type: " + std::string(trim(name)));
    }
    out.insert(*t);
  }
  return out;
}

pad::PadModel fit_pad_model(const RunConfig& cfg, const io::Dataset& ds,
                            const std::vector<std::string>& subjects) {
  const std::set<std::string> keep(subjects.begin(), subjects.end());
  const auto attack_types = resolve_pad_attacks(cfg.pad_attacks);
  std::vector<pad::PadFeatures> bona, attacks;
  for (const auto& s : ds.signatures) {
    const auto& meta = s.signature.meta;
    if (!keep.contains(meta.subject_id)) continue;
    const auto f = pad::extract_pad_features(s.signature);
    if (meta.forgery_type == ForgeryType::Genuine) bona.push_back(f);
    else if (attack_types.contains(meta.forgery_type)) attacks.push_back(f);
  }
  if (bona.empty() || attacks.empty()) {
    throw InputError("PAD fitting needs genuine samples and samples of the selected attack types in the training subjects");
  }
  return pad::fit_pad(bona, attacks, cfg.seed);
}

std::string tarnn_log_csv(const tarnn::TrainResult& r) {
  std::ostringstream out;
  out << "epoch,train_loss,heldout_loss,heldout_eer\n";
  for (const auto& e : r.log) {
    out << e.epoch << ',' << format_sig(e.train_loss) << ',' << format_sig(e.heldout_loss) << ','
        << format_sig(e.heldout_eer) << '\n';
  }
  return out.str();
}

struct Models {
  std::optional<tarnn::TaRnnParams> tarnn;
  std::optional<pad::PadModel> pad;
};

std::vector<io::ScoreRecord> score_all(const RunConfig& cfg, const io::Dataset& ds,
                                       const FeatureMap& features,
                                       const std::vector<io::ComparisonRecord>& comparisons,
                                       const Models& models) {
  const auto channels = resolve_channels(cfg.channels);
  dtw::DtwOptions dopt;
  dopt.band = cfg.band;
  std::vector<io::ScoreRecord> out(comparisons.size());
  parallel_for(comparisons.size(), cfg.jobs, [&](std::size_t i) {
    const auto& rec = comparisons[i];
    std::vector<timefunc::TimeFunctionMatrix> enrol;
    for (const auto& id : rec.enrolment_refs) enrol.push_back(features.at(id));
    const auto& probe = features.at(rec.probe_ref);
    double score = uses_tarnn(cfg.matcher)
                       ? tarnn::score_pair(*models.tarnn, enrol, probe, cfg.train.sequence_cap)
                       : dtw::dtw_score(enrol, probe, channels, dopt);
    if (models.pad) {
      const auto gate = pad::pad_gate(*models.pad, ds.find(rec.probe_ref)->signature);
      score = pad::gated_score(gate, score);
    }
    if (!std::isfinite(score)) throw NumericError("non-finite score for " + rec.probe_ref);
    out[i] = {rec, score};
  });
  return out;
}

std::string scores_csv(const std::vector<io::ScoreRecord>& scores) {
  std::ostringstream out;
  io::write_scores(scores, out);
  return out.str();
}

std::vector<std::string> write_evaluation(const std::vector<io::ScoreRecord>& scores,
                                          const fs::path& out_dir, std::ostream& out) {
  const auto report = eval::evaluate_protocol(scores);
  std::vector<std::string> files;
  write_file_atomic(out_dir / "report.json", eval::report_to_json(report));
  files.emplace_back("report.json");
  for (const auto& tr : report.tasks) {
    if (!tr.overall) continue;
    const std::string stem = "det_task" + std::to_string(io::task_number(tr.task));
    write_file_atomic(out_dir / (stem + ".csv"), eval::det_to_csv(*tr.overall));
    files.push_back(stem + ".csv");
    for (const auto& [list, prefix] : {std::pair{&tr.per_group, "_group_"}, std::pair{&tr.per_type, "_"}}) {
      for (const auto& nc : *list) {
        const std::string name = stem + prefix + nc.name + ".csv";
        write_file_atomic(out_dir / name, eval::det_to_csv(nc.curve));
        files.push_back(name);
      }
    }
  }
  out << eval::report_summary(report);
  return files;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& args, json config, json inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["tool"] = "sigbench";
  j["version"] = SIGBENCH_VERSION;
  j["command"] = command;
  j["args"] = args;
  j["config"] = std::move(config);
  j["inputs"] = std::move(inputs);
  auto files = outputs;
  std::sort(files.begin(), files.end());
  j["outputs"] = files;
  write_file_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
}

std::string summarize_report_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
  if (j.value("format", "") != "sigbench-report") throw InputError("not a sigbench report");
  std::ostringstream out;
  for (const auto& t : j.at("tasks")) {
    out << "Task " << t.at("task").get<int>() << ": " << t.at("status").get<std::string>();
    if (t.contains("eer")) {
      out << "  EER " << format_fixed(100.0 * t.at("eer").get<double>(), 2) << "%";
    }
    out << '\n';
    for (const char* key : {"per_group", "per_type"}) {
      if (!t.contains(key)) continue;
      for (const auto& [name, c] : t.at(key).items()) {
        out << "    " << (key[4] == 'g' ? "group " : "") << name << ": EER "
            << format_fixed(100.0 * c.at("eer").get<double>(), 2) << "%\n";
      }
    }
  }
  return out.str();
}

// ---- subcommand bodies ----------------------------------------------------

struct Context {
  RunConfig cfg;
  std::vector<std::string> args;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

void ensure_valid(const RunConfig& cfg) {
  const auto problems = validate(cfg);
  if (!problems.empty()) throw InputError("invalid configuration: " + problems.front());
}

timefunc::ExtractOptions extract_options(const RunConfig& cfg) {
  timefunc::ExtractOptions o;
  o.pen_up = parse_pen_up(cfg.pen_up);
  return o;
}

json dataset_inputs(const RunConfig& cfg, const io::Dataset& ds) {
  return {{"dataset_root", cfg.data_root},
          {"dataset_samples", ds.signatures.size()},
          {"dataset_skipped", ds.skipped.size()},
          {"dataset_hash", hex64(dataset_hash(ds))}};
}

int cmd_ingest(Context& ctx) {
  auto& cfg = ctx.cfg;
  ensure_valid(cfg);
  const auto ds = load_data(cfg);
  std::map<std::string, std::size_t> by_type;
  std::set<std::string> subjects;
  json inventory = json::array();
  for (const auto& s : ds.signatures) {
    const auto& m = s.signature.meta;
    subjects.insert(m.subject_id);
    by_type[std::string(to_string(m.writing_input)) + "/" + std::string(to_string(m.forgery_type))]++;
    inventory.push_back({{"id", s.id},
                         {"subject", m.subject_id},
                         {"session", m.session},
                         {"input", to_string(m.writing_input)},
                         {"type", to_string(m.forgery_type)},
                         {"samples", s.signature.size()}});
  }
  auto& out = *ctx.out;
  out << ds.signatures.size() << " signatures, " << subjects.size() << " subjects, "
      << ds.skipped.size() << " skipped files\n";
  for (const auto& [k, v] : by_type) out << "  " << k << ": " << v << '\n';

  json inputs = dataset_inputs(cfg, ds);
  std::vector<std::string> outputs;
  if (fs::exists(comparisons_path(cfg))) {
    std::uint64_t h = 0;
    const auto recs = load_comparisons(cfg, ds, &h);
    out << recs.size() << " comparisons verified\n";
    inputs["comparisons_hash"] = hex64(h);
  }
  fs::create_directories(cfg.out_dir);
  write_file_atomic(fs::path(cfg.out_dir) / "inventory.json", inventory.dump(2) + "\n");
  outputs.emplace_back("inventory.json");
  write_manifest(cfg.out_dir, "ingest", ctx.args, config_to_json(cfg), inputs, outputs);
  return kExitOk;
}

int cmd_extract(Context& ctx) {
  auto& cfg = ctx.cfg;
  ensure_valid(cfg);
  const auto ds = load_data(cfg);
  const auto features = extract_all(ds, extract_options(cfg), cfg.jobs);
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  for (const auto& [id, tf] : features) {
    fs::path rel(id);
    rel.replace_extension(".csv");
    const auto path = fs::path(cfg.out_dir) / rel;
    fs::create_directories(path.parent_path());
    write_file_atomic(path, timefunc::to_csv(tf));
    outputs.push_back(rel.generic_string());
  }
  *ctx.out << "extracted " << features.size() << " time-function matrices to " << cfg.out_dir
           << '\n';
  write_manifest(cfg.out_dir, "extract", ctx.args, config_to_json(cfg), dataset_inputs(cfg, ds),
                 outputs);
  return kExitOk;
}

Models load_models(const RunConfig& cfg) {
  Models m;
  if (uses_tarnn(cfg.matcher)) {
    require_path(cfg.checkpoint, "TA-RNN checkpoint");
    m.tarnn = tarnn::params_from_json(read_file(cfg.checkpoint));
  }
  if (uses_pad(cfg.matcher)) {
    require_path(cfg.pad_model, "PAD model");
    m.pad = pad::pad_model_from_json(read_file(cfg.pad_model));
  }
  return m;
}

int cmd_score(Context& ctx) {
  auto& cfg = ctx.cfg;
  ensure_valid(cfg);
  const auto models = load_models(cfg);
  const auto ds = load_data(cfg);
  std::uint64_t h = 0;
  const auto comparisons = load_comparisons(cfg, ds, &h);
  const auto features = extract_all(ds, extract_options(cfg), cfg.jobs);
  const auto scores = score_all(cfg, ds, features, comparisons, models);
  fs::create_directories(cfg.out_dir);
  write_file_atomic(fs::path(cfg.out_dir) / "scores.csv", scores_csv(scores));
  *ctx.out << "scored " << scores.size() << " comparisons\n";
  json inputs = dataset_inputs(cfg, ds);
  inputs["comparisons_hash"] = hex64(h);
  write_manifest(cfg.out_dir, "score", ctx.args, config_to_json(cfg), inputs, {"scores.csv"});
  return kExitOk;
}

int cmd_train(Context& ctx, const std::string& model) {
  auto& cfg = ctx.cfg;
  ensure_valid(cfg);
  if (model != "tarnn" && model != "pad") throw InputError("unknown model: " + model);
  const auto ds = load_data(cfg);
  const auto split = split_subjects(ds, cfg.train_fraction, cfg.seed);
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  json inputs = dataset_inputs(cfg, ds);
  inputs["train_subjects"] = std::vector<std::string>(split.train);
  std::sort(inputs["train_subjects"].begin(), inputs["train_subjects"].end());
  if (model == "tarnn") {
    const auto features = extract_all(ds, extract_options(cfg), cfg.jobs);
    const auto result = train_tarnn(cfg, ds, features, split.train);
    write_file_atomic(fs::path(cfg.out_dir) / "tarnn.json", tarnn::to_json(result.params));
    write_file_atomic(fs::path(cfg.out_dir) / "tarnn_log.csv", tarnn_log_csv(result));
    outputs = {"tarnn.json", "tarnn_log.csv"};
    const auto& first = result.log.front();
    const auto& best = result.log[result.best_epoch];
    *ctx.out << "TA-RNN: held-out loss " << format_fixed(first.heldout_loss, 4) << " -> "
             << format_fixed(best.heldout_loss, 4) << " (epoch " << result.best_epoch
             << "), held-out EER " << format_fixed(100.0 * best.heldout_eer, 2) << "%\n";
  } else {
    const auto m = fit_pad_model(cfg, ds, split.train);
    write_file_atomic(fs::path(cfg.out_dir) / "pad.json", pad::to_json(m));
    outputs = {"pad.json"};
    *ctx.out << "PAD model fitted on " << split.train.size() << " subjects\n";
  }
  write_manifest(cfg.out_dir, "train", ctx.args, config_to_json(cfg), inputs, outputs);
  return kExitOk;
}

int cmd_eval(Context& ctx, std::string scores_path) {
  auto& cfg = ctx.cfg;
  if (scores_path.empty()) scores_path = (fs::path(cfg.out_dir) / "scores.csv").string();
  require_path(scores_path, "score file");
  const std::string text = read_file(scores_path);
  std::istringstream in(text);
  const auto scores = io::read_scores(in);
  fs::create_directories(cfg.out_dir);
  const auto files = write_evaluation(scores, cfg.out_dir, *ctx.out);
  write_manifest(cfg.out_dir, "eval", ctx.args, config_to_json(cfg),
                 {{"scores", scores_path}, {"scores_hash", hex64(fnv1a(text))}}, files);
  return kExitOk;
}

int cmd_report(Context& ctx, std::string report_path) {
  if (report_path.empty()) report_path = (fs::path(ctx.cfg.out_dir) / "report.json").string();
  require_path(report_path, "report");
  *ctx.out << summarize_report_json(read_file(report_path));
  return kExitOk;
}

int cmd_run(Context& ctx) {
  auto& cfg = ctx.cfg;
  ensure_valid(cfg);
  const auto ds = load_data(cfg);
  std::uint64_t h = 0;
  auto comparisons = load_comparisons(cfg, ds, &h);
  const auto features = extract_all(ds, extract_options(cfg), cfg.jobs);
  fs::create_directories(cfg.out_dir);

  std::vector<std::string> outputs;
  json inputs = dataset_inputs(cfg, ds);
  inputs["comparisons_hash"] = hex64(h);

  Models models;
  const bool train_tarnn_inline = uses_tarnn(cfg.matcher) && cfg.checkpoint.empty();
  const bool fit_pad_inline = uses_pad(cfg.matcher) && cfg.pad_model.empty();
  if (uses_tarnn(cfg.matcher) && !train_tarnn_inline) {
    require_path(cfg.checkpoint, "TA-RNN checkpoint");
    models.tarnn = tarnn::params_from_json(read_file(cfg.checkpoint));
  }
  if (uses_pad(cfg.matcher) && !fit_pad_inline) {
    require_path(cfg.pad_model, "PAD model");
    models.pad = pad::pad_model_from_json(read_file(cfg.pad_model));
  }
  if (train_tarnn_inline || fit_pad_inline) {
    const auto split = split_subjects(ds, cfg.train_fraction, cfg.seed);
    if (split.test.empty()) throw InputError("train_fraction leaves no test subjects");
    if (train_tarnn_inline) {
      const auto result = train_tarnn(cfg, ds, features, split.train);
      write_file_atomic(fs::path(cfg.out_dir) / "tarnn.json", tarnn::to_json(result.params));
      write_file_atomic(fs::path(cfg.out_dir) / "tarnn_log.csv", tarnn_log_csv(result));
      outputs.insert(outputs.end(), {"tarnn.json", "tarnn_log.csv"});
      models.tarnn = result.params;
    }
    if (fit_pad_inline) {
      models.pad = fit_pad_model(cfg, ds, split.train);
      write_file_atomic(fs::path(cfg.out_dir) / "pad.json", pad::to_json(*models.pad));
      outputs.emplace_back("pad.json");
    }
    // Only subjects unseen in training are evaluated.
    std::erase_if(comparisons, [&](const io::ComparisonRecord& r) {
      return !split.test.contains(ds.find(r.enrolment_refs.front())->signature.meta.subject_id);
    });
    auto train_ids = split.train;
    std::sort(train_ids.begin(), train_ids.end());
    inputs["train_subjects"] = train_ids;
    inputs["test_subjects"] = std::vector<std::string>(split.test.begin(), split.test.end());
    if (comparisons.empty()) throw InputError("no comparisons left for the test subjects");
  }

  const auto scores = score_all(cfg, ds, features, comparisons, models);
  write_file_atomic(fs::path(cfg.out_dir) / "scores.csv", scores_csv(scores));
  outputs.emplace_back("scores.csv");
  const auto files = write_evaluation(scores, cfg.out_dir, *ctx.out);
  outputs.insert(outputs.end(), files.begin(), files.end());
  write_manifest(cfg.out_dir, "run", ctx.args, config_to_json(cfg), inputs, outputs);
  return kExitOk;
}

int cmd_synth(Context& ctx, const synth::CorpusConfig& sc, const std::string& out_dir) {
  const auto corpus = synth::generate_corpus(sc);
  synth::write_corpus(corpus, sc, out_dir);
  *ctx.out << "wrote " << corpus.samples.size() << " signatures and " << corpus.comparisons.size()
           << " comparisons to " << out_dir << '\n';
  json config = {{"subjects", sc.subjects},
                 {"seed", sc.seed},
                 {"stylus", sc.stylus},
                 {"finger", sc.finger},
                 {"extended", sc.extended},
                 {"dynamic_blueprint_time_factor", sc.preset.dynamic_blueprint_time_factor}};
  write_manifest(out_dir, "synth", ctx.args, config, json::object(),
                 {"comparisons.csv", "corpus.json"});
  return kExitOk;
}

std::optional<std::string> find_config_arg(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  return std::nullopt;
}

}  // namespace

void apply_config_json(RunConfig& cfg, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "data") cfg.data_root = v.get<std::string>();
      else if (key == "layout") cfg.layout = v.get<std::string>();
      else if (key == "comparisons") cfg.comparisons = v.get<std::string>();
      else if (key == "tasks") cfg.tasks = v.get<std::vector<int>>();
      else if (key == "matcher") cfg.matcher = v.get<std::string>();
      else if (key == "channels") cfg.channels = v.get<std::string>();
      else if (key == "pen_up") cfg.pen_up = v.get<std::string>();
      else if (key == "band") cfg.band = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
      else if (key == "out") cfg.out_dir = v.get<std::string>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "jobs") cfg.jobs = v.get<std::size_t>();
      else if (key == "checkpoint") cfg.checkpoint = v.get<std::string>();
      else if (key == "pad_model") cfg.pad_model = v.get<std::string>();
      else if (key == "pad_attacks") cfg.pad_attacks = v.get<std::string>();
      else if (key == "train_fraction") cfg.train_fraction = v.get<double>();
      else if (key == "positives_per_subject") cfg.positives_per_subject = v.get<std::size_t>();
      else if (key == "train") {
        auto& t = cfg.train;
        for (const auto& [tk, tv] : v.items()) {
          if (tk == "learning_rate") t.learning_rate = tv.get<double>();
          else if (tk == "beta1") t.beta1 = tv.get<double>();
          else if (tk == "beta2") t.beta2 = tv.get<double>();
          else if (tk == "adam_epsilon") t.adam_epsilon = tv.get<double>();
          else if (tk == "batch_size") t.batch_size = tv.get<std::size_t>();
          else if (tk == "max_epochs") t.max_epochs = tv.get<std::size_t>();
          else if (tk == "sequence_cap") t.sequence_cap = tv.get<std::size_t>();
          else if (tk == "patience") t.patience = tv.get<std::size_t>();
          else throw InputError("unknown config key: train." + tk);
        }
      } else {
        throw InputError("unknown config key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
}

std::vector<std::string> validate(const RunConfig& cfg) {
  std::vector<std::string> out;
  static const std::set<std::string> matchers = {"dtw", "tarnn", "dtw+pad", "tarnn+pad"};
  if (!matchers.contains(cfg.matcher)) out.push_back("unknown matcher: " + cfg.matcher);
  for (int t : cfg.tasks) {
    if (t < 1 || t > 3) out.push_back("task must be 1, 2 or 3");
  }
  if (cfg.jobs == 0) out.emplace_back("jobs must be positive");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    out.emplace_back("train_fraction must lie in (0,1]");
  }
  if (cfg.positives_per_subject == 0) out.emplace_back("positives_per_subject must be positive");
  try {
    resolve_channels(cfg.channels);
    parse_pen_up(cfg.pen_up);
    resolve_pad_attacks(cfg.pad_attacks);
  } catch (const InputError& e) {
    out.emplace_back(e.what());
  }
  for (auto& p : cfg.train.validate()) out.push_back(std::move(p));
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  for (int i = 1; i < argc; ++i) ctx.args.emplace_back(argv[i]);

  try {
    if (auto path = find_config_arg(argc, argv)) {
      require_path(*path, "config file");
      apply_config_json(ctx.cfg, read_file(*path));
    }

    auto& cfg = ctx.cfg;
    CLI::App app{"On-line signature verification benchmark toolkit", "sigbench"};
    app.set_version_flag("--version", SIGBENCH_VERSION);
    app.require_subcommand(1);
    std::string config_path;

    auto add_common = [&](CLI::App* sub) {
      sub->add_option("--config", config_path, "JSON config file (flags override it)");
      sub->add_option("--out", cfg.out_dir, "Output directory");
      sub->add_option("--seed", cfg.seed, "Master seed");
      sub->add_option("--jobs", cfg.jobs, "Worker threads");
    };
    long long band = -1;
    auto add_data = [&](CLI::App* sub) {
      sub->add_option("--data", cfg.data_root, "Dataset root");
      sub->add_option("--layout", cfg.layout, "Filename preset (synth, deepsigndb, svc2021) or template");
      sub->add_option("--pen-up", cfg.pen_up, "Pen-up policy: auto, include, exclude");
    };
    auto add_scoring = [&](CLI::App* sub) {
      sub->add_option("--comparisons", cfg.comparisons, "Comparison list (default <data>/comparisons.csv)");
      sub->add_option("--task", cfg.tasks, "Task numbers to run (default all)");
      sub->add_option("--matcher", cfg.matcher, "dtw, tarnn, dtw+pad or tarnn+pad");
      sub->add_option("--channels", cfg.channels, "baseline, all or comma-separated function names");
      sub->add_option("--band", band, "Sakoe-Chiba band half-width");
      sub->add_option("--checkpoint", cfg.checkpoint, "TA-RNN checkpoint");
      sub->add_option("--pad-model", cfg.pad_model, "PAD model");
      sub->add_option("--pad-attacks", cfg.pad_attacks,
                      "Attack types PAD is fitted on: skilled or comma-separated type names");
    };
    auto add_training = [&](CLI::App* sub) {
      sub->add_option("--train-fraction", cfg.train_fraction, "Share of subjects used for training");
      sub->add_option("--positives", cfg.positives_per_subject, "Genuine pairs per training subject");
      sub->add_option("--lr", cfg.train.learning_rate, "Learning rate");
      sub->add_option("--batch-size", cfg.train.batch_size, "Mini-batch size");
      sub->add_option("--epochs", cfg.train.max_epochs, "Maximum epochs");
      sub->add_option("--patience", cfg.train.patience, "Early-stopping patience");
      sub->add_option("--sequence-cap", cfg.train.sequence_cap, "Sequence length cap");
    };

    synth::CorpusConfig sc;
    std::string synth_out = "corpus";
    bool no_finger = false, no_stylus = false;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_cmd->add_option("--config", config_path, "Ignored by synth");
    synth_cmd->add_option("--subjects", sc.subjects, "Number of subjects");
    synth_cmd->add_option("--seed", sc.seed, "Corpus seed");
    synth_cmd->add_option("--out", synth_out, "Output directory");
    synth_cmd->add_flag("--extended", sc.extended, "Add blind and regained forgeries");
    synth_cmd->add_flag("--no-finger", no_finger, "Omit the finger set");
    synth_cmd->add_flag("--no-stylus", no_stylus, "Omit the stylus set");
    synth_cmd->add_option("--db-time-factor", sc.preset.dynamic_blueprint_time_factor,
                          "Signing-time factor of dynamic-blueprint forgeries");

    auto* ingest_cmd = app.add_subcommand("ingest", "Load and validate a dataset");
    add_common(ingest_cmd);
    add_data(ingest_cmd);
    ingest_cmd->add_option("--comparisons", cfg.comparisons, "Comparison list to verify");

    auto* extract_cmd = app.add_subcommand("extract", "Write time-function matrices");
    add_common(extract_cmd);
    add_data(extract_cmd);

    auto* score_cmd = app.add_subcommand("score", "Score a comparison list");
    add_common(score_cmd);
    add_data(score_cmd);
    add_scoring(score_cmd);

    std::string model = "tarnn";
    auto* train_cmd = app.add_subcommand("train", "Train a TA-RNN or PAD model");
    add_common(train_cmd);
    add_data(train_cmd);
    add_training(train_cmd);
    train_cmd->add_option("--model", model, "tarnn or pad");

    std::string scores_path;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a score file");
    add_common(eval_cmd);
    eval_cmd->add_option("--scores", scores_path, "Score CSV (default <out>/scores.csv)");

    std::string report_path;
    auto* report_cmd = app.add_subcommand("report", "Print a report summary");
    report_cmd->add_option("--out", cfg.out_dir, "Results directory");
    report_cmd->add_option("--report", report_path, "Report JSON (default <out>/report.json)");

    auto* run_cmd = app.add_subcommand("run", "Ingest, extract, score and evaluate");
    add_common(run_cmd);
    add_data(run_cmd);
    add_scoring(run_cmd);
    add_training(run_cmd);

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitInput;
    }
    if (band >= 0) cfg.band = static_cast<std::size_t>(band);

    if (synth_cmd->parsed()) {
      sc.finger = !no_finger;
      sc.stylus = !no_stylus;
      return cmd_synth(ctx, sc, synth_out);
    }
    if (ingest_cmd->parsed()) return cmd_ingest(ctx);
    if (extract_cmd->parsed()) return cmd_extract(ctx);
    if (score_cmd->parsed()) return cmd_score(ctx);
    if (train_cmd->parsed()) return cmd_train(ctx, model);
    if (eval_cmd->parsed()) return cmd_eval(ctx, scores_path);
    if (report_cmd->parsed()) return cmd_report(ctx, report_path);
    if (run_cmd->parsed()) return cmd_run(ctx);
    return kExitInput;
  } catch (const InputError& e) {
    err << "sigbench: " << e.what() << '\n';
    return kExitInput;
  } catch (const ParseError& e) {
    err << "sigbench: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "sigbench: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "sigbench: invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "sigbench: internal error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace sigbench::cli
