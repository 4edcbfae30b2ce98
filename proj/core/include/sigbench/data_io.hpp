#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigbench/signature.hpp"

namespace sigbench::io {

enum class Truth { Genuine, Impostor };

enum class Task { Task1 = 1, Task2 = 2, Task3 = 3 };

inline constexpr std::array<Task, 3> kAllTasks = {Task::Task1, Task::Task2, Task::Task3};

std::string_view to_string(Truth t);
std::optional<Truth> parse_truth(std::string_view s);
int task_number(Task t);
std::optional<Task> parse_task(std::string_view s);

/// One enrolment-vs-probe trial.
struct ComparisonRecord {
  std::vector<std::string> enrolment_refs;
  std::string probe_ref;
  Truth truth = Truth::Genuine;
  ForgeryType forgery_type = ForgeryType::Genuine;
  Task task = Task::Task1;

  friend bool operator==(const ComparisonRecord&, const ComparisonRecord&) = default;
};

/// Structural problems of a record on its own (does not consult signatures).
std::vector<std::string> validate_comparison(const ComparisonRecord& rec);

/// Checks the task/modality constraint: Task1 references only stylus/office
/// signatures, Task2 only finger/mobile, Task3 either.
bool task_accepts(Task task, const SignatureMeta& meta);

struct ScoreRecord {
  ComparisonRecord comparison;
  double score = 0.0;  // in [0,1], higher = more likely genuine

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

// ---- signature text files -------------------------------------------------

/// Parses a whole signature file: sample count on the first line, then rows
/// of `X Y TIMESTAMP PEN_STATUS` or
/// `X Y TIMESTAMP PEN_STATUS AZIMUTH ALTITUDE PRESSURE`.
/// Azimuth and altitude are discarded. Throws ParseError.
Signature parse_svc_text(std::string_view content);

/// Inverse of parse_svc_text. Emits the 7-column form (azimuth and altitude
/// written as 0) unless `with_pressure` is false.
std::string format_svc_text(const Signature& sig, bool with_pressure = true);

// ---- dataset layouts ------------------------------------------------------

/// Maps filenames to SignatureMeta via templates such as
/// `u{subject}_{type}_s{session}_{index}.txt`.
///
/// Recognized fields: subject, session, type, index, input, scenario, forger.
/// The first template that matches a filename wins.
struct FilenamePattern {
  std::vector<std::string> templates;
  std::map<std::string, ForgeryType> type_codes;
  std::map<std::string, WritingInput> input_codes;
  std::map<std::string, Scenario> scenario_codes;
  WritingInput default_input = WritingInput::Stylus;
  // When unset, derived from the writing input (stylus -> office).
  std::optional<Scenario> default_scenario;
  std::string device_id;
  // Used for attacks when no {forger} field is present in the template.
  std::string unknown_forger = "unknown";

  /// Named presets: "synth", "deepsigndb", "svc2021".
  static FilenamePattern preset(std::string_view name);
  /// A single template with the default code tables.
  static FilenamePattern from_template(std::string tmpl);

  struct Match {
    SignatureMeta meta;
    int index = 0;
  };
  /// Throws std::invalid_argument on a malformed template.
  std::optional<Match> match(std::string_view filename) const;
};

struct LoadedSignature {
  std::string id;  // path relative to the dataset root, '/'-separated
  int index = 0;
  Signature signature;
};

struct Dataset {
  std::vector<LoadedSignature> signatures;  // sorted by id
  std::vector<std::string> skipped;         // sorted, non-matching files

  const LoadedSignature* find(std::string_view id) const;
};

/// Recursively loads every file under `root` that matches `layout`.
/// Throws std::runtime_error on an unreadable root or a duplicate
/// (subject, session, type, index, input) key, ParseError on a bad file.
Dataset load_dataset(const std::filesystem::path& root, const FilenamePattern& layout);

// ---- comparison and score CSVs --------------------------------------------

void write_comparisons(std::span<const ComparisonRecord> records, std::ostream& out);
std::vector<ComparisonRecord> read_comparisons(std::istream& in);

/// Score rendering: fixed notation, at least 9 decimals, extended until the
/// value parses back bit-identically.
std::string format_score(double score);

void write_scores(std::span<const ScoreRecord> records, std::ostream& out);
std::vector<ScoreRecord> read_scores(std::istream& in);

}  // namespace sigbench::io
