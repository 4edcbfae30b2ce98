#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigbench/tarnn.hpp"

namespace sigbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitInput = 2;

/// Everything a pipeline run depends on. Loaded from --config JSON first,
/// then overridden by flags.
struct RunConfig {
  std::string data_root = "corpus";
  std::string layout = "synth";
  std::string comparisons;  // default: <data_root>/comparisons.csv
  std::vector<int> tasks;   // empty = all three
  std::string matcher = "dtw";  // dtw | tarnn | dtw+pad | tarnn+pad
  std::string channels = "baseline";  // baseline | all | comma-separated names
  std::string pen_up = "auto";        // auto | include | exclude
  std::optional<std::size_t> band;
  std::string out_dir = "results";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string checkpoint;  // TA-RNN parameters; trained inline when empty
  std::string pad_model;   // PAD model; fitted inline when empty
  std::string pad_attacks = "skilled";  // attack types PAD is fitted on: skilled | comma-separated types
  double train_fraction = 0.7;
  std::size_t positives_per_subject = 10;
  tarnn::TrainConfig train;
};

/// Thrown for missing inputs and invalid configuration (exit status 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies the keys of a JSON config document. Unknown keys are an error.
void apply_config_json(RunConfig& cfg, const std::string& text);

/// Consistency checks; returns the problems found.
std::vector<std::string> validate(const RunConfig& cfg);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sigbench::cli
