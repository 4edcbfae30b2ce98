#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigbench/timefunc.hpp"
#include "sigbench/util.hpp"

namespace sigbench::tarnn {

// Time-aligned recurrent matcher:
//   pair --DTW--> (A', B') --shared BGRU--> (E_A, E_B)
//        --concat--> merge BGRU --readout--> affine --> sigmoid score.
//
// GRU cell (per direction):
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * h + z * n

enum class Readout {
  MeanPool,  // temporal mean of the merge-layer outputs
  LastStep,  // forward state at t = L-1 joined with backward state at t = 0
};

std::string_view to_string(Readout r);

struct Architecture {
  std::size_t input_size = timefunc::kNumFunctions;
  std::size_t hidden1 = 46;  // per direction, shared layer
  std::size_t hidden2 = 23;  // per direction, merge layer
  Readout readout = Readout::MeanPool;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class Tensor : std::size_t {
  SharedFwdW, SharedFwdU, SharedFwdB,
  SharedBwdW, SharedBwdU, SharedBwdB,
  MergeFwdW, MergeFwdU, MergeFwdB,
  MergeBwdW, MergeBwdU, MergeBwdB,
  OutW, OutB,
};
inline constexpr std::size_t kNumTensors = 14;

struct TensorInfo {
  std::string_view name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;  // into the flat parameter vector

  std::size_t size() const { return rows * cols; }

  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

/// All weights of the network in one flat vector. Also used for gradients.
class TaRnnParams {
 public:
  TaRnnParams() : TaRnnParams(Architecture{}) {}
  explicit TaRnnParams(const Architecture& arch);

  /// Weights uniform in +-sqrt(1/fan_in), biases zero.
  static TaRnnParams initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  const std::array<TensorInfo, kNumTensors>& layout() const { return layout_; }
  const TensorInfo& info(Tensor t) const { return layout_[static_cast<std::size_t>(t)]; }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  std::span<double> tensor(Tensor t);
  std::span<const double> tensor(Tensor t) const;

  std::size_t size() const { return values_.size(); }

  friend bool operator==(const TaRnnParams&, const TaRnnParams&) = default;

 private:
  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::array<TensorInfo, kNumTensors> layout_{};
  std::vector<double> values_;
};

/// Versioned JSON tensor dump. Loading rejects shape mismatches (ParseError).
std::string to_json(const TaRnnParams& params);
TaRnnParams params_from_json(std::string_view text);

struct AlignedPair {
  Matrix a;  // L x input
  Matrix b;  // L x input
};

/// Truncates both matrices to `sequence_cap` rows, aligns on the x/y
/// derivative channels and expands both along the warp path.
AlignedPair align_pair(const timefunc::TimeFunctionMatrix& a, const timefunc::TimeFunctionMatrix& b,
                       std::size_t sequence_cap = 1500);
AlignedPair align_pair(const Matrix& a, const Matrix& b, std::size_t sequence_cap = 1500);

/// Activations kept by forward() for the backward pass.
struct GruCache {
  Matrix h;  // L x H, indexed by time
  Matrix z, r, n;
};

struct ForwardCache {
  GruCache shared_fwd_a, shared_bwd_a, shared_fwd_b, shared_bwd_b;
  Matrix merge_input;  // L x 4*H1
  GruCache merge_fwd, merge_bwd;
  std::vector<double> pooled;  // 2*H2
  double logit = 0.0;
  double score = 0.5;
  double max_abs_preactivation = 0.0;
};

/// Score in (0,1). Throws std::invalid_argument on a length mismatch and
/// NumericError on a non-finite activation.
double forward(const TaRnnParams& params, const Matrix& a, const Matrix& b,
               ForwardCache* cache = nullptr);

struct TrainingExample {
  AlignedPair pair;
  int label = 0;  // 1 = same writer
};

/// Mean binary cross-entropy over the batch and its exact gradient,
/// accumulated by backpropagation through time.
struct LossAndGradient {
  double loss = 0.0;
  TaRnnParams gradient;
};
LossAndGradient loss_and_gradients(const TaRnnParams& params,
                                   std::span<const TrainingExample> batch, std::size_t jobs = 1);

/// Mean forward score over (enrolment, probe) pairs.
double score_pair(const TaRnnParams& params,
                  std::span<const timefunc::TimeFunctionMatrix> enrolments,
                  const timefunc::TimeFunctionMatrix& probe, std::size_t sequence_cap = 1500);

// ---- training -------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t sequence_cap = 1500;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  /// Empty when valid.
  std::vector<std::string> validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double heldout_loss = 0.0;
  double heldout_eer = 0.0;
};

struct TrainResult {
  TaRnnParams params;  // best held-out checkpoint
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Adam on shuffled mini-batches; keeps the parameters with the lowest
/// held-out loss. Deterministic given the seed, independent of `jobs`.
/// Throws std::invalid_argument when either set lacks one of the labels.
TrainResult train(const TrainConfig& config, const Architecture& arch,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> heldout_set);

struct SubjectSamples {
  std::vector<timefunc::TimeFunctionMatrix> genuine;
  std::vector<timefunc::TimeFunctionMatrix> skilled;
};

/// Balanced labeled pairs: genuine-genuine pairs labeled 1, genuine vs
/// another subject's genuine and genuine vs skilled forgery labeled 0.
std::vector<TrainingExample> make_training_pairs(std::span<const SubjectSamples> subjects,
                                                 std::size_t positives_per_subject,
                                                 std::uint64_t seed,
                                                 std::size_t sequence_cap = 1500);

}  // namespace sigbench::tarnn
