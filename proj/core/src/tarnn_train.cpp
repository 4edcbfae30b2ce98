#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "sigbench/eval.hpp"
#include "sigbench/tarnn.hpp"

namespace sigbench::tarnn {

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> out;
  if (!(learning_rate > 0.0)) out.emplace_back("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) out.emplace_back("beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) out.emplace_back("beta2 must lie in (0,1)");
  if (!(adam_epsilon > 0.0)) out.emplace_back("adam_epsilon must be positive");
  if (batch_size == 0) out.emplace_back("batch_size must be positive");
  if (max_epochs == 0) out.emplace_back("max_epochs must be positive");
  if (sequence_cap < 10) out.emplace_back("sequence_cap must be at least 10");
  if (patience == 0) out.emplace_back("patience must be positive");
  if (jobs == 0) out.emplace_back("jobs must be positive");
  return out;
}

namespace {

void require_both_labels(std::span<const TrainingExample> set, const char* what) {
  bool pos = false, neg = false;
  for (const auto& ex : set) {
    if (ex.label == 1) pos = true;
    else if (ex.label == 0) neg = true;
    else throw std::invalid_argument(std::string(what) + ": labels must be 0 or 1");
  }
  if (!pos || !neg) {
    throw std::invalid_argument(std::string(what) + " must contain both labels");
  }
}

struct SetMetrics {
  double loss = 0.0;
  double eer = 0.0;
};

SetMetrics evaluate_set(const TaRnnParams& params, std::span<const TrainingExample> set,
                        std::size_t jobs) {
  std::vector<double> logits(set.size());
  auto work = [&](std::size_t i) {
    ForwardCache cache;
    forward(params, set[i].pair.a, set[i].pair.b, &cache);
    logits[i] = cache.logit;
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, set.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < set.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < set.size(); i += jobs) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  SetMetrics m;
  eval::ScoreSet scores;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double y = static_cast<double>(set[i].label);
    m.loss += softplus(logits[i]) - y * logits[i];
    // Rank by logit: the EER is invariant to the monotone sigmoid and this
    // avoids ties from saturation.
    (set[i].label == 1 ? scores.genuine : scores.impostor).push_back(logits[i]);
  }
  m.loss /= static_cast<double>(set.size());
  m.eer = eval::compute_det(scores).eer;
  return m;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Architecture& arch,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> heldout_set) {
  if (auto problems = config.validate(); !problems.empty()) {
    throw std::invalid_argument("invalid training config: " + problems.front());
  }
  require_both_labels(train_set, "training set");
  require_both_labels(heldout_set, "held-out set");

  TaRnnParams params = TaRnnParams::initialize(arch, config.seed);
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);

  TrainResult result;
  {
    const auto init_train = evaluate_set(params, train_set, config.jobs);
    const auto init_held = evaluate_set(params, heldout_set, config.jobs);
    result.log.push_back({0, init_train.loss, init_held.loss, init_held.eer});
  }
  result.params = params;
  double best_loss = result.log.front().heldout_loss;
  std::size_t stale = 0;
  std::size_t step = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, {0x5eed, epoch}));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);

      const auto lg = loss_and_gradients(params, batch, config.jobs);
      epoch_loss += lg.loss * static_cast<double>(batch.size());

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto p = params.flat();
      const auto g = lg.gradient.flat();
      for (std::size_t k = 0; k < p.size(); ++k) {
        m1[k] = config.beta1 * m1[k] + (1.0 - config.beta1) * g[k];
        m2[k] = config.beta2 * m2[k] + (1.0 - config.beta2) * g[k] * g[k];
        const double mhat = m1[k] / bc1;
        const double vhat = m2[k] / bc2;
        p[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
      }
    }
    epoch_loss /= static_cast<double>(order.size());

    const auto held = evaluate_set(params, heldout_set, config.jobs);
    result.log.push_back({epoch, epoch_loss, held.loss, held.eer});
    if (held.loss < best_loss) {
      best_loss = held.loss;
      result.params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

std::vector<TrainingExample> make_training_pairs(std::span<const SubjectSamples> subjects,
                                                 std::size_t positives_per_subject,
                                                 std::uint64_t seed, std::size_t sequence_cap) {
  std::vector<TrainingExample> out;
  Rng rng(mix_seed(seed, {0x9a125}));
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto& subj = subjects[s];
    const std::size_t ng = subj.genuine.size();
    if (ng < 2) continue;

    std::vector<std::pair<std::size_t, std::size_t>> positives;
    for (std::size_t i = 0; i < ng; ++i) {
      for (std::size_t j = i + 1; j < ng; ++j) positives.emplace_back(i, j);
    }
    rng.shuffle(positives);
    positives.resize(std::min(positives.size(), positives_per_subject));
    for (const auto& [i, j] : positives) {
      out.push_back({align_pair(subj.genuine[i], subj.genuine[j], sequence_cap), 1});
    }

    const std::size_t n_neg = positives.size();
    const bool have_skilled = !subj.skilled.empty();
    const bool have_others = subjects.size() > 1;
    for (std::size_t k = 0; k < n_neg; ++k) {
      const auto& anchor = subj.genuine[rng.index(ng)];
      const bool use_skilled = have_skilled && (!have_others || k % 2 == 0);
      if (use_skilled) {
        out.push_back({align_pair(anchor, subj.skilled[rng.index(subj.skilled.size())],
                                  sequence_cap),
                       0});
        continue;
      }
      if (!have_others) break;
      std::size_t other = rng.index(subjects.size() - 1);
      if (other >= s) ++other;
      const auto& pool = subjects[other].genuine;
      if (pool.empty()) continue;
      out.push_back({align_pair(anchor, pool[rng.index(pool.size())], sequence_cap), 0});
    }
  }
  return out;
}

}  // namespace sigbench::tarnn
