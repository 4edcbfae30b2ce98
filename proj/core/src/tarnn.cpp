#include "sigbench/tarnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sigbench/dtw.hpp"

namespace sigbench::tarnn {

std::string_view to_string(Readout r) { return r == Readout::MeanPool ? "mean_pool" : "last_step"; }

namespace {

constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
    "shared.fwd.W", "shared.fwd.U", "shared.fwd.b", "shared.bwd.W", "shared.bwd.U",
    "shared.bwd.b", "merge.fwd.W",  "merge.fwd.U",  "merge.fwd.b",  "merge.bwd.W",
    "merge.bwd.U",  "merge.bwd.b",  "out.w",        "out.b",
};

}  // namespace

TaRnnParams::TaRnnParams(const Architecture& arch) : arch_(arch) {
  if (arch.input_size == 0 || arch.hidden1 == 0 || arch.hidden2 == 0) {
    throw std::invalid_argument("TaRnnParams: zero-sized architecture");
  }
  const std::size_t h1 = arch.hidden1, h2 = arch.hidden2;
  const std::array<std::pair<std::size_t, std::size_t>, kNumTensors> shapes = {{
      {3 * h1, arch.input_size}, {3 * h1, h1}, {3 * h1, 1},
      {3 * h1, arch.input_size}, {3 * h1, h1}, {3 * h1, 1},
      {3 * h2, 4 * h1},          {3 * h2, h2}, {3 * h2, 1},
      {3 * h2, 4 * h1},          {3 * h2, h2}, {3 * h2, 1},
      {1, 2 * h2},               {1, 1},
  }};
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kNumTensors; ++i) {
    layout_[i] = {kTensorNames[i], shapes[i].first, shapes[i].second, offset};
    offset += shapes[i].first * shapes[i].second;
  }
  values_.assign(offset, 0.0);
}

TaRnnParams TaRnnParams::initialize(const Architecture& arch, std::uint64_t seed) {
  TaRnnParams p(arch);
  p.seed_ = seed;
  Rng rng(mix_seed(seed, {0x7a72}));
  for (const auto& t : p.layout_) {
    if (t.name.ends_with(".b")) continue;
    const double bound = std::sqrt(1.0 / static_cast<double>(t.cols));
    for (std::size_t k = 0; k < t.size(); ++k) {
      p.values_[t.offset + k] = rng.uniform(-bound, bound);
    }
  }
  return p;
}

std::span<double> TaRnnParams::tensor(Tensor t) {
  const auto& i = info(t);
  return std::span<double>(values_).subspan(i.offset, i.size());
}

std::span<const double> TaRnnParams::tensor(Tensor t) const {
  const auto& i = info(t);
  return std::span<const double>(values_).subspan(i.offset, i.size());
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointFormat = "sigbench-tarnn";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::string to_json(const TaRnnParams& params) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["seed"] = params.seed();
  const auto& a = params.architecture();
  j["architecture"] = {{"input_size", a.input_size},
                       {"hidden1", a.hidden1},
                       {"hidden2", a.hidden2},
                       {"readout", to_string(a.readout)}};
  auto& tensors = j["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumTensors; ++i) {
    const auto& info = params.layout()[i];
    const auto data = params.tensor(static_cast<Tensor>(i));
    tensors.push_back({{"name", info.name},
                       {"shape", {info.rows, info.cols}},
                       {"data", std::vector<double>(data.begin(), data.end())}});
  }
  return j.dump(1);
}

TaRnnParams params_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError("not a sigbench TA-RNN checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("unsupported checkpoint version");
    }
    Architecture arch;
    const auto& ja = j.at("architecture");
    arch.input_size = ja.at("input_size").get<std::size_t>();
    arch.hidden1 = ja.at("hidden1").get<std::size_t>();
    arch.hidden2 = ja.at("hidden2").get<std::size_t>();
    const auto readout = ja.at("readout").get<std::string>();
    if (readout == "mean_pool") arch.readout = Readout::MeanPool;
    else if (readout == "last_step") arch.readout = Readout::LastStep;
    else throw ParseError("unknown readout '" + readout + "'");

    TaRnnParams p(arch);
    p.set_seed(j.at("seed").get<std::uint64_t>());
    const auto& tensors = j.at("tensors");
    if (!tensors.is_array() || tensors.size() != kNumTensors) {
      throw ParseError("checkpoint tensor count mismatch");
    }
    for (std::size_t i = 0; i < kNumTensors; ++i) {
      const auto& jt = tensors[i];
      const auto& info = p.layout()[i];
      if (jt.at("name").get<std::string>() != info.name) {
        throw ParseError("checkpoint tensor " + std::to_string(i) + " is not " +
                         std::string(info.name));
      }
      const auto shape = jt.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != info.rows || shape[1] != info.cols) {
        throw ParseError("shape mismatch for " + std::string(info.name));
      }
      const auto data = jt.at("data").get<std::vector<double>>();
      if (data.size() != info.size()) {
        throw ParseError("data length mismatch for " + std::string(info.name));
      }
      for (double v : data) {
        if (!std::isfinite(v)) throw ParseError("non-finite weight in " + std::string(info.name));
      }
      std::copy(data.begin(), data.end(), p.tensor(static_cast<Tensor>(i)).begin());
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

// ---- alignment ------------------------------------------------------------

AlignedPair align_pair(const Matrix& a_in, const Matrix& b_in, std::size_t sequence_cap) {
  if (a_in.rows() == 0 || b_in.rows() == 0) throw std::invalid_argument("align_pair: empty input");
  if (a_in.cols() != b_in.cols()) throw std::invalid_argument("align_pair: column mismatch");
  auto truncate = [&](const Matrix& m) {
    if (m.rows() <= sequence_cap) return m;
    Matrix out(sequence_cap, m.cols());
    std::copy_n(m.data().begin(), sequence_cap * m.cols(), out.data().begin());
    return out;
  };
  const Matrix a = truncate(a_in);
  const Matrix b = truncate(b_in);
  const auto alignment = dtw::dtw_align(a, b, timefunc::kAlignmentChannels);

  AlignedPair out{Matrix(alignment.path.size(), a.cols()), Matrix(alignment.path.size(), b.cols())};
  for (std::size_t k = 0; k < alignment.path.size(); ++k) {
    const auto [i, j] = alignment.path[k];
    std::copy_n(a.row(i).begin(), a.cols(), out.a.row(k).begin());
    std::copy_n(b.row(j).begin(), b.cols(), out.b.row(k).begin());
  }
  return out;
}

AlignedPair align_pair(const timefunc::TimeFunctionMatrix& a, const timefunc::TimeFunctionMatrix& b,
                       std::size_t sequence_cap) {
  return align_pair(a.values, b.values, sequence_cap);
}

// ---- GRU kernels ----------------------------------------------------------

namespace {

struct GruView {
  const double* w;
  const double* u;
  const double* b;
  std::size_t in;
  std::size_t hid;
};

struct GruGrad {
  double* w;
  double* u;
  double* b;
};

GruView gru_view(const TaRnnParams& p, Tensor w) {
  const auto wi = static_cast<std::size_t>(w);
  return {p.tensor(w).data(), p.tensor(static_cast<Tensor>(wi + 1)).data(),
          p.tensor(static_cast<Tensor>(wi + 2)).data(), p.info(w).cols, p.info(w).rows / 3};
}

GruGrad gru_grad(TaRnnParams& g, Tensor w) {
  const auto wi = static_cast<std::size_t>(w);
  return {g.tensor(w).data(), g.tensor(static_cast<Tensor>(wi + 1)).data(),
          g.tensor(static_cast<Tensor>(wi + 2)).data()};
}

double sigmoid(double x) { return logistic(x); }

void gru_forward(const GruView& p, const Matrix& x, bool reverse, GruCache& c, double& max_pre) {
  const std::size_t len = x.rows(), hid = p.hid, in = p.in;
  c.h = Matrix(len, hid);
  c.z = Matrix(len, hid);
  c.r = Matrix(len, hid);
  c.n = Matrix(len, hid);
  std::vector<double> hprev(hid, 0.0), a(3 * hid), rh(hid);
  for (std::size_t s = 0; s < len; ++s) {
    const std::size_t t = reverse ? len - 1 - s : s;
    const double* xt = x.row(t).data();
    for (std::size_t k = 0; k < 3 * hid; ++k) {
      const double* wk = p.w + k * in;
      double acc = p.b[k];
      for (std::size_t i = 0; i < in; ++i) acc += wk[i] * xt[i];
      a[k] = acc;
    }
    for (std::size_t k = 0; k < 2 * hid; ++k) {
      const double* uk = p.u + k * hid;
      double acc = 0.0;
      for (std::size_t j = 0; j < hid; ++j) acc += uk[j] * hprev[j];
      a[k] += acc;
    }
    double* z = c.z.row(t).data();
    double* r = c.r.row(t).data();
    double* n = c.n.row(t).data();
    double* h = c.h.row(t).data();
    for (std::size_t j = 0; j < hid; ++j) {
      z[j] = sigmoid(a[j]);
      r[j] = sigmoid(a[hid + j]);
      rh[j] = r[j] * hprev[j];
    }
    for (std::size_t k = 2 * hid; k < 3 * hid; ++k) {
      const double* uk = p.u + k * hid;
      double acc = 0.0;
      for (std::size_t j = 0; j < hid; ++j) acc += uk[j] * rh[j];
      a[k] += acc;
    }
    for (std::size_t j = 0; j < hid; ++j) {
      n[j] = std::tanh(a[2 * hid + j]);
      h[j] = (1.0 - z[j]) * hprev[j] + z[j] * n[j];
    }
    for (double v : a) max_pre = std::max(max_pre, std::abs(v));
    std::copy(h, h + hid, hprev.begin());
  }
}

// dh_out holds dLoss/dh for this direction in columns [dh_col, dh_col + H).
// When dx is given, dLoss/dx is accumulated into columns [0, in) of it.
void gru_backward(const GruView& p, const GruGrad& g, const Matrix& x, bool reverse,
                  const GruCache& c, const Matrix& dh_out, std::size_t dh_col, Matrix* dx) {
  const std::size_t len = x.rows(), hid = p.hid, in = p.in;
  std::vector<double> carry(hid, 0.0), dh(hid), hprev(hid), da(3 * hid), drh(hid), dhp(hid),
      rh(hid);
  for (std::size_t s = len; s-- > 0;) {
    const std::size_t t = reverse ? len - 1 - s : s;
    if (s == 0) {
      std::fill(hprev.begin(), hprev.end(), 0.0);
    } else {
      const std::size_t tp = reverse ? t + 1 : t - 1;
      std::copy_n(c.h.row(tp).begin(), hid, hprev.begin());
    }
    const double* z = c.z.row(t).data();
    const double* r = c.r.row(t).data();
    const double* n = c.n.row(t).data();
    const double* xt = x.row(t).data();
    const double* dho = dh_out.row(t).data() + dh_col;

    for (std::size_t j = 0; j < hid; ++j) {
      dh[j] = dho[j] + carry[j];
      dhp[j] = dh[j] * (1.0 - z[j]);
      const double dz = dh[j] * (n[j] - hprev[j]);
      const double dn = dh[j] * z[j];
      da[j] = dz * z[j] * (1.0 - z[j]);
      da[2 * hid + j] = dn * (1.0 - n[j] * n[j]);
      rh[j] = r[j] * hprev[j];
    }
    // Candidate block: Un acts on r * hprev.
    std::fill(drh.begin(), drh.end(), 0.0);
    for (std::size_t k = 2 * hid; k < 3 * hid; ++k) {
      const double dak = da[k];
      const double* uk = p.u + k * hid;
      double* guk = g.u + k * hid;
      for (std::size_t j = 0; j < hid; ++j) {
        guk[j] += dak * rh[j];
        drh[j] += uk[j] * dak;
      }
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double dr = drh[j] * hprev[j];
      dhp[j] += drh[j] * r[j];
      da[hid + j] = dr * r[j] * (1.0 - r[j]);
    }
    for (std::size_t k = 0; k < 2 * hid; ++k) {
      const double dak = da[k];
      const double* uk = p.u + k * hid;
      double* guk = g.u + k * hid;
      for (std::size_t j = 0; j < hid; ++j) {
        guk[j] += dak * hprev[j];
        dhp[j] += uk[j] * dak;
      }
    }
    for (std::size_t k = 0; k < 3 * hid; ++k) {
      const double dak = da[k];
      g.b[k] += dak;
      double* gwk = g.w + k * in;
      for (std::size_t i = 0; i < in; ++i) gwk[i] += dak * xt[i];
    }
    if (dx != nullptr) {
      double* dxt = dx->row(t).data();
      for (std::size_t k = 0; k < 3 * hid; ++k) {
        const double dak = da[k];
        const double* wk = p.w + k * in;
        for (std::size_t i = 0; i < in; ++i) dxt[i] += wk[i] * dak;
      }
    }
    carry = dhp;
  }
}

void check_inputs(const TaRnnParams& params, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("forward: aligned length mismatch");
  if (a.rows() == 0) throw std::invalid_argument("forward: empty sequence");
  const std::size_t in = params.architecture().input_size;
  if (a.cols() != in || b.cols() != in) {
    throw std::invalid_argument("forward: input width does not match the architecture");
  }
}

void backward(const TaRnnParams& params, const Matrix& a, const Matrix& b, const ForwardCache& c,
              double dlogit, TaRnnParams& grad) {
  const auto& arch = params.architecture();
  const std::size_t len = a.rows(), h1 = arch.hidden1, h2 = arch.hidden2;

  auto gw = grad.tensor(Tensor::OutW);
  const auto w = params.tensor(Tensor::OutW);
  for (std::size_t k = 0; k < 2 * h2; ++k) gw[k] += dlogit * c.pooled[k];
  grad.tensor(Tensor::OutB)[0] += dlogit;

  Matrix dg(len, 2 * h2);
  if (arch.readout == Readout::MeanPool) {
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < 2 * h2; ++k) dg(t, k) = dlogit * w[k] * inv;
    }
  } else {
    for (std::size_t k = 0; k < h2; ++k) {
      dg(len - 1, k) = dlogit * w[k];
      dg(0, h2 + k) = dlogit * w[h2 + k];
    }
  }

  Matrix dmerge(len, 4 * h1);
  gru_backward(gru_view(params, Tensor::MergeFwdW), gru_grad(grad, Tensor::MergeFwdW),
               c.merge_input, false, c.merge_fwd, dg, 0, &dmerge);
  gru_backward(gru_view(params, Tensor::MergeBwdW), gru_grad(grad, Tensor::MergeBwdW),
               c.merge_input, true, c.merge_bwd, dg, h2, &dmerge);

  const auto sf = gru_view(params, Tensor::SharedFwdW);
  const auto sb = gru_view(params, Tensor::SharedBwdW);
  const auto gsf = gru_grad(grad, Tensor::SharedFwdW);
  const auto gsb = gru_grad(grad, Tensor::SharedBwdW);
  gru_backward(sf, gsf, a, false, c.shared_fwd_a, dmerge, 0, nullptr);
  gru_backward(sb, gsb, a, true, c.shared_bwd_a, dmerge, h1, nullptr);
  gru_backward(sf, gsf, b, false, c.shared_fwd_b, dmerge, 2 * h1, nullptr);
  gru_backward(sb, gsb, b, true, c.shared_bwd_b, dmerge, 3 * h1, nullptr);
}

}  // namespace

double forward(const TaRnnParams& params, const Matrix& a, const Matrix& b, ForwardCache* cache) {
  check_inputs(params, a, b);
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  const auto& arch = params.architecture();
  const std::size_t len = a.rows(), h1 = arch.hidden1, h2 = arch.hidden2;

  double max_pre = 0.0;
  const auto sf = gru_view(params, Tensor::SharedFwdW);
  const auto sb = gru_view(params, Tensor::SharedBwdW);
  gru_forward(sf, a, false, c.shared_fwd_a, max_pre);
  gru_forward(sb, a, true, c.shared_bwd_a, max_pre);
  gru_forward(sf, b, false, c.shared_fwd_b, max_pre);
  gru_forward(sb, b, true, c.shared_bwd_b, max_pre);

  c.merge_input = Matrix(len, 4 * h1);
  for (std::size_t t = 0; t < len; ++t) {
    auto row = c.merge_input.row(t);
    std::copy_n(c.shared_fwd_a.h.row(t).begin(), h1, row.begin());
    std::copy_n(c.shared_bwd_a.h.row(t).begin(), h1, row.begin() + h1);
    std::copy_n(c.shared_fwd_b.h.row(t).begin(), h1, row.begin() + 2 * h1);
    std::copy_n(c.shared_bwd_b.h.row(t).begin(), h1, row.begin() + 3 * h1);
  }
  gru_forward(gru_view(params, Tensor::MergeFwdW), c.merge_input, false, c.merge_fwd, max_pre);
  gru_forward(gru_view(params, Tensor::MergeBwdW), c.merge_input, true, c.merge_bwd, max_pre);

  c.pooled.assign(2 * h2, 0.0);
  if (arch.readout == Readout::MeanPool) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < h2; ++k) {
        c.pooled[k] += c.merge_fwd.h(t, k);
        c.pooled[h2 + k] += c.merge_bwd.h(t, k);
      }
    }
    for (double& v : c.pooled) v /= static_cast<double>(len);
  } else {
    for (std::size_t k = 0; k < h2; ++k) {
      c.pooled[k] = c.merge_fwd.h(len - 1, k);
      c.pooled[h2 + k] = c.merge_bwd.h(0, k);
    }
  }

  const auto w = params.tensor(Tensor::OutW);
  double logit = params.tensor(Tensor::OutB)[0];
  for (std::size_t k = 0; k < 2 * h2; ++k) logit += w[k] * c.pooled[k];
  max_pre = std::max(max_pre, std::abs(logit));
  if (!std::isfinite(logit) || !std::isfinite(max_pre)) {
    throw NumericError("TA-RNN forward produced a non-finite activation");
  }
  c.logit = logit;
  c.score = logistic(logit);
  c.max_abs_preactivation = max_pre;
  return c.score;
}

LossAndGradient loss_and_gradients(const TaRnnParams& params,
                                   std::span<const TrainingExample> batch, std::size_t jobs) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());

  // One gradient buffer per example, summed in batch order afterwards, so the
  // result does not depend on the number of worker threads.
  std::vector<TaRnnParams> grads(batch.size(), TaRnnParams(params.architecture()));
  std::vector<double> losses(batch.size());
  auto work = [&](std::size_t i) {
    const auto& ex = batch[i];
    ForwardCache cache;
    forward(params, ex.pair.a, ex.pair.b, &cache);
    const double y = static_cast<double>(ex.label);
    losses[i] = softplus(cache.logit) - y * cache.logit;
    backward(params, ex.pair.a, ex.pair.b, cache, (cache.score - y) * inv, grads[i]);
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, batch.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += jobs) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  LossAndGradient out{0.0, TaRnnParams(params.architecture())};
  out.gradient.set_seed(params.seed());
  auto total = out.gradient.flat();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    const auto gi = grads[i].flat();
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += gi[k];
  }
  out.loss *= inv;
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

double score_pair(const TaRnnParams& params,
                  std::span<const timefunc::TimeFunctionMatrix> enrolments,
                  const timefunc::TimeFunctionMatrix& probe, std::size_t sequence_cap) {
  if (enrolments.empty()) throw std::invalid_argument("score_pair: no enrolment signatures");
  double sum = 0.0;
  for (const auto& e : enrolments) {
    const auto pair = align_pair(e, probe, sequence_cap);
    sum += forward(params, pair.a, pair.b);
  }
  return sum / static_cast<double>(enrolments.size());
}

}  // namespace sigbench::tarnn
