#include "idseq/detector.hpp"

#include <cmath>

#include "idseq/error.hpp"

namespace idseq {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
}

/// Inverted dropout mask scaled by 1/keep.
MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  MatrixXd mask(rows, cols);
  const double keep = 1.0 - p;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
  }
  return mask;
}

template <typename Params, typename View>
auto make_views(Params& p) {
  std::vector<std::pair<std::string, View>> out;
  auto add = [&out](std::string name, auto& m) {
    out.emplace_back(std::move(name), View(m.data(), m.size()));
  };
  for (std::size_t d = 0; d < p.directions.size(); ++d) {
    const std::string prefix = "gru." + std::to_string(d) + ".";
    add(prefix + "w_ih", p.directions[d].w_ih);
    add(prefix + "w_hh", p.directions[d].w_hh);
    add(prefix + "b_ih", p.directions[d].b_ih);
    add(prefix + "b_hh", p.directions[d].b_hh);
  }
  add("head.w1", p.head_w1);
  add("head.b1", p.head_b1);
  add("head.w2", p.head_w2);
  add("head.b2", p.head_b2);
  return out;
}

}  // namespace

void DetectorConfig::validate() const {
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  if (hidden_size < 1) throw ValidationError("hidden_size must be >= 1");
  if (head_hidden < 1) throw ValidationError("head_hidden must be >= 1");
  if (!(dropout_pre_rnn >= 0 && dropout_pre_rnn < 1) ||
      !(dropout_pre_head >= 0 && dropout_pre_head < 1)) {
    throw ValidationError("dropout rates must be in [0, 1)");
  }
  if (num_classes != 2) throw ValidationError("num_classes must be 2");
}

DetectorParams DetectorParams::zeros_like() const {
  DetectorParams z;
  for (const auto& d : directions) {
    z.directions.push_back({MatrixXd::Zero(d.w_ih.rows(), d.w_ih.cols()),
                            MatrixXd::Zero(d.w_hh.rows(), d.w_hh.cols()),
                            VectorXd::Zero(d.b_ih.size()),
                            VectorXd::Zero(d.b_hh.size())});
  }
  z.head_w1 = MatrixXd::Zero(head_w1.rows(), head_w1.cols());
  z.head_b1 = VectorXd::Zero(head_b1.size());
  z.head_w2 = MatrixXd::Zero(head_w2.rows(), head_w2.cols());
  z.head_b2 = VectorXd::Zero(head_b2.size());
  return z;
}

std::vector<std::pair<std::string, Eigen::Map<VectorXd>>> DetectorParams::views() {
  return make_views<DetectorParams, Eigen::Map<VectorXd>>(*this);
}

std::vector<std::pair<std::string, Eigen::Map<const VectorXd>>>
DetectorParams::views() const {
  return make_views<const DetectorParams, Eigen::Map<const VectorXd>>(*this);
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : views()) n += static_cast<std::size_t>(v.size());
  return n;
}

Detector::Detector(DetectorConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  const int in = config_.input_dim;
  const int h = config_.hidden_size;
  const int dirs = config_.bidirectional ? 2 : 1;
  Rng rng(mix_seed(seed, 0x696e6974ULL));
  for (int d = 0; d < dirs; ++d) {
    GruWeights w{MatrixXd(3 * h, in), MatrixXd(3 * h, h), VectorXd::Zero(3 * h),
                 VectorXd::Zero(3 * h)};
    fill_uniform(w.w_ih, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    fill_uniform(w.w_hh, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    params_.directions.push_back(std::move(w));
  }
  const int emb = config_.embedding_dim();
  params_.head_w1.resize(config_.head_hidden, emb);
  fill_uniform(params_.head_w1, 1.0 / std::sqrt(static_cast<double>(emb)), rng);
  params_.head_b1 = VectorXd::Zero(config_.head_hidden);
  params_.head_w2.resize(2, config_.head_hidden);
  fill_uniform(params_.head_w2,
               1.0 / std::sqrt(static_cast<double>(config_.head_hidden)), rng);
  params_.head_b2 = VectorXd::Zero(2);
}

Detector::Detector(DetectorConfig config, DetectorParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const int dirs = config_.bidirectional ? 2 : 1;
  const int h = config_.hidden_size;
  bool ok = static_cast<int>(params_.directions.size()) == dirs;
  for (const auto& d : params_.directions) {
    ok = ok && d.w_ih.rows() == 3 * h && d.w_ih.cols() == config_.input_dim &&
         d.w_hh.rows() == 3 * h && d.w_hh.cols() == h && d.b_ih.size() == 3 * h &&
         d.b_hh.size() == 3 * h;
  }
  ok = ok && params_.head_w1.rows() == config_.head_hidden &&
       params_.head_w1.cols() == config_.embedding_dim() &&
       params_.head_b1.size() == config_.head_hidden &&
       params_.head_w2.rows() == 2 && params_.head_w2.cols() == config_.head_hidden &&
       params_.head_b2.size() == 2;
  if (!ok) throw ValidationError("detector parameters do not match config");
}

void Detector::check_batch(const std::vector<const RowMatrixD*>& batch) const {
  if (batch.empty()) throw ValidationError("empty batch");
  const Eigen::Index t = batch.front()->rows();
  if (t < 1) throw ValidationError("sequence has no steps");
  for (const auto* seq : batch) {
    if (seq->cols() != config_.input_dim) {
      throw ValidationError("sequence step dim " + std::to_string(seq->cols()) +
                            " does not match detector input_dim " +
                            std::to_string(config_.input_dim));
    }
    if (seq->rows() != t) {
      throw ValidationError("sequences in a batch must share length");
    }
  }
}

BatchOutput Detector::forward(const std::vector<const RowMatrixD*>& batch,
                              bool training, Rng* rng, ForwardCache* cache) const {
  check_batch(batch);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = batch.front()->rows();
  const int I = config_.input_dim;
  const int H = config_.hidden_size;
  const bool drop_in = training && config_.dropout_pre_rnn > 0;
  const bool drop_head = training && config_.dropout_pre_head > 0;
  if ((drop_in || drop_head) && rng == nullptr) {
    throw ValidationError("training forward with dropout needs an rng");
  }

  std::vector<MatrixXd> inputs(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    MatrixXd x(B, I);
    for (Eigen::Index b = 0; b < B; ++b) x.row(b) = (*batch[b]).row(t);
    if (drop_in) x.array() *= dropout_mask(B, I, config_.dropout_pre_rnn, *rng).array();
    inputs[static_cast<std::size_t>(t)] = std::move(x);
  }

  const std::size_t dirs = params_.directions.size();
  MatrixXd embedding(B, config_.embedding_dim());
  if (cache) cache->directions.assign(dirs, {});
  for (std::size_t d = 0; d < dirs; ++d) {
    const GruWeights& w = params_.directions[d];
    MatrixXd h = MatrixXd::Zero(B, H);
    for (Eigen::Index k = 0; k < T; ++k) {
      const Eigen::Index t = d == 0 ? k : T - 1 - k;
      MatrixXd gi = inputs[static_cast<std::size_t>(t)] * w.w_ih.transpose();
      gi.rowwise() += w.b_ih.transpose();
      MatrixXd gh = h * w.w_hh.transpose();
      gh.rowwise() += w.b_hh.transpose();
      MatrixXd r = sigmoid(gi.leftCols(H) + gh.leftCols(H));
      MatrixXd z = sigmoid(gi.middleCols(H, H) + gh.middleCols(H, H));
      MatrixXd gh_n = gh.rightCols(H);
      MatrixXd n = (gi.rightCols(H).array() + r.array() * gh_n.array()).tanh().matrix();
      MatrixXd h_new = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
      if (cache) {
        auto& c = cache->directions[d];
        c.h_prev.push_back(std::move(h));
        c.r.push_back(std::move(r));
        c.z.push_back(std::move(z));
        c.n.push_back(std::move(n));
        c.gh_n.push_back(std::move(gh_n));
      }
      h = std::move(h_new);
    }
    embedding.middleCols(static_cast<Eigen::Index>(d) * H, H) = h;
  }

  MatrixXd mask = drop_head
                      ? dropout_mask(B, embedding.cols(), config_.dropout_pre_head, *rng)
                      : MatrixXd::Ones(B, embedding.cols());
  MatrixXd head_input = (embedding.array() * mask.array()).matrix();
  MatrixXd pre = head_input * params_.head_w1.transpose();
  pre.rowwise() += params_.head_b1.transpose();
  MatrixXd hidden = pre.cwiseMax(0.0);
  MatrixXd logits = hidden * params_.head_w2.transpose();
  logits.rowwise() += params_.head_b2.transpose();

  MatrixXd probs(B, 2);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double m = logits.row(b).maxCoeff();
    const double e0 = std::exp(logits(b, 0) - m);
    const double e1 = std::exp(logits(b, 1) - m);
    probs(b, 0) = e0 / (e0 + e1);
    probs(b, 1) = e1 / (e0 + e1);
  }

  if (cache) {
    cache->inputs = std::move(inputs);
    cache->embedding = embedding;
    cache->head_input = std::move(head_input);
    cache->head_pre = std::move(pre);
    cache->head_hidden = hidden;
    cache->head_mask = std::move(mask);
  }
  return {std::move(embedding), std::move(logits), std::move(probs)};
}

void Detector::backward(const ForwardCache& cache, const MatrixXd& d_embedding,
                        const MatrixXd& d_logits, DetectorParams& grads) const {
  const int H = config_.hidden_size;
  const Eigen::Index T = static_cast<Eigen::Index>(cache.inputs.size());

  grads.head_w2.noalias() += d_logits.transpose() * cache.head_hidden;
  grads.head_b2 += d_logits.colwise().sum().transpose();
  MatrixXd d_pre = d_logits * params_.head_w2;
  d_pre.array() *= (cache.head_pre.array() > 0.0).cast<double>();
  grads.head_w1.noalias() += d_pre.transpose() * cache.head_input;
  grads.head_b1 += d_pre.colwise().sum().transpose();
  MatrixXd d_h = ((d_pre * params_.head_w1).array() * cache.head_mask.array()).matrix();
  if (d_embedding.size() > 0) d_h += d_embedding;

  for (std::size_t d = 0; d < params_.directions.size(); ++d) {
    const GruWeights& w = params_.directions[d];
    GruWeights& g = grads.directions[d];
    const auto& c = cache.directions[d];
    MatrixXd dh = d_h.middleCols(static_cast<Eigen::Index>(d) * H, H);
    for (Eigen::Index k = T - 1; k >= 0; --k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::Index t = d == 0 ? k : T - 1 - k;
      const auto& z = c.z[ks].array();
      const auto& n = c.n[ks].array();
      const auto& r = c.r[ks].array();
      const auto& h_prev = c.h_prev[ks];

      const Eigen::ArrayXXd dn = dh.array() * (1.0 - z);
      const Eigen::ArrayXXd dz = dh.array() * (h_prev.array() - n);
      const Eigen::ArrayXXd da_n = dn * (1.0 - n.square());
      const Eigen::ArrayXXd da_r = da_n * c.gh_n[ks].array() * r * (1.0 - r);
      const Eigen::ArrayXXd da_z = dz * z * (1.0 - z);

      MatrixXd dgi(dh.rows(), 3 * H);
      dgi << da_r.matrix(), da_z.matrix(), da_n.matrix();
      MatrixXd dgh(dh.rows(), 3 * H);
      dgh << da_r.matrix(), da_z.matrix(), (da_n * r).matrix();

      g.w_ih.noalias() += dgi.transpose() * cache.inputs[static_cast<std::size_t>(t)];
      g.b_ih += dgi.colwise().sum().transpose();
      g.w_hh.noalias() += dgh.transpose() * h_prev;
      g.b_hh += dgh.colwise().sum().transpose();
      dh = (dh.array() * z).matrix() + dgh * w.w_hh;
    }
  }
}

Eigen::VectorXd Detector::forward_embed(const DifferenceSequence& diff,
                                        bool training,
                                        std::uint64_t rng_seed) const {
  Rng rng(rng_seed);
  return forward({&diff.steps}, training, &rng, nullptr).embedding.row(0).transpose();
}

Eigen::Vector2d Detector::head_logits(const VectorXd& embedding, bool training,
                                      std::uint64_t rng_seed) const {
  if (embedding.size() != config_.embedding_dim()) {
    throw ValidationError("embedding dim " + std::to_string(embedding.size()) +
                          " does not match head input " +
                          std::to_string(config_.embedding_dim()));
  }
  VectorXd x = embedding;
  if (training && config_.dropout_pre_head > 0) {
    Rng rng(rng_seed);
    x.array() *= dropout_mask(x.size(), 1, config_.dropout_pre_head, rng).array();
  }
  VectorXd hidden = (params_.head_w1 * x + params_.head_b1).cwiseMax(0.0);
  return params_.head_w2 * hidden + params_.head_b2;
}

double softmax_fake(double logit_real, double logit_fake) {
  const double m = std::max(logit_real, logit_fake);
  const double e0 = std::exp(logit_real - m);
  const double e1 = std::exp(logit_fake - m);
  return e1 / (e0 + e1);
}

double Detector::forward_prob(const VectorXd& embedding, bool training,
                              std::uint64_t rng_seed) const {
  const Eigen::Vector2d z = head_logits(embedding, training, rng_seed);
  return softmax_fake(z[0], z[1]);
}

std::vector<double> Detector::window_probs(
    const std::vector<DifferenceSequence>& windows, std::size_t batch_size) const {
  std::vector<double> out;
  out.reserve(windows.size());
  std::size_t i = 0;
  while (i < windows.size()) {
    std::vector<const RowMatrixD*> chunk{&windows[i].steps};
    std::size_t j = i + 1;
    while (j < windows.size() && chunk.size() < batch_size &&
           windows[j].length() == windows[i].length()) {
      chunk.push_back(&windows[j].steps);
      ++j;
    }
    const BatchOutput res = forward(chunk, /*training=*/false, nullptr, nullptr);
    for (Eigen::Index b = 0; b < res.probs.rows(); ++b) out.push_back(res.probs(b, 1));
    i = j;
  }
  return out;
}

double score_video(const Detector& model,
                   const std::vector<DifferenceSequence>& windows) {
  if (windows.empty()) throw ValidationError("score_video needs at least one window");
  const auto probs = model.window_probs(windows);
  double sum = 0;
  for (double p : probs) sum += p;
  return sum / static_cast<double>(probs.size());
}

}  // namespace idseq
