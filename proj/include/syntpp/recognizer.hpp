// Copyright 2026 The syntpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SYNTPP_RECOGNIZER_HPP
#define SYNTPP_RECOGNIZER_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "syntpp/common.hpp"
#include "syntpp/gapgen.hpp"
#include "syntpp/metrics.hpp"
#include "syntpp/nn.hpp"

namespace syntpp {

using nn::Matrix;
using nn::Vector;

// Row-wise log-softmax. Each row of the result has log-sum-exp 0.
inline Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse =
        m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // w.r.t. the logits
};

// -log softmax(logits)[label] for a single row of logits.
inline LossGrad cross_entropy(const Eigen::RowVectorXd& logits, int label) {
  SYNTPP_REQUIRE(label >= 0 && label < logits.size(), "cross_entropy: label out of range");
  const Matrix lp = log_softmax(logits);
  LossGrad out;
  out.loss = -lp(0, label);
  out.grad = lp.array().exp().matrix();
  out.grad(0, label) -= 1.0;
  return out;
}

// Mean per-frame CE of log-posteriors against y with each token repeated
// frames_per_token times.
inline double frame_cross_entropy(const Matrix& log_post, const std::vector<int>& y,
                                  int frames_per_token) {
  SYNTPP_REQUIRE(log_post.rows() ==
                     static_cast<Eigen::Index>(y.size()) * frames_per_token,
                 "frame_cross_entropy: frame count does not match F * |y|");
  double s = 0.0;
  for (Eigen::Index t = 0; t < log_post.rows(); ++t)
    s -= log_post(t, y[t / frames_per_token]);
  return s / static_cast<double>(log_post.rows());
}

struct CtcResult {
  double loss = kInf;
  Matrix grad;  // w.r.t. logits that produced the log-posteriors
  bool feasible = false;
};

// CTC negative log-likelihood with alpha-beta recursions in log space over
// the blank-interleaved label. log_post holds per-frame log-softmax values
// with the blank at column `blank`.
inline CtcResult ctc_loss(const Matrix& log_post, const std::vector<int>& y,
                          int blank) {
  const int T = static_cast<int>(log_post.rows());
  const int K = static_cast<int>(log_post.cols());
  SYNTPP_REQUIRE(blank >= 0 && blank < K, "ctc_loss: blank index out of range");
  for (int v : y)
    SYNTPP_REQUIRE(v >= 0 && v < K && v != blank, "ctc_loss: label out of range");
  CtcResult out;
  out.grad = Matrix::Zero(T, K);
  if (T == 0) return out;

  const int S = 2 * static_cast<int>(y.size()) + 1;
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < y.size(); ++i) ext[2 * i + 1] = y[i];
  auto can_skip = [&](int s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  Matrix alpha = Matrix::Constant(T, S, kNegInf);
  Matrix beta = Matrix::Constant(T, S, kNegInf);
  alpha(0, 0) = log_post(0, ext[0]);
  if (S > 1) alpha(0, 1) = log_post(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_sum_exp(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_sum_exp(a, alpha(t - 1, s - 2));
      if (a > kNegInf) alpha(t, s) = a + log_post(t, ext[s]);
    }
  }
  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_sum_exp(log_p, alpha(T - 1, S - 2));
  if (log_p == kNegInf) return out;  // infeasible: T too short for y

  beta(T - 1, S - 1) = log_post(T - 1, ext[S - 1]);
  if (S > 1) beta(T - 1, S - 2) = log_post(T - 1, ext[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < S) b = log_sum_exp(b, beta(t + 1, s + 1));
      if (s + 2 < S && can_skip(s + 2)) b = log_sum_exp(b, beta(t + 1, s + 2));
      if (b > kNegInf) beta(t, s) = b + log_post(t, ext[s]);
    }
  }

  out.feasible = true;
  out.loss = -log_p;
  // d(-log P)/d logit_{t,k} = softmax_{t,k} - occupancy_{t,k}
  for (int t = 0; t < T; ++t) {
    Eigen::RowVectorXd occ = Eigen::RowVectorXd::Constant(K, kNegInf);
    for (int s = 0; s < S; ++s) {
      const double g = alpha(t, s) + beta(t, s) - log_post(t, ext[s]);
      occ(ext[s]) = log_sum_exp(occ(ext[s]), g);
    }
    for (int k = 0; k < K; ++k)
      out.grad(t, k) = std::exp(log_post(t, k)) -
                       (occ(k) == kNegInf ? 0.0 : std::exp(occ(k) - log_p));
  }
  return out;
}

// Per-frame argmax (lowest index wins ties), collapse repeats, drop blanks.
inline std::vector<int> greedy_decode(const Matrix& post, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < post.rows(); ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < post.cols(); ++k)
      if (post(t, k) > post(t, best)) best = static_cast<int>(k);
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

struct RecognizerConfig {
  int hidden = 32;
  bool batch_norm = true;
};

struct BatchResult {
  double loss = 0.0;
  nn::Gradients grads;
};

using SampleBatch = std::span<const Sample* const>;

// Per-frame network: [frame, one-hot phase within its token] -> V+1 logits,
// blank at index V.
class SequenceModel {
 public:
  SequenceModel() = default;
  SequenceModel(int dim, int vocab, int frames_per_token, RecognizerConfig cfg,
                std::uint64_t init_seed)
      : dim_(dim), vocab_(vocab), frames_per_token_(frames_per_token) {
    Rng rng(init_seed);
    net_.add_dense(dim + frames_per_token, cfg.hidden, rng);
    if (cfg.batch_norm) net_.add_batch_norm();
    net_.add_activation(nn::ActivationKind::Tanh);
    net_.add_dense(cfg.hidden, vocab + 1, rng);
  }

  static SequenceModel for_world(const WorldSpec& w, RecognizerConfig cfg,
                                 std::uint64_t init_seed) {
    return SequenceModel(w.dim, w.vocab(), w.frames_per_token, cfg, init_seed);
  }

  SequenceModel(nn::Network net, int dim, int vocab, int frames_per_token)
      : net_(std::move(net)), dim_(dim), vocab_(vocab), frames_per_token_(frames_per_token) {
    if (net_.input_dim() != dim + frames_per_token || net_.output_dim() != vocab + 1)
      throw ConfigError("sequence checkpoint does not match its task header");
  }

  int blank() const { return vocab_; }
  int vocab() const { return vocab_; }
  int dim() const { return dim_; }
  int frames_per_token() const { return frames_per_token_; }
  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  Matrix frame_inputs(const Sample& s) const {
    SYNTPP_REQUIRE(s.features.cols() == dim_, "sequence model: feature dimension mismatch");
    Matrix x = Matrix::Zero(s.features.rows(), dim_ + frames_per_token_);
    x.leftCols(dim_) = s.features;
    for (Eigen::Index t = 0; t < x.rows(); ++t) x(t, dim_ + t % frames_per_token_) = 1.0;
    return x;
  }

  Matrix posteriors(const Sample& s, nn::BnProbe* probe = nullptr) const {
    return log_softmax(net_.infer(frame_inputs(s), probe));
  }

  std::vector<int> decode(const Sample& s) const {
    return greedy_decode(posteriors(s), blank());
  }

  BatchResult loss_and_grad(SampleBatch batch, nn::DomainTag tag,
                            nn::StatsRouting routing, nn::BnProbe* probe = nullptr) {
    SYNTPP_REQUIRE(!batch.empty(), "loss_and_grad: empty batch");
    Eigen::Index rows = 0;
    for (const Sample* s : batch) rows += s->features.rows();
    Matrix x(rows, dim_ + frames_per_token_);
    Eigen::Index off = 0;
    for (const Sample* s : batch) {
      x.middleRows(off, s->features.rows()) = frame_inputs(*s);
      off += s->features.rows();
    }
    const Matrix logits = net_.forward(x, tag, nn::Mode::Train, routing, probe);
    Matrix grad = Matrix::Zero(logits.rows(), logits.cols());
    BatchResult out;
    off = 0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const Sample* s : batch) {
      const Eigen::Index T = s->features.rows();
      const CtcResult ctc =
          ctc_loss(log_softmax(logits.middleRows(off, T)), s->tokens, blank());
      if (ctc.feasible) {
        out.loss += ctc.loss * inv_b;
        grad.middleRows(off, T) = ctc.grad * inv_b;
      }
      off += T;
    }
    out.grads = net_.backward(grad).params;
    return out;
  }

  // Higher is better: negative corpus WER.
  double validation_score(const Dataset& val) const { return -corpus_wer(val); }

  double corpus_wer(const Dataset& data) const {
    metrics::CorpusWer acc;
    for (const auto& s : data) acc.add(metrics::wer(s.tokens, decode(s)));
    return acc.value();
  }

 private:
  nn::Network net_;
  int dim_ = 0;
  int vocab_ = 0;
  int frames_per_token_ = 1;
};

// Mean-pooled frame features -> 2 logits; class 1 means the utterance
// contains the keyword token.
class KeywordModel {
 public:
  KeywordModel() = default;
  KeywordModel(int dim, int keyword, RecognizerConfig cfg, std::uint64_t init_seed)
      : dim_(dim), keyword_(keyword) {
    Rng rng(init_seed);
    net_.add_dense(dim, cfg.hidden, rng);
    if (cfg.batch_norm) net_.add_batch_norm();
    net_.add_activation(nn::ActivationKind::Tanh);
    net_.add_dense(cfg.hidden, 2, rng);
  }

  KeywordModel(nn::Network net, int dim, int keyword)
      : net_(std::move(net)), dim_(dim), keyword_(keyword) {
    if (net_.input_dim() != dim || net_.output_dim() != 2)
      throw ConfigError("keyword checkpoint does not match its task header");
  }

  int keyword() const { return keyword_; }
  int dim() const { return dim_; }
  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  bool label(const Sample& s) const {
    return std::find(s.tokens.begin(), s.tokens.end(), keyword_) != s.tokens.end();
  }

  Eigen::RowVectorXd pooled(const Sample& s) const {
    SYNTPP_REQUIRE(s.features.cols() == dim_, "keyword model: feature dimension mismatch");
    return s.features.colwise().mean();
  }

  // Detection score: logit margin of the keyword class.
  double score(const Sample& s, nn::BnProbe* probe = nullptr) const {
    const Matrix z = net_.infer(pooled(s), probe);
    return z(0, 1) - z(0, 0);
  }

  std::vector<double> scores(const Dataset& data, nn::BnProbe* probe = nullptr) const {
    Matrix x(static_cast<Eigen::Index>(data.size()), dim_);
    for (std::size_t i = 0; i < data.size(); ++i) x.row(i) = pooled(data[i]);
    const Matrix z = net_.infer(x, probe);
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = z(i, 1) - z(i, 0);
    return out;
  }

  BatchResult loss_and_grad(SampleBatch batch, nn::DomainTag tag,
                            nn::StatsRouting routing, nn::BnProbe* probe = nullptr) {
    SYNTPP_REQUIRE(!batch.empty(), "loss_and_grad: empty batch");
    Matrix x(static_cast<Eigen::Index>(batch.size()), dim_);
    for (std::size_t i = 0; i < batch.size(); ++i) x.row(i) = pooled(*batch[i]);
    const Matrix logits = net_.forward(x, tag, nn::Mode::Train, routing, probe);
    Matrix grad(logits.rows(), logits.cols());
    BatchResult out;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const LossGrad ce = cross_entropy(logits.row(i), label(*batch[i]) ? 1 : 0);
      out.loss += ce.loss * inv_b;
      grad.row(i) = ce.grad * inv_b;
    }
    out.grads = net_.backward(grad).params;
    return out;
  }

  double accuracy(const Dataset& data) const {
    if (data.empty()) return 0.0;
    const auto sc = scores(data);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) ok += (sc[i] > 0.0) == label(data[i]);
    return static_cast<double>(ok) / static_cast<double>(data.size());
  }

  double validation_score(const Dataset& val) const { return accuracy(val); }

 private:
  nn::Network net_;
  int dim_ = 0;
  int keyword_ = 0;
};

inline Json to_json(const SequenceModel& m, const TokenAlphabet& alphabet) {
  Json j = nn::to_json(m.network());
  j["task"] = "sequence";
  j["alphabet"] = alphabet.tokens;
  j["dim"] = m.dim();
  j["frames_per_token"] = m.frames_per_token();
  return j;
}

inline Json to_json(const KeywordModel& m, const TokenAlphabet& alphabet) {
  Json j = nn::to_json(m.network());
  j["task"] = "keyword";
  j["alphabet"] = alphabet.tokens;
  j["dim"] = m.dim();
  j["keyword"] = m.keyword();
  return j;
}

inline SequenceModel sequence_model_from_json(const Json& j) {
  if (j.value("task", std::string()) != "sequence")
    throw ConfigError("checkpoint is not a sequence model");
  const int vocab = static_cast<int>(j.at("alphabet").size());
  return SequenceModel(nn::network_from_json(j), j.at("dim").get<int>(), vocab,
                       j.at("frames_per_token").get<int>());
}

inline KeywordModel keyword_model_from_json(const Json& j) {
  if (j.value("task", std::string()) != "keyword")
    throw ConfigError("checkpoint is not a keyword model");
  return KeywordModel(nn::network_from_json(j), j.at("dim").get<int>(),
                      j.at("keyword").get<int>());
}

}  // namespace syntpp

#endif  // SYNTPP_RECOGNIZER_HPP
