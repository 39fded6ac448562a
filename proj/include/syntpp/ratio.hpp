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

// Discriminator-driven rejection sampling of synthetic samples.
//
// A reference recognizer A decodes each (x, y) and five discrepancy features
// between y and A(x) are fed to a small classifier D trained to separate real
// (label 1) from synthetic (label 0) samples. At the optimum
// D = p_d / (p_d + p_g), so r = D / (1 - D) estimates p_d / p_g and a
// synthetic sample is kept with probability r / M.
//
// M starts at the largest ratio seen on a pilot batch and grows whenever a
// larger ratio arrives. The bound is raised before the accept draw, so the
// acceptance probability never exceeds 1. Samples accepted under an earlier,
// smaller M are kept.

#ifndef SYNTPP_RATIO_HPP
#define SYNTPP_RATIO_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "syntpp/common.hpp"
#include "syntpp/gapgen.hpp"
#include "syntpp/metrics.hpp"
#include "syntpp/nn.hpp"
#include "syntpp/recognizer.hpp"

namespace syntpp {

// Finite stand-in for the CTC loss of an infeasible alignment.
inline constexpr double kCtcMax = 50.0;

struct FeatureVector {
  double ce_loss = 0.0;
  double ctc_loss = 0.0;
  double wer = 0.0;
  double len_y = 0.0;
  double len_yhat = 0.0;

  static constexpr int kSize = 5;

  std::array<double, kSize> values() const {
    return {ce_loss, ctc_loss, wer, len_y, len_yhat};
  }
};

inline FeatureVector compute_features(const SequenceModel& reference, const Sample& s) {
  SYNTPP_REQUIRE(!s.tokens.empty(), "compute_features: empty label");
  const Matrix post = reference.posteriors(s);
  const std::vector<int> hyp = greedy_decode(post, reference.blank());
  FeatureVector f;
  f.ce_loss = frame_cross_entropy(post, s.tokens, reference.frames_per_token());
  const CtcResult ctc = ctc_loss(post, s.tokens, reference.blank());
  f.ctc_loss = ctc.feasible ? std::min(ctc.loss, kCtcMax) : kCtcMax;
  f.wer = metrics::wer(s.tokens, hyp).wer;
  f.len_y = static_cast<double>(s.tokens.size());
  f.len_yhat = static_cast<double>(hyp.size());
  return f;
}

inline Matrix feature_matrix(const SequenceModel& reference, const Dataset& data) {
  Matrix x(static_cast<Eigen::Index>(data.size()), FeatureVector::kSize);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto v = compute_features(reference, data[i]).values();
    for (int k = 0; k < FeatureVector::kSize; ++k) x(i, k) = v[k];
  }
  return x;
}

// r = D / (1 - D) with D clamped to [eps, 1 - eps].
inline double density_ratio(double d, double clamp_eps = 1e-6) {
  SYNTPP_REQUIRE(d >= 0.0 && d <= 1.0, "density_ratio: D must be a probability");
  const double c = std::clamp(d, clamp_eps, 1.0 - clamp_eps);
  return c / (1.0 - c);
}

// ---------------------------------------------------------------------------
// Binary probabilistic classifier: z-score normalizer, then
// in -> hidden -> hidden -> 1 with tanh hidden units and a sigmoid output.

struct ClassifierConfig {
  int hidden = 32;
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;
  bool balance_classes = true;  // each class carries half the loss weight
  bool cosine_decay = true;     // lr follows a half cosine to zero over the epochs
  std::uint64_t seed = 0;
};

class BinaryClassifier {
 public:
  BinaryClassifier() = default;

  static BinaryClassifier constant(int dim) {
    BinaryClassifier c;
    c.constant_ = true;
    c.mean_ = Vector::Zero(dim);
    c.scale_ = Vector::Ones(dim);
    c.mask_ = Vector::Ones(dim);
    return c;
  }

  int input_dim() const { return static_cast<int>(mean_.size()); }
  bool is_constant() const { return constant_; }
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }

  Matrix normalize(const Matrix& x) const {
    Matrix z = (x.rowwise() - mean_.transpose()).array().rowwise() /
               scale_.array().transpose();
    return z.array().rowwise() * mask_.array().transpose();
  }

  Vector logits(const Matrix& x) const {
    if (constant_) return Vector::Zero(x.rows());
    return net_.infer(normalize(x)).col(0);
  }

  Vector probabilities(const Matrix& x) const {
    const Vector z = logits(x);
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }

  double probability(const Eigen::RowVectorXd& x) const {
    return probabilities(Matrix(x))(0);
  }

  Json to_json() const {
    Json j = constant_ ? Json{{"format", nn::kCheckpointFormat}, {"layers", Json::array()}}
                       : nn::to_json(net_);
    j["constant"] = constant_;
    j["normalizer"] = {{"mean", nn::detail::flat(mean_)},
                       {"std", nn::detail::flat(scale_)},
                       {"mask", nn::detail::flat(mask_)}};
    return j;
  }

  static BinaryClassifier from_json(const Json& j) {
    BinaryClassifier c;
    c.constant_ = j.value("constant", false);
    const auto& n = j.at("normalizer");
    const Eigen::Index d = static_cast<Eigen::Index>(n.at("mean").size());
    c.mean_ = nn::detail::unflat(n.at("mean"), d);
    c.scale_ = nn::detail::unflat(n.at("std"), d);
    c.mask_ = nn::detail::unflat(n.at("mask"), d);
    if (!c.constant_) c.net_ = nn::network_from_json(j);
    return c;
  }

 private:
  friend struct ClassifierTrainer;

  nn::Network net_;
  Vector mean_;
  Vector scale_;
  Vector mask_;
  bool constant_ = false;
};

struct ClassifierFit {
  BinaryClassifier classifier;
  std::vector<double> epoch_loss;  // weighted BCE on the full training set
  std::vector<std::string> warnings;
};

struct ClassifierTrainer {
  // labels: 1 = real, 0 = synthetic. mask zeroes normalized inputs (CE-only).
  static ClassifierFit fit(const Matrix& x, const std::vector<int>& labels,
                           const ClassifierConfig& cfg, const Vector& mask) {
    SYNTPP_REQUIRE(x.rows() == static_cast<Eigen::Index>(labels.size()),
                   "fit_classifier: feature/label count mismatch");
    SYNTPP_REQUIRE(mask.size() == x.cols(), "fit_classifier: mask width mismatch");
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l == 1;
    const std::size_t n_neg = labels.size() - n_pos;
    SYNTPP_REQUIRE(n_pos > 0 && n_neg > 0, "fit_classifier: need both classes");

    ClassifierFit out;
    BinaryClassifier& c = out.classifier;
    c.mean_ = x.colwise().mean().transpose();
    c.scale_ = ((x.rowwise() - c.mean_.transpose()).array().square().colwise().mean())
                   .sqrt()
                   .transpose();
    c.mask_ = mask;
    bool informative = false;
    for (Eigen::Index k = 0; k < c.scale_.size(); ++k) {
      if (c.scale_(k) > 0.0 && mask(k) != 0.0) informative = true;
      if (!(c.scale_(k) > 0.0)) c.scale_(k) = 1.0;
    }
    if (!informative) {
      out.warnings.push_back(
          "all discriminator features are identical; using a constant 0.5 discriminator");
      BinaryClassifier k = BinaryClassifier::constant(static_cast<int>(x.cols()));
      c = k;
      return out;
    }

    Rng init(derive_seed(cfg.seed, "init"));
    c.net_.add_dense(static_cast<int>(x.cols()), cfg.hidden, init)
        .add_activation(nn::ActivationKind::Tanh)
        .add_dense(cfg.hidden, cfg.hidden, init)
        .add_activation(nn::ActivationKind::Tanh)
        .add_dense(cfg.hidden, 1, init);

    const Matrix z = c.normalize(x);
    Vector w(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (cfg.balance_classes)
        w(i) = labels[i] == 1 ? 0.5 / n_pos : 0.5 / n_neg;
      else
        w(i) = 1.0 / static_cast<double>(z.rows());
    }

    nn::OptimizerState opt(nn::OptimizerConfig{nn::OptimizerMethod::Adam, cfg.lr});
    std::vector<Eigen::Index> order(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) order[i] = i;
    Rng shuffle(derive_seed(cfg.seed, "batching"));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (cfg.cosine_decay)
        opt.config.lr = 0.5 * cfg.lr * (1.0 + std::cos(M_PI * epoch / static_cast<double>(cfg.epochs)));
      shuffle_in_place(order, shuffle);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), b + cfg.batch_size);
        Matrix xb(static_cast<Eigen::Index>(end - b), z.cols());
        Vector yb(xb.rows()), wb(xb.rows());
        for (std::size_t i = b; i < end; ++i) {
          xb.row(i - b) = z.row(order[i]);
          yb(i - b) = labels[order[i]];
          wb(i - b) = w(order[i]);
        }
        // Per-sample weights are normalized within the batch.
        wb /= wb.sum();
        const Matrix logit = c.net_.forward(xb, nn::DomainTag::Real, nn::Mode::Train);
        Matrix g(xb.rows(), 1);
        for (Eigen::Index i = 0; i < xb.rows(); ++i) {
          const double p = 1.0 / (1.0 + std::exp(-logit(i, 0)));
          g(i, 0) = wb(i) * (p - yb(i));
        }
        nn::step(opt, c.net_, c.net_.backward(g).params);
      }
      c.net_.clear_cache();
      const Vector lz = c.net_.infer(z).col(0);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        // softplus(z) - y z, evaluated stably
        const double zi = lz(i);
        const double sp = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        loss += w(i) * (sp - labels[i] * zi);
      }
      if (!std::isfinite(loss))
        throw DivergenceError("discriminator loss diverged at epoch " + std::to_string(epoch));
      out.epoch_loss.push_back(loss);
    }
    return out;
  }
};

inline ClassifierFit fit_classifier(const Matrix& x, const std::vector<int>& labels,
                                    const ClassifierConfig& cfg) {
  return ClassifierTrainer::fit(x, labels, cfg, Vector::Ones(x.cols()));
}

// ---------------------------------------------------------------------------
// Discriminator over discrepancy features.

enum class FeatureMode { Full5, CEOnly };

inline std::string to_string(FeatureMode m) { return m == FeatureMode::Full5 ? "full5" : "ce_only"; }

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "full5") return FeatureMode::Full5;
  if (s == "ce_only") return FeatureMode::CEOnly;
  throw ConfigError("unknown feature mode '" + s + "'");
}

struct DiscriminatorConfig {
  FeatureMode mode = FeatureMode::Full5;
  ClassifierConfig classifier;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(SequenceModel reference, FeatureMode mode, BinaryClassifier clf)
      : reference_(std::move(reference)), mode_(mode), clf_(std::move(clf)) {}

  static Discriminator constant(SequenceModel reference) {
    return Discriminator(std::move(reference), FeatureMode::Full5,
                         BinaryClassifier::constant(FeatureVector::kSize));
  }

  FeatureMode mode() const { return mode_; }
  const SequenceModel& reference() const { return reference_; }
  const BinaryClassifier& classifier() const { return clf_; }

  FeatureVector features(const Sample& s) const { return compute_features(reference_, s); }

  double operator()(const FeatureVector& f) const {
    const auto v = f.values();
    Eigen::RowVectorXd x(FeatureVector::kSize);
    for (int k = 0; k < FeatureVector::kSize; ++k) x(k) = v[k];
    return clf_.probability(x);
  }

  double operator()(const Sample& s) const { return (*this)(features(s)); }

  std::vector<double> probabilities(const Dataset& data) const {
    const Vector p = clf_.probabilities(feature_matrix(reference_, data));
    return std::vector<double>(p.data(), p.data() + p.size());
  }

 private:
  SequenceModel reference_;
  FeatureMode mode_ = FeatureMode::Full5;
  BinaryClassifier clf_;
};

inline Vector feature_mask(FeatureMode mode) {
  Vector m = Vector::Ones(FeatureVector::kSize);
  if (mode == FeatureMode::CEOnly) {
    m.setZero();
    m(0) = 1.0;
  }
  return m;
}

struct DiscriminatorFit {
  Discriminator discriminator;
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

// Binary cross-entropy with real = 1, synthetic = 0 on normalized features.
inline DiscriminatorFit train_discriminator(const SequenceModel& reference,
                                            const Dataset& real, const Dataset& synth,
                                            const DiscriminatorConfig& cfg) {
  if (real.empty() || synth.empty())
    throw ContractError("train_discriminator: both datasets must be nonempty");
  const Matrix xr = feature_matrix(reference, real);
  const Matrix xs = feature_matrix(reference, synth);
  Matrix x(xr.rows() + xs.rows(), FeatureVector::kSize);
  x << xr, xs;
  std::vector<int> labels(x.rows(), 0);
  std::fill(labels.begin(), labels.begin() + xr.rows(), 1);
  ClassifierFit fit = ClassifierTrainer::fit(x, labels, cfg.classifier, feature_mask(cfg.mode));
  DiscriminatorFit out;
  out.discriminator = Discriminator(reference, cfg.mode, std::move(fit.classifier));
  out.epoch_loss = std::move(fit.epoch_loss);
  out.warnings = std::move(fit.warnings);
  return out;
}

inline Json to_json(const Discriminator& d, const TokenAlphabet& alphabet) {
  Json j = d.classifier().to_json();
  j["task"] = "discriminator";
  j["feature_mode"] = to_string(d.mode());
  j["reference"] = to_json(d.reference(), alphabet);
  return j;
}

inline Discriminator discriminator_from_json(const Json& j) {
  if (j.value("task", std::string()) != "discriminator")
    throw ConfigError("checkpoint is not a discriminator");
  return Discriminator(sequence_model_from_json(j.at("reference")),
                       feature_mode_from_string(j.at("feature_mode").get<std::string>()),
                       BinaryClassifier::from_json(j));
}

// ---------------------------------------------------------------------------
// Rejection sampling.

// Ratio and discriminator output for one candidate.
struct RatioEstimate {
  double discriminator = 0.5;
  double ratio = 1.0;
};

// Largest ratio over a pilot batch.
template <class RatioFn>
double estimate_initial_bound(const Dataset& pilot, RatioFn&& ratio_of) {
  SYNTPP_REQUIRE(!pilot.empty(), "estimate_initial_M: empty pilot set");
  double m = 0.0;
  for (const auto& s : pilot) m = std::max(m, ratio_of(s).ratio);
  return m;
}

inline double estimate_initial_M(const Discriminator& disc, const Dataset& pilot,
                                 double clamp_eps = 1e-6) {
  return estimate_initial_bound(pilot, [&](const Sample& s) {
    const double d = disc(s);
    return RatioEstimate{d, density_ratio(d, clamp_eps)};
  });
}

inline constexpr std::size_t kDefaultPilotSize = 200;

struct SamplerConfig {
  double clamp_eps = 1e-6;
  double rate_floor = 1e-4;
  std::size_t floor_window = 10000;
};

enum class Decision { Accept, Reject };

class RejectionSampler {
 public:
  RejectionSampler(double initial_bound, std::uint64_t seed, SamplerConfig cfg = {})
      : bound_(initial_bound), rng_(seed), cfg_(cfg) {
    SYNTPP_REQUIRE(initial_bound > 0.0, "rejection sampler: M must be positive");
    trace_.push_back(bound_);
  }

  // Raise M to r if needed, then accept with probability r / M.
  Decision offer(double ratio) {
    SYNTPP_REQUIRE(active(), "rejection sampler: target already reached");
    SYNTPP_REQUIRE(ratio >= 0.0, "rejection sampler: negative ratio");
    bound_ = std::max(bound_, ratio);
    trace_.push_back(bound_);
    last_probability_ = ratio / bound_;
    ++n_seen_;
    const double u = uniform01(rng_);
    if (u < last_probability_) {
      ++n_accepted_;
      return Decision::Accept;
    }
    return Decision::Reject;
  }

  void set_target(std::size_t n) { target_ = n; }
  bool active() const { return n_accepted_ < target_; }

  double bound() const { return bound_; }
  std::size_t n_seen() const { return n_seen_; }
  std::size_t n_accepted() const { return n_accepted_; }
  std::size_t target() const { return target_; }
  double last_probability() const { return last_probability_; }
  const std::vector<double>& bound_trace() const { return trace_; }
  const SamplerConfig& config() const { return cfg_; }

 private:
  double bound_;
  Rng rng_;
  SamplerConfig cfg_;
  std::size_t n_seen_ = 0;
  std::size_t n_accepted_ = 0;
  std::size_t target_ = static_cast<std::size_t>(-1);
  double last_probability_ = 0.0;
  std::vector<double> trace_;
};

// Single accept/reject decision with the discriminator; records D, r and the
// bound in s.curation.
inline Decision accept(RejectionSampler& sampler, const Discriminator& disc, Sample& s) {
  const double d = disc(s);
  const double r = density_ratio(d, sampler.config().clamp_eps);
  const Decision dec = sampler.offer(r);
  s.curation = Curation{d, r, sampler.bound()};
  return dec;
}

struct RunReport {
  std::size_t n_seen = 0;
  std::size_t n_accepted = 0;
  double initial_M = 0.0;
  double final_M = 0.0;
  double acceptance_rate = 0.0;

  Json to_json() const {
    return {{"n_seen", n_seen},
            {"n_accepted", n_accepted},
            {"initial_M", initial_M},
            {"final_M", final_M},
            {"acceptance_rate", acceptance_rate}};
  }
};

struct CurationResult {
  Dataset accepted;
  RunReport report;
};

// Pulls candidates from `next` until N are accepted. Aborts when a full
// window of candidates yields an acceptance rate below the configured floor.
template <class RatioFn, class Source>
CurationResult sample_until(RejectionSampler& sampler, RatioFn&& ratio_of, Source&& next,
                            std::size_t n) {
  CurationResult out;
  out.report.initial_M = sampler.bound();
  sampler.set_target(sampler.n_accepted() + n);
  const auto& cfg = sampler.config();
  std::size_t window_seen = 0, window_accepted = 0;
  while (sampler.active()) {
    Sample s = next();
    const RatioEstimate est = ratio_of(s);
    const Decision dec = sampler.offer(est.ratio);
    ++window_seen;
    if (dec == Decision::Accept) {
      s.curation = Curation{est.discriminator, est.ratio, sampler.bound()};
      out.accepted.push_back(std::move(s));
      ++window_accepted;
    }
    if (window_seen == cfg.floor_window) {
      const double rate = static_cast<double>(window_accepted) / static_cast<double>(window_seen);
      if (rate < cfg.rate_floor)
        throw RuntimeAbort("rejection sampling stalled: acceptance rate " + std::to_string(rate) +
                           " over the last " + std::to_string(window_seen) +
                           " candidates is below the floor " + std::to_string(cfg.rate_floor) +
                           " (M=" + std::to_string(sampler.bound()) + ", accepted " +
                           std::to_string(out.accepted.size()) + "/" + std::to_string(n) + ")");
      window_seen = window_accepted = 0;
    }
  }
  out.report.n_seen = sampler.n_seen();
  out.report.n_accepted = sampler.n_accepted();
  out.report.final_M = sampler.bound();
  out.report.acceptance_rate =
      sampler.n_seen() ? static_cast<double>(sampler.n_accepted()) / sampler.n_seen() : 0.0;
  return out;
}

template <class Source>
CurationResult sample_until(RejectionSampler& sampler, const Discriminator& disc,
                            Source&& next, std::size_t n) {
  const double eps = sampler.config().clamp_eps;
  return sample_until(
      sampler,
      [&](const Sample& s) {
        const double d = disc(s);
        return RatioEstimate{d, density_ratio(d, eps)};
      },
      std::forward<Source>(next), n);
}

}  // namespace syntpp

#endif  // SYNTPP_RATIO_HPP
