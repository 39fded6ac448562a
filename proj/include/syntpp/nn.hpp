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

// Small dense network with hand-written backprop. Batches are row-major in
// the sense of one sample per row: X is (batch x features).
//
// DualBatchNorm keeps one affine pair (gamma, beta) and two sets of running
// statistics. In Train mode it normalizes with the batch's own statistics and
// updates the running set selected by the batch's domain tag (or always the
// real set under StatsRouting::Shared). In Eval mode it always reads the real
// running statistics.

#ifndef SYNTPP_NN_HPP
#define SYNTPP_NN_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "syntpp/common.hpp"

namespace syntpp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Json = nlohmann::json;
using DomainTag = Origin;

enum class Mode { Train, Eval };
enum class StatsRouting { Dual, Shared };

inline constexpr const char* kCheckpointFormat = "nn/1";

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  int in() const { return static_cast<int>(weights.cols()); }
  int out() const { return static_cast<int>(weights.rows()); }
};

enum class ActivationKind { Identity, Tanh, Relu, Sigmoid };

inline std::string to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
  }
  return "identity";
}

inline ActivationKind activation_from_string(const std::string& s) {
  if (s == "identity") return ActivationKind::Identity;
  if (s == "tanh") return ActivationKind::Tanh;
  if (s == "relu") return ActivationKind::Relu;
  if (s == "sigmoid") return ActivationKind::Sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

struct Activation {
  ActivationKind kind = ActivationKind::Tanh;
};

struct RunningStats {
  Vector mean;
  Vector var;
};

struct DualBatchNorm {
  Vector gamma;
  Vector beta;
  RunningStats running_real;
  RunningStats running_synt;
  double momentum = 0.1;
  double eps = 1e-5;

  int channels() const { return static_cast<int>(gamma.size()); }

  static DualBatchNorm make(int c, double momentum = 0.1, double eps = 1e-5) {
    DualBatchNorm bn;
    bn.gamma = Vector::Ones(c);
    bn.beta = Vector::Zero(c);
    bn.running_real = {Vector::Zero(c), Vector::Ones(c)};
    bn.running_synt = {Vector::Zero(c), Vector::Ones(c)};
    bn.momentum = momentum;
    bn.eps = eps;
    return bn;
  }
};

using Layer = std::variant<DenseLayer, Activation, DualBatchNorm>;

// One running-statistics update, as recorded by a probe.
struct StatUpdate {
  std::size_t layer = 0;
  DomainTag target = DomainTag::Real;
  Vector batch_mean;
  Vector batch_var_unbiased;
};

// Optional instrumentation hook for BN statistic traffic.
struct BnProbe {
  std::size_t eval_reads_real = 0;
  std::size_t eval_reads_synt = 0;
  std::size_t updates_real = 0;
  std::size_t updates_synt = 0;
  bool record = false;
  std::vector<StatUpdate> log;
};

// Gradients in the same order and layout as Network::parameters().
using Gradients = std::vector<Vector>;

struct ParamView {
  double* data;
  Eigen::Index size;
};

struct BackwardResult {
  Gradients params;
  Matrix input_grad;
};

// Running-statistic EMA: new = (1 - m) old + m batch_stat.
inline void ema_update(RunningStats& rs, const Vector& mean,
                       const Vector& var_unbiased, double momentum) {
  rs.mean = (1.0 - momentum) * rs.mean + momentum * mean;
  rs.var = (1.0 - momentum) * rs.var + momentum * var_unbiased;
}

class Network {
 public:
  Network() = default;

  Network& add_dense(int in, int out, Rng& rng) {
    check_width(in);
    DenseLayer d;
    d.weights.resize(out, in);
    d.bias.resize(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index i = 0; i < d.weights.size(); ++i)
      d.weights.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
    for (Eigen::Index i = 0; i < d.bias.size(); ++i)
      d.bias(i) = (2.0 * uniform01(rng) - 1.0) * bound;
    layers_.emplace_back(std::move(d));
    width_ = out;
    if (input_dim_ < 0) input_dim_ = in;
    return *this;
  }

  Network& add_activation(ActivationKind kind) {
    SYNTPP_REQUIRE(width_ > 0, "activation needs a preceding layer");
    layers_.emplace_back(Activation{kind});
    return *this;
  }

  Network& add_batch_norm(double momentum = 0.1, double eps = 1e-5) {
    SYNTPP_REQUIRE(width_ > 0, "batch norm needs a preceding layer");
    layers_.emplace_back(DualBatchNorm::make(width_, momentum, eps));
    return *this;
  }

  Network& add_layer(Layer layer) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      check_width(d->in());
      if (input_dim_ < 0) input_dim_ = d->in();
      width_ = d->out();
    } else if (auto* bn = std::get_if<DualBatchNorm>(&layer)) {
      if (input_dim_ < 0) input_dim_ = bn->channels();
      check_width(bn->channels());
      width_ = bn->channels();
    }
    layers_.push_back(std::move(layer));
    return *this;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return width_; }

  bool has_batch_norm() const {
    for (const auto& l : layers_)
      if (std::holds_alternative<DualBatchNorm>(l)) return true;
    return false;
  }

  // Forward pass that caches what backward() needs. Train mode updates the
  // running statistics selected by tag and routing.
  Matrix forward(const Matrix& x, DomainTag tag, Mode mode,
                 StatsRouting routing = StatsRouting::Dual,
                 BnProbe* probe = nullptr) {
    SYNTPP_REQUIRE(x.rows() > 0, "forward: empty batch");
    SYNTPP_REQUIRE(x.cols() == input_dim_, "forward: input width mismatch");
    cache_.assign(layers_.size(), {});
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cache_[i].input = h;
      cache_[i].mode = mode;
      h = std::visit(
          [&](auto& layer) { return apply(layer, h, tag, mode, routing, probe, i, &cache_[i]); },
          layers_[i]);
    }
    cached_ = true;
    return h;
  }

  // Eval-mode forward with no side effects; safe to call concurrently.
  Matrix infer(const Matrix& x, BnProbe* probe = nullptr) const {
    SYNTPP_REQUIRE(x.rows() > 0, "infer: empty batch");
    SYNTPP_REQUIRE(x.cols() == input_dim_, "infer: input width mismatch");
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = std::visit(
          [&](const auto& layer) {
            return apply_eval(layer, h, probe);
          },
          layers_[i]);
    }
    return h;
  }

  BackwardResult backward(const Matrix& grad_out) const {
    if (!cached_) throw ContractError("backward: no cached forward pass");
    BackwardResult out;
    std::vector<Gradients> per_layer(layers_.size());
    Matrix g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = std::visit(
          [&](const auto& layer) {
            return back(layer, cache_[i], g, &per_layer[i]);
          },
          layers_[i]);
    }
    for (auto& pl : per_layer)
      for (auto& v : pl) out.params.push_back(std::move(v));
    out.input_grad = std::move(g);
    return out;
  }

  void clear_cache() {
    cache_.clear();
    cached_ = false;
  }

  // Flat views of every trainable tensor: dense weights (column-major) and
  // bias, then BN gamma and beta.
  std::vector<ParamView> parameters() {
    std::vector<ParamView> out;
    for (auto& l : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&l)) {
        out.push_back({d->weights.data(), d->weights.size()});
        out.push_back({d->bias.data(), d->bias.size()});
      } else if (auto* bn = std::get_if<DualBatchNorm>(&l)) {
        out.push_back({bn->gamma.data(), bn->gamma.size()});
        out.push_back({bn->beta.data(), bn->beta.size()});
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&l))
        n += d->weights.size() + d->bias.size();
      else if (auto* bn = std::get_if<DualBatchNorm>(&l))
        n += 2 * bn->gamma.size();
    }
    return n;
  }

  std::vector<DualBatchNorm*> batch_norms() {
    std::vector<DualBatchNorm*> out;
    for (auto& l : layers_)
      if (auto* bn = std::get_if<DualBatchNorm>(&l)) out.push_back(bn);
    return out;
  }

  std::vector<const DualBatchNorm*> batch_norms() const {
    std::vector<const DualBatchNorm*> out;
    for (const auto& l : layers_)
      if (auto* bn = std::get_if<DualBatchNorm>(&l)) out.push_back(bn);
    return out;
  }

 private:
  struct Cache {
    Matrix input;
    Matrix xhat;
    Vector inv_std;
    Mode mode = Mode::Train;
  };

  void check_width(int in) const {
    if (width_ > 0 && in != width_)
      throw ContractError("adjacent layer dimensions are incompatible");
  }

  static Matrix activate(ActivationKind k, const Matrix& x) {
    switch (k) {
      case ActivationKind::Identity: return x;
      case ActivationKind::Tanh: return x.array().tanh().matrix();
      case ActivationKind::Relu: return x.array().max(0.0).matrix();
      case ActivationKind::Sigmoid:
        return (1.0 / (1.0 + (-x.array()).exp())).matrix();
    }
    return x;
  }

  static Matrix dense_forward(const DenseLayer& d, const Matrix& x) {
    Matrix y = x * d.weights.transpose();
    y.rowwise() += d.bias.transpose();
    return y;
  }

  static Matrix bn_with(const DualBatchNorm& bn, const Matrix& x,
                        const RunningStats& rs) {
    const Vector inv = (rs.var.array() + bn.eps).rsqrt().matrix();
    Matrix y = (x.rowwise() - rs.mean.transpose());
    y = y.array().rowwise() * (inv.array() * bn.gamma.array()).transpose();
    y.rowwise() += bn.beta.transpose();
    return y;
  }

  Matrix apply(DenseLayer& d, const Matrix& x, DomainTag, Mode, StatsRouting,
               BnProbe*, std::size_t, Cache*) {
    return dense_forward(d, x);
  }

  Matrix apply(Activation& a, const Matrix& x, DomainTag, Mode, StatsRouting,
               BnProbe*, std::size_t, Cache*) {
    return activate(a.kind, x);
  }

  Matrix apply(DualBatchNorm& bn, const Matrix& x, DomainTag tag, Mode mode,
               StatsRouting routing, BnProbe* probe, std::size_t index,
               Cache* cache) {
    if (mode == Mode::Eval) {
      const RunningStats& rs = bn.running_real;
      cache->inv_std = (rs.var.array() + bn.eps).rsqrt().matrix();
      cache->xhat = (x.rowwise() - rs.mean.transpose()).array().rowwise() *
                    cache->inv_std.array().transpose();
      if (probe) ++probe->eval_reads_real;
      Matrix y = cache->xhat.array().rowwise() * bn.gamma.array().transpose();
      y.rowwise() += bn.beta.transpose();
      return y;
    }
    const Eigen::Index n = x.rows();
    if (n < 2)
      throw ContractError("batch norm: train-mode batch of size 1 is degenerate");
    const Vector mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    const Vector var = centered.array().square().colwise().mean().transpose();
    cache->inv_std = (var.array() + bn.eps).rsqrt().matrix();
    cache->xhat = centered.array().rowwise() * cache->inv_std.array().transpose();

    const Vector var_unbiased = var * (static_cast<double>(n) / (n - 1));
    const DomainTag target =
        routing == StatsRouting::Shared ? DomainTag::Real : tag;
    ema_update(target == DomainTag::Real ? bn.running_real : bn.running_synt,
               mean, var_unbiased, bn.momentum);
    if (probe) {
      ++(target == DomainTag::Real ? probe->updates_real : probe->updates_synt);
      if (probe->record) probe->log.push_back({index, target, mean, var_unbiased});
    }
    Matrix y = cache->xhat.array().rowwise() * bn.gamma.array().transpose();
    y.rowwise() += bn.beta.transpose();
    return y;
  }

  static Matrix apply_eval(const DenseLayer& d, const Matrix& x, BnProbe*) {
    return dense_forward(d, x);
  }
  static Matrix apply_eval(const Activation& a, const Matrix& x, BnProbe*) {
    return activate(a.kind, x);
  }
  static Matrix apply_eval(const DualBatchNorm& bn, const Matrix& x,
                           BnProbe* probe) {
    if (probe) ++probe->eval_reads_real;
    return bn_with(bn, x, bn.running_real);
  }

  static Matrix back(const DenseLayer& d, const Cache& c, const Matrix& g,
                     Gradients* out) {
    const Matrix gw = g.transpose() * c.input;  // out x in
    const Vector gb = g.colwise().sum().transpose();
    out->push_back(Eigen::Map<const Vector>(gw.data(), gw.size()));
    out->push_back(gb);
    return g * d.weights;
  }

  static Matrix back(const Activation& a, const Cache& c, const Matrix& g,
                     Gradients*) {
    const Matrix& x = c.input;
    switch (a.kind) {
      case ActivationKind::Identity: return g;
      case ActivationKind::Tanh: {
        const Eigen::ArrayXXd t = x.array().tanh();
        return (g.array() * (1.0 - t.square())).matrix();
      }
      case ActivationKind::Relu:
        return (g.array() * (x.array() > 0.0).cast<double>()).matrix();
      case ActivationKind::Sigmoid: {
        const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
        return (g.array() * s * (1.0 - s)).matrix();
      }
    }
    return g;
  }

  static Matrix back(const DualBatchNorm& bn, const Cache& c, const Matrix& g,
                     Gradients* out) {
    const Vector ggamma = (g.array() * c.xhat.array()).colwise().sum().transpose();
    const Vector gbeta = g.colwise().sum().transpose();
    out->push_back(ggamma);
    out->push_back(gbeta);
    const Eigen::ArrayXXd gxhat =
        g.array().rowwise() * bn.gamma.array().transpose();
    if (c.mode == Mode::Eval)
      return (gxhat.rowwise() * c.inv_std.array().transpose()).matrix();
    // dx = inv_std / n * (n gxhat - sum(gxhat) - xhat * sum(gxhat * xhat))
    const double n = static_cast<double>(g.rows());
    const Eigen::RowVectorXd sum_g = gxhat.colwise().sum();
    const Eigen::RowVectorXd sum_gx = (gxhat * c.xhat.array()).colwise().sum();
    Eigen::ArrayXXd dx = n * gxhat;
    dx.rowwise() -= sum_g.array();
    dx -= c.xhat.array().rowwise() * sum_gx.array();
    dx.rowwise() *= (c.inv_std.array() / n).transpose();
    return dx.matrix();
  }

  std::vector<Layer> layers_;
  std::vector<Cache> cache_;
  bool cached_ = false;
  int input_dim_ = -1;
  int width_ = -1;
};

// ---------------------------------------------------------------------------
// Optimizers.

enum class OptimizerMethod { SgdMomentum, Adam };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Adam;
  double lr = 1e-3;
  double momentum = 0.0;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<Vector> first;   // SGD velocity or Adam first moment
  std::vector<Vector> second;  // Adam second moment
  long step_count = 0;

  OptimizerState() = default;
  explicit OptimizerState(OptimizerConfig c) : config(c) {}
};

inline void step(OptimizerState& opt, Network& net, const Gradients& grads) {
  auto params = net.parameters();
  SYNTPP_REQUIRE(params.size() == grads.size(), "step: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    SYNTPP_REQUIRE(grads[i].size() == params[i].size, "step: gradient shape mismatch");
    if (!grads[i].allFinite())
      throw DivergenceError("non-finite gradient in parameter tensor " +
                            std::to_string(i));
  }
  if (opt.first.empty()) {
    for (const auto& p : params) {
      opt.first.push_back(Vector::Zero(p.size));
      opt.second.push_back(Vector::Zero(p.size));
    }
  }
  SYNTPP_REQUIRE(opt.first.size() == params.size(), "step: optimizer state shape mismatch");
  ++opt.step_count;
  const auto& c = opt.config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Vector> p(params[i].data, params[i].size);
    Vector g = grads[i];
    if (c.weight_decay != 0.0) g += c.weight_decay * p;
    if (c.method == OptimizerMethod::SgdMomentum) {
      opt.first[i] = c.momentum * opt.first[i] + g;
      p -= c.lr * opt.first[i];
    } else {
      opt.first[i] = c.beta1 * opt.first[i] + (1.0 - c.beta1) * g;
      opt.second[i] =
          c.beta2 * opt.second[i] + (1.0 - c.beta2) * g.array().square().matrix();
      const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step_count));
      const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step_count));
      p.array() -= c.lr * (opt.first[i].array() / bc1) /
                   ((opt.second[i].array() / bc2).sqrt() + c.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint averaging.

inline bool same_architecture(const Network& a, const Network& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    const auto& la = a.layers()[i];
    const auto& lb = b.layers()[i];
    if (la.index() != lb.index()) return false;
    if (auto* d = std::get_if<DenseLayer>(&la)) {
      const auto& e = std::get<DenseLayer>(lb);
      if (d->in() != e.in() || d->out() != e.out()) return false;
    } else if (auto* x = std::get_if<Activation>(&la)) {
      if (x->kind != std::get<Activation>(lb).kind) return false;
    } else {
      if (std::get<DualBatchNorm>(la).channels() !=
          std::get<DualBatchNorm>(lb).channels())
        return false;
    }
  }
  return true;
}

// Arithmetic mean of every parameter tensor and of both running-statistic
// sets. Accumulation follows list order.
inline Network average_parameters(const std::vector<const Network*>& nets) {
  SYNTPP_REQUIRE(!nets.empty(), "average_parameters: empty list");
  for (const auto* n : nets)
    if (!same_architecture(*nets.front(), *n))
      throw ContractError("average_parameters: architecture mismatch");
  Network out = *nets.front();
  out.clear_cache();
  const double k = static_cast<double>(nets.size());
  for (std::size_t i = 0; i < out.layers().size(); ++i) {
    auto& dst = out.layers()[i];
    if (auto* d = std::get_if<DenseLayer>(&dst)) {
      d->weights.setZero();
      d->bias.setZero();
      for (const auto* n : nets) {
        const auto& s = std::get<DenseLayer>(n->layers()[i]);
        d->weights += s.weights;
        d->bias += s.bias;
      }
      d->weights /= k;
      d->bias /= k;
    } else if (auto* bn = std::get_if<DualBatchNorm>(&dst)) {
      for (Vector* v : {&bn->gamma, &bn->beta, &bn->running_real.mean,
                        &bn->running_real.var, &bn->running_synt.mean,
                        &bn->running_synt.var})
        v->setZero();
      for (const auto* n : nets) {
        const auto& s = std::get<DualBatchNorm>(n->layers()[i]);
        bn->gamma += s.gamma;
        bn->beta += s.beta;
        bn->running_real.mean += s.running_real.mean;
        bn->running_real.var += s.running_real.var;
        bn->running_synt.mean += s.running_synt.mean;
        bn->running_synt.var += s.running_synt.var;
      }
      for (Vector* v : {&bn->gamma, &bn->beta, &bn->running_real.mean,
                        &bn->running_real.var, &bn->running_synt.mean,
                        &bn->running_synt.var})
        *v /= k;
    }
  }
  return out;
}

inline Network average_parameters(const std::vector<Network>& nets) {
  std::vector<const Network*> ptrs;
  for (const auto& n : nets) ptrs.push_back(&n);
  return average_parameters(ptrs);
}

// ---------------------------------------------------------------------------
// nn/1 checkpoints. Dense weights are stored row-major (out rows of in).

namespace detail {

inline Json flat(const Vector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector unflat(const Json& j, Eigen::Index expect) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != expect)
    throw ConfigError("checkpoint tensor has wrong size");
  return Eigen::Map<const Vector>(v.data(), v.size());
}

}  // namespace detail

inline Json to_json(const Network& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      std::vector<double> w;
      for (int r = 0; r < d->out(); ++r)
        for (int c = 0; c < d->in(); ++c) w.push_back(d->weights(r, c));
      layers.push_back({{"type", "dense"},
                        {"in", d->in()},
                        {"out", d->out()},
                        {"weights", w},
                        {"bias", detail::flat(d->bias)}});
    } else if (auto* a = std::get_if<Activation>(&l)) {
      layers.push_back({{"type", "activation"}, {"fn", to_string(a->kind)}});
    } else {
      const auto& bn = std::get<DualBatchNorm>(l);
      layers.push_back(
          {{"type", "dual_bn"},
           {"channels", bn.channels()},
           {"momentum", bn.momentum},
           {"eps", bn.eps},
           {"gamma", detail::flat(bn.gamma)},
           {"beta", detail::flat(bn.beta)},
           {"running_real",
            {{"mean", detail::flat(bn.running_real.mean)},
             {"var", detail::flat(bn.running_real.var)}}},
           {"running_synt",
            {{"mean", detail::flat(bn.running_synt.mean)},
             {"var", detail::flat(bn.running_synt.var)}}}});
    }
  }
  return {{"format", kCheckpointFormat}, {"layers", layers}};
}

inline Json to_json(const OptimizerState& opt) {
  Json first = Json::array(), second = Json::array();
  for (const auto& v : opt.first) first.push_back(detail::flat(v));
  for (const auto& v : opt.second) second.push_back(detail::flat(v));
  return {{"method", opt.config.method == OptimizerMethod::Adam ? "adam" : "sgd"},
          {"lr", opt.config.lr},
          {"momentum", opt.config.momentum},
          {"beta1", opt.config.beta1},
          {"beta2", opt.config.beta2},
          {"eps", opt.config.eps},
          {"weight_decay", opt.config.weight_decay},
          {"step_count", opt.step_count},
          {"first", first},
          {"second", second}};
}

inline OptimizerState optimizer_from_json(const Json& j) {
  OptimizerState opt;
  opt.config.method = j.at("method") == "adam" ? OptimizerMethod::Adam
                                               : OptimizerMethod::SgdMomentum;
  opt.config.lr = j.at("lr").get<double>();
  opt.config.momentum = j.value("momentum", 0.0);
  opt.config.beta1 = j.value("beta1", 0.9);
  opt.config.beta2 = j.value("beta2", 0.999);
  opt.config.eps = j.value("eps", 1e-8);
  opt.config.weight_decay = j.value("weight_decay", 0.0);
  opt.step_count = j.value("step_count", 0L);
  for (const auto& v : j.value("first", Json::array())) {
    const auto x = v.get<std::vector<double>>();
    opt.first.push_back(Eigen::Map<const Vector>(x.data(), x.size()));
  }
  for (const auto& v : j.value("second", Json::array())) {
    const auto x = v.get<std::vector<double>>();
    opt.second.push_back(Eigen::Map<const Vector>(x.data(), x.size()));
  }
  return opt;
}

inline Network network_from_json(const Json& j) {
  try {
    if (j.value("format", std::string()) != kCheckpointFormat)
      throw ConfigError("expected checkpoint format \"nn/1\"");
    Network net;
    for (const auto& l : j.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "dense") {
        DenseLayer d;
        const int in = l.at("in").get<int>(), out = l.at("out").get<int>();
        const Vector w = detail::unflat(l.at("weights"), Eigen::Index(in) * out);
        d.weights.resize(out, in);
        for (int r = 0; r < out; ++r)
          for (int c = 0; c < in; ++c) d.weights(r, c) = w(r * in + c);
        d.bias = detail::unflat(l.at("bias"), out);
        net.add_layer(std::move(d));
      } else if (type == "activation") {
        net.add_layer(Activation{activation_from_string(l.at("fn").get<std::string>())});
      } else if (type == "dual_bn") {
        const int c = l.at("channels").get<int>();
        auto bn = DualBatchNorm::make(c, l.at("momentum").get<double>(),
                                      l.at("eps").get<double>());
        bn.gamma = detail::unflat(l.at("gamma"), c);
        bn.beta = detail::unflat(l.at("beta"), c);
        bn.running_real.mean = detail::unflat(l.at("running_real").at("mean"), c);
        bn.running_real.var = detail::unflat(l.at("running_real").at("var"), c);
        bn.running_synt.mean = detail::unflat(l.at("running_synt").at("mean"), c);
        bn.running_synt.var = detail::unflat(l.at("running_synt").at("var"), c);
        net.add_layer(std::move(bn));
      } else {
        throw ConfigError("unknown layer type '" + type + "'");
      }
    }
    return net;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace syntpp::nn

#endif  // SYNTPP_NN_HPP
