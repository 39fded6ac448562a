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

#ifndef SYNTPP_TRAINER_HPP
#define SYNTPP_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "syntpp/common.hpp"
#include "syntpp/gapgen.hpp"
#include "syntpp/metrics.hpp"
#include "syntpp/nn.hpp"
#include "syntpp/recognizer.hpp"

namespace syntpp {

enum class MixPolicy { RealOnly, SynthOnly, Interleaved };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  nn::OptimizerConfig optimizer{nn::OptimizerMethod::Adam, 1e-2};
  MixPolicy mix = MixPolicy::Interleaved;
  // Fraction of emitted batches that are real while both pools last; unset
  // means proportional to pool sizes.
  std::optional<double> real_fraction;
  // Single-origin batches. Mixed batches require shared statistics.
  bool batch_purity = true;
  nn::StatsRouting routing = nn::StatsRouting::Dual;
  int checkpoint_k = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (checkpoint_k < 1) throw ConfigError("checkpoint_k must be >= 1");
    if (real_fraction && !(*real_fraction >= 0.0 && *real_fraction <= 1.0))
      throw ConfigError("real_fraction must be in [0, 1]");
    if (!batch_purity && routing == nn::StatsRouting::Dual)
      throw ConfigError("mixed-origin batches need shared BN statistics");
  }
};

struct Batch {
  std::vector<const Sample*> samples;
  nn::DomainTag tag = nn::DomainTag::Real;
  bool mixed = false;
};

namespace detail {

inline std::vector<std::vector<const Sample*>> chunk(std::vector<const Sample*> pool,
                                                     int batch_size) {
  std::vector<std::vector<const Sample*>> out;
  for (std::size_t i = 0; i < pool.size(); i += batch_size) {
    const std::size_t end = std::min(pool.size(), i + batch_size);
    out.emplace_back(pool.begin() + i, pool.begin() + end);
  }
  // A lone trailing sample cannot form a train-mode BN batch.
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

inline std::vector<const Sample*> shuffled_pool(const Dataset& d, Rng& rng) {
  std::vector<const Sample*> p;
  p.reserve(d.size());
  for (const auto& s : d) p.push_back(&s);
  shuffle_in_place(p, rng);
  return p;
}

}  // namespace detail

// One epoch of tagged batches. Pools are shuffled with epoch_seed; with
// purity every batch is single-origin and interleaving is deterministic.
inline std::vector<Batch> make_batches(const Dataset& real, const Dataset& synth,
                                       const TrainConfig& cfg, std::uint64_t epoch_seed) {
  cfg.validate();
  const bool use_real = cfg.mix != MixPolicy::SynthOnly && !real.empty();
  const bool use_synth = cfg.mix != MixPolicy::RealOnly && !synth.empty();
  if (!use_real && !use_synth) throw ContractError("make_batches: no samples to batch");

  Rng rng_real(derive_seed(epoch_seed, "real"));
  Rng rng_synth(derive_seed(epoch_seed, "synthetic"));
  std::vector<Batch> out;

  if (!cfg.batch_purity && use_real && use_synth) {
    Rng rng(derive_seed(epoch_seed, "mixed"));
    std::vector<const Sample*> pool;
    for (const auto& s : real) pool.push_back(&s);
    for (const auto& s : synth) pool.push_back(&s);
    shuffle_in_place(pool, rng);
    for (auto& c : detail::chunk(std::move(pool), cfg.batch_size)) {
      Batch b{std::move(c), nn::DomainTag::Real, false};
      const bool has_real = std::any_of(b.samples.begin(), b.samples.end(),
                                        [](const Sample* s) { return s->origin == Origin::Real; });
      const bool has_synth = std::any_of(b.samples.begin(), b.samples.end(),
                                         [](const Sample* s) { return s->origin != Origin::Real; });
      b.mixed = has_real && has_synth;
      b.tag = has_real ? nn::DomainTag::Real : nn::DomainTag::Synthetic;
      out.push_back(std::move(b));
    }
    return out;
  }

  std::vector<std::vector<const Sample*>> rb, sb;
  if (use_real) rb = detail::chunk(detail::shuffled_pool(real, rng_real), cfg.batch_size);
  if (use_synth) sb = detail::chunk(detail::shuffled_pool(synth, rng_synth), cfg.batch_size);
  const double f = cfg.real_fraction.value_or(
      static_cast<double>(rb.size()) / static_cast<double>(rb.size() + sb.size()));
  std::size_t ir = 0, is = 0;
  while (ir < rb.size() || is < sb.size()) {
    // Take a real batch while real batches are at or below their share.
    const bool pick_real =
        is >= sb.size() ||
        (ir < rb.size() && static_cast<double>(ir) * (1.0 - f) <= static_cast<double>(is) * f);
    if (pick_real) out.push_back({std::move(rb[ir++]), nn::DomainTag::Real, false});
    else out.push_back({std::move(sb[is++]), nn::DomainTag::Synthetic, false});
  }
  return out;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation = 0.0;  // higher is better
  int checkpoint = 0;       // index into the in-memory checkpoint store
};

// Indices of the k records with the highest validation score; ties go to the
// earlier epoch.
inline std::vector<int> select_checkpoints(const std::vector<EpochRecord>& records, int k) {
  std::vector<int> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return records[a].validation > records[b].validation;
  });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
  return idx;
}

template <class Model>
struct TrainResult {
  Model model;
  std::vector<EpochRecord> records;
  std::vector<int> selected;
  std::vector<std::string> warnings;
};

// Runs cfg.epochs epochs of make_batches -> forward(tag) -> backward -> step,
// scores the model on `val` after each epoch and returns the average of the
// checkpoint_k best checkpoints.
template <class Model>
TrainResult<Model> train(Model model, const Dataset& real, const Dataset& synth,
                         const Dataset& val, const TrainConfig& cfg,
                         nn::BnProbe* probe = nullptr) {
  cfg.validate();
  TrainResult<Model> result;
  const bool has_bn = model.network().has_batch_norm();
  if (cfg.mix == MixPolicy::SynthOnly && cfg.routing == nn::StatsRouting::Dual && has_bn)
    result.warnings.push_back(
        "synthetic-only training with dual BN statistics: no real batches update "
        "the real running statistics, so Eval will use their initialization values");
  for (const auto& s : real)
    if (s.origin != Origin::Real) throw ContractError("train: real pool contains synthetic samples");
  for (const auto& s : synth)
    if (s.origin != Origin::Synthetic) throw ContractError("train: synthetic pool contains real samples");

  nn::OptimizerState opt(cfg.optimizer);
  std::vector<nn::Network> checkpoints;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(real, synth, cfg, derive_seed(cfg.seed, "batching/" + std::to_string(epoch)));
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      if (has_bn && batch.samples.size() < 2) {
        result.warnings.push_back("skipped a single-sample batch in epoch " +
                                  std::to_string(epoch));
        continue;
      }
      auto br = model.loss_and_grad(batch.samples, batch.tag, cfg.routing, probe);
      if (!std::isfinite(br.loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b));
      nn::step(opt, model.network(), br.grads);
      loss_sum += br.loss;
      ++counted;
    }
    model.network().clear_cache();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
    rec.validation = val.empty() ? -rec.train_loss : model.validation_score(val);
    rec.checkpoint = static_cast<int>(checkpoints.size());
    checkpoints.push_back(model.network());
    result.records.push_back(rec);
  }

  result.selected = select_checkpoints(result.records, cfg.checkpoint_k);
  std::vector<const nn::Network*> chosen;
  for (int i : result.selected) chosen.push_back(&checkpoints[result.records[i].checkpoint]);
  model.network() = nn::average_parameters(chosen);
  result.model = std::move(model);
  return result;
}

struct EvalReport {
  std::string task;
  double wer = 0.0;        // sequence task
  double avg_far = 0.0;    // keyword task
  double accuracy = 0.0;   // keyword task
  std::vector<metrics::ScoredLabel> scores;
  metrics::DetCurve det;

  // The task's headline error metric (lower is better).
  double primary() const { return task == "sequence" ? wer : avg_far; }
};

namespace detail {

inline void check_test_set(const Dataset& test) {
  if (test.empty()) throw ContractError("evaluate: empty test set");
  for (const auto& s : test)
    if (s.origin != Origin::Real)
      throw ContractError("evaluate: test set contains synthetic samples");
}

}  // namespace detail

inline EvalReport evaluate(const SequenceModel& model, const Dataset& test,
                           nn::BnProbe* probe = nullptr) {
  detail::check_test_set(test);
  EvalReport r;
  r.task = "sequence";
  metrics::CorpusWer acc;
  for (const auto& s : test)
    acc.add(metrics::wer(s.tokens, greedy_decode(model.posteriors(s, probe), model.blank())));
  r.wer = acc.value();
  return r;
}

inline EvalReport evaluate(const KeywordModel& model, const Dataset& test,
                           double frr_max = 0.05, nn::BnProbe* probe = nullptr) {
  detail::check_test_set(test);
  EvalReport r;
  r.task = "keyword";
  const auto sc = model.scores(test, probe);
  std::size_t ok = 0, pos = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool y = model.label(test[i]);
    pos += y;
    r.scores.push_back({sc[i], y});
    ok += (sc[i] > 0.0) == y;
  }
  r.accuracy = static_cast<double>(ok) / static_cast<double>(test.size());
  if (pos > 0 && pos < test.size()) {
    r.det = metrics::det_curve(r.scores);
    r.avg_far = metrics::avg_far(r.det, frr_max);
  }
  return r;
}

}  // namespace syntpp

#endif  // SYNTPP_TRAINER_HPP
