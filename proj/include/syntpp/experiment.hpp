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

// Experiment configuration, the per-seed pipeline and result files.

#ifndef SYNTPP_EXPERIMENT_HPP
#define SYNTPP_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "syntpp/common.hpp"
#include "syntpp/gapgen.hpp"
#include "syntpp/metrics.hpp"
#include "syntpp/ratio.hpp"
#include "syntpp/recognizer.hpp"
#include "syntpp/trainer.hpp"

namespace syntpp {

inline constexpr const char* kResultsSchema = "syntpp-results/1";

struct DatasetSizes {
  std::size_t real_n = 60;          // real training split
  std::size_t val_n = 200;          // real validation split
  std::size_t test_n = 5000;        // real test split
  std::size_t reference_n = 1000;   // real split for the reference recognizer
  std::size_t synth_pool_n = 1000;  // synthetic pool for the discriminator
  std::size_t curated_n = 1000;     // synthetic samples per condition
  std::size_t pilot_n = kDefaultPilotSize;
};

struct ExperimentConfig {
  std::string task = "keyword";  // "keyword" | "sequence"
  WorldSpec world;
  GapSpec gap;
  std::string world_path;
  std::string gap_path;
  DatasetSizes sizes;
  RecognizerConfig recognizer;
  TrainConfig trainer;
  TrainConfig reference_trainer;
  DiscriminatorConfig discriminator;
  SamplerConfig sampler;
  double frr_max = 0.05;
  std::vector<std::string> conditions{"real", "synt", "synt++", "real+synt", "real+synt++"};
  bool ablation = true;
  std::vector<std::uint64_t> seeds{0};

  std::string metric() const { return task == "sequence" ? "wer" : "avg_far"; }

  void validate() const;
  Json to_json() const;
  std::string hash() const { return hex64(fnv1a64(to_json().dump())); }
};

inline const std::vector<std::string>& condition_names() {
  static const std::vector<std::string> n{"real", "synt", "synt++", "real+synt", "real+synt++"};
  return n;
}

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> n{"baseline", "+rejection", "+dbl_bn", "+both"};
  return n;
}

inline void ExperimentConfig::validate() const {
  if (task != "keyword" && task != "sequence")
    throw ConfigError("task must be \"keyword\" or \"sequence\", got \"" + task + "\"");
  gap.validate();
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (conditions.empty() && !ablation) throw ConfigError("no conditions and no ablation grid to run");
  for (const auto& c : conditions)
    if (std::find(condition_names().begin(), condition_names().end(), c) == condition_names().end())
      throw ConfigError("unknown condition \"" + c + "\"");
  if (sizes.real_n < 2 || sizes.val_n < 1 || sizes.test_n < 2 || sizes.reference_n < 2 ||
      sizes.synth_pool_n < 2 || sizes.pilot_n < 1)
    throw ConfigError("dataset sizes are too small");
  if (task == "keyword" && world.vocab() < 2)
    throw ConfigError("keyword task needs at least two tokens");
  if (!(frr_max > 0.0 && frr_max <= 1.0)) throw ConfigError("frr_max must be in (0, 1]");
  trainer.validate();
  reference_trainer.validate();
}

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config field \"") + key + "\": " + e.what());
  }
}

inline Json train_to_json(const TrainConfig& t) {
  Json j{{"epochs", t.epochs},
         {"batch_size", t.batch_size},
         {"optimizer", t.optimizer.method == nn::OptimizerMethod::Adam ? "adam" : "sgd"},
         {"lr", t.optimizer.lr},
         {"momentum", t.optimizer.momentum},
         {"checkpoint_k", t.checkpoint_k}};
  j["real_fraction"] = t.real_fraction ? Json(*t.real_fraction) : Json(nullptr);
  return j;
}

inline TrainConfig train_from_json(const Json& j, TrainConfig t) {
  t.epochs = get_or(j, "epochs", t.epochs);
  t.batch_size = get_or(j, "batch_size", t.batch_size);
  const auto opt = get_or<std::string>(j, "optimizer", t.optimizer.method == nn::OptimizerMethod::Adam ? "adam" : "sgd");
  if (opt == "adam") t.optimizer.method = nn::OptimizerMethod::Adam;
  else if (opt == "sgd") t.optimizer.method = nn::OptimizerMethod::SgdMomentum;
  else throw ConfigError("optimizer must be \"adam\" or \"sgd\"");
  t.optimizer.lr = get_or(j, "lr", t.optimizer.lr);
  t.optimizer.momentum = get_or(j, "momentum", t.optimizer.momentum);
  t.checkpoint_k = get_or(j, "checkpoint_k", t.checkpoint_k);
  if (j.contains("real_fraction") && !j.at("real_fraction").is_null())
    t.real_fraction = get_or(j, "real_fraction", 0.5);
  return t;
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (base / p).string();
}

}  // namespace detail

// Defaults for a task: its world, the standard gap and tuned trainer settings.
inline ExperimentConfig default_experiment(const std::string& task = "keyword") {
  ExperimentConfig c;
  c.task = task;
  c.world = task == "sequence" ? default_sequence_world() : default_keyword_world();
  c.gap = default_gap(c.world);
  c.trainer.epochs = 20;
  c.trainer.batch_size = 32;
  c.trainer.optimizer = {nn::OptimizerMethod::Adam, 1e-2};
  c.reference_trainer = c.trainer;
  c.reference_trainer.epochs = 15;
  c.reference_trainer.mix = MixPolicy::RealOnly;
  c.discriminator.classifier.epochs = 200;
  c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return c;
}

inline Json ExperimentConfig::to_json() const {
  Json j;
  j["schema"] = "syntpp-experiment/1";
  j["task"] = task;
  j["world"] = syntpp::to_json(world);
  j["gap"] = syntpp::to_json(gap);
  j["sizes"] = {{"real_n", sizes.real_n},           {"val_n", sizes.val_n},
                {"test_n", sizes.test_n},           {"reference_n", sizes.reference_n},
                {"synth_pool_n", sizes.synth_pool_n}, {"curated_n", sizes.curated_n},
                {"pilot_n", sizes.pilot_n}};
  j["recognizer"] = {{"hidden", recognizer.hidden}, {"batch_norm", recognizer.batch_norm}};
  j["trainer"] = detail::train_to_json(trainer);
  j["reference_trainer"] = detail::train_to_json(reference_trainer);
  const auto& cc = discriminator.classifier;
  j["discriminator"] = {{"feature_mode", to_string(discriminator.mode)},
                        {"hidden", cc.hidden},
                        {"epochs", cc.epochs},
                        {"batch_size", cc.batch_size},
                        {"lr", cc.lr},
                        {"balance_classes", cc.balance_classes},
                        {"cosine_decay", cc.cosine_decay}};
  j["sampler"] = {{"clamp_eps", sampler.clamp_eps},
                  {"rate_floor", sampler.rate_floor},
                  {"floor_window", sampler.floor_window}};
  j["frr_max"] = frr_max;
  j["conditions"] = conditions;
  j["ablation"] = ablation;
  j["seeds"] = seeds;
  return j;
}

// Fields absent from j keep the task defaults. World and gap may be inline
// objects or file paths ("world_path", "gap_path") relative to base_dir.
inline ExperimentConfig experiment_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c = default_experiment(detail::get_or<std::string>(j, "task", "keyword"));
  try {
    if (j.contains("world_path")) {
      c.world_path = j.at("world_path").get<std::string>();
      c.world = world_from_json(read_json_file(detail::resolve(c.world_path, base_dir)));
    } else if (j.contains("world")) {
      c.world = world_from_json(j.at("world"));
    }
    c.gap = default_gap(c.world);
    if (j.contains("gap_path")) {
      c.gap_path = j.at("gap_path").get<std::string>();
      c.gap = gap_from_json(read_json_file(detail::resolve(c.gap_path, base_dir)));
    } else if (j.contains("gap")) {
      c.gap = gap_from_json(j.at("gap"));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("world/gap spec: ") + e.what());
  }
  if (to_json(c.gap.base).dump() != to_json(c.world).dump())
    throw ConfigError("gap base world differs from the experiment world");

  const Json s = j.value("sizes", Json::object());
  auto& z = c.sizes;
  z.real_n = detail::get_or(s, "real_n", z.real_n);
  z.val_n = detail::get_or(s, "val_n", z.val_n);
  z.test_n = detail::get_or(s, "test_n", z.test_n);
  z.reference_n = detail::get_or(s, "reference_n", z.reference_n);
  z.synth_pool_n = detail::get_or(s, "synth_pool_n", z.synth_pool_n);
  z.curated_n = detail::get_or(s, "curated_n", z.curated_n);
  z.pilot_n = detail::get_or(s, "pilot_n", z.pilot_n);

  const Json r = j.value("recognizer", Json::object());
  c.recognizer.hidden = detail::get_or(r, "hidden", c.recognizer.hidden);
  c.recognizer.batch_norm = detail::get_or(r, "batch_norm", c.recognizer.batch_norm);
  c.trainer = detail::train_from_json(j.value("trainer", Json::object()), c.trainer);
  c.reference_trainer =
      detail::train_from_json(j.value("reference_trainer", Json::object()), c.reference_trainer);

  const Json d = j.value("discriminator", Json::object());
  c.discriminator.mode =
      feature_mode_from_string(detail::get_or<std::string>(d, "feature_mode", to_string(c.discriminator.mode)));
  auto& cc = c.discriminator.classifier;
  cc.hidden = detail::get_or(d, "hidden", cc.hidden);
  cc.epochs = detail::get_or(d, "epochs", cc.epochs);
  cc.batch_size = detail::get_or(d, "batch_size", cc.batch_size);
  cc.lr = detail::get_or(d, "lr", cc.lr);
  cc.balance_classes = detail::get_or(d, "balance_classes", cc.balance_classes);
  cc.cosine_decay = detail::get_or(d, "cosine_decay", cc.cosine_decay);

  const Json sm = j.value("sampler", Json::object());
  c.sampler.clamp_eps = detail::get_or(sm, "clamp_eps", c.sampler.clamp_eps);
  c.sampler.rate_floor = detail::get_or(sm, "rate_floor", c.sampler.rate_floor);
  c.sampler.floor_window = detail::get_or(sm, "floor_window", c.sampler.floor_window);

  c.frr_max = detail::get_or(j, "frr_max", c.frr_max);
  c.conditions = detail::get_or(j, "conditions", c.conditions);
  c.ablation = detail::get_or(j, "ablation", c.ablation);
  c.seeds = detail::get_or(j, "seeds", c.seeds);
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Training conditions.

enum class SynthSource { None, Raw, Curated };

struct ConditionSpec {
  std::string group;  // "conditions" | "ablation"
  std::string name;
  bool use_real = true;
  SynthSource synth = SynthSource::None;
  bool batch_purity = true;
  nn::StatsRouting routing = nn::StatsRouting::Dual;

  // Conditions with the same key train the same model.
  std::string key() const {
    return std::to_string(use_real) + std::to_string(static_cast<int>(synth)) +
           std::to_string(batch_purity) + std::to_string(static_cast<int>(routing));
  }
};

inline ConditionSpec condition_spec(const std::string& name) {
  using nn::StatsRouting;
  if (name == "real") return {"conditions", name, true, SynthSource::None, true, StatsRouting::Dual};
  // Synthetic-only training keeps one shared set of statistics.
  if (name == "synt") return {"conditions", name, false, SynthSource::Raw, true, StatsRouting::Shared};
  if (name == "synt++")
    return {"conditions", name, false, SynthSource::Curated, true, StatsRouting::Shared};
  if (name == "real+synt")
    return {"conditions", name, true, SynthSource::Raw, false, StatsRouting::Shared};
  if (name == "real+synt++")
    return {"conditions", name, true, SynthSource::Curated, true, StatsRouting::Dual};
  if (name == "baseline") return {"ablation", name, true, SynthSource::Raw, false, StatsRouting::Shared};
  if (name == "+rejection")
    return {"ablation", name, true, SynthSource::Curated, false, StatsRouting::Shared};
  if (name == "+dbl_bn") return {"ablation", name, true, SynthSource::Raw, true, StatsRouting::Dual};
  if (name == "+both") return {"ablation", name, true, SynthSource::Curated, true, StatsRouting::Dual};
  throw ConfigError("unknown condition \"" + name + "\"");
}

inline std::vector<ConditionSpec> planned_conditions(const ExperimentConfig& c) {
  std::vector<ConditionSpec> out;
  for (const auto& n : c.conditions) out.push_back(condition_spec(n));
  if (c.ablation)
    for (const auto& n : ablation_names()) out.push_back(condition_spec(n));
  return out;
}

inline bool needs_curation(const ExperimentConfig& c) {
  for (const auto& s : planned_conditions(c))
    if (s.synth == SynthSource::Curated) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Per-seed data and models.

struct SeedData {
  Dataset real, val, test, reference;
  Dataset synth_pool;  // discriminator training pool
  Dataset raw;         // first curated_n draws of the candidate stream
};

// Every stage draws from its own labeled stream of the master seed.
inline SeedData generate_data(const ExperimentConfig& c, std::uint64_t seed) {
  SeedData d;
  d.real = sample_real(c.world, c.sizes.real_n, derive_seed(seed, "data/real"));
  d.val = sample_real(c.world, c.sizes.val_n, derive_seed(seed, "data/val"));
  d.test = sample_real(c.world, c.sizes.test_n, derive_seed(seed, "data/test"));
  d.reference = sample_real(c.world, c.sizes.reference_n, derive_seed(seed, "data/reference"));
  d.synth_pool = sample_synth(c.gap, c.sizes.synth_pool_n, derive_seed(seed, "data/synth_pool"));
  if (c.sizes.curated_n > 0)
    d.raw = sample_synth(c.gap, c.sizes.curated_n, derive_seed(seed, "data/candidates"));
  return d;
}

inline SequenceModel train_reference(const ExperimentConfig& c, const SeedData& d, std::uint64_t seed) {
  TrainConfig t = c.reference_trainer;
  t.mix = MixPolicy::RealOnly;
  t.seed = derive_seed(seed, "batching/reference");
  return train(SequenceModel::for_world(c.world, c.recognizer, derive_seed(seed, "init/reference")),
               d.reference, {}, d.val, t)
      .model;
}

inline DiscriminatorFit fit_discriminator(const ExperimentConfig& c, const SequenceModel& reference,
                                          const SeedData& d, std::uint64_t seed) {
  DiscriminatorConfig dc = c.discriminator;
  dc.classifier.seed = derive_seed(seed, "discriminator");
  return train_discriminator(reference, d.real, d.synth_pool, dc);
}

inline CurationResult curate(const ExperimentConfig& c, const Discriminator& disc, std::uint64_t seed) {
  const Dataset pilot = sample_synth(c.gap, c.sizes.pilot_n, derive_seed(seed, "data/pilot"));
  RejectionSampler sampler(estimate_initial_M(disc, pilot, c.sampler.clamp_eps),
                           derive_seed(seed, "rejection"), c.sampler);
  // Candidates come from the same stream as the raw set, so "synt" is the
  // unfiltered prefix of what "synt++" filters.
  SyntheticStream stream(c.gap, derive_seed(seed, "data/candidates"));
  return sample_until(sampler, disc, [&] { return stream.next(); }, c.sizes.curated_n);
}

struct ConditionResult {
  std::string group;
  std::string condition;
  std::uint64_t seed = 0;
  double value = kNaN;
  double accuracy = kNaN;
  std::string status = "ok";
  std::string message;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string run_dir_name(const std::string& hash, std::uint64_t seed) {
  return hash + "-seed" + std::to_string(seed);
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline Json records_json(const std::vector<EpochRecord>& rec, const std::vector<int>& selected) {
  Json j = Json::array();
  for (const auto& r : rec)
    j.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"validation", r.validation}});
  return {{"epochs", j}, {"selected", selected}};
}

template <class Model>
ConditionResult train_and_evaluate(const ExperimentConfig& c, const ConditionSpec& spec, Model model,
                                   const SeedData& d, const Dataset* synth, std::uint64_t seed,
                                   const std::filesystem::path& run_dir) {
  ConditionResult res{spec.group, spec.name, seed};
  TrainConfig t = c.trainer;
  t.seed = derive_seed(seed, "batching");
  t.batch_purity = spec.batch_purity;
  t.routing = spec.routing;
  t.mix = !spec.use_real ? MixPolicy::SynthOnly
                         : (synth ? MixPolicy::Interleaved : MixPolicy::RealOnly);
  static const Dataset kEmpty;
  const Dataset& real = spec.use_real ? d.real : kEmpty;
  auto tr = train(std::move(model), real, synth ? *synth : kEmpty, d.val, t);
  res.warnings = tr.warnings;
  EvalReport rep;
  if constexpr (std::is_same_v<Model, KeywordModel>) {
    rep = evaluate(tr.model, d.test, c.frr_max);
    res.accuracy = rep.accuracy;
  } else {
    rep = evaluate(tr.model, d.test);
  }
  res.value = rep.primary();
  if (!run_dir.empty()) {
    Json ck = to_json(tr.model, c.world.alphabet);
    ck["config_hash"] = c.hash();
    ck["condition"] = spec.name;
    write_text(run_dir / ("model_" + spec.name + ".json"), ck.dump());
    Json rj = records_json(tr.records, tr.selected);
    rj["config_hash"] = c.hash();
    write_text(run_dir / ("records_" + spec.name + ".json"), rj.dump(2));
    if (!rep.det.points.empty()) {
      std::string csv = "threshold,far,frr\n";
      for (const auto& p : rep.det.points)
        csv += fmt6(p.threshold) + "," + fmt6(p.far) + "," + fmt6(p.frr) + "\n";
      write_text(run_dir / ("det_" + spec.name + ".csv"), csv);
    }
  }
  return res;
}

}  // namespace detail

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<ConditionResult> rows;
  std::optional<RunReport> curation;
  std::vector<std::string> log;
};

// Full pipeline for one seed. Failures are recorded in the rows rather than
// thrown, so other seeds can still finish.
inline SeedOutcome run_seed(const ExperimentConfig& c, std::uint64_t seed,
                            const std::filesystem::path& out_dir = {}) {
  SeedOutcome out;
  out.seed = seed;
  const auto plan = planned_conditions(c);
  std::filesystem::path run_dir;
  const std::string hash = c.hash();
  auto fail_all = [&](const std::string& status, const std::string& msg) {
    for (const auto& spec : plan) {
      ConditionResult r{spec.group, spec.name, seed};
      r.status = status;
      r.message = msg;
      out.rows.push_back(r);
    }
  };
  SeedData d;
  std::optional<Dataset> curated;
  try {
    if (!out_dir.empty()) {
      run_dir = out_dir / "runs" / detail::run_dir_name(hash, seed);
      std::filesystem::create_directories(run_dir);
    }
    d = generate_data(c, seed);
    if (needs_curation(c)) {
      const SequenceModel reference = train_reference(c, d, seed);
      auto fit = fit_discriminator(c, reference, d, seed);
      for (auto& w : fit.warnings) out.log.push_back(w);
      auto cur = curate(c, fit.discriminator, seed);
      out.curation = cur.report;
      curated = std::move(cur.accepted);
      if (!run_dir.empty()) {
        Json dj = to_json(fit.discriminator, c.world.alphabet);
        dj["config_hash"] = hash;
        detail::write_text(run_dir / "discriminator.json", dj.dump());
        Json rj = cur.report.to_json();
        rj["config_hash"] = hash;
        detail::write_text(run_dir / "curation_report.json", rj.dump(2));
      }
    }
  } catch (const RuntimeAbort& e) {
    fail_all("aborted", e.what());
    return out;
  } catch (const std::exception& e) {
    fail_all("failed", e.what());
    return out;
  }

  std::map<std::string, ConditionResult> done;
  for (const auto& spec : plan) {
    const auto it = done.find(spec.key());
    if (it != done.end()) {
      ConditionResult r = it->second;
      r.group = spec.group;
      r.condition = spec.name;
      out.rows.push_back(r);
      continue;
    }
    const Dataset* synth = spec.synth == SynthSource::Raw       ? &d.raw
                           : spec.synth == SynthSource::Curated ? &*curated
                                                                : nullptr;
    if (synth && synth->empty()) synth = spec.use_real ? nullptr : synth;
    ConditionResult r{spec.group, spec.name, seed};
    try {
      if (!spec.use_real && (!synth || synth->empty()))
        throw ConfigError("condition \"" + spec.name + "\" has no training data (curated_n = 0)");
      const std::uint64_t init = derive_seed(seed, "init/model");
      if (c.task == "keyword")
        r = detail::train_and_evaluate(c, spec, KeywordModel(c.world.dim, 0, c.recognizer, init), d,
                                       synth, seed, run_dir);
      else
        r = detail::train_and_evaluate(c, spec, SequenceModel::for_world(c.world, c.recognizer, init),
                                       d, synth, seed, run_dir);
    } catch (const RuntimeAbort& e) {
      r.status = "aborted";
      r.message = e.what();
    } catch (const std::exception& e) {
      r.status = "failed";
      r.message = e.what();
    }
    done[spec.key()] = r;
    out.rows.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and result files.

struct SummaryRow {
  std::string group;
  std::string condition;
  metrics::MeanStd stats;
  std::size_t failed = 0;
};

struct ExperimentResults {
  std::string config_hash;
  std::string task;
  std::string metric;
  std::vector<SeedOutcome> seeds;
  std::vector<SummaryRow> summary;

  bool all_ok() const {
    for (const auto& s : seeds)
      for (const auto& r : s.rows)
        if (r.status != "ok") return false;
    return true;
  }
  bool any_aborted() const {
    for (const auto& s : seeds)
      for (const auto& r : s.rows)
        if (r.status == "aborted") return true;
    return false;
  }
  const SummaryRow* find(const std::string& group, const std::string& condition) const {
    for (const auto& s : summary)
      if (s.group == group && s.condition == condition) return &s;
    return nullptr;
  }
};

inline std::vector<SummaryRow> summarize(const ExperimentConfig& c, const std::vector<SeedOutcome>& seeds) {
  std::vector<SummaryRow> out;
  for (const auto& spec : planned_conditions(c)) {
    SummaryRow row{spec.group, spec.name};
    std::vector<double> v;
    for (const auto& s : seeds)
      for (const auto& r : s.rows)
        if (r.group == spec.group && r.condition == spec.name) {
          if (r.status == "ok") v.push_back(r.value);
          else ++row.failed;
        }
    row.stats = metrics::mean_std(v);
    out.push_back(row);
  }
  return out;
}

// Runs every seed, `jobs` at a time; results are ordered as in c.seeds.
inline ExperimentResults run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir = {},
                                        int jobs = 1) {
  c.validate();
  ExperimentResults res;
  res.config_hash = c.hash();
  res.task = c.task;
  res.metric = c.metric();
  res.seeds.resize(c.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < c.seeds.size();) res.seeds[i] = run_seed(c, c.seeds[i], out_dir);
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(c.seeds.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  res.summary = summarize(c, res.seeds);
  return res;
}

inline std::string results_csv(const ExperimentResults& r) {
  std::string s = "config_hash,group,condition,seed,metric,value,status\n";
  for (const auto& sd : r.seeds)
    for (const auto& row : sd.rows)
      s += r.config_hash + "," + row.group + "," + row.condition + "," + std::to_string(row.seed) + "," +
           r.metric + "," + (row.status == "ok" ? detail::fmt6(row.value) : "") + "," + row.status + "\n";
  return s;
}

inline std::string summary_csv(const ExperimentResults& r) {
  std::string s = "config_hash,group,condition,metric,mean,std,n,failed\n";
  for (const auto& row : r.summary)
    s += r.config_hash + "," + row.group + "," + row.condition + "," + r.metric + "," +
         (row.stats.n ? detail::fmt6(row.stats.mean) : "") + "," +
         (row.stats.n ? detail::fmt6(row.stats.std) : "") + "," + std::to_string(row.stats.n) + "," +
         std::to_string(row.failed) + "\n";
  return s;
}

inline Json results_json(const ExperimentConfig& c, const ExperimentResults& r) {
  Json j;
  j["schema"] = kResultsSchema;
  j["config_hash"] = r.config_hash;
  j["task"] = r.task;
  j["metric"] = r.metric;
  j["std_kind"] = "sample std over seeds";
  j["config"] = c.to_json();
  Json rows = Json::array();
  for (const auto& sd : r.seeds)
    for (const auto& row : sd.rows) {
      Json x{{"group", row.group}, {"condition", row.condition}, {"seed", row.seed}, {"status", row.status}};
      x["value"] = row.status == "ok" ? Json(row.value) : Json(nullptr);
      if (!std::isnan(row.accuracy)) x["accuracy"] = row.accuracy;
      if (!row.message.empty()) x["message"] = row.message;
      if (!row.warnings.empty()) x["warnings"] = row.warnings;
      rows.push_back(x);
    }
  j["rows"] = rows;
  Json summary = Json::array();
  for (const auto& s : r.summary) {
    Json x{{"group", s.group}, {"condition", s.condition}, {"n", s.stats.n}, {"failed", s.failed}};
    x["mean"] = s.stats.n ? Json(s.stats.mean) : Json(nullptr);
    x["std"] = s.stats.n ? Json(s.stats.std) : Json(nullptr);
    summary.push_back(x);
  }
  j["summary"] = summary;
  Json cur = Json::array();
  for (const auto& sd : r.seeds)
    if (sd.curation) {
      Json x = sd.curation->to_json();
      x["seed"] = sd.seed;
      cur.push_back(x);
    }
  j["curation"] = cur;
  return j;
}

inline void write_results(const ExperimentConfig& c, const ExperimentResults& r,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  detail::write_text(out_dir / "results.json", results_json(c, r).dump(2) + "\n");
  detail::write_text(out_dir / "results.csv", results_csv(r));
  detail::write_text(out_dir / "summary.csv", summary_csv(r));
}

// ---------------------------------------------------------------------------
// Human-readable report.

namespace detail {

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

// Pairs (candidate, reference) where the candidate is expected to be no worse.
inline const std::vector<std::pair<std::string, std::string>>& expected_gains() {
  static const std::vector<std::pair<std::string, std::string>> p{
      {"synt++", "synt"}, {"real+synt++", "real+synt"},
      {"+rejection", "baseline"}, {"+dbl_bn", "baseline"}, {"+both", "baseline"}};
  return p;
}

}  // namespace detail

inline std::string format_report(const Json& results) {
  const std::string metric = results.at("metric").get<std::string>();
  const std::string hash = results.at("config_hash").get<std::string>();
  std::map<std::string, double> means;
  for (const auto& s : results.at("summary"))
    if (!s.at("mean").is_null()) means[s.at("condition").get<std::string>()] = s.at("mean").get<double>();

  std::ostringstream os;
  os << "config " << hash << "  task " << results.at("task").get<std::string>() << "  metric " << metric
     << " (%, mean +- sample std over seeds)\n";
  std::size_t width = 9;
  for (const auto& s : results.at("summary")) width = std::max(width, s.at("condition").get<std::string>().size());
  std::string group;
  for (const auto& s : results.at("summary")) {
    const auto g = s.at("group").get<std::string>();
    const auto name = s.at("condition").get<std::string>();
    if (g != group) {
      os << "\n" << g << "\n";
      group = g;
    }
    std::string cell = "n/a";
    if (!s.at("mean").is_null())
      cell = detail::percent(s.at("mean").get<double>()) + " +- " + detail::percent(s.at("std").get<double>());
    std::string flag;
    for (const auto& [cand, ref] : detail::expected_gains())
      if (cand == name && means.count(cand) && means.count(ref) && means[cand] > means[ref])
        flag = "  [worse than " + ref + "]";
    if (s.at("failed").get<std::size_t>() > 0) flag += "  [" + std::to_string(s.at("failed").get<std::size_t>()) + " failed]";
    char line[256];
    std::snprintf(line, sizeof(line), "  %-*s  %14s  n=%zu", static_cast<int>(width), name.c_str(), cell.c_str(),
                  s.at("n").get<std::size_t>());
    os << line << flag << "\n";
  }
  return os.str();
}

inline std::string report_run_dir(const std::filesystem::path& dir) {
  const auto rj = dir / "results.json", rc = dir / "results.csv";
  std::vector<std::string> missing;
  for (const auto& p : {rj, rc})
    if (!std::filesystem::exists(p)) missing.push_back(p.filename().string());
  if (!missing.empty()) {
    std::string msg = "run directory '" + dir.string() + "' is missing";
    for (const auto& m : missing) msg += " " + m;
    throw IoError(msg + " (expected results.json, results.csv, summary.csv)");
  }
  Json j;
  try {
    j = read_json_file(rj.string());
  } catch (const Json::exception& e) {
    throw IoError("cannot parse '" + rj.string() + "': " + e.what());
  }
  const std::string hash = j.at("config_hash").get<std::string>();
  for (const auto& name : {"results.csv", "summary.csv"}) {
    std::ifstream in(dir / name);
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty() && line.substr(0, line.find(',')) != hash)
        throw ConfigError(std::string(name) + " mixes results from config " + line.substr(0, line.find(',')) +
                          " with results.json config " + hash);
  }
  return format_report(j);
}

}  // namespace syntpp

#endif  // SYNTPP_EXPERIMENT_HPP
