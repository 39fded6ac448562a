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

// syntpp: data generation, curation and experiment runs on the toy worlds.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "syntpp/experiment.hpp"
#include "syntpp/testing/oracles.hpp"

namespace fs = std::filesystem;
using namespace syntpp;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kAbort = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string condition;
  int jobs = 1;
  std::string run_dir;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = o.config.empty() ? default_experiment() : load_experiment(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (!o.condition.empty()) {
    condition_spec(o.condition);
    const auto& a = ablation_names();
    if (std::find(a.begin(), a.end(), o.condition) != a.end()) {
      c.conditions.clear();
      c.ablation = true;
    } else {
      c.conditions = {o.condition};
      c.ablation = false;
    }
  }
  c.validate();
  return c;
}

void write_jsonl_tagged(const fs::path& p, const Dataset& data, const std::string& hash) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  for (const auto& s : data) {
    Json j = to_json(s);
    j["config_hash"] = hash;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

void write_json_tagged(const fs::path& p, Json j, const std::string& hash) {
  j["config_hash"] = hash;
  write_json_file(p.string(), j);
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create directory '" + p.string() + "'");
}

std::string style_histogram(const Dataset& data) {
  std::map<int, std::size_t> h;
  for (const auto& s : data) ++h[s.style_id];
  std::string out;
  for (const auto& [id, n] : h) out += " style" + std::to_string(id) + "=" + std::to_string(n);
  return out;
}

// Styles with no samples still appear with a zero count.
std::string style_histogram(const Dataset& data, const GapSpec& gap) {
  std::map<int, std::size_t> h;
  for (const auto& st : gap.base.styles) h[st.id] = 0;
  if (gap.artifact_weight > 0.0) h[kArtifactStyleId] = 0;
  for (const auto& s : data) ++h[s.style_id];
  std::string out;
  for (const auto& [id, n] : h) out += " style" + std::to_string(id) + "=" + std::to_string(n);
  return out;
}

int cmd_gen_data(const Options& o) {
  const auto c = load(o);
  const std::uint64_t seed = c.seeds.front();
  const fs::path out(o.out);
  ensure_dir(out);
  const std::string hash = c.hash();
  const SeedData d = generate_data(c, seed);
  const std::vector<std::pair<std::string, const Dataset*>> files{
      {"real_train.jsonl", &d.real},
      {"real_val.jsonl", &d.val},
      {"real_test.jsonl", &d.test},
      {"synth_pool.jsonl", &d.synth_pool}};
  for (const auto& [name, data] : files) {
    write_jsonl_tagged(out / name, *data, hash);
    std::printf("%-18s n=%zu%s\n", name.c_str(), data->size(),
                data == &d.synth_pool ? style_histogram(*data, c.gap).c_str() : style_histogram(*data).c_str());
  }
  write_json_tagged(out / "manifest.json", {{"seed", seed}, {"config", c.to_json()}}, hash);
  return kOk;
}

SequenceModel reference_model(const ExperimentConfig& c, const SeedData& d, std::uint64_t seed,
                              const fs::path& out, Json& notes) {
  const fs::path p = out / "reference.json";
  if (fs::exists(p)) {
    notes["reference"] = "loaded " + p.string();
    return sequence_model_from_json(read_json_file(p.string()));
  }
  SequenceModel m = train_reference(c, d, seed);
  write_json_tagged(p, to_json(m, c.world.alphabet), c.hash());
  notes["reference"] = "trained";
  return m;
}

Discriminator discriminator_model(const ExperimentConfig& c, const SeedData& d, std::uint64_t seed,
                                  const fs::path& out, Json& notes) {
  const fs::path p = out / "discriminator.json";
  if (fs::exists(p)) {
    notes["discriminator"] = "loaded " + p.string();
    return discriminator_from_json(read_json_file(p.string()));
  }
  const SequenceModel ref = reference_model(c, d, seed, out, notes);
  auto fit = fit_discriminator(c, ref, d, seed);
  for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_json_tagged(p, to_json(fit.discriminator, c.world.alphabet), c.hash());
  notes["discriminator"] = "trained";
  return fit.discriminator;
}

int cmd_train_recognizer(const Options& o) {
  const auto c = load(o);
  const std::uint64_t seed = c.seeds.front();
  const fs::path out(o.out);
  ensure_dir(out);
  const SeedData d = generate_data(c, seed);
  const SequenceModel m = train_reference(c, d, seed);
  write_json_tagged(out / "reference.json", to_json(m, c.world.alphabet), c.hash());
  std::printf("reference recognizer: validation WER %.1f%%\n", 100.0 * evaluate(m, d.val).wer);
  return kOk;
}

int cmd_train_discriminator(const Options& o) {
  const auto c = load(o);
  const std::uint64_t seed = c.seeds.front();
  const fs::path out(o.out);
  ensure_dir(out);
  const SeedData d = generate_data(c, seed);
  Json notes;
  const SequenceModel ref = reference_model(c, d, seed, out, notes);
  auto fit = fit_discriminator(c, ref, d, seed);
  for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_json_tagged(out / "discriminator.json", to_json(fit.discriminator, c.world.alphabet), c.hash());
  std::printf("discriminator: final training loss %.6g over %zu epochs\n",
              fit.epoch_loss.empty() ? kNaN : fit.epoch_loss.back(), fit.epoch_loss.size());
  return kOk;
}

int cmd_curate(const Options& o) {
  const auto c = load(o);
  const std::uint64_t seed = c.seeds.front();
  const fs::path out(o.out);
  ensure_dir(out);
  const std::string hash = c.hash();
  Json report;
  if (c.sizes.curated_n == 0) {
    write_jsonl_tagged(out / "curated.jsonl", {}, hash);
    report = RunReport{}.to_json();
    write_json_tagged(out / "curation_report.json", report, hash);
    std::printf("curated 0 samples\n");
    return kOk;
  }
  const SeedData d = generate_data(c, seed);
  Json notes = Json::object();
  const Discriminator disc = discriminator_model(c, d, seed, out, notes);
  const auto res = curate(c, disc, seed);
  write_jsonl_tagged(out / "curated.jsonl", res.accepted, hash);
  report = res.report.to_json();
  report["models"] = notes;
  write_json_tagged(out / "curation_report.json", report, hash);
  std::printf("curated %zu of %zu candidates (rate %.4f, M %.4g -> %.4g)%s\n", res.report.n_accepted,
              res.report.n_seen, res.report.acceptance_rate, res.report.initial_M, res.report.final_M,
              style_histogram(res.accepted, c.gap).c_str());
  return kOk;
}

int cmd_run(const Options& o) {
  const auto c = load(o);
  const fs::path out(o.out);
  ensure_dir(out);
  const auto res = run_experiment(c, out, o.jobs);
  write_results(c, res, out);
  std::cout << format_report(results_json(c, res));
  for (const auto& s : res.seeds)
    for (const auto& r : s.rows)
      if (r.status != "ok")
        std::fprintf(stderr, "seed %llu %s: %s: %s\n", static_cast<unsigned long long>(r.seed),
                     r.condition.c_str(), r.status.c_str(), r.message.c_str());
  if (res.all_ok()) return kOk;
  return res.any_aborted() ? kAbort : kIo;
}

int cmd_report(const Options& o) {
  std::cout << report_run_dir(o.run_dir.empty() ? fs::path(o.out) : fs::path(o.run_dir));
  return kOk;
}

// Quick oracle checks on small random instances.
int cmd_selftest() {
  int failures = 0;
  auto line = [&](const char* name, bool ok, double value, double tol) {
    std::printf("%s %-34s %.3g (tol %.3g)\n", ok ? "PASS" : "FAIL", name, value, tol);
    failures += !ok;
  };
  Rng rng(derive_seed(0, "selftest"));

  double ctc_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 1 + static_cast<int>(uniform_index(rng, 6));
    const int V = 1 + static_cast<int>(uniform_index(rng, 3));
    std::vector<int> y(1 + uniform_index(rng, 3));
    for (auto& t : y) t = static_cast<int>(uniform_index(rng, V));
    Matrix logits(T, V + 1);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = standard_normal(rng);
    const Matrix lp = log_softmax(logits);
    const auto r = ctc_loss(lp, y, V);
    const double brute = oracle::ctc_path_sum(lp, y, V);
    if (r.feasible) ctc_err = std::max(ctc_err, std::abs(r.loss + std::log(brute)));
    else if (brute != 0.0) ctc_err = kInf;
  }
  line("ctc loss vs path enumeration", ctc_err <= 1e-9, ctc_err, 1e-9);

  double grad_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix logits(4, 3);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = standard_normal(rng);
    const std::vector<int> y{0, 1};
    const auto r = ctc_loss(log_softmax(logits), y, 2);
    auto f = [&](const Eigen::VectorXd& v) {
      return ctc_loss(log_softmax(Eigen::Map<const Matrix>(v.data(), 4, 3)), y, 2).loss;
    };
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(logits.data(), logits.size());
    const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(r.grad.data(), r.grad.size());
    grad_err = std::max(grad_err, oracle::max_relative_error(g, oracle::finite_difference(f, x)));
  }
  line("ctc gradient vs finite differences", grad_err < 1e-4, grad_err, 1e-4);

  const double w = metrics::wer({0, 1, 2}, {0, 7, 2}).wer;
  line("wer of one substitution in three", std::abs(w - 1.0 / 3.0) < 1e-15, w, 1e-15);

  const double af = metrics::avg_far(metrics::det_curve({{-1, false}, {-2, false}, {1, true}, {2, true}}));
  line("avg_far of a perfect detector", af == 0.0, af, 0.0);

  const WorldSpec world = default_sequence_world();
  const Dataset real = sample_real(world, 5000, derive_seed(0, "selftest/data"));
  const Binning2D bins;
  const double tv = total_variation(pooled_histogram(real, bins), exact_pooled_histogram(world, bins));
  line("sampled vs exact pooled histogram", tv < 0.1, tv, 0.1);

  return failures ? kAbort : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"syntpp: synthetic data curation experiments on toy speech worlds"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed, replaces the config's seed list");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* gen = app.add_subcommand("gen-data", "write real splits and the synthetic pool as JSONL");
  auto* trec = app.add_subcommand("train-recognizer", "train the reference recognizer");
  auto* tdis = app.add_subcommand("train-discriminator", "train the real/synthetic discriminator");
  auto* cur = app.add_subcommand("curate", "rejection-sample curated_n synthetic samples");
  auto* run = app.add_subcommand("run", "train and evaluate every condition and seed");
  auto* rep = app.add_subcommand("report", "print the result table of a run directory");
  auto* self = app.add_subcommand("selftest", "run the oracle checks");
  for (auto* s : {gen, trec, tdis, cur, run}) common(s);
  run->add_option("--condition", o.condition, "run a single condition");
  run->add_option("--jobs", o.jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);
  rep->add_option("run_dir", o.run_dir, "run directory");
  rep->add_option("--out", o.out, "run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*trec) return cmd_train_recognizer(o);
    if (*tdis) return cmd_train_discriminator(o);
    if (*cur) return cmd_curate(o);
    if (*run) return cmd_run(o);
    if (*rep) return cmd_report(o);
    if (*self) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const RuntimeAbort& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return kAbort;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
