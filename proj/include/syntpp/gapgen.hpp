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

// Parametric "real" and "synthetic" worlds over (frame sequence, token
// sequence) pairs with closed-form joint densities.
//
// A world is a mixture of styles. Given a style s and tokens y, every token
// y_i emits F frames drawn i.i.d. from N(mean_s[y_i], sigma_s^2 I) with
// sigma_s^2 = noise_sigma^2 * frame_cov_scale_s. Token sequences are drawn
// from an i.i.d. per-token categorical after a categorical length draw.
//
// The synthetic world (GapSpec) distorts a base world with one knob per gap
// region: an artifact style far from the base support, per-style reweighting
// (over/under-sampling), dropped styles (missing region) and label
// corruption, which rewrites tokens of y without touching x.

#ifndef SYNTPP_GAPGEN_HPP
#define SYNTPP_GAPGEN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "syntpp/common.hpp"
#include "syntpp/histogram.hpp"

namespace syntpp {

using Json = nlohmann::json;

inline constexpr const char* kGapgenSchema = "gapgen/1";
inline constexpr int kArtifactStyleId = -1;

struct TokenAlphabet {
  std::vector<std::string> tokens;
  std::string blank = "<blank>";

  int size() const { return static_cast<int>(tokens.size()); }

  void validate() const {
    if (tokens.size() < 2 || tokens.size() > 16)
      throw ConfigError("alphabet size must be in [2, 16]");
    std::set<std::string> seen(tokens.begin(), tokens.end());
    if (seen.size() != tokens.size())
      throw ConfigError("alphabet tokens must be distinct");
    if (seen.count(blank)) throw ConfigError("blank symbol is in the alphabet");
  }
};

struct StyleComponent {
  int id = 0;
  std::vector<Eigen::VectorXd> frame_mean;  // one per token
  double frame_cov_scale = 1.0;
  double weight = 1.0;
};

struct TokenPrior {
  int min_len = 1;
  int max_len = 4;
  std::vector<double> length_probs;  // index L - min_len
  std::vector<double> token_probs;   // per token

  double log_prob(const std::vector<int>& y) const {
    const int L = static_cast<int>(y.size());
    if (L < min_len || L > max_len) return kNegInf;
    double lp = std::log(length_probs[L - min_len]);
    for (int t : y) {
      if (t < 0 || t >= static_cast<int>(token_probs.size())) return kNegInf;
      lp += std::log(token_probs[t]);
    }
    return lp;
  }
};

struct WorldSpec {
  TokenAlphabet alphabet;
  std::vector<StyleComponent> styles;
  TokenPrior prior;
  int frames_per_token = 3;
  double noise_sigma = 0.4;
  int dim = 2;

  int vocab() const { return alphabet.size(); }

  void validate() const;
};

struct GapSpec {
  WorldSpec base;
  double artifact_weight = 0.0;
  StyleComponent artifact;           // id is forced to kArtifactStyleId
  std::vector<double> style_reweight;  // per base style, empty means all 1
  std::set<int> dropped_styles;
  double label_corruption_rate = 0.0;

  void validate() const;
};

struct Curation {
  double discriminator = 0.5;
  double ratio = 1.0;
  double bound_at_decision = 1.0;
};

struct Sample {
  std::int64_t id = 0;
  Eigen::MatrixXd features;  // T x d
  std::vector<int> tokens;
  Origin origin = Origin::Real;
  int style_id = 0;
  std::optional<Curation> curation;

  int frames() const { return static_cast<int>(features.rows()); }
};

using Dataset = std::vector<Sample>;

namespace detail {

inline void check_distribution(const std::vector<double>& p,
                               const std::string& what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ConfigError(what + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ConfigError(what + " must sum to 1");
}

inline int draw_categorical(const std::vector<double>& p, Rng& rng) {
  const double u = uniform01(rng);
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    c += p[i];
    if (u < c) return static_cast<int>(i);
  }
  // Rounding slack: fall back to the last nonzero entry.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<int>(i);
  return 0;
}

inline double style_sigma(const WorldSpec& w, const StyleComponent& s) {
  return w.noise_sigma * std::sqrt(s.frame_cov_scale);
}

inline void check_style(const WorldSpec& w, const StyleComponent& s) {
  if (!(s.frame_cov_scale > 0.0))
    throw ConfigError("style frame_cov_scale must be positive");
  if (!(s.weight >= 0.0 && s.weight <= 1.0))
    throw ConfigError("style weight must be in [0, 1]");
  if (static_cast<int>(s.frame_mean.size()) != w.vocab())
    throw ConfigError("style needs one frame mean per token");
  for (const auto& m : s.frame_mean)
    if (m.size() != w.dim) throw ConfigError("frame mean has wrong dimension");
}

}  // namespace detail

inline void WorldSpec::validate() const {
  alphabet.validate();
  if (dim < 1) throw ConfigError("dim must be positive");
  if (frames_per_token < 1) throw ConfigError("frames_per_token must be >= 1");
  if (!(noise_sigma > 0.0)) throw ConfigError("noise_sigma must be positive");
  if (styles.empty()) throw ConfigError("world needs at least one style");
  std::set<int> ids;
  double wsum = 0.0;
  for (const auto& s : styles) {
    detail::check_style(*this, s);
    if (s.id == kArtifactStyleId)
      throw ConfigError("style id -1 is reserved for artifacts");
    if (!ids.insert(s.id).second) throw ConfigError("duplicate style id");
    wsum += s.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ConfigError("style weights must sum to 1");
  if (prior.min_len < 1 || prior.max_len < prior.min_len)
    throw ConfigError("invalid length range");
  if (static_cast<int>(prior.length_probs.size()) !=
      prior.max_len - prior.min_len + 1)
    throw ConfigError("length_probs size must match the length range");
  if (static_cast<int>(prior.token_probs.size()) != vocab())
    throw ConfigError("token_probs size must match the alphabet");
  detail::check_distribution(prior.length_probs, "length_probs");
  detail::check_distribution(prior.token_probs, "token_probs");
}

inline void GapSpec::validate() const {
  base.validate();
  if (!(artifact_weight >= 0.0 && artifact_weight <= 0.5))
    throw ConfigError("artifact_weight must be in [0, 0.5]");
  if (!(label_corruption_rate >= 0.0 && label_corruption_rate <= 0.5))
    throw ConfigError("label_corruption_rate must be in [0, 0.5]");
  if (artifact_weight > 0.0) {
    StyleComponent a = artifact;
    a.weight = 1.0;
    detail::check_style(base, a);
  }
  if (!style_reweight.empty()) {
    if (style_reweight.size() != base.styles.size())
      throw ConfigError("style_reweight needs one factor per base style");
    for (double f : style_reweight)
      if (!(f >= 0.0)) throw ConfigError("style_reweight must be >= 0");
  }
  for (int id : dropped_styles) {
    bool found = false;
    for (const auto& s : base.styles) found = found || s.id == id;
    if (!found) throw ConfigError("dropped style id not in base world");
  }
}

// A mixture component with its effective weight and frame deviation.
struct EmissionComponent {
  const StyleComponent* style;
  double weight;
  double sigma;
};

inline std::vector<EmissionComponent> emission_mixture(const WorldSpec& w) {
  std::vector<EmissionComponent> out;
  for (const auto& s : w.styles)
    out.push_back({&s, s.weight, detail::style_sigma(w, s)});
  return out;
}

inline std::vector<EmissionComponent> emission_mixture(const GapSpec& g) {
  std::vector<EmissionComponent> out;
  const auto& styles = g.base.styles;
  double total = 0.0;
  std::vector<double> w(styles.size());
  for (std::size_t i = 0; i < styles.size(); ++i) {
    const double f = g.style_reweight.empty() ? 1.0 : g.style_reweight[i];
    w[i] = g.dropped_styles.count(styles[i].id) ? 0.0 : styles[i].weight * f;
    total += w[i];
  }
  if (total <= 0.0 && g.artifact_weight < 1.0)
    throw ConfigError("gap leaves no base style with positive weight");
  for (std::size_t i = 0; i < styles.size(); ++i) {
    if (w[i] <= 0.0) continue;
    out.push_back({&styles[i], (1.0 - g.artifact_weight) * w[i] / total,
                   detail::style_sigma(g.base, styles[i])});
  }
  if (g.artifact_weight > 0.0)
    out.push_back({&g.artifact, g.artifact_weight,
                   detail::style_sigma(g.base, g.artifact)});
  return out;
}

namespace detail {

inline double log_normal_iso(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::VectorXd& mean, double sigma) {
  const double d = static_cast<double>(x.size());
  const double sq = (x - mean).squaredNorm();
  return -0.5 * sq / (sigma * sigma) - d * std::log(sigma) -
         0.5 * d * std::log(2.0 * M_PI);
}

// Log-likelihood of token i's frames under a component, for token value a.
inline double token_frames_loglik(const Eigen::MatrixXd& x, int i, int F,
                                  const EmissionComponent& c, int a) {
  double ll = 0.0;
  for (int f = 0; f < F; ++f)
    ll += log_normal_iso(x.row(i * F + f).transpose(), c.style->frame_mean[a],
                         c.sigma);
  return ll;
}

inline void check_dims(const WorldSpec& w, const Eigen::MatrixXd& x,
                       const std::vector<int>& y) {
  SYNTPP_REQUIRE(x.cols() == w.dim, "log_density: feature dimension mismatch");
  SYNTPP_REQUIRE(x.rows() ==
                     static_cast<Eigen::Index>(y.size()) * w.frames_per_token,
                 "log_density: frame count does not match F * |y|");
}

// Shared mixture evaluation. With corruption == 0 the token marginal is the
// prior itself, which keeps identity gaps bit-compatible with the base world.
inline double mixture_log_density(const WorldSpec& w,
                                  const std::vector<EmissionComponent>& comps,
                                  double corruption, const Eigen::MatrixXd& x,
                                  const std::vector<int>& y) {
  check_dims(w, x, y);
  const int L = static_cast<int>(y.size());
  const int V = w.vocab();
  const int F = w.frames_per_token;
  if (L < w.prior.min_len || L > w.prior.max_len) return kNegInf;
  for (int t : y)
    if (t < 0 || t >= V) return kNegInf;
  const double log_len = std::log(w.prior.length_probs[L - w.prior.min_len]);

  double total = kNegInf;
  for (const auto& c : comps) {
    double lc = std::log(c.weight);
    for (int i = 0; i < L && lc > kNegInf; ++i) {
      if (corruption == 0.0) {
        lc += std::log(w.prior.token_probs[y[i]]) +
              token_frames_loglik(x, i, F, c, y[i]);
        continue;
      }
      double acc = kNegInf;
      for (int a = 0; a < V; ++a) {
        const double pa = w.prior.token_probs[a];
        if (pa <= 0.0) continue;
        const double q =
            a == y[i] ? 1.0 - corruption : corruption / (V - 1);
        if (q <= 0.0) continue;
        acc = log_sum_exp(acc, std::log(pa) + std::log(q) +
                                   token_frames_loglik(x, i, F, c, a));
      }
      lc += acc;
    }
    total = log_sum_exp(total, lc);
  }
  return total == kNegInf ? kNegInf : total + log_len;
}

inline Sample draw_sample(const WorldSpec& w,
                          const std::vector<EmissionComponent>& comps,
                          const std::vector<double>& comp_weights,
                          double corruption, Origin origin, std::int64_t id,
                          Rng& rng) {
  Sample s;
  s.id = id;
  s.origin = origin;
  const int L = w.prior.min_len + draw_categorical(w.prior.length_probs, rng);
  s.tokens.resize(L);
  for (int i = 0; i < L; ++i)
    s.tokens[i] = draw_categorical(w.prior.token_probs, rng);
  const auto& c = comps[draw_categorical(comp_weights, rng)];
  s.style_id = c.style->id;
  const int F = w.frames_per_token;
  s.features.resize(static_cast<Eigen::Index>(L) * F, w.dim);
  for (int i = 0; i < L; ++i)
    for (int f = 0; f < F; ++f)
      for (int k = 0; k < w.dim; ++k)
        s.features(i * F + f, k) =
            c.style->frame_mean[s.tokens[i]](k) + c.sigma * standard_normal(rng);
  if (corruption > 0.0) {
    const int V = w.vocab();
    for (int i = 0; i < L; ++i) {
      if (uniform01(rng) >= corruption) continue;
      int r = static_cast<int>(uniform_index(rng, V - 1));
      if (r >= s.tokens[i]) ++r;
      s.tokens[i] = r;
    }
  }
  return s;
}

inline std::vector<double> weights_of(const std::vector<EmissionComponent>& c) {
  std::vector<double> w;
  for (const auto& e : c) w.push_back(e.weight);
  return w;
}

}  // namespace detail

inline Dataset sample_real(const WorldSpec& spec, std::size_t n,
                           std::uint64_t seed) {
  spec.validate();
  SYNTPP_REQUIRE(n >= 1, "sample_real: n must be >= 1");
  const auto comps = emission_mixture(spec);
  const auto weights = detail::weights_of(comps);
  Rng rng(seed);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(detail::draw_sample(spec, comps, weights, 0.0, Origin::Real,
                                      static_cast<std::int64_t>(i), rng));
  return out;
}

// Unbounded deterministic stream of synthetic samples. sample_synth(g, n, s)
// is exactly the first n draws of SyntheticStream(g, s).
class SyntheticStream {
 public:
  SyntheticStream(GapSpec gap, std::uint64_t seed)
      : gap_(std::move(gap)), rng_(seed) {
    gap_.validate();
    gap_.artifact.id = kArtifactStyleId;
    comps_ = emission_mixture(gap_);
    weights_ = detail::weights_of(comps_);
  }
  SyntheticStream(const SyntheticStream&) = delete;
  SyntheticStream& operator=(const SyntheticStream&) = delete;

  Sample next() {
    return detail::draw_sample(gap_.base, comps_, weights_,
                               gap_.label_corruption_rate, Origin::Synthetic,
                               next_id_++, rng_);
  }

  std::int64_t produced() const { return next_id_; }
  const GapSpec& gap() const { return gap_; }

 private:
  GapSpec gap_;
  Rng rng_;
  std::vector<EmissionComponent> comps_;
  std::vector<double> weights_;
  std::int64_t next_id_ = 0;
};

inline Dataset sample_synth(const GapSpec& gap, std::size_t n,
                            std::uint64_t seed) {
  SYNTPP_REQUIRE(n >= 1, "sample_synth: n must be >= 1");
  SyntheticStream stream(gap, seed);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(stream.next());
  return out;
}

inline double log_density(const WorldSpec& spec, const Eigen::MatrixXd& x,
                          const std::vector<int>& y) {
  return detail::mixture_log_density(spec, emission_mixture(spec), 0.0, x, y);
}

inline double log_density(const GapSpec& gap, const Eigen::MatrixXd& x,
                          const std::vector<int>& y) {
  GapSpec g = gap;
  g.artifact.id = kArtifactStyleId;
  return detail::mixture_log_density(g.base, emission_mixture(g),
                                     g.label_corruption_rate, x, y);
}

// log(p_d / p_g). Throws when p_g(x, y) = 0.
inline double log_oracle_ratio(const WorldSpec& base, const GapSpec& gap,
                               const Eigen::MatrixXd& x,
                               const std::vector<int>& y) {
  const double lg = log_density(gap, x, y);
  if (lg == kNegInf)
    throw ContractError("oracle_ratio: synthetic density is zero");
  return log_density(base, x, y) - lg;
}

inline double oracle_ratio(const WorldSpec& base, const GapSpec& gap,
                           const Eigen::MatrixXd& x, const std::vector<int>& y) {
  return std::exp(log_oracle_ratio(base, gap, x, y));
}

// Mean frame over the whole utterance, first two dimensions.
inline Eigen::Vector2d pooled_point(const Sample& s) {
  const Eigen::RowVectorXd m = s.features.colwise().mean();
  return {m(0), s.features.cols() > 1 ? m(1) : 0.0};
}

inline std::vector<double> pooled_histogram(const Dataset& data,
                                            const Binning2D& binning) {
  Histogram2D h(binning);
  for (const auto& s : data) {
    const auto p = pooled_point(s);
    h.add(p(0), p(1));
  }
  return h.probabilities();
}

namespace detail {

inline double normal_cdf(double z) {
  if (z == kInf) return 1.0;
  if (z == kNegInf) return 0.0;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Exact bin masses of the pooled-frame distribution of a mixture. Given a
// component and tokens y, the pooled frame is Gaussian with mean
// avg_i mean[y_i] and per-axis deviation sigma / sqrt(F |y|).
inline std::vector<double> exact_pooled_bins(
    const WorldSpec& w, const std::vector<EmissionComponent>& comps,
    const Binning2D& b) {
  SYNTPP_REQUIRE(w.dim >= 1, "exact_pooled_bins: bad dimension");
  const int V = w.vocab();
  std::vector<double> out(b.size(), 0.0);
  const auto ex = b.edges(b.x_lo, b.x_hi);
  const auto ey = b.edges(b.y_lo, b.y_hi);
  std::vector<int> y;
  std::vector<double> px(b.bins), py(b.bins);
  for (int L = w.prior.min_len; L <= w.prior.max_len; ++L) {
    const double pl = w.prior.length_probs[L - w.prior.min_len];
    if (pl <= 0.0) continue;
    double count = std::pow(static_cast<double>(V), L);
    SYNTPP_REQUIRE(count <= 2e6, "exact_pooled_bins: too many sequences");
    y.assign(L, 0);
    for (;;) {
      double py_seq = pl;
      for (int t : y) py_seq *= w.prior.token_probs[t];
      if (py_seq > 0.0) {
        for (const auto& c : comps) {
          Eigen::VectorXd mu = Eigen::VectorXd::Zero(w.dim);
          for (int t : y) mu += c.style->frame_mean[t];
          mu /= L;
          const double sd = c.sigma / std::sqrt(double(L) * w.frames_per_token);
          const double mx = mu(0);
          const double my = w.dim > 1 ? mu(1) : 0.0;
          const double sdy = w.dim > 1 ? sd : 1e-300;
          for (int i = 0; i < b.bins; ++i) {
            px[i] = normal_cdf((ex[i + 1] - mx) / sd) -
                    normal_cdf((ex[i] - mx) / sd);
            py[i] = normal_cdf((ey[i + 1] - my) / sdy) -
                    normal_cdf((ey[i] - my) / sdy);
          }
          const double wgt = py_seq * c.weight;
          for (int i = 0; i < b.bins; ++i)
            for (int j = 0; j < b.bins; ++j)
              out[i * b.bins + j] += wgt * px[i] * py[j];
        }
      }
      int k = 0;
      while (k < L && ++y[k] == V) y[k++] = 0;
      if (k == L) break;
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<double> exact_pooled_histogram(const WorldSpec& w,
                                                  const Binning2D& b) {
  return detail::exact_pooled_bins(w, emission_mixture(w), b);
}

inline std::vector<double> exact_pooled_histogram(const GapSpec& g,
                                                  const Binning2D& b) {
  GapSpec copy = g;
  copy.artifact.id = kArtifactStyleId;
  return detail::exact_pooled_bins(copy.base, emission_mixture(copy), b);
}

// ---------------------------------------------------------------------------
// Default worlds.

namespace detail {

inline TokenAlphabet letters(int v) {
  TokenAlphabet a;
  for (int i = 0; i < v; ++i) a.tokens.push_back(std::string(1, char('a' + i)));
  return a;
}

inline std::vector<Eigen::VectorXd> ring_means(double radius,
                                               Eigen::Vector2d offset, int v) {
  std::vector<Eigen::VectorXd> m;
  for (int i = 0; i < v; ++i) {
    const double ang = 2.0 * M_PI * i / v;
    Eigen::VectorXd p(2);
    p << radius * std::cos(ang) + offset(0), radius * std::sin(ang) + offset(1);
    m.push_back(p);
  }
  return m;
}

inline std::vector<Eigen::VectorXd> constant_means(Eigen::Vector2d at, int v) {
  std::vector<Eigen::VectorXd> m;
  for (int i = 0; i < v; ++i) m.push_back(Eigen::VectorXd(at));
  return m;
}

}  // namespace detail

// d=2, F=3, V=4, |y| in [1, 4]; three styles that shift and scale a ring of
// token means.
inline WorldSpec default_sequence_world() {
  WorldSpec w;
  w.alphabet = detail::letters(4);
  w.dim = 2;
  w.frames_per_token = 3;
  w.noise_sigma = 0.4;
  w.prior.min_len = 1;
  w.prior.max_len = 4;
  w.prior.length_probs = {0.25, 0.25, 0.25, 0.25};
  w.prior.token_probs = {0.25, 0.25, 0.25, 0.25};
  w.styles.push_back({0, detail::ring_means(2.0, {0.0, 0.0}, 4), 1.0, 0.5});
  w.styles.push_back({1, detail::ring_means(2.0, {0.6, 0.6}, 4), 1.44, 0.3});
  w.styles.push_back({2, detail::ring_means(2.0, {-0.6, 0.4}, 4), 0.64, 0.2});
  return w;
}

// Single-token utterances; token 0 plays the keyword.
inline WorldSpec default_keyword_world() {
  WorldSpec w = default_sequence_world();
  w.noise_sigma = 1.0;
  w.prior.min_len = 1;
  w.prior.max_len = 1;
  w.prior.length_probs = {1.0};
  return w;
}

inline GapSpec identity_gap(const WorldSpec& base) {
  GapSpec g;
  g.base = base;
  g.artifact.id = kArtifactStyleId;
  g.artifact.frame_mean = detail::constant_means({0.0, 0.0}, base.vocab());
  return g;
}

// Gap with every region populated except the missing one. The artifact
// cluster is a tight blob in the empty middle of the token ring.
inline GapSpec default_gap(const WorldSpec& base) {
  GapSpec g = identity_gap(base);
  g.artifact_weight = 0.2;
  g.artifact.frame_mean = detail::constant_means({0.0, 0.0}, base.vocab());
  g.artifact.frame_cov_scale = 0.25;
  g.style_reweight.assign(base.styles.size(), 1.0);
  if (base.styles.size() >= 3) g.style_reweight = {2.0, 0.5, 0.5};
  g.label_corruption_rate = 0.4;
  return g;
}

// ---------------------------------------------------------------------------
// JSON serialization.

namespace detail {

inline Json vec_to_json(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vec_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

inline Json style_to_json(const StyleComponent& s) {
  Json means = Json::array();
  for (const auto& m : s.frame_mean) means.push_back(vec_to_json(m));
  return {{"id", s.id},
          {"frame_mean", means},
          {"frame_cov_scale", s.frame_cov_scale},
          {"weight", s.weight}};
}

inline StyleComponent style_from_json(const Json& j) {
  StyleComponent s;
  s.id = j.at("id").get<int>();
  for (const auto& m : j.at("frame_mean")) s.frame_mean.push_back(vec_from_json(m));
  s.frame_cov_scale = j.at("frame_cov_scale").get<double>();
  s.weight = j.value("weight", 1.0);
  return s;
}

inline void check_schema(const Json& j) {
  if (!j.contains("schema") || j.at("schema") != kGapgenSchema)
    throw ConfigError("expected schema \"gapgen/1\"");
}

}  // namespace detail

inline Json to_json(const WorldSpec& w) {
  Json styles = Json::array();
  for (const auto& s : w.styles) styles.push_back(detail::style_to_json(s));
  return {{"schema", kGapgenSchema},
          {"kind", "world"},
          {"alphabet", w.alphabet.tokens},
          {"blank", w.alphabet.blank},
          {"dim", w.dim},
          {"frames_per_token", w.frames_per_token},
          {"noise_sigma", w.noise_sigma},
          {"min_len", w.prior.min_len},
          {"max_len", w.prior.max_len},
          {"length_probs", w.prior.length_probs},
          {"token_probs", w.prior.token_probs},
          {"styles", styles}};
}

inline WorldSpec world_from_json(const Json& j) {
  try {
    detail::check_schema(j);
    WorldSpec w;
    w.alphabet.tokens = j.at("alphabet").get<std::vector<std::string>>();
    w.alphabet.blank = j.value("blank", std::string("<blank>"));
    w.dim = j.at("dim").get<int>();
    w.frames_per_token = j.at("frames_per_token").get<int>();
    w.noise_sigma = j.at("noise_sigma").get<double>();
    w.prior.min_len = j.at("min_len").get<int>();
    w.prior.max_len = j.at("max_len").get<int>();
    w.prior.length_probs = j.at("length_probs").get<std::vector<double>>();
    w.prior.token_probs = j.at("token_probs").get<std::vector<double>>();
    for (const auto& s : j.at("styles")) w.styles.push_back(detail::style_from_json(s));
    w.validate();
    return w;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed world spec: ") + e.what());
  }
}

inline Json to_json(const GapSpec& g) {
  return {{"schema", kGapgenSchema},
          {"kind", "gap"},
          {"base", to_json(g.base)},
          {"artifact_weight", g.artifact_weight},
          {"artifact", detail::style_to_json(g.artifact)},
          {"style_reweight", g.style_reweight},
          {"dropped_styles", std::vector<int>(g.dropped_styles.begin(),
                                              g.dropped_styles.end())},
          {"label_corruption_rate", g.label_corruption_rate}};
}

inline GapSpec gap_from_json(const Json& j) {
  try {
    detail::check_schema(j);
    GapSpec g;
    g.base = world_from_json(j.at("base"));
    g.artifact_weight = j.value("artifact_weight", 0.0);
    if (j.contains("artifact")) g.artifact = detail::style_from_json(j.at("artifact"));
    else g.artifact.frame_mean = detail::constant_means({0.0, 0.0}, g.base.vocab());
    g.artifact.id = kArtifactStyleId;
    g.style_reweight = j.value("style_reweight", std::vector<double>{});
    for (int id : j.value("dropped_styles", std::vector<int>{}))
      g.dropped_styles.insert(id);
    g.label_corruption_rate = j.value("label_corruption_rate", 0.0);
    g.validate();
    return g;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed gap spec: ") + e.what());
  }
}

inline Json to_json(const Sample& s) {
  Json frames = Json::array();
  for (Eigen::Index t = 0; t < s.features.rows(); ++t) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < s.features.cols(); ++k)
      row.push_back(s.features(t, k));
    frames.push_back(std::move(row));
  }
  Json j = {{"id", s.id},
            {"features", frames},
            {"tokens", s.tokens},
            {"origin", std::string(to_string(s.origin))},
            {"style_id", s.style_id}};
  if (s.curation) {
    j["D"] = s.curation->discriminator;
    j["r"] = s.curation->ratio;
    j["M_at_decision"] = s.curation->bound_at_decision;
  }
  return j;
}

inline Sample sample_from_json(const Json& j) {
  Sample s;
  s.id = j.at("id").get<std::int64_t>();
  const auto& frames = j.at("features");
  const Eigen::Index T = static_cast<Eigen::Index>(frames.size());
  const Eigen::Index d = T > 0 ? static_cast<Eigen::Index>(frames[0].size()) : 0;
  s.features.resize(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (static_cast<Eigen::Index>(frames[t].size()) != d)
      throw ConfigError("ragged feature rows in sample " + std::to_string(s.id));
    for (Eigen::Index k = 0; k < d; ++k)
      s.features(t, k) = frames[t][k].get<double>();
  }
  s.tokens = j.at("tokens").get<std::vector<int>>();
  s.origin = origin_from_string(j.at("origin").get<std::string>());
  s.style_id = j.value("style_id", 0);
  if (j.contains("D"))
    s.curation = Curation{j.at("D").get<double>(), j.at("r").get<double>(),
                          j.at("M_at_decision").get<double>()};
  return s;
}

inline void write_jsonl(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& s : data) out << to_json(s).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Dataset read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace syntpp

#endif  // SYNTPP_GAPGEN_HPP
