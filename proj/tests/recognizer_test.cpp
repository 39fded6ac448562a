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

#include <gtest/gtest.h>

#include <cmath>

#include "syntpp/recognizer.hpp"
#include "syntpp/testing/oracles.hpp"
#include "syntpp/trainer.hpp"

namespace syntpp {
namespace {

Matrix random_logits(int T, int K, Rng& rng, double scale = 1.5) {
  Matrix m(T, K);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

Eigen::VectorXd as_vector(const Matrix& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Matrix as_matrix(const Eigen::VectorXd& v, int T, int K) { return Eigen::Map<const Matrix>(v.data(), T, K); }

int repeats(const std::vector<int>& y) {
  int r = 0;
  for (std::size_t i = 1; i < y.size(); ++i) r += y[i] == y[i - 1];
  return r;
}

TEST(LogSoftmax, RowsNormalize) {
  Rng rng(1);
  const Matrix lp = log_softmax(random_logits(7, 5, rng, 30.0));
  for (Eigen::Index t = 0; t < lp.rows(); ++t) {
    const double m = lp.row(t).maxCoeff();
    EXPECT_NEAR(m + std::log((lp.row(t).array() - m).exp().sum()), 0.0, 1e-9);
  }
}

TEST(CrossEntropy, UniformTwoClassIsLn2) {
  EXPECT_NEAR(cross_entropy(Eigen::RowVector2d(0.3, 0.3), 1).loss, std::log(2.0), 1e-15);
}

TEST(CrossEntropy, LargeMarginGoesToZero) {
  EXPECT_LT(cross_entropy(Eigen::RowVector3d(-50.0, 60.0, 0.0), 1).loss, 1e-20);
}

TEST(CrossEntropy, OutOfRangeLabelIsContractError) {
  EXPECT_THROW(cross_entropy(Eigen::RowVector2d(0.0, 0.0), 2), ContractError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(uniform_index(rng, 5));
    const int label = static_cast<int>(uniform_index(rng, K));
    const Matrix z = random_logits(1, K, rng, 2.0);
    const auto f = [&](const Eigen::VectorXd& v) { return cross_entropy(v.transpose(), label).loss; };
    const Eigen::VectorXd fd = oracle::finite_difference(f, as_vector(z), 1e-3);
    EXPECT_LT(oracle::max_relative_error(as_vector(cross_entropy(z.row(0), label).grad), fd), 1e-6);
  }
}

TEST(CrossEntropy, FrameExpansionRepeatsEachTokenFTimes) {
  Matrix lp = Matrix::Constant(6, 3, std::log(1e-3));
  const std::vector<int> y{2, 0};
  for (int t = 0; t < 6; ++t) lp(t, y[t / 3]) = std::log(0.5);
  EXPECT_NEAR(frame_cross_entropy(lp, y, 3), std::log(2.0), 1e-15);
  EXPECT_THROW(frame_cross_entropy(lp, {2}, 3), ContractError);
}

TEST(Ctc, SingleFrameIsNegLogProbability) {
  Rng rng(3);
  const Matrix lp = log_softmax(random_logits(1, 4, rng));
  EXPECT_NEAR(ctc_loss(lp, {2}, 3).loss, -lp(0, 2), 1e-12);
}

TEST(Ctc, TwoFramesSumThreePaths) {
  Rng rng(4);
  const Matrix lp = log_softmax(random_logits(2, 3, rng));
  const Matrix p = lp.array().exp();
  const int a = 1, blank = 2;
  const double expect = p(0, a) * p(1, a) + p(0, a) * p(1, blank) + p(0, blank) * p(1, a);
  EXPECT_NEAR(ctc_loss(lp, {a}, blank).loss, -std::log(expect), 1e-12);
}

TEST(Ctc, MatchesExhaustiveAlignmentSum) {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int V = 1 + static_cast<int>(uniform_index(rng, 4));
    const int K = V + 1;
    const int T = 1 + static_cast<int>(uniform_index(rng, 6));
    const int L = static_cast<int>(uniform_index(rng, 4));
    std::vector<int> y(L);
    for (auto& t : y) t = static_cast<int>(uniform_index(rng, V));
    const Matrix lp = log_softmax(random_logits(T, K, rng));
    const CtcResult r = ctc_loss(lp, y, V);
    const double brute = oracle::ctc_path_sum(lp, y, V);
    if (T < L + repeats(y)) {
      EXPECT_FALSE(r.feasible);
      EXPECT_EQ(brute, 0.0);
      continue;
    }
    ASSERT_TRUE(r.feasible);
    EXPECT_NEAR(std::exp(-r.loss), brute, 1e-9 * std::max(1.0, brute)) << "T=" << T << " L=" << L;
    EXPECT_NEAR(r.loss, -std::log(brute), 1e-9 * std::max(1.0, std::abs(r.loss)));
    ++checked;
  }
  EXPECT_GE(checked, 200);
}

TEST(Ctc, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const int V = 1 + static_cast<int>(uniform_index(rng, 4));
    const int L = 1 + static_cast<int>(uniform_index(rng, 3));
    std::vector<int> y(L);
    for (auto& t : y) t = static_cast<int>(uniform_index(rng, V));
    const int T = L + repeats(y) + static_cast<int>(uniform_index(rng, 4));
    const Matrix z = random_logits(T, V + 1, rng);
    const auto f = [&](const Eigen::VectorXd& v) {
      return ctc_loss(log_softmax(as_matrix(v, T, V + 1)), y, V).loss;
    };
    const CtcResult r = ctc_loss(log_softmax(z), y, V);
    EXPECT_LT(oracle::max_relative_error(as_vector(r.grad), oracle::finite_difference(f, as_vector(z))),
              1e-4);
  }
}

TEST(Ctc, InfeasibleIsFlaggedNotThrown) {
  Matrix lp = log_softmax(Matrix::Zero(2, 3));
  const CtcResult r = ctc_loss(lp, {1, 1}, 2);
  EXPECT_FALSE(r.feasible);
  EXPECT_TRUE(std::isinf(r.loss));
}

TEST(Ctc, OneHotAlignmentHasZeroLossAndDecodesBack) {
  const int blank = 3;
  const std::vector<int> y{0, 0, 2};
  const std::vector<int> path{0, 0, blank, 0, 2, 2, blank};
  Matrix lp = Matrix::Constant(path.size(), 4, -1e4);
  for (std::size_t t = 0; t < path.size(); ++t) lp(t, path[t]) = 0.0;
  EXPECT_NEAR(ctc_loss(lp, y, blank).loss, 0.0, 1e-12);
  EXPECT_EQ(greedy_decode(lp, blank), y);
}

Matrix one_hot_frames(const std::vector<int>& ks, int K) {
  Matrix m = Matrix::Zero(ks.size(), K);
  for (std::size_t t = 0; t < ks.size(); ++t) m(t, ks[t]) = 1.0;
  return m;
}

TEST(GreedyDecode, CollapseRules) {
  const int a = 0, b = 1, blank = 2;
  EXPECT_EQ(greedy_decode(one_hot_frames({a, a, blank, b}, 3), blank), (std::vector<int>{a, b}));
  EXPECT_TRUE(greedy_decode(one_hot_frames({blank, blank, blank}, 3), blank).empty());
  EXPECT_EQ(greedy_decode(one_hot_frames({a, blank, a}, 3), blank), (std::vector<int>{a, a}));
}

TEST(GreedyDecode, TiesGoToLowestIndex) {
  EXPECT_EQ(greedy_decode(Matrix::Constant(2, 3, 0.5), 2), (std::vector<int>{0}));
}

TEST(SequenceModel, ShapesAndBlank) {
  const auto w = default_sequence_world();
  auto m = SequenceModel::for_world(w, {}, 1);
  EXPECT_EQ(m.blank(), w.vocab());
  EXPECT_EQ(m.network().output_dim(), w.vocab() + 1);
  const auto d = sample_real(w, 3, 2);
  for (const auto& s : d) {
    const Matrix lp = m.posteriors(s);
    EXPECT_EQ(lp.rows(), s.features.rows());
    EXPECT_EQ(lp.cols(), w.vocab() + 1);
  }
}

TEST(SequenceModel, BatchGradientMatchesFiniteDifferences) {
  const auto w = default_sequence_world();
  auto m = SequenceModel::for_world(w, {8, true}, 3);
  const auto d = sample_real(w, 4, 4);
  std::vector<const Sample*> batch;
  for (const auto& s : d) batch.push_back(&s);
  const auto r = m.loss_and_grad(batch, nn::DomainTag::Real, nn::StatsRouting::Dual);
  Eigen::Index n = 0;
  for (const auto& g : r.grads) n += g.size();
  Eigen::VectorXd analytic(n), theta(n);
  n = 0;
  for (const auto& g : r.grads) {
    analytic.segment(n, g.size()) = g;
    n += g.size();
  }
  n = 0;
  for (auto p : m.network().parameters()) {
    theta.segment(n, p.size) = Eigen::Map<const Eigen::VectorXd>(p.data, p.size);
    n += p.size;
  }
  const auto f = [&](const Eigen::VectorXd& t) {
    SequenceModel copy = m;
    Eigen::Index off = 0;
    for (auto p : copy.network().parameters()) {
      Eigen::Map<Eigen::VectorXd>(p.data, p.size) = t.segment(off, p.size);
      off += p.size;
    }
    return copy.loss_and_grad(batch, nn::DomainTag::Real, nn::StatsRouting::Dual).loss;
  };
  EXPECT_LT(oracle::max_relative_error(analytic, oracle::finite_difference(f, theta)), 1e-4);
}

TEST(SequenceModel, LearnsTheIdentityGapWorld) {
  const auto w = default_sequence_world();
  const auto train_set = sample_synth(identity_gap(w), 2000, 11);
  Dataset as_real = train_set;
  for (auto& s : as_real) s.origin = Origin::Real;
  const auto val = sample_real(w, 200, 12);
  const auto test = sample_real(w, 500, 13);
  TrainConfig cfg;
  cfg.mix = MixPolicy::RealOnly;
  cfg.seed = 14;
  auto r = train(SequenceModel::for_world(w, {}, 15), as_real, {}, val, cfg);
  EXPECT_LT(evaluate(r.model, test).wer, 0.05);
}

TEST(KeywordModel, LabelAndScoreSign) {
  const auto w = default_keyword_world();
  KeywordModel m(w.dim, 0, {}, 1);
  EXPECT_EQ(m.network().output_dim(), 2);
  Sample s;
  s.features = Matrix::Zero(3, w.dim);
  s.tokens = {1, 0};
  EXPECT_TRUE(m.label(s));
  s.tokens = {1, 2};
  EXPECT_FALSE(m.label(s));
  const Matrix z = m.network().infer(m.pooled(s));
  EXPECT_NEAR(m.score(s), z(0, 1) - z(0, 0), 1e-15);
}

TEST(KeywordModel, CheckpointRoundTrip) {
  const auto w = default_keyword_world();
  KeywordModel m(w.dim, 0, {}, 5);
  const auto j = to_json(m, w.alphabet);
  EXPECT_EQ(j.at("task"), "keyword");
  const auto back = keyword_model_from_json(Json::parse(j.dump()));
  for (const auto& s : sample_real(w, 20, 6)) EXPECT_EQ(back.score(s), m.score(s));
  EXPECT_THROW(sequence_model_from_json(j), ConfigError);
}

TEST(SequenceModel, CheckpointRoundTrip) {
  const auto w = default_sequence_world();
  auto m = SequenceModel::for_world(w, {}, 7);
  const auto back = sequence_model_from_json(Json::parse(to_json(m, w.alphabet).dump()));
  for (const auto& s : sample_real(w, 10, 8)) EXPECT_EQ(back.posteriors(s), m.posteriors(s));
}

}  // namespace
}  // namespace syntpp
