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

#ifndef SYNTPP_METRICS_HPP
#define SYNTPP_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "syntpp/common.hpp"

namespace syntpp::metrics {

struct WerBreakdown {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_len = 0;
  double wer = 0.0;

  int edits() const { return substitutions + deletions + insertions; }
};

// Unit-cost Levenshtein alignment. When several alignments are optimal the
// backtrace prefers substitution, then deletion, then insertion.
inline WerBreakdown wer(const std::vector<int>& ref, const std::vector<int>& hyp) {
  if (ref.empty()) throw ContractError("wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                          d[i - 1][j] + 1, d[i][j - 1] + 1});

  WerBreakdown out;
  out.ref_len = static_cast<int>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.wer = static_cast<double>(out.edits()) / out.ref_len;
  return out;
}

inline int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (a[i - 1] != b[j - 1]), prev[j] + 1,
                         cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Aggregate WER over a corpus: total edits / total reference tokens.
struct CorpusWer {
  long edits = 0;
  long ref_tokens = 0;

  void add(const WerBreakdown& w) {
    edits += w.edits();
    ref_tokens += w.ref_len;
  }
  double value() const {
    return ref_tokens == 0 ? 0.0 : static_cast<double>(edits) / ref_tokens;
  }
};

struct ScoredLabel {
  double score;
  bool positive;
};

struct DetPoint {
  double threshold;
  double far;
  double frr;
};

// Points ordered by increasing threshold; a trial is accepted when its score
// is >= threshold. The last point uses threshold +inf (accept nothing).
struct DetCurve {
  std::vector<DetPoint> points;
};

inline DetCurve det_curve(std::vector<ScoredLabel> scores) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : scores) (s.positive ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw ContractError("det_curve: need at least one positive and one negative");
  std::sort(scores.begin(), scores.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });
  DetCurve curve;
  std::size_t rejected_pos = 0, rejected_neg = 0;
  std::size_t i = 0;
  while (i < scores.size()) {
    const double t = scores[i].score;
    curve.points.push_back({t, static_cast<double>(neg - rejected_neg) / neg,
                            static_cast<double>(rejected_pos) / pos});
    while (i < scores.size() && scores[i].score == t) {
      (scores[i].positive ? rejected_pos : rejected_neg)++;
      ++i;
    }
  }
  curve.points.push_back({kInf, 0.0, 1.0});
  return curve;
}

// Mean of the lower FAR envelope over FRR in [0, frr_max]; FAR(f) is the
// smallest FAR among operating points with FRR <= f.
inline double avg_far(const DetCurve& curve, double frr_max = 0.05) {
  std::vector<DetPoint> pts = curve.points;
  std::sort(pts.begin(), pts.end(), [](const DetPoint& a, const DetPoint& b) {
    return a.frr < b.frr || (a.frr == b.frr && a.far < b.far);
  });
  double envelope = 1.0;
  std::size_t k = 0;
  while (k < pts.size() && pts[k].frr <= 0.0) envelope = std::min(envelope, pts[k++].far);
  if (frr_max <= 0.0) return envelope;
  double area = 0.0, f = 0.0;
  while (k < pts.size() && pts[k].frr < frr_max) {
    const double next = pts[k].frr;
    area += envelope * (next - f);
    f = next;
    while (k < pts.size() && pts[k].frr == next) envelope = std::min(envelope, pts[k++].far);
  }
  area += envelope * (frr_max - f);
  return area / frr_max;
}

// Area under the ROC curve with ties counted half.
inline double roc_auc(std::vector<ScoredLabel> scores) {
  std::sort(scores.begin(), scores.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });
  double pos = 0, neg = 0, rank_sum = 0;
  std::size_t i = 0;
  while (i < scores.size()) {
    std::size_t j = i;
    while (j < scores.size() && scores[j].score == scores[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scores[k].positive) {
        rank_sum += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw ContractError("roc_auc: single-class input");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n = 1
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  out.n = v.size();
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

inline void write_det_csv(const std::string& path, const DetCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "threshold,far,frr\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g\n", p.threshold, p.far, p.frr);
    out << buf;
  }
}

}  // namespace syntpp::metrics

#endif  // SYNTPP_METRICS_HPP
