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

#ifndef SYNTPP_HISTOGRAM_HPP
#define SYNTPP_HISTOGRAM_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "syntpp/common.hpp"

namespace syntpp {

// Fixed rectangular binning of a 2-d feature space. Points outside the box
// are clamped into the edge bins, so every histogram carries total mass 1.
struct Binning2D {
  double x_lo = -6.0, x_hi = 6.0;
  double y_lo = -6.0, y_hi = 6.0;
  int bins = 20;

  int index_1d(double v, double lo, double hi) const {
    const double w = (hi - lo) / bins;
    int i = static_cast<int>(std::floor((v - lo) / w));
    return std::clamp(i, 0, bins - 1);
  }
  int index(double x, double y) const {
    return index_1d(x, x_lo, x_hi) * bins + index_1d(y, y_lo, y_hi);
  }
  int size() const { return bins * bins; }

  // Bin edges along one axis with the outermost edges pushed to infinity.
  std::vector<double> edges(double lo, double hi) const {
    std::vector<double> e(bins + 1);
    for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * i / bins;
    e.front() = kNegInf;
    e.back() = kInf;
    return e;
  }
};

class Histogram2D {
 public:
  explicit Histogram2D(Binning2D binning)
      : binning_(binning), counts_(binning.size(), 0.0) {}

  void add(double x, double y, double weight = 1.0) {
    counts_[binning_.index(x, y)] += weight;
    total_ += weight;
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(counts_.size(), 0.0);
    if (total_ <= 0.0) return p;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts_[i] / total_;
    return p;
  }

  double total() const { return total_; }
  const Binning2D& binning() const { return binning_; }

 private:
  Binning2D binning_;
  std::vector<double> counts_;
  double total_ = 0.0;
};

inline double total_variation(const std::vector<double>& p,
                              const std::vector<double>& q) {
  SYNTPP_REQUIRE(p.size() == q.size(), "total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace syntpp

#endif  // SYNTPP_HISTOGRAM_HPP
