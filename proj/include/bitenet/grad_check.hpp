// Copyright 2026 BiteNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bitenet/graph.hpp"

namespace bitenet {

/// Builds a scalar loss from variable leaves created over `inputs`.
using GradCheckFn = std::function<Tensor<double>(
    Graph<double>&, const std::vector<Tensor<double>>&)>;

/// Compares reverse-mode gradients against central finite differences,
/// elementwise over every input, and returns the maximum relative error
/// |a - n| / max(|a|, |n|, 1e-8). Run in double precision.
inline double grad_check(const GradCheckFn& f,
                         std::vector<DenseMatrix<double>> inputs,
                         double eps = 1e-5) {
  auto evaluate = [&](std::vector<Tensor<double>>* leaves_out,
                      Graph<double>& g) -> Tensor<double> {
    std::vector<Tensor<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& m : inputs) leaves.push_back(g.variable(m));
    Tensor<double> loss = f(g, leaves);
    if (leaves_out) *leaves_out = leaves;
    return loss;
  };

  Graph<double> g;
  std::vector<Tensor<double>> leaves;
  Tensor<double> loss = evaluate(&leaves, g);
  g.backward(loss);
  std::vector<DenseMatrix<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& t : leaves) analytic.push_back(t.grad());

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index r = 0; r < inputs[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < inputs[i].cols(); ++c) {
        const double saved = inputs[i](r, c);
        inputs[i](r, c) = saved + eps;
        Graph<double> gp;
        const double fp = evaluate(nullptr, gp).scalar();
        inputs[i](r, c) = saved - eps;
        Graph<double> gm;
        const double fm = evaluate(nullptr, gm).scalar();
        inputs[i](r, c) = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i](r, c);
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace bitenet
