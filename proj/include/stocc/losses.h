/* Copyright 2026 The stocc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef STOCC_LOSSES_H_
#define STOCC_LOSSES_H_

#include <span>
#include <vector>

namespace stocc {

// Inputs are flattened per voxel: logits/probabilities hold num_classes
// values per voxel, targets one class index per voxel. Reductions use
// PairwiseSum so results do not depend on evaluation order.

// mean_i of -alpha_weight * (1 - p_t)^gamma * log(max(p_t, 1e-12)).
double FocalLoss(std::span<const double> logits, std::span<const int> targets,
                 int num_classes, double gamma = 2.0, double alpha_weight = 1.0);

double CrossEntropy(std::span<const double> logits, std::span<const int> targets,
                    int num_classes);

// Lovasz extension of the Jaccard loss for one class: `errors` and
// `foreground` are per voxel. Exposed for hand-trace tests.
double LovaszClassLoss(std::span<const double> errors,
                       std::span<const int> foreground);

// Averaged over classes present in `targets`; 0 when there are no voxels.
double LovaszSoftmax(std::span<const double> probabilities,
                     std::span<const int> targets, int num_classes);

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad_log_variance;  // d loss / d s_i
};

// sum_i 0.5 * (exp(-s_i) * r_i^2 + s_i), with d/ds_i = 0.5 * (1 - exp(-s_i) r_i^2).
NllResult GaussianNll(std::span<const double> log_variance,
                      std::span<const double> residual);

// Mean absolute error over all flow components.
double L1FlowLoss(std::span<const double> predicted,
                  std::span<const double> target);

struct LossComponents {
  double focal = 0.0;
  double lovasz = 0.0;
  double nll = 0.0;
  double flow = 0.0;
};

struct LossWeights {
  double focal = 1.0;
  double lovasz = 1.0;
  double nll = 1.0;
  double flow = 1.0;
};

double TotalLoss(const LossComponents& parts, const LossWeights& weights = {});

}  // namespace stocc

#endif  // STOCC_LOSSES_H_
