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
#include "stocc/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stocc/common.h"
#include "stocc/memory.h"

namespace stocc {
namespace {

constexpr double kMinProbability = 1e-12;

std::size_t CheckClassInputs(std::span<const double> values,
                             std::span<const int> targets, int num_classes) {
  if (num_classes < 1) throw InvalidArgumentError("num_classes must be >= 1");
  if (values.size() != targets.size() * static_cast<std::size_t>(num_classes)) {
    throw InvalidArgumentError("expected " + std::to_string(num_classes) +
                               " values per target");
  }
  for (int t : targets) {
    if (t < 0 || t >= num_classes) {
      throw InvalidArgumentError("target class " + std::to_string(t) +
                                 " out of range");
    }
  }
  return targets.size();
}

double Mean(const std::vector<double>& terms) {
  if (terms.empty()) return 0.0;
  return PairwiseSum(terms) / static_cast<double>(terms.size());
}

// Softmax probability of `target` for one voxel.
double TargetProbability(std::span<const double> logits, int target) {
  std::vector<double> p(logits.size());
  Softmax(logits, p);
  return p[static_cast<std::size_t>(target)];
}

}  // namespace

double FocalLoss(std::span<const double> logits, std::span<const int> targets,
                 int num_classes, double gamma, double alpha_weight) {
  if (!(gamma >= 0.0)) throw InvalidArgumentError("focal gamma must be >= 0");
  const std::size_t n = CheckClassInputs(logits, targets, num_classes);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pt = std::max(
        TargetProbability(logits.subspan(i * num_classes, num_classes), targets[i]),
        kMinProbability);
    terms[i] = -alpha_weight * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  return Mean(terms);
}

double CrossEntropy(std::span<const double> logits, std::span<const int> targets,
                    int num_classes) {
  const std::size_t n = CheckClassInputs(logits, targets, num_classes);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.subspan(i * num_classes, num_classes);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - peak);
    terms[i] = -(row[targets[i]] - peak - std::log(z));
  }
  return Mean(terms);
}

double LovaszClassLoss(std::span<const double> errors,
                       std::span<const int> foreground) {
  if (errors.size() != foreground.size()) {
    throw InvalidArgumentError("lovasz: errors/foreground size mismatch");
  }
  const std::size_t n = errors.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return errors[a] > errors[b];
  });
  double gts = 0.0;
  for (int f : foreground) gts += f;
  double cum_fg = 0.0;
  double cum_bg = 0.0;
  double prev_jaccard = 0.0;
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int fg = foreground[order[i]];
    cum_fg += fg;
    cum_bg += 1 - fg;
    const double intersection = gts - cum_fg;
    const double uni = gts + cum_bg;
    const double jaccard = 1.0 - intersection / uni;
    terms[i] = errors[order[i]] * (jaccard - prev_jaccard);
    prev_jaccard = jaccard;
  }
  return PairwiseSum(terms);
}

double LovaszSoftmax(std::span<const double> probabilities,
                     std::span<const int> targets, int num_classes) {
  const std::size_t n = CheckClassInputs(probabilities, targets, num_classes);
  if (n == 0) return 0.0;
  std::vector<double> per_class;
  std::vector<double> errors(n);
  std::vector<int> fg(n);
  for (int c = 0; c < num_classes; ++c) {
    bool present = false;
    for (std::size_t i = 0; i < n; ++i) {
      fg[i] = targets[i] == c ? 1 : 0;
      present |= fg[i] != 0;
      errors[i] = std::abs(fg[i] - probabilities[i * num_classes + c]);
    }
    if (present) per_class.push_back(LovaszClassLoss(errors, fg));
  }
  return Mean(per_class);
}

NllResult GaussianNll(std::span<const double> log_variance,
                      std::span<const double> residual) {
  if (log_variance.size() != residual.size()) {
    throw InvalidArgumentError("nll: log variance/residual size mismatch");
  }
  NllResult out;
  std::vector<double> terms(log_variance.size());
  out.grad_log_variance.resize(log_variance.size());
  for (std::size_t i = 0; i < log_variance.size(); ++i) {
    const double s = log_variance[i];
    const double scaled = std::exp(-s) * residual[i] * residual[i];
    terms[i] = 0.5 * (scaled + s);
    out.grad_log_variance[i] = 0.5 * (1.0 - scaled);
  }
  out.loss = PairwiseSum(terms);
  return out;
}

double L1FlowLoss(std::span<const double> predicted,
                  std::span<const double> target) {
  if (predicted.size() != target.size()) {
    throw InvalidArgumentError("flow loss: size mismatch");
  }
  std::vector<double> terms(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    terms[i] = std::abs(predicted[i] - target[i]);
  }
  return Mean(terms);
}

double TotalLoss(const LossComponents& parts, const LossWeights& weights) {
  return weights.focal * parts.focal + weights.lovasz * parts.lovasz +
         weights.nll * parts.nll + weights.flow * parts.flow;
}

}  // namespace stocc
