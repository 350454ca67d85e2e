// Copyright 2026 The udadet Authors
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

#include <atomic>
#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "udadet/detector.hpp"
#include "udadet/optim.hpp"

namespace udadet {

// ---------------------------------------------------------------------------
// Gradient reversal
// ---------------------------------------------------------------------------

enum class GrlSchedule { kConstant, kRamp };

struct GrlConfig {
  double lambda = 1.0;
  GrlSchedule schedule = GrlSchedule::kConstant;
  double ramp_start = 0.0;
  double ramp_end = 1.0;
  int ramp_steps = 1000;

  /// Coefficient in use at a 0-based iteration.
  double lambda_at(int iteration) const;
  void validate() const;
};

nlohmann::json to_json(const GrlConfig& config);
GrlConfig grl_config_from_json(const nlohmann::json& json);

/// Backward pass of the reversal layer: -lambda * g. Its forward pass is the identity.
std::vector<double> grl_backward(std::span<const double> upstream, double lambda);

// ---------------------------------------------------------------------------
// Domain classifier
// ---------------------------------------------------------------------------

/// pooled features (C) -> tanh hidden layer -> one logit.
struct DomainClassifier {
  DenseLayer hidden;  // [H, C]
  DenseLayer output;  // [1, H]

  static DomainClassifier zeros(int channels, int hidden_units = 64);
  static DomainClassifier initialize(int channels, std::uint64_t seed, int hidden_units = 64, double stddev = 0.05);

  int channels() const { return hidden.weight.shape.at(1); }
  int hidden_units() const { return hidden.weight.shape.at(0); }

  std::vector<ParamRef> named();
  std::vector<ConstParamRef> named() const;

  bool operator==(const DomainClassifier&) const = default;
};

/// Number of domain-classifier forward passes since process start. Student
/// training checks this stays constant.
std::uint64_t domain_classifier_invocations();

/// Global average pooling of a [C, H', W'] feature map.
std::vector<double> pool_features(const FeatureMap& features);

double domain_logit(const DomainClassifier& d, std::span<const double> pooled);

struct DomainLossGradients {
  double loss = 0.0;
  DomainClassifier grads;
  // d(loss)/d(feature map), one per input, [C, H', W'] like the features.
  std::vector<Tensor> d_translated;
  std::vector<Tensor> d_target;
};

/// Mean BCE with label 0 for translated (or source) features and 1 for target
/// features. Throws ConfigError when either batch is empty.
double domain_loss(const DomainClassifier& d, std::span<const FeatureMap> translated,
                   std::span<const FeatureMap> target);
DomainLossGradients domain_loss_gradients(const DomainClassifier& d, std::span<const FeatureMap> translated,
                                          std::span<const FeatureMap> target);

// ---------------------------------------------------------------------------
// Teacher objective
// ---------------------------------------------------------------------------

struct TeacherLoss {
  double det_objectness = 0.0;
  double det_class = 0.0;
  double det_box = 0.0;
  double det_total = 0.0;
  double domain = 0.0;
  double lambda = 0.0;
};

struct TeacherGradients {
  DetectorParams detector;  // phi: detection - lambda * domain; psi: detection only
  DomainClassifier domain;  // plain domain-loss gradient for D
  TeacherLoss loss;
};

/// Gradients of one teacher minibatch: one labeled sample (translated, or
/// source when image-level adaptation is off) and one unlabeled target
/// sample whose annotations are never read.
TeacherGradients teacher_gradients(const DetectorParams& teacher, const DomainClassifier& d, const Sample& labeled,
                                   const Sample& unlabeled, double lambda, const LossOptions& options = {});

struct TeacherState {
  DetectorParams velocity;
  DomainClassifier d_velocity;
};

TeacherState make_teacher_state(const DetectorParams& teacher, const DomainClassifier& d);

/// One SGD step on the detector and on D.
TeacherLoss teacher_step(DetectorParams& teacher, DomainClassifier& d, const Sample& labeled, const Sample& unlabeled,
                         const GrlConfig& grl, int iteration, double lr, const SgdConfig& sgd, TeacherState& state,
                         const LossOptions& options = {});

nlohmann::json to_json(const TeacherLoss& loss);

}  // namespace udadet
