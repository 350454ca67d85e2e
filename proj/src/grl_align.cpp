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

#include "udadet/grl_align.hpp"

#include <cmath>
#include <random>

#include "udadet/error.hpp"
#include "udadet/hashing.hpp"

namespace udadet {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_invocations{0};

struct HiddenCache {
  std::vector<double> pre;  // hidden pre-activations
  std::vector<double> act;
  double logit = 0.0;
};

HiddenCache classifier_forward(const DomainClassifier& d, std::span<const double> pooled) {
  if (static_cast<int>(pooled.size()) != d.channels()) {
    throw ConfigError("domain classifier expects " + std::to_string(d.channels()) + " features");
  }
  g_invocations.fetch_add(1, std::memory_order_relaxed);
  const int h = d.hidden_units();
  const int c = d.channels();
  HiddenCache cache;
  cache.pre.resize(h);
  cache.act.resize(h);
  double logit = d.output.bias.values[0];
  for (int j = 0; j < h; ++j) {
    double z = d.hidden.bias.values[j];
    const double* w = d.hidden.weight.data() + static_cast<std::size_t>(j) * c;
    for (int i = 0; i < c; ++i) z += w[i] * pooled[i];
    cache.pre[j] = z;
    cache.act[j] = std::tanh(z);
    logit += d.output.weight.values[j] * cache.act[j];
  }
  cache.logit = logit;
  return cache;
}

// Accumulates parameter gradients for d(loss)/d(logit) = g and returns d(loss)/d(pooled).
std::vector<double> classifier_backward(const DomainClassifier& d, std::span<const double> pooled,
                                        const HiddenCache& cache, double g, DomainClassifier& grads) {
  const int h = d.hidden_units();
  const int c = d.channels();
  std::vector<double> d_pooled(c, 0.0);
  grads.output.bias.values[0] += g;
  for (int j = 0; j < h; ++j) {
    grads.output.weight.values[j] += g * cache.act[j];
    const double dz = g * d.output.weight.values[j] * (1.0 - cache.act[j] * cache.act[j]);
    grads.hidden.bias.values[j] += dz;
    double* gw = grads.hidden.weight.data() + static_cast<std::size_t>(j) * c;
    const double* w = d.hidden.weight.data() + static_cast<std::size_t>(j) * c;
    for (int i = 0; i < c; ++i) {
      gw[i] += dz * pooled[i];
      d_pooled[i] += dz * w[i];
    }
  }
  return d_pooled;
}

// Binary cross-entropy of a logit against a 0/1 label, in its stable form.
double bce_logit(double z, double label) { return layers::softplus(z) - label * z; }

Tensor unpool_gradient(const FeatureMap& features, std::span<const double> d_pooled) {
  Tensor out(features.values.shape);
  const int c = features.channels();
  const std::size_t cells = static_cast<std::size_t>(features.height()) * features.width();
  for (int i = 0; i < c; ++i) {
    const double g = d_pooled[i] / static_cast<double>(cells);
    std::fill_n(out.data() + i * cells, cells, g);
  }
  return out;
}

}  // namespace

double GrlConfig::lambda_at(int iteration) const {
  if (schedule == GrlSchedule::kConstant) return lambda;
  if (ramp_steps <= 0 || iteration >= ramp_steps) return ramp_end;
  const double t = static_cast<double>(iteration) / ramp_steps;
  return ramp_start + (ramp_end - ramp_start) * t;
}

void GrlConfig::validate() const {
  if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ConfigError("grl lambda must be finite and >= 0");
  if (schedule == GrlSchedule::kRamp) {
    if (!(ramp_start >= 0.0 && ramp_end >= 0.0 && std::isfinite(ramp_start) && std::isfinite(ramp_end))) {
      throw ConfigError("grl ramp endpoints must be finite and >= 0");
    }
    if (ramp_steps < 1) throw ConfigError("grl ramp_steps must be >= 1");
  }
}

json to_json(const GrlConfig& c) {
  json j = {{"lambda", c.lambda}, {"schedule", c.schedule == GrlSchedule::kConstant ? "constant" : "ramp"}};
  if (c.schedule == GrlSchedule::kRamp) {
    j["ramp_start"] = c.ramp_start;
    j["ramp_end"] = c.ramp_end;
    j["ramp_steps"] = c.ramp_steps;
  }
  return j;
}

GrlConfig grl_config_from_json(const json& j) {
  try {
    GrlConfig c;
    c.lambda = j.value("lambda", c.lambda);
    const std::string schedule = j.value("schedule", std::string("constant"));
    if (schedule == "constant") {
      c.schedule = GrlSchedule::kConstant;
    } else if (schedule == "ramp") {
      c.schedule = GrlSchedule::kRamp;
      c.ramp_start = j.value("ramp_start", c.ramp_start);
      c.ramp_end = j.value("ramp_end", c.lambda);
      c.ramp_steps = j.value("ramp_steps", c.ramp_steps);
    } else {
      throw ConfigError("grl schedule must be 'constant' or 'ramp'");
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad grl config: ") + e.what());
  }
}

std::vector<double> grl_backward(std::span<const double> upstream, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("grl lambda must be >= 0");
  std::vector<double> out(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = -lambda * upstream[i];
  return out;
}

DomainClassifier DomainClassifier::zeros(int channels, int hidden_units) {
  if (channels < 1 || hidden_units < 1) throw ConfigError("domain classifier sizes must be positive");
  DomainClassifier d;
  d.hidden = {Tensor({hidden_units, channels}), Tensor({hidden_units})};
  d.output = {Tensor({1, hidden_units}), Tensor({1})};
  return d;
}

DomainClassifier DomainClassifier::initialize(int channels, std::uint64_t seed, int hidden_units, double stddev) {
  DomainClassifier d = zeros(channels, hidden_units);
  std::mt19937_64 rng(mix_seed(seed, 0xd15c));
  fill_truncated_normal(d.hidden.weight, stddev, rng);
  fill_truncated_normal(d.output.weight, stddev, rng);
  return d;
}

std::vector<ParamRef> DomainClassifier::named() {
  return {{"d.hidden.weight", &hidden.weight},
          {"d.hidden.bias", &hidden.bias},
          {"d.output.weight", &output.weight},
          {"d.output.bias", &output.bias}};
}

std::vector<ConstParamRef> DomainClassifier::named() const {
  std::vector<ConstParamRef> out;
  for (auto& ref : const_cast<DomainClassifier*>(this)->named()) out.push_back({ref.name, ref.tensor});
  return out;
}

std::uint64_t domain_classifier_invocations() { return g_invocations.load(std::memory_order_relaxed); }

std::vector<double> pool_features(const FeatureMap& features) {
  const int c = features.channels();
  const std::size_t cells = static_cast<std::size_t>(features.height()) * features.width();
  std::vector<double> pooled(c, 0.0);
  for (int i = 0; i < c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cells; ++j) acc += features.values.values[i * cells + j];
    pooled[i] = acc / static_cast<double>(cells);
  }
  return pooled;
}

double domain_logit(const DomainClassifier& d, std::span<const double> pooled) {
  return classifier_forward(d, pooled).logit;
}

DomainLossGradients domain_loss_gradients(const DomainClassifier& d, std::span<const FeatureMap> translated,
                                          std::span<const FeatureMap> target) {
  if (translated.empty() || target.empty()) throw ConfigError("domain loss needs nonempty batches for both domains");
  DomainLossGradients out;
  out.grads = DomainClassifier::zeros(d.channels(), d.hidden_units());
  const double count = static_cast<double>(translated.size() + target.size());
  auto run = [&](std::span<const FeatureMap> batch, double label, std::vector<Tensor>& d_features) {
    for (const FeatureMap& f : batch) {
      const std::vector<double> pooled = pool_features(f);
      const HiddenCache cache = classifier_forward(d, pooled);
      out.loss += bce_logit(cache.logit, label) / count;
      const double g = (layers::sigmoid(cache.logit) - label) / count;
      d_features.push_back(unpool_gradient(f, classifier_backward(d, pooled, cache, g, out.grads)));
    }
  };
  run(translated, 0.0, out.d_translated);
  run(target, 1.0, out.d_target);
  return out;
}

double domain_loss(const DomainClassifier& d, std::span<const FeatureMap> translated,
                   std::span<const FeatureMap> target) {
  if (translated.empty() || target.empty()) throw ConfigError("domain loss needs nonempty batches for both domains");
  const double count = static_cast<double>(translated.size() + target.size());
  double loss = 0.0;
  for (const FeatureMap& f : translated) loss += bce_logit(domain_logit(d, pool_features(f)), 0.0) / count;
  for (const FeatureMap& f : target) loss += bce_logit(domain_logit(d, pool_features(f)), 1.0) / count;
  return loss;
}

TeacherGradients teacher_gradients(const DetectorParams& teacher, const DomainClassifier& d, const Sample& labeled,
                                   const Sample& unlabeled, double lambda, const LossOptions& options) {
  if (labeled.annotations.empty()) throw DataError("teacher step received a labeled sample without annotations");
  if (labeled.domain == Domain::kTarget) throw ConfigError("teacher labeled input must be source or translated");
  if (unlabeled.domain != Domain::kTarget) throw ConfigError("teacher unlabeled input must come from the target domain");
  if (!(lambda >= 0.0)) throw ConfigError("grl lambda must be >= 0");

  TeacherGradients out{DetectorParams::zeros(teacher.config), {}, {}};
  const ForwardResult fl = forward(teacher, labeled.image);
  const ForwardResult fu = forward(teacher, unlabeled.image);

  RawPrediction d_pred;
  const LossComponents det = detection_loss(fl.prediction, labeled.annotations, options, &d_pred);

  const FeatureMap translated[] = {fl.features};
  const FeatureMap target[] = {fu.features};
  DomainLossGradients dom = domain_loss_gradients(d, translated, target);

  if (lambda == 0.0) {
    // Alignment off: exactly the supervised update for the detector.
    backward(teacher, fl, &d_pred, nullptr, out.detector);
  } else {
    Tensor rev_l = dom.d_translated[0];
    Tensor rev_u = dom.d_target[0];
    auto reverse = [lambda](Tensor& t) {
      const std::vector<double> r = grl_backward(t.values, lambda);
      t.values.assign(r.begin(), r.end());
    };
    reverse(rev_l);
    reverse(rev_u);
    backward(teacher, fl, &d_pred, &rev_l, out.detector);
    backward(teacher, fu, nullptr, &rev_u, out.detector);
  }
  out.domain = std::move(dom.grads);
  out.loss = {det.objectness, det.classification, det.box, det.total, dom.loss, lambda};
  return out;
}

TeacherState make_teacher_state(const DetectorParams& teacher, const DomainClassifier& d) {
  return {DetectorParams::zeros(teacher.config), DomainClassifier::zeros(d.channels(), d.hidden_units())};
}

TeacherLoss teacher_step(DetectorParams& teacher, DomainClassifier& d, const Sample& labeled, const Sample& unlabeled,
                         const GrlConfig& grl, int iteration, double lr, const SgdConfig& sgd, TeacherState& state,
                         const LossOptions& options) {
  const double lambda = grl.lambda_at(iteration);
  TeacherGradients g = teacher_gradients(teacher, d, labeled, unlabeled, lambda, options);
  const DetectorParams& det_grads = g.detector;
  const DomainClassifier& dom_grads = g.domain;
  sgd_step(teacher.named(), det_grads.named(), state.velocity.named(), lr, sgd);
  sgd_step(d.named(), dom_grads.named(), state.d_velocity.named(), lr, sgd);
  return g.loss;
}

json to_json(const TeacherLoss& l) {
  return {{"det_objectness", l.det_objectness}, {"det_class", l.det_class}, {"det_box", l.det_box},
          {"det_total", l.det_total},           {"domain", l.domain},       {"lambda", l.lambda}};
}

}  // namespace udadet
