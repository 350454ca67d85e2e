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

#include "udadet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "udadet/error.hpp"
#include "udadet/hashing.hpp"
#include "udadet/metrics.hpp"
#include "udadet/soft_labels.hpp"

namespace udadet {

using nlohmann::json;
using layers::ConvGeometry;

void DetectorConfig::validate() const {
  for (int w : widths)
    if (w < 1) throw ConfigError("stage widths must be positive");
  for (int s : strides)
    if (s < 1) throw ConfigError("stage strides must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be > 0");
  if (!(fan_in_gain >= 0.0)) throw ConfigError("fan_in_gain must be >= 0");
}

json to_json(const DetectorConfig& config) {
  return {{"widths", config.widths},
          {"strides", config.strides},
          {"num_classes", config.num_classes},
          {"init_std", config.init_std},
          {"fan_in_gain", config.fan_in_gain},
          {"input_offset", config.input_offset}};
}

DetectorConfig detector_config_from_json(const json& j) {
  DetectorConfig config;
  try {
    if (j.contains("widths")) config.widths = j["widths"].get<std::array<int, 4>>();
    if (j.contains("strides")) config.strides = j["strides"].get<std::array<int, 4>>();
    config.num_classes = j.value("num_classes", config.num_classes);
    config.init_std = j.value("init_std", config.init_std);
    config.fan_in_gain = j.value("fan_in_gain", config.fan_in_gain);
    config.input_offset = j.value("input_offset", config.input_offset);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid detector config: ") + e.what());
  }
  config.validate();
  return config;
}

DetectorParams DetectorParams::zeros(const DetectorConfig& config) {
  config.validate();
  DetectorParams p;
  p.config = config;
  int in = 3;
  for (int s = 0; s < 4; ++s) {
    p.stages[s].weight = Tensor({config.widths[s], in * 9});
    p.stages[s].bias = Tensor({config.widths[s]});
    p.stages[s].stride = config.strides[s];
    in = config.widths[s];
  }
  p.objectness = {Tensor({1, in}), Tensor({1})};
  p.classes = {Tensor({config.num_classes, in}), Tensor({config.num_classes})};
  p.boxes = {Tensor({4, in}), Tensor({4})};
  return p;
}

DetectorParams DetectorParams::initialize(const DetectorConfig& config, std::uint64_t seed) {
  DetectorParams p = zeros(config);
  std::mt19937_64 rng(mix_seed(seed, 0xde7ec7u));
  for (auto& ref : p.named()) {
    if (!ref.name.ends_with(".weight")) continue;
    double stddev = config.init_std;
    if (config.fan_in_gain > 0.0 && is_backbone_param(ref.name)) {
      stddev = config.fan_in_gain / std::sqrt(static_cast<double>(ref.tensor->shape.at(1)));
    }
    fill_truncated_normal(*ref.tensor, stddev, rng);
  }
  return p;
}

std::vector<ParamRef> DetectorParams::named() {
  std::vector<ParamRef> out;
  for (int s = 0; s < 4; ++s) {
    const std::string prefix = "phi.stage" + std::to_string(s + 1);
    out.push_back({prefix + ".weight", &stages[s].weight});
    out.push_back({prefix + ".bias", &stages[s].bias});
  }
  out.push_back({"psi.objectness.weight", &objectness.weight});
  out.push_back({"psi.objectness.bias", &objectness.bias});
  out.push_back({"psi.classes.weight", &classes.weight});
  out.push_back({"psi.classes.bias", &classes.bias});
  out.push_back({"psi.boxes.weight", &boxes.weight});
  out.push_back({"psi.boxes.bias", &boxes.bias});
  return out;
}

std::vector<ConstParamRef> DetectorParams::named() const {
  std::vector<ConstParamRef> out;
  for (auto& ref : const_cast<DetectorParams*>(this)->named()) out.push_back({ref.name, ref.tensor});
  return out;
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& ref : named()) n += ref.tensor->size();
  return n;
}

bool DetectorParams::all_finite() const {
  for (const auto& ref : named())
    for (double v : ref.tensor->values)
      if (!std::isfinite(v)) return false;
  return true;
}

RawPrediction RawPrediction::zeros(int grid_height, int grid_width, int num_classes, int stride) {
  RawPrediction p;
  p.grid_height = grid_height;
  p.grid_width = grid_width;
  p.num_classes = num_classes;
  p.stride = stride;
  const std::size_t cells = static_cast<std::size_t>(grid_height) * grid_width;
  p.objectness_logits.assign(cells, 0.0);
  p.class_logits.assign(cells * num_classes, 0.0);
  p.box_deltas.assign(cells * 4, 0.0);
  return p;
}

namespace {

void dense_forward(const DenseLayer& layer, const Tensor& features, AlignedDoubles& out) {
  const int c = features.shape[0];
  const int cells = features.shape[1] * features.shape[2];
  const int rows = layer.weight.shape[0];
  out.resize(static_cast<std::size_t>(rows) * cells);
  MatrixMap result(out.data(), rows, cells);
  result.noalias() = ConstMatrixMap(layer.weight.data(), rows, c) * ConstMatrixMap(features.data(), c, cells);
  for (int r = 0; r < rows; ++r) result.row(r).array() += layer.bias.values[r];
}

void dense_backward(const DenseLayer& layer, const Tensor& features, const AlignedDoubles& d_out,
                    DenseLayer& grad, RowMatrix& d_features) {
  const int c = features.shape[0];
  const int cells = features.shape[1] * features.shape[2];
  const int rows = layer.weight.shape[0];
  ConstMatrixMap dy(d_out.data(), rows, cells);
  MatrixMap(grad.weight.data(), rows, c).noalias() += dy * ConstMatrixMap(features.data(), c, cells).transpose();
  for (int r = 0; r < rows; ++r) grad.bias.values[r] += dy.row(r).sum();
  d_features.noalias() += ConstMatrixMap(layer.weight.data(), rows, c).transpose() * dy;
}

}  // namespace

ForwardResult forward(const DetectorParams& params, const Image& image) {
  const int stride = params.config.total_stride();
  if (image.height() % stride != 0 || image.width() % stride != 0) {
    throw ConfigError("image size " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                      " is not divisible by the detector stride " + std::to_string(stride));
  }
  ForwardResult result;
  ForwardCache& cache = result.cache;
  const int h = image.height();
  const int w = image.width();
  cache.input.resize(static_cast<std::size_t>(3) * h * w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        cache.input[(static_cast<std::size_t>(c) * h + y) * w + x] = image.at(y, x, c) - params.config.input_offset;

  AlignedDoubles activation = cache.input;
  int in_c = 3, in_h = h, in_w = w;
  for (int s = 0; s < 4; ++s) {
    const ConvLayer& layer = params.stages[s];
    ConvGeometry g{in_c, in_h, in_w, layer.weight.shape[0], layer.stride};
    cache.geometry[s] = g;
    const int plane = g.out_height() * g.out_width();
    cache.cols[s] = Tensor({g.patch_size(), plane});
    layers::im2col(activation.data(), g, cache.cols[s].data());
    cache.preactivations[s] = Tensor({g.out_channels, plane});
    MatrixMap z(cache.preactivations[s].data(), g.out_channels, plane);
    z.noalias() = ConstMatrixMap(layer.weight.data(), g.out_channels, g.patch_size()) *
                  ConstMatrixMap(cache.cols[s].data(), g.patch_size(), plane);
    for (int r = 0; r < g.out_channels; ++r) z.row(r).array() += layer.bias.values[r];
    activation.resize(cache.preactivations[s].size());
    std::transform(cache.preactivations[s].values.begin(), cache.preactivations[s].values.end(), activation.begin(),
                   layers::silu);
    in_c = g.out_channels;
    in_h = g.out_height();
    in_w = g.out_width();
  }

  result.features.stride = stride;
  result.features.values.shape = {in_c, in_h, in_w};
  result.features.values.values = std::move(activation);

  RawPrediction& pred = result.prediction;
  pred.grid_height = in_h;
  pred.grid_width = in_w;
  pred.num_classes = params.config.num_classes;
  pred.stride = stride;
  dense_forward(params.objectness, result.features.values, pred.objectness_logits);
  dense_forward(params.classes, result.features.values, pred.class_logits);
  dense_forward(params.boxes, result.features.values, pred.box_deltas);
  return result;
}

void backward(const DetectorParams& params, const ForwardResult& result, const RawPrediction* d_prediction,
              const Tensor* d_features, DetectorParams& grads, AlignedDoubles* d_image) {
  const Tensor& features = result.features.values;
  const int c = features.shape[0];
  const int cells = features.shape[1] * features.shape[2];
  RowMatrix d_act = RowMatrix::Zero(c, cells);
  if (d_prediction != nullptr) {
    dense_backward(params.objectness, features, d_prediction->objectness_logits, grads.objectness, d_act);
    dense_backward(params.classes, features, d_prediction->class_logits, grads.classes, d_act);
    dense_backward(params.boxes, features, d_prediction->box_deltas, grads.boxes, d_act);
  }
  if (d_features != nullptr) d_act += ConstMatrixMap(d_features->data(), c, cells);

  const ForwardCache& cache = result.cache;
  for (int s = 3; s >= 0; --s) {
    const ConvGeometry& g = cache.geometry[s];
    const int plane = g.out_height() * g.out_width();
    const double* z = cache.preactivations[s].data();
    RowMatrix dz(g.out_channels, plane);
    for (int i = 0; i < g.out_channels; ++i)
      for (int j = 0; j < plane; ++j) dz(i, j) = d_act(i, j) * layers::silu_grad(z[static_cast<std::size_t>(i) * plane + j]);

    ConvLayer& grad = grads.stages[s];
    MatrixMap(grad.weight.data(), g.out_channels, g.patch_size()).noalias() +=
        dz * ConstMatrixMap(cache.cols[s].data(), g.patch_size(), plane).transpose();
    for (int i = 0; i < g.out_channels; ++i) grad.bias.values[i] += dz.row(i).sum();

    if (s == 0 && d_image == nullptr) break;
    RowMatrix d_col = ConstMatrixMap(params.stages[s].weight.data(), g.out_channels, g.patch_size()).transpose() * dz;
    RowMatrix d_in = RowMatrix::Zero(g.in_channels, g.in_height * g.in_width);
    layers::col2im_add(d_col.data(), g, d_in.data());
    d_act = std::move(d_in);
  }

  if (d_image != nullptr) {
    const int h = cache.geometry[0].in_height;
    const int w = cache.geometry[0].in_width;
    d_image->assign(static_cast<std::size_t>(h) * w * 3, 0.0);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) (*d_image)[(static_cast<std::size_t>(y) * w + x) * 3 + ch] = d_act(ch, y * w + x);
  }
}

json to_json(const LossOptions& o) {
  return {{"objectness_weight", o.objectness_weight}, {"negative_weight", o.negative_weight},
          {"classification_weight", o.classification_weight},
          {"box_weight", o.box_weight},               {"smooth_l1_beta", o.smooth_l1_beta},
          {"soft_alpha", o.soft_alpha},               {"soft_temperature", o.soft_temperature}};
}

LossOptions loss_options_from_json(const json& j) {
  LossOptions o;
  o.objectness_weight = j.value("objectness_weight", o.objectness_weight);
  o.negative_weight = j.value("negative_weight", o.negative_weight);
  o.classification_weight = j.value("classification_weight", o.classification_weight);
  o.box_weight = j.value("box_weight", o.box_weight);
  o.smooth_l1_beta = j.value("smooth_l1_beta", o.smooth_l1_beta);
  o.soft_alpha = j.value("soft_alpha", o.soft_alpha);
  o.soft_temperature = j.value("soft_temperature", o.soft_temperature);
  if (o.negative_weight < 0.0) throw ConfigError("negative_weight must be >= 0");
  if (o.smooth_l1_beta <= 0.0) throw ConfigError("smooth_l1_beta must be > 0");
  if (o.soft_alpha < 0.0 || o.soft_alpha > 1.0) throw ConfigError("soft_alpha must lie in [0,1]");
  if (o.soft_temperature <= 0.0) throw ConfigError("soft_temperature must be > 0");
  return o;
}

std::vector<CellAssignment> assign_cells(std::span<const Annotation> annotations, int grid_height, int grid_width,
                                         int stride) {
  std::vector<int> owner(static_cast<std::size_t>(grid_height) * grid_width, -1);
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const BoundingBox& box = annotations[i].box;
    const int cx = std::clamp(static_cast<int>(std::floor(box.center_x() / stride)), 0, grid_width - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(box.center_y() / stride)), 0, grid_height - 1);
    int& slot = owner[static_cast<std::size_t>(cy) * grid_width + cx];
    if (slot < 0 || box.area() > annotations[slot].box.area()) slot = static_cast<int>(i);
  }
  std::vector<CellAssignment> out;
  for (std::size_t cell = 0; cell < owner.size(); ++cell) {
    if (owner[cell] >= 0) out.push_back({static_cast<int>(cell), static_cast<std::size_t>(owner[cell])});
  }
  return out;
}

std::array<double, 4> encode_box(const BoundingBox& box, int cell_x, int cell_y, int stride) {
  const double cx = (cell_x + 0.5) * stride;
  const double cy = (cell_y + 0.5) * stride;
  return {(cx - box.x_min) / stride, (cy - box.y_min) / stride, (box.x_max - cx) / stride, (box.y_max - cy) / stride};
}

BoundingBox decode_box(const std::array<double, 4>& d, int cell_x, int cell_y, int stride) {
  const double cx = (cell_x + 0.5) * stride;
  const double cy = (cell_y + 0.5) * stride;
  return {cx - d[0] * stride, cy - d[1] * stride, cx + d[2] * stride, cy + d[3] * stride};
}

LossComponents detection_loss(const RawPrediction& pred, std::span<const Annotation> annotations,
                              const LossOptions& options, RawPrediction* grad) {
  const int cells = pred.cells();
  const int k = pred.num_classes;
  const auto positives = assign_cells(annotations, pred.grid_height, pred.grid_width, pred.stride);
  const double norm = std::max<std::size_t>(1, positives.size());

  std::vector<double> objectness_target(cells, 0.0);
  for (const auto& a : positives) objectness_target[a.cell] = 1.0;

  if (grad != nullptr) *grad = RawPrediction::zeros(pred.grid_height, pred.grid_width, k, pred.stride);

  LossComponents loss;
  for (int i = 0; i < cells; ++i) {
    const double z = pred.objectness_logits[i];
    const double y = objectness_target[i];
    const double w = y > 0.0 ? 1.0 : options.negative_weight;
    loss.objectness += w * (layers::softplus(z) - y * z);
    if (grad != nullptr) grad->objectness_logits[i] = options.objectness_weight * w * (layers::sigmoid(z) - y) / norm;
  }
  loss.objectness /= norm;

  const double beta = options.smooth_l1_beta;
  std::vector<double> logits(k), log_q(k), target(k);
  for (const auto& assignment : positives) {
    const Annotation& ann = annotations[assignment.annotation];
    const int cell = assignment.cell;

    for (int j = 0; j < k; ++j) logits[j] = pred.class_logits[static_cast<std::size_t>(j) * cells + cell];
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(logits[j] - max_logit);
    const double log_sum = max_logit + std::log(sum);
    for (int j = 0; j < k; ++j) log_q[j] = logits[j] - log_sum;

    std::fill(target.begin(), target.end(), 0.0);
    target[ann.class_id] = 1.0;
    if (ann.provenance == Provenance::kPseudo && ann.class_logits && options.soft_alpha < 1.0) {
      const auto soft = soft_distribution(*ann.class_logits, options.soft_temperature);
      for (int j = 0; j < k; ++j) target[j] = options.soft_alpha * target[j] + (1.0 - options.soft_alpha) * soft[j];
    }
    for (int j = 0; j < k; ++j) loss.classification -= target[j] * log_q[j];
    if (grad != nullptr) {
      for (int j = 0; j < k; ++j) {
        grad->class_logits[static_cast<std::size_t>(j) * cells + cell] =
            options.classification_weight * (std::exp(log_q[j]) - target[j]) / norm;
      }
    }

    const int cell_x = cell % pred.grid_width;
    const int cell_y = cell / pred.grid_width;
    const auto wanted = encode_box(ann.box, cell_x, cell_y, pred.stride);
    for (int j = 0; j < 4; ++j) {
      const std::size_t idx = static_cast<std::size_t>(j) * cells + cell;
      const double diff = pred.box_deltas[idx] - wanted[j];
      const double ad = std::abs(diff);
      loss.box += ad < beta ? 0.5 * diff * diff / beta : ad - 0.5 * beta;
      if (grad != nullptr) {
        const double g = ad < beta ? diff / beta : (diff > 0.0 ? 1.0 : -1.0);
        grad->box_deltas[idx] = options.box_weight * g / norm;
      }
    }
  }
  loss.classification /= norm;
  loss.box /= norm;
  loss.total = options.objectness_weight * loss.objectness + options.classification_weight * loss.classification +
               options.box_weight * loss.box;
  return loss;
}

SupervisedGradients supervised_gradients(const DetectorParams& params, const Sample& sample,
                                         const LossOptions& options) {
  SupervisedGradients out{DetectorParams::zeros(params.config), {}};
  const ForwardResult fwd = forward(params, sample.image);
  RawPrediction d_pred;
  out.loss = detection_loss(fwd.prediction, sample.annotations, options, &d_pred);
  backward(params, fwd, &d_pred, nullptr, out.grads);
  return out;
}

std::vector<Detection> decode(const RawPrediction& pred, double objectness_floor) {
  const int cells = pred.cells();
  const int k = pred.num_classes;
  const double width = pred.image_width();
  const double height = pred.image_height();
  auto span_axis = [](double a, double b, double limit) {
    double lo = std::clamp(std::min(a, b), 0.0, limit);
    double hi = std::clamp(std::max(a, b), 0.0, limit);
    constexpr double kMinSide = 1e-3;
    if (hi - lo < kMinSide) {
      lo = std::min(lo, limit - kMinSide);
      hi = lo + kMinSide;
    }
    return std::pair{lo, hi};
  };

  std::vector<Detection> out;
  for (int cell = 0; cell < cells; ++cell) {
    const double objectness = layers::sigmoid(pred.objectness_logits[cell]);
    if (objectness < objectness_floor) continue;
    Detection det;
    det.cell = cell;
    det.objectness = objectness;
    det.class_logits.resize(k);
    for (int j = 0; j < k; ++j) det.class_logits[j] = pred.class_logits[static_cast<std::size_t>(j) * cells + cell];
    const auto probs = soft_distribution(det.class_logits, 1.0);
    det.class_id = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    det.class_prob = probs[det.class_id];
    det.score = det.objectness * det.class_prob;
    std::array<double, 4> deltas;
    for (int j = 0; j < 4; ++j) deltas[j] = pred.box_deltas[static_cast<std::size_t>(j) * cells + cell];
    const BoundingBox raw = decode_box(deltas, cell % pred.grid_width, cell / pred.grid_width, pred.stride);
    const auto [x0, x1] = span_axis(raw.x_min, raw.x_max, width);
    const auto [y0, y1] = span_axis(raw.y_min, raw.y_max, height);
    det.box = {x0, y0, x1, y1};
    out.push_back(std::move(det));
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (Detection& candidate : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, candidate.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(candidate));
  }
  return kept;
}

}  // namespace udadet
