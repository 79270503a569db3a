#include "semgeo/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semgeo {

namespace {

void check_inputs(const Image& rgb, int h, int w) {
  if (rgb.channels() != 3) throw DimensionError("transfer: expects an RGB image");
  if (!rgb.same_size(h, w)) throw DimensionError("transfer: image and depth sizes differ");
}

}  // namespace

FeatureField pixel_features_log_depth(const Image& rgb, const Raster<double>& log_depth) {
  const int h = log_depth.height();
  const int w = log_depth.width();
  check_inputs(rgb, h, w);
  FeatureField f{h, w, kTransferFeatureWidth, {}};
  f.data.resize(static_cast<std::size_t>(h) * w * kTransferFeatureWidth);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* row = &f.data[(static_cast<std::size_t>(y) * w + x) * kTransferFeatureWidth];
      row[0] = rgb.at(y, x, 0);
      row[1] = rgb.at(y, x, 1);
      row[2] = rgb.at(y, x, 2);
      row[3] = log_depth(y, x);
      int j = 4;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          const int xx = std::clamp(x + dx, 0, w - 1);
          row[j++] = log_depth(yy, xx);
        }
      }
    }
  }
  return f;
}

FeatureField pixel_features(const Image& rgb, const DepthMap& d) {
  Raster<double> logd(d.height(), d.width(), 0.0);
  for (std::size_t i = 0; i < logd.size(); ++i) {
    if (!d.valid[i] || !(d.depth[i] > 0.0)) {
      throw InvariantError("pixel_features: depth must be valid and positive everywhere");
    }
    logd[i] = std::log(d.depth[i]);
  }
  return pixel_features_log_depth(rgb, logd);
}

TransferClassifier TransferClassifier::zeros(int input_width, int hidden_width, int classes) {
  if (input_width < 1 || hidden_width < 1 || classes < 1) {
    throw DimensionError("transfer classifier widths must be positive");
  }
  TransferClassifier c;
  c.input_width = input_width;
  c.hidden_width = hidden_width;
  c.classes = classes;
  c.w1.assign(static_cast<std::size_t>(hidden_width) * input_width, 0.0);
  c.b1.assign(hidden_width, 0.0);
  c.w2.assign(static_cast<std::size_t>(classes) * hidden_width, 0.0);
  c.b2.assign(classes, 0.0);
  return c;
}

TransferClassifier TransferClassifier::random(int input_width, int hidden_width, int classes,
                                              std::uint64_t seed) {
  TransferClassifier c = zeros(input_width, hidden_width, classes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / input_width));
  std::normal_distribution<double> n2(0.0, std::sqrt(1.0 / hidden_width));
  for (auto& v : c.w1) v = n1(rng);
  for (auto& v : c.w2) v = n2(rng);
  return c;
}

std::size_t TransferClassifier::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<double> TransferClassifier::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto* v : {&w1, &b1, &w2, &b2}) out.insert(out.end(), v->begin(), v->end());
  return out;
}

void TransferClassifier::assign(std::span<const double> packed) {
  if (packed.size() != parameter_count()) {
    throw DimensionError("transfer classifier: packed parameter count mismatch");
  }
  auto it = packed.begin();
  for (auto* v : {&w1, &b1, &w2, &b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
}

void TransferClassifier::validate() const {
  if (w1.size() != static_cast<std::size_t>(hidden_width) * input_width ||
      b1.size() != static_cast<std::size_t>(hidden_width) ||
      w2.size() != static_cast<std::size_t>(classes) * hidden_width ||
      b2.size() != static_cast<std::size_t>(classes)) {
    throw DimensionError("transfer classifier: parameter sizes inconsistent with widths");
  }
  for (const auto* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw NumericError("transfer classifier: non-finite parameter");
    }
  }
}

Image classify(const FeatureField& f, const TransferClassifier& c) {
  c.validate();
  if (f.features != c.input_width) {
    throw DimensionError("classify: feature width does not match the classifier input width");
  }
  const std::size_t n = static_cast<std::size_t>(f.height) * f.width;
  Image logits(f.height, f.width, c.classes, 0.0);
  std::vector<double> hidden(c.hidden_width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto in = f.row(i);
    for (int j = 0; j < c.hidden_width; ++j) {
      double s = c.b1[j];
      const double* wr = &c.w1[static_cast<std::size_t>(j) * c.input_width];
      for (int k = 0; k < c.input_width; ++k) s += wr[k] * in[k];
      hidden[j] = s > 0.0 ? s : 0.0;
    }
    for (int k = 0; k < c.classes; ++k) {
      double s = c.b2[k];
      const double* wr = &c.w2[static_cast<std::size_t>(k) * c.hidden_width];
      for (int j = 0; j < c.hidden_width; ++j) s += wr[j] * hidden[j];
      logits.data()[i * c.classes + k] = s;
    }
  }
  return logits;
}

double transfer_loss(const Image& logits, const SemanticLabelMap& s_tgt, const Mask& valid,
                     Image* grad_logits, double grad_scale) {
  if (!logits.same_size(s_tgt.height(), s_tgt.width()) ||
      !logits.same_size(valid.height(), valid.width())) {
    throw DimensionError("transfer_loss: size mismatch");
  }
  if (logits.channels() != s_tgt.class_count) {
    throw DimensionError("transfer_loss: logit channels do not match the class count");
  }
  s_tgt.validate();
  const std::size_t count = count_set(valid);
  if (count == 0) throw DegenerateInputError("transfer_loss: no valid pixels");
  const double inv_count = 1.0 / static_cast<double>(count);
  const int k = logits.channels();
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    if (!valid[i]) continue;
    const double* l = &logits.data()[i * k];
    const double mx = *std::max_element(l, l + k);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(l[c] - mx);
    const int label = s_tgt.labels[i];
    sum += std::log(z) + mx - l[label];
    if (grad_logits) {
      for (int c = 0; c < k; ++c) {
        const double p = std::exp(l[c] - mx) / z;
        grad_logits->data()[i * k + c] += grad_scale * inv_count * (p - (c == label ? 1.0 : 0.0));
      }
    }
  }
  return sum * inv_count;
}

double transfer_accuracy(const Image& logits, const SemanticLabelMap& s_tgt, const Mask& valid) {
  const std::size_t count = count_set(valid);
  if (count == 0) throw DegenerateInputError("transfer_accuracy: no valid pixels");
  const int k = logits.channels();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    if (!valid[i]) continue;
    const double* l = &logits.data()[i * k];
    const int arg = static_cast<int>(std::max_element(l, l + k) - l);
    if (arg == s_tgt.labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(count);
}

double transfer_objective_log_depth(const Image& rgb, const Raster<double>& log_depth,
                                    const SemanticLabelMap& s_tgt, const Mask& valid,
                                    const TransferClassifier& c,
                                    TransferClassifier* grad_params,
                                    Raster<double>* grad_log_depth, double grad_scale) {
  const FeatureField f = pixel_features_log_depth(rgb, log_depth);
  const Image logits = classify(f, c);
  if (!grad_params && !grad_log_depth) return transfer_loss(logits, s_tgt, valid);

  Image g_logits(logits.height(), logits.width(), logits.channels(), 0.0);
  const double loss = transfer_loss(logits, s_tgt, valid, &g_logits, grad_scale);
  if (grad_params &&
      (grad_params->input_width != c.input_width || grad_params->hidden_width != c.hidden_width ||
       grad_params->classes != c.classes)) {
    *grad_params = TransferClassifier::zeros(c.input_width, c.hidden_width, c.classes);
  }

  const int h = f.height;
  const int w = f.width;
  std::vector<double> pre(c.hidden_width), hidden(c.hidden_width), g_hidden(c.hidden_width);
  std::vector<double> g_feat(c.input_width);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!valid[i]) continue;
      const double* gl = &g_logits.data()[i * c.classes];
      const auto in = f.row(i);
      for (int j = 0; j < c.hidden_width; ++j) {
        double s = c.b1[j];
        const double* wr = &c.w1[static_cast<std::size_t>(j) * c.input_width];
        for (int k = 0; k < c.input_width; ++k) s += wr[k] * in[k];
        pre[j] = s;
        hidden[j] = s > 0.0 ? s : 0.0;
      }
      std::fill(g_hidden.begin(), g_hidden.end(), 0.0);
      for (int k = 0; k < c.classes; ++k) {
        const double* wr = &c.w2[static_cast<std::size_t>(k) * c.hidden_width];
        for (int j = 0; j < c.hidden_width; ++j) g_hidden[j] += wr[j] * gl[k];
        if (grad_params) {
          double* gw = &grad_params->w2[static_cast<std::size_t>(k) * c.hidden_width];
          for (int j = 0; j < c.hidden_width; ++j) gw[j] += gl[k] * hidden[j];
          grad_params->b2[k] += gl[k];
        }
      }
      std::fill(g_feat.begin(), g_feat.end(), 0.0);
      for (int j = 0; j < c.hidden_width; ++j) {
        if (!(pre[j] > 0.0)) continue;
        const double gp = g_hidden[j];
        const double* wr = &c.w1[static_cast<std::size_t>(j) * c.input_width];
        for (int k = 0; k < c.input_width; ++k) g_feat[k] += wr[k] * gp;
        if (grad_params) {
          double* gw = &grad_params->w1[static_cast<std::size_t>(j) * c.input_width];
          for (int k = 0; k < c.input_width; ++k) gw[k] += gp * in[k];
          grad_params->b1[j] += gp;
        }
      }
      if (grad_log_depth) {
        (*grad_log_depth)(y, x) += g_feat[3];
        int j = 4;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            (*grad_log_depth)(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1)) +=
                g_feat[j++];
          }
        }
      }
    }
  }
  return loss;
}

TransferGradients transfer_gradients(const Image& rgb, const DepthMap& d,
                                     const SemanticLabelMap& s_tgt, const TransferClassifier& c,
                                     const Mask& valid) {
  Raster<double> logd(d.height(), d.width(), 0.0);
  for (std::size_t i = 0; i < logd.size(); ++i) {
    if (!d.valid[i] || !(d.depth[i] > 0.0)) {
      throw InvariantError("transfer_gradients: depth must be valid and positive everywhere");
    }
    logd[i] = std::log(d.depth[i]);
  }
  TransferGradients out;
  out.params = TransferClassifier::zeros(c.input_width, c.hidden_width, c.classes);
  Raster<double> g_logd(d.height(), d.width(), 0.0);
  out.loss = transfer_objective_log_depth(rgb, logd, s_tgt, valid, c, &out.params, &g_logd);
  out.depth = Raster<double>(d.height(), d.width(), 0.0);
  for (std::size_t i = 0; i < logd.size(); ++i) out.depth[i] = g_logd[i] / d.depth[i];
  return out;
}

}  // namespace semgeo
