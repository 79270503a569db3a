#include "semgeo/diffopt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semgeo/encoding.hpp"

namespace semgeo {

namespace {

constexpr std::array<std::string_view, 6> kTermNames = {"photo", "smooth", "semwarp",
                                                         "mask",  "edge",   "transfer"};

double term_weight(const LossConfig& cfg, LossTerm t) {
  switch (t) {
    case LossTerm::photo: return 1.0;
    case LossTerm::smooth: return cfg.smoothness_weight;
    case LossTerm::semwarp: return cfg.semantic_warp_weight;
    case LossTerm::mask: return cfg.masked_weight;
    case LossTerm::edge: return cfg.boundary_weight;
    case LossTerm::transfer: return cfg.transfer_weight;
  }
  return 0.0;
}

bool needs_semantics(const LossSelection& s) {
  return s.has(LossTerm::semwarp) || s.has(LossTerm::mask) || s.has(LossTerm::edge) ||
         s.has(LossTerm::transfer);
}

}  // namespace

std::string_view term_name(LossTerm t) { return kTermNames[static_cast<int>(t)]; }

LossSelection::LossSelection(std::initializer_list<LossTerm> terms) {
  for (auto t : terms) set(t, true);
}

LossSelection LossSelection::parse(std::string_view list) {
  LossSelection out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const auto it = std::find(kTermNames.begin(), kTermNames.end(), item);
      if (it == kTermNames.end()) {
        throw ArgumentError("unknown loss term '" + std::string(item) + "'");
      }
      out.set(static_cast<LossTerm>(it - kTermNames.begin()), true);
    }
    start = end + 1;
  }
  return out;
}

bool LossSelection::empty() const {
  return std::none_of(on_.begin(), on_.end(), [](bool b) { return b; });
}

std::string LossSelection::to_string() const {
  std::string out;
  for (auto t : kAllLossTerms) {
    if (!has(t)) continue;
    if (!out.empty()) out += ',';
    out += term_name(t);
  }
  return out;
}

void AlignmentProblem::validate() const {
  config.validate();
  intrinsics.validate();
  if (target.channels() != 3) throw DimensionError("alignment problem: target must be RGB");
  if (sources.empty()) throw DimensionError("alignment problem: needs at least one source frame");
  for (const auto& s : sources) {
    if (!s.same_shape(target)) throw DimensionError("alignment problem: source frame shape differs");
  }
  if (losses.empty()) throw ArgumentError("alignment problem: no loss term is active");
  int h = target.height();
  int w = target.width();
  for (int l = 1; l < config.pyramid_levels; ++l) {
    if (h < 2 || w < 2) throw DimensionError("alignment problem: too many pyramid levels for image size");
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  if (needs_semantics(losses)) {
    if (target_semantics.height() != target.height() || target_semantics.width() != target.width()) {
      throw DimensionError("alignment problem: target semantics size differs from the frame");
    }
    target_semantics.validate();
  }
  if (losses.has(LossTerm::semwarp)) {
    if (source_semantics.size() != sources.size()) {
      throw DimensionError("alignment problem: semantic warp needs one semantic map per source");
    }
    for (const auto& s : source_semantics) {
      if (s.height() != target.height() || s.width() != target.width() ||
          s.class_count != target_semantics.class_count) {
        throw DimensionError("alignment problem: source semantics disagree with the target's");
      }
      s.validate();
    }
  }
}

DepthMap Variables::depth(int level) const {
  const Raster<double>& z = log_depth.at(level);
  DepthMap d(z.height(), z.width(), 1.0);
  for (std::size_t i = 0; i < z.size(); ++i) d.depth[i] = std::exp(z[i]);
  return d;
}

void for_each_block(Variables& v,
                    const std::function<void(const std::string&, std::span<double>)>& fn) {
  for (std::size_t l = 0; l < v.log_depth.size(); ++l) {
    fn("log_depth/l" + std::to_string(l), v.log_depth[l].values());
  }
  for (std::size_t s = 0; s < v.poses.size(); ++s) {
    const std::string name = "pose/s" + std::to_string(s);
    fn(name, std::span<double>(v.poses[s].r.data(), 3));
    fn(name, std::span<double>(v.poses[s].t.data(), 3));
  }
  if (v.classifier) {
    for (auto* blk : {&v.classifier->w1, &v.classifier->b1, &v.classifier->w2, &v.classifier->b2}) {
      fn("classifier", *blk);
    }
  }
}

void for_each_block(const Variables& v,
                    const std::function<void(const std::string&, std::span<const double>)>& fn) {
  for_each_block(const_cast<Variables&>(v),
                 [&](const std::string& name, std::span<double> s) {
                   fn(name, std::span<const double>(s.data(), s.size()));
                 });
}

std::size_t Variables::size() const {
  std::size_t n = 0;
  for_each_block(*this, [&](const std::string&, std::span<const double> s) { n += s.size(); });
  return n;
}

std::vector<double> Variables::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for_each_block(*this, [&](const std::string&, std::span<const double> s) {
    out.insert(out.end(), s.begin(), s.end());
  });
  return out;
}

void Variables::assign(std::span<const double> packed) {
  if (packed.size() != size()) throw DimensionError("variables: packed size mismatch");
  std::size_t at = 0;
  for_each_block(*this, [&](const std::string&, std::span<double> s) {
    std::copy(packed.begin() + static_cast<std::ptrdiff_t>(at),
              packed.begin() + static_cast<std::ptrdiff_t>(at + s.size()), s.begin());
    at += s.size();
  });
}

Variables Variables::zeros_like() const {
  Variables z = *this;
  for_each_block(z, [](const std::string&, std::span<double> s) {
    std::fill(s.begin(), s.end(), 0.0);
  });
  return z;
}

std::string block_of(const Variables& v, std::size_t index) {
  std::size_t at = 0;
  std::string found;
  for_each_block(v, [&](const std::string& name, std::span<const double> s) {
    if (found.empty() && index < at + s.size()) found = name;
    at += s.size();
  });
  return found;
}

Variables initial_variables(const AlignmentProblem& prob, const InitOptions& opts) {
  if (!(opts.depth > 0.0)) throw ArgumentError("initial depth must be positive");
  Variables v;
  int h = prob.target.height();
  int w = prob.target.width();
  for (int l = 0; l < prob.config.pyramid_levels; ++l) {
    v.log_depth.emplace_back(h, w, std::log(opts.depth));
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  v.poses.assign(prob.sources.size(), Pose6::identity());
  if (prob.losses.has(LossTerm::transfer)) {
    v.classifier = TransferClassifier::random(kTransferFeatureWidth, opts.hidden_width,
                                              prob.target_semantics.class_count, opts.seed);
  }
  return v;
}

CompositeObjective::CompositeObjective(AlignmentProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  const int levels = problem_.config.pyramid_levels;
  const bool sem = needs_semantics(problem_.losses);
  const bool semwarp = problem_.losses.has(LossTerm::semwarp);

  std::vector<Image> tgt = build_pyramid(problem_.target, levels);
  std::vector<std::vector<Image>> src;
  for (const auto& s : problem_.sources) src.push_back(build_pyramid(s, levels));
  std::vector<Image> tgt_onehot;
  std::vector<Image> boundary;
  std::vector<std::vector<Image>> src_onehot;
  if (sem) {
    tgt_onehot = build_pyramid(one_hot_encode(problem_.target_semantics), levels);
    const BoundaryWeights m =
        boundary_weights(problem_.target_semantics, problem_.config.boundary_radius);
    boundary = build_pyramid(Image(m.height(), m.width(), 1, m.values()), levels);
  }
  if (semwarp) {
    for (const auto& s : problem_.source_semantics) {
      src_onehot.push_back(build_pyramid(one_hot_encode(s), levels));
    }
  }
  for (int l = 0; l < levels; ++l) {
    Level lv;
    lv.target = tgt[l];
    for (auto& s : src) lv.sources.push_back(s[l]);
    if (sem) {
      lv.target_onehot = tgt_onehot[l];
      lv.boundary = BoundaryWeights(boundary[l].height(), boundary[l].width(),
                                    std::vector<double>(boundary[l].data().begin(),
                                                        boundary[l].data().end()));
    }
    for (auto& s : src_onehot) lv.source_onehot.push_back(s[l]);
    lv.k = problem_.intrinsics.at_level(l);
    levels_.push_back(std::move(lv));
  }
}

void CompositeObjective::clear_exclusions() {
  sample_keep_.clear();
  residual_keep_.clear();
  smooth_keep_.clear();
  transfer_keep_ = Mask();
}

void CompositeObjective::exclude_kinks(const Variables& v, double margin) {
  clear_exclusions();
  const auto near_integer = [margin](double c) { return std::abs(c - std::round(c)) < margin; };
  for (int l = 0; l < levels(); ++l) {
    const Level& lv = levels_[l];
    const DepthMap d = v.depth(l);
    sample_keep_.emplace_back();
    residual_keep_.emplace_back();
    Mask skeep(d.height(), d.width(), 1);
    for (int y = 0; y + 1 < d.height(); ++y) {
      for (int x = 0; x + 1 < d.width(); ++x) {
        if (std::abs(d.depth(y, x + 1) - d.depth(y, x)) < margin ||
            std::abs(d.depth(y + 1, x) - d.depth(y, x)) < margin) {
          skeep(y, x) = 0;
        }
      }
    }
    smooth_keep_.push_back(std::move(skeep));
    for (std::size_t s = 0; s < lv.sources.size(); ++s) {
      const FlowField flow = rigid_flow(d, v.poses[s], lv.k);
      const int h = flow.height();
      const int w = flow.width();
      Mask keep(h, w, 1);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          if (flow.valid[i] && (near_integer(x + flow.u[i]) || near_integer(y + flow.v[i]))) {
            keep[i] = 0;
          }
        }
      }
      FlowField masked = flow;
      masked.valid = mask_and(flow.valid, keep);
      const WarpResult warped = bilinear_warp(lv.sources[s], masked);
      Mask rkeep(h, w, 1);
      const int ch = lv.target.channels();
      for (std::size_t i = 0; i < rkeep.size(); ++i) {
        for (int c = 0; c < ch; ++c) {
          if (std::abs(warped.image.data()[i * ch + c] - lv.target.data()[i * ch + c]) < margin) {
            rkeep[i] = 0;
          }
        }
      }
      sample_keep_.back().push_back(std::move(keep));
      residual_keep_.back().push_back(std::move(rkeep));
    }
  }
  if (problem_.losses.has(LossTerm::transfer) && v.classifier) {
    const TransferClassifier& c = *v.classifier;
    const FeatureField f = pixel_features_log_depth(levels_[0].target, v.log_depth[0]);
    transfer_keep_ = Mask(f.height, f.width, 1);
    for (std::size_t i = 0; i < transfer_keep_.size(); ++i) {
      const auto in = f.row(i);
      for (int j = 0; j < c.hidden_width; ++j) {
        double s = c.b1[j];
        for (int k = 0; k < c.input_width; ++k) s += c.w1[static_cast<std::size_t>(j) * c.input_width + k] * in[k];
        if (std::abs(s) < margin) transfer_keep_[i] = 0;
      }
    }
  }
}

ObjectiveBreakdown CompositeObjective::evaluate(const Variables& v, Gradients* grad) const {
  const LossConfig& cfg = problem_.config;
  const LossSelection& on = problem_.losses;
  if (static_cast<int>(v.log_depth.size()) != levels() || v.poses.size() != problem_.sources.size()) {
    throw DimensionError("objective: variables do not match the problem");
  }
  if (on.has(LossTerm::transfer) && !v.classifier) {
    throw DimensionError("objective: transfer term active but no classifier in the variables");
  }
  if (grad) *grad = v.zeros_like();

  std::array<double, 6> value{};
  const auto acc = [&](LossTerm t, double x) { value[static_cast<int>(t)] += x; };
  const bool any_recon = on.has(LossTerm::photo) || on.has(LossTerm::mask) || on.has(LossTerm::edge);

  for (int l = 0; l < levels(); ++l) {
    const Level& lv = levels_[l];
    const Raster<double>& z = v.log_depth[l];
    if (!lv.target.same_size(z.height(), z.width())) {
      throw DimensionError("objective: log-depth level " + std::to_string(l) + " has the wrong size");
    }
    const DepthMap d = v.depth(l);
    const int h = d.height();
    const int w = d.width();
    Raster<double>* gz = grad ? &grad->log_depth[l] : nullptr;

    for (std::size_t s = 0; s < lv.sources.size(); ++s) {
      RigidFlowJacobian jac = rigid_flow_jacobian(d, v.poses[s], lv.k);
      if (!sample_keep_.empty()) jac.flow.valid = mask_and(jac.flow.valid, sample_keep_[l][s]);
      Raster<double> gu(h, w, 0.0);
      Raster<double> gv(h, w, 0.0);

      if (any_recon) {
        const WarpResult warped = bilinear_warp(lv.sources[s], jac.flow);
        Mask valid = warped.valid;
        if (!residual_keep_.empty()) valid = mask_and(valid, residual_keep_[l][s]);
        Image grecon;
        if (grad) grecon = Image(h, w, lv.target.channels(), 0.0);
        Image* gr = grad ? &grecon : nullptr;
        if (on.has(LossTerm::photo)) {
          acc(LossTerm::photo, reconstruction_loss(lv.target, warped.image, valid, cfg, gr, 1.0));
        }
        if (on.has(LossTerm::mask)) {
          acc(LossTerm::mask, masked_reconstruction_loss(lv.target, warped.image, lv.target_onehot,
                                                         valid, cfg, gr, cfg.masked_weight));
        }
        if (on.has(LossTerm::edge)) {
          acc(LossTerm::edge, boundary_weighted_loss(lv.target, warped.image, lv.boundary, valid,
                                                     cfg, gr, cfg.boundary_weight));
        }
        if (grad) {
          const WarpGradient wg = bilinear_warp_backward(lv.sources[s], jac.flow, grecon);
          gu = wg.u;
          gv = wg.v;
        }
      }
      if (on.has(LossTerm::semwarp)) {
        const WarpResult warped = bilinear_warp(lv.source_onehot[s], jac.flow);
        Image gsem;
        if (grad) gsem = Image(h, w, lv.source_onehot[s].channels(), 0.0);
        acc(LossTerm::semwarp,
            semantic_match_loss(warped.image, warped.valid, lv.target_onehot, grad ? &gsem : nullptr,
                                cfg.semantic_warp_weight));
        if (grad) {
          const WarpGradient wg = bilinear_warp_backward(lv.source_onehot[s], jac.flow, gsem);
          for (std::size_t i = 0; i < gu.size(); ++i) {
            gu[i] += wg.u[i];
            gv[i] += wg.v[i];
          }
        }
      }
      if (grad) {
        Eigen::Matrix<double, 6, 1> gpose = Eigen::Matrix<double, 6, 1>::Zero();
        for (std::size_t i = 0; i < gu.size(); ++i) {
          if (!jac.flow.valid[i] || (gu[i] == 0.0 && gv[i] == 0.0)) continue;
          const Eigen::Vector2d g(gu[i], gv[i]);
          gpose += jac.d_pose[i].transpose() * g;
          // d(rho)/dz = -rho for rho = exp(-z).
          (*gz)[i] -= g.dot(jac.d_inverse_depth[i]) / d.depth[i];
        }
        grad->poses[s].r += gpose.head<3>();
        grad->poses[s].t += gpose.tail<3>();
      }
    }

    if (on.has(LossTerm::smooth)) {
      const double level_factor = 1.0 / static_cast<double>(1 << l);
      Raster<double> gdepth;
      if (grad) gdepth = Raster<double>(h, w, 0.0);
      DepthMap ds = d;
      if (!smooth_keep_.empty()) ds.valid = mask_and(ds.valid, smooth_keep_[l]);
      const double sm = edge_aware_smoothness(ds, lv.target, grad ? &gdepth : nullptr,
                                              cfg.smoothness_weight * level_factor);
      acc(LossTerm::smooth, level_factor * sm);
      if (grad) {
        for (std::size_t i = 0; i < gdepth.size(); ++i) (*gz)[i] += gdepth[i] * d.depth[i];
      }
    }
  }

  if (on.has(LossTerm::transfer)) {
    const Level& lv = levels_[0];
    const Mask valid = transfer_keep_.size() ? transfer_keep_
                                             : Mask(lv.target.height(), lv.target.width(), 1);
    acc(LossTerm::transfer,
        transfer_objective_log_depth(lv.target, v.log_depth[0], problem_.target_semantics, valid,
                                     *v.classifier, grad ? &*grad->classifier : nullptr,
                                     grad ? &grad->log_depth[0] : nullptr, cfg.transfer_weight));
  }

  ObjectiveBreakdown out;
  for (auto t : kAllLossTerms) {
    if (!on.has(t)) continue;
    const TermValue tv{std::string(term_name(t)), value[static_cast<int>(t)], term_weight(cfg, t)};
    out.total += tv.weight * tv.value;
    out.terms.push_back(tv);
  }
  return out;
}

ObjectiveBreakdown objective(const AlignmentProblem& prob, const Variables& v) {
  return CompositeObjective(prob).evaluate(v);
}

Gradients gradient(const AlignmentProblem& prob, const Variables& v) {
  Gradients g;
  CompositeObjective(prob).evaluate(v, &g);
  return g;
}

AdamState AdamState::for_variables(const Variables& vars, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) || !(cfg.eps > 0.0)) {
    throw ArgumentError("adam: invalid hyper-parameters");
  }
  AdamState s;
  s.config = cfg;
  s.m = vars.zeros_like();
  s.v = vars.zeros_like();
  return s;
}

void adam_step(AdamState& state, const Gradients& grads, Variables& vars) {
  if (grads.size() != vars.size() || state.m.size() != vars.size()) {
    throw DimensionError("adam_step: gradient or moment shape differs from the variables");
  }
  for_each_block(grads, [](const std::string& name, std::span<const double> g) {
    for (double x : g) {
      if (!std::isfinite(x)) throw NumericError("adam_step: non-finite gradient in block " + name);
    }
  });

  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

  std::vector<std::span<const double>> g_blocks;
  std::vector<std::span<double>> m_blocks;
  std::vector<std::span<double>> v_blocks;
  for_each_block(grads, [&](const std::string&, std::span<const double> s) { g_blocks.push_back(s); });
  for_each_block(state.m, [&](const std::string&, std::span<double> s) { m_blocks.push_back(s); });
  for_each_block(state.v, [&](const std::string&, std::span<double> s) { v_blocks.push_back(s); });
  std::size_t b = 0;
  for_each_block(vars, [&](const std::string&, std::span<double> x) {
    const auto g = g_blocks[b];
    const auto m = m_blocks[b];
    const auto v = v_blocks[b];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    ++b;
  });
}

AlignResult direct_align(const AlignmentProblem& prob, Variables init, const AlignOptions& opts) {
  if (opts.iters < 1) throw ArgumentError("direct_align: iters must be >= 1");
  const CompositeObjective obj(prob);
  AlignResult out;
  out.variables = std::move(init);
  AdamState state = AdamState::for_variables(out.variables, opts.adam);
  out.trace.reserve(opts.iters);
  Gradients g;
  for (int it = 0; it < opts.iters; ++it) {
    out.trace.push_back({it, obj.evaluate(out.variables, &g)});
    adam_step(state, g, out.variables);
  }
  return out;
}

GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, std::span<const double> analytic,
                                  double step, double floor) {
  if (!(step > 0.0)) throw ArgumentError("finite_diff_check: step must be positive");
  if (analytic.size() != x.size()) throw DimensionError("finite_diff_check: gradient size mismatch");
  GradCheckReport r;
  r.coordinates = x.size();
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), floor);
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.argmax = i;
    }
  }
  return r;
}

std::vector<TermCheck> check_gradients(const AlignmentProblem& prob, const Variables& at,
                                       const GradCheckOptions& opts) {
  std::vector<std::pair<std::string, LossSelection>> runs;
  for (auto t : kAllLossTerms) {
    if (prob.losses.has(t)) runs.emplace_back(std::string(term_name(t)), LossSelection{t});
  }
  runs.emplace_back("all", prob.losses);

  std::vector<TermCheck> out;
  const std::vector<double> x = at.flatten();
  for (const auto& [name, sel] : runs) {
    AlignmentProblem p = prob;
    p.losses = sel;
    CompositeObjective obj(p);
    obj.exclude_kinks(at, opts.kink_margin);
    Gradients g;
    obj.evaluate(at, &g);
    Variables probe = at;
    const auto f = [&](std::span<const double> packed) {
      probe.assign(packed);
      return obj.evaluate(probe).total;
    };
    TermCheck tc;
    tc.term = name;
    tc.report = finite_diff_check(f, x, g.flatten(), opts.step);
    tc.block = block_of(at, tc.report.argmax);
    tc.passed = tc.report.max_rel_error < opts.tolerance;
    out.push_back(std::move(tc));
  }
  return out;
}

}  // namespace semgeo
