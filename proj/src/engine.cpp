#include "rtrack/engine.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <stdexcept>

#include "rtrack/checkpoint.hpp"
#include "rtrack/loss.hpp"

namespace rtrack {

OptimizerState init_optimizer(const Parameters& params) {
  OptimizerState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.emplace_back(t.shape(), 0.0);
    s.v.emplace_back(t.shape(), 0.0);
  }
  return s;
}

void adamw_step(Parameters& params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                double weight_decay) {
  auto& entries = params.entries();
  if (grads.size() != entries.size() || state.m.size() != entries.size()) {
    throw std::invalid_argument("adamw_step: gradient/state count does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& w = entries[p].second;
    if (grads[p].shape() != w.shape()) throw std::invalid_argument("adamw_step: gradient shape mismatch for " + entries[p].first);
    auto m = state.m[p].data(), v = state.v[p].data();
    const auto g = grads[p].data();
    auto wd = w.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1, v_hat = v[i] / bc2;
      wd[i] = wd[i] * (1.0 - lr * weight_decay) - lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.data()) v *= scale;
    }
  }
  return norm;
}

SceneGradients scene_gradients(const Scene& scene, const Parameters& params, const RunConfig& cfg) {
  try {
    Tape tape;
    const BoundParameters bound(tape, params, true);
    const HeadOutput out = forward(scene.templ, scene.search, bound, cfg.model);
    const GridSpec grid = cfg.model.grid_spec();
    const std::vector<Box> init_boxes = ad::boxes_from(out.init_boxes.tensor());
    const std::vector<Box> refine_boxes = ad::boxes_from(out.refine_boxes.tensor());

    const AssignmentResult init_assign = assign_one_to_one_center(grid, scene.gt);
    const AssignmentResult refine_assign = leading_labels(init_boxes, refine_boxes, scene.gt, grid, cfg.assigner);

    const Value gt = tape.constant(ad::box_tensor(std::span<const Box>(&scene.gt, 1)));
    LossComponents c;
    c.cls = focal_loss(out.scores, build_target_map(refine_assign, scene.gt), cfg.loss);
    c.init = stage_giou_loss(out.init_boxes, scene.gt, init_assign.positives);
    c.refine = stage_giou_loss(out.refine_boxes, scene.gt, refine_assign.positives);
    c.corr = corr_loss(out.scores, ad::iou(out.refine_boxes, gt), refine_assign, cfg.corr_mode, cfg.truncate);
    const LossBundle loss = total_loss(c, cfg.loss);
    if (!std::isfinite(loss.total.item())) throw std::runtime_error("non-finite total loss");

    const GradientStore store = tape.backward(loss.total);
    SceneGradients r;
    for (const Value& v : bound.values()) r.grads.push_back(store.get_or_zero(v));
    r.stats = {loss.cls.item(),  loss.init.item(), loss.refine.item(), loss.corr.item(), loss.total.item(),
               iou(predicted_box(out), scene.gt), static_cast<double>(refine_assign.positives.size())};
    return r;
  } catch (const std::exception& e) {
    throw std::runtime_error("scene " + std::to_string(scene.scene_id) + ": " + e.what());
  }
}

namespace {

void accumulate(SceneStats& acc, const SceneStats& s, double w) {
  acc.cls += w * s.cls;
  acc.init += w * s.init;
  acc.refine += w * s.refine;
  acc.corr += w * s.corr;
  acc.total += w * s.total;
  acc.train_iou += w * s.train_iou;
  acc.positives += w * s.positives;
}

}  // namespace

SceneStats train_step(std::span<const Scene> batch, Parameters& params, OptimizerState& state, const RunConfig& cfg,
                      double lr) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  SceneStats mean;
  std::vector<Tensor> grads;
  for (const Scene& scene : batch) {
    SceneGradients sg = scene_gradients(scene, params, cfg);
    accumulate(mean, sg.stats, w);
    if (grads.empty()) {
      grads = std::move(sg.grads);
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= w;
      }
      continue;
    }
    for (std::size_t p = 0; p < grads.size(); ++p) {
      auto dst = grads[p].data();
      const auto src = sg.grads[p].data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
  }
  clip_global_norm(grads, cfg.grad_clip);
  adamw_step(params, grads, state, lr, cfg.weight_decay);
  return mean;
}

std::uint64_t scene_id_for(const RunConfig& cfg, std::size_t epoch, std::size_t index) {
  const std::uint64_t id = static_cast<std::uint64_t>(epoch) * cfg.scenes_per_epoch + index;
  return cfg.scene_pool > 0 ? id % cfg.scene_pool : id;
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::string out =
      "epoch,mean_train_iou,loss_cls,loss_init,loss_refine,loss_corr,loss_total,positives_per_scene,wall_time_s\n";
  for (const MetricsRecord& r : records) {
    out += std::to_string(r.epoch);
    for (double v : {r.mean_train_iou, r.loss_cls, r.loss_init, r.loss_refine, r.loss_corr, r.loss_total,
                     r.positives_per_scene, r.wall_time_s}) {
      out += ',' + format_number(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

Json record_json(const MetricsRecord& r) {
  return Json{{"epoch", r.epoch},
              {"mean_train_iou", r.mean_train_iou},
              {"loss_cls", r.loss_cls},
              {"loss_init", r.loss_init},
              {"loss_refine", r.loss_refine},
              {"loss_corr", r.loss_corr},
              {"loss_total", r.loss_total},
              {"positives_per_scene", r.positives_per_scene},
              {"wall_time_s", r.wall_time_s}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                                const EpochCallback& on_epoch) {
  cfg.validate();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_json(*out_dir / "config.json", to_json(cfg));
  }
  const SceneConfig scenes = cfg.scene_config();
  ExperimentResult res{init_parameters(cfg.model, cfg.seed), {}};
  OptimizerState opt = init_optimizer(res.params);
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    SceneStats sum;
    for (std::size_t first = 0; first < cfg.scenes_per_epoch; first += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, cfg.scenes_per_epoch - first);
      std::vector<Scene> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(generate_scene(cfg.seed, scene_id_for(cfg, epoch, first + i), scenes));
      const SceneStats mean = train_step(batch, res.params, opt, cfg, lr);
      accumulate(sum, mean, static_cast<double>(n));
    }
    const double inv = 1.0 / static_cast<double>(cfg.scenes_per_epoch);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.mean_train_iou = sum.train_iou * inv;
    rec.loss_cls = sum.cls * inv;
    rec.loss_init = sum.init * inv;
    rec.loss_refine = sum.refine * inv;
    rec.loss_corr = sum.corr * inv;
    rec.loss_total = sum.total * inv;
    rec.positives_per_scene = sum.positives * inv;
    if (cfg.record_wall_time) {
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    res.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (out_dir) {
    write_text(*out_dir / "metrics.csv", metrics_csv(res.records));
    const auto reach = epochs_to_reach(res.records, 0.5);
    write_json(*out_dir / "summary.json",
               Json{{"seed", cfg.seed},
                    {"final", record_json(res.records.back())},
                    {"epochs_to_iou_05", reach ? Json(*reach) : Json(nullptr)},
                    {"config", to_json(cfg)}});
    save_checkpoint(*out_dir / "checkpoint.json", res.params, cfg);
  }
  return res;
}

std::optional<std::size_t> epochs_to_reach(std::span<const MetricsRecord> records, double iou) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].mean_train_iou >= iou) return i + 1;
  }
  return std::nullopt;
}

AblationVariant make_variant(const RunConfig& base, const std::string& name) {
  static const std::string kLead = "_lead";
  const bool lead = name.size() > kLead.size() && name.ends_with(kLead);
  const std::string strategy = lead ? name.substr(0, name.size() - kLead.size()) : name;
  AblationVariant v{name, base};
  try {
    v.cfg.assigner.strategy = parse_strategy(strategy);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected one2one, maxiou, maxiou_lead, cd, cd_lead, iv, iv_lead)");
  }
  if (lead && v.cfg.assigner.strategy == AssignStrategy::OneToOneCenter) {
    throw std::invalid_argument("variant one2one has no leading form");
  }
  v.cfg.assigner.leading = lead;
  v.cfg.resolve();
  v.cfg.validate();
  return v;
}

std::vector<AblationRow> run_ablation(std::span<const AblationVariant> variants,
                                      const std::optional<std::filesystem::path>& out_dir) {
  if (variants.empty()) throw std::invalid_argument("run_ablation: no variants");
  std::vector<AblationRow> rows(variants.size());
  std::vector<std::exception_ptr> errors(variants.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < variants.size(); ++i) {
    try {
      const AblationVariant& v = variants[i];
      std::optional<std::filesystem::path> dir;
      if (out_dir) dir = *out_dir / v.name;
      const ExperimentResult res = run_experiment(v.cfg, dir);
      const EvalReport rep = evaluate(res.params, v.cfg.model, v.cfg.eval_sequences, v.cfg.seed, v.cfg.sequence_length);
      if (dir) write_eval_outputs(*dir, rep, to_json(v.cfg));
      rows[i] = {v.name, res.records.back().mean_train_iou, rep.ao, epochs_to_reach(res.records, 0.5)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (out_dir) write_text(*out_dir / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "variant,final_train_iou,ao,epochs_to_iou_05\n";
  for (const AblationRow& r : rows) {
    out += r.name + ',' + format_number(r.final_train_iou) + ',' + format_number(r.ao) + ',' +
           (r.epochs_to_iou_05 ? std::to_string(*r.epochs_to_iou_05) : std::string("never")) + '\n';
  }
  return out;
}

}  // namespace rtrack
