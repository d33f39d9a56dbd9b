#include "cli.hpp"

#include <chrono>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rtrack/checkpoint.hpp"
#include "rtrack/config.hpp"
#include "rtrack/engine.hpp"
#include "rtrack/gradcheck_suite.hpp"
#include "rtrack/metrics.hpp"

namespace rtrack::cli {

namespace {

void apply_threads(const RunConfig& cfg) {
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
  (void)cfg;
#endif
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_epoch(std::ostream& err, const MetricsRecord& r) {
  err << "epoch " << r.epoch << "  train_iou " << format_number(r.mean_train_iou) << "  loss "
      << format_number(r.loss_total) << "  positives " << format_number(r.positives_per_scene) << '\n';
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::optional<std::uint64_t>& seed,
              const std::string& dump_dir, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) cfg.seed = *seed;
  apply_threads(cfg);
  out << to_json(cfg).dump(2) << '\n';
  if (!dump_dir.empty()) dump_scenes(dump_dir, cfg.seed, 0, std::min<std::size_t>(cfg.scenes_per_epoch, 16), cfg.scene_config());
  const ExperimentResult res = run_experiment(cfg, std::filesystem::path(out_dir),
                                              [&](const MetricsRecord& r) { print_epoch(err, r); });
  out << "final mean_train_iou " << format_number(res.records.back().mean_train_iou) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, std::size_t sequences, std::uint64_t seed, const std::string& out_dir,
             std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  apply_threads(ck.config);
  Json echo = to_json(ck.config);
  echo["eval_seed"] = seed;
  echo["eval_sequences"] = sequences;
  out << echo.dump(2) << '\n';
  const EvalReport rep = evaluate(ck.params, ck.config.model, sequences, seed, ck.config.sequence_length);
  write_eval_outputs(out_dir, rep, echo);
  out << "ao " << format_number(rep.ao) << "  sr_050 " << format_number(rep.sr_050) << "  sr_075 "
      << format_number(rep.sr_075) << "  auc " << format_number(rep.success_auc) << '\n';
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& list, const std::string& out_dir, std::ostream& out) {
  const RunConfig base = load_run_config(config_path);
  apply_threads(base);
  std::vector<AblationVariant> variants;
  for (const std::string& name : split_list(list)) variants.push_back(make_variant(base, name));
  if (variants.empty()) throw std::invalid_argument("--variants is empty");
  out << to_json(base).dump(2) << '\n';
  const std::vector<AblationRow> rows = run_ablation(variants, std::filesystem::path(out_dir));
  out << ablation_csv(rows);
  return kExitOk;
}

int cmd_assign(const std::string& name, std::uint64_t scene_seed, bool leading, const std::optional<std::size_t>& top_k,
               const std::string& spread, const std::string& checkpoint, std::ostream& out) {
  RunConfig cfg;
  if (!checkpoint.empty()) cfg = load_checkpoint(checkpoint).config;
  cfg.seed = scene_seed;
  cfg.assigner.strategy = parse_strategy(name);
  cfg.assigner.leading = leading;
  cfg.assigner.spread = parse_spread(spread);
  cfg.top_k_explicit = top_k.has_value();
  if (top_k) cfg.assigner.top_k = *top_k;
  cfg.resolve();
  cfg.validate();

  const Parameters params = checkpoint.empty() ? init_parameters(cfg.model, cfg.seed) : load_checkpoint(checkpoint).params;
  const Scene scene = generate_scene(scene_seed, 0, cfg.scene_config());
  Tape tape;
  const HeadOutput head = forward(scene.templ, scene.search, BoundParameters(tape, params, false), cfg.model);
  const GridSpec grid = cfg.model.grid_spec();
  const AssignmentResult a = leading_labels(ad::boxes_from(head.init_boxes.tensor()), ad::boxes_from(head.refine_boxes.tensor()),
                                            scene.gt, grid, cfg.assigner);

  Json labels = Json::array();
  for (std::size_t r = 0; r < grid.rows; ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < grid.cols; ++c) row.push_back(to_string(a.labels[r * grid.cols + c]));
    labels.push_back(std::move(row));
  }
  const Json j{{"assigner", to_string(cfg.assigner.strategy)},
               {"leading", cfg.assigner.leading},
               {"top_k", cfg.assigner.top_k},
               {"spread", to_string(cfg.assigner.spread)},
               {"scene_seed", scene_seed},
               {"gt", {scene.gt.x1, scene.gt.y1, scene.gt.x2, scene.gt.y2}},
               {"grid", {{"rows", grid.rows}, {"cols", grid.cols}, {"stride", grid.stride}}},
               {"positives", a.positives},
               {"threshold", a.threshold_used ? Json(*a.threshold_used) : Json(nullptr)},
               {"labels", std::move(labels)},
               {"config", to_json(cfg)}};
  out << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_gradcheck(std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const GradCheckCase& c : run_gradcheck_suite()) {
    ok = ok && c.passed();
    out << (c.passed() ? "PASS " : "FAIL ") << c.name << "  max_rel_err " << format_number(c.result.max_rel_error)
        << "  tol " << format_number(c.tolerance) << "  coords " << c.result.coordinates << '\n';
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "gradcheck " << (ok ? "passed" : "FAILED") << " in " << format_number(secs) << " s\n";
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-set tracking head experiments on synthetic scenes", "rtrack"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, variants, assigner_name, spread = "std", dump_dir;
  std::optional<std::uint64_t> train_seed;
  std::uint64_t eval_seed = 0, scene_seed = 0;
  std::size_t sequences = 64;
  std::optional<std::size_t> top_k;
  bool leading = false;

  auto* train = app.add_subcommand("train", "Train from fresh parameters");
  train->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", train_seed, "Override the config seed");
  train->add_option("--dump-scenes", dump_dir, "Write the first training scenes as PGM plus scenes.json");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out sequences");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--sequences", sequences, "Number of sequences")->required()->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Evaluation seed")->required();
  eval->add_option("--out", out_dir, "Output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate several assigner variants");
  ablate->add_option("--config", config_path, "JSON base config")->required()->check(CLI::ExistingFile);
  ablate->add_option("--variants", variants, "Comma list of one2one, maxiou, cd, iv, with optional _lead suffix")
      ->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();

  auto* assign = app.add_subcommand("assign", "Print the label assignment for one scene as JSON");
  assign->add_option("--assigner", assigner_name, "one2one, maxiou, cd or iv")->required();
  assign->add_option("--scene-seed", scene_seed, "Scene generator seed")->required();
  assign->add_flag("--leading", leading, "Label refine bins from the init boxes");
  assign->add_option("--top-k", top_k, "Candidate count (default per assigner)");
  assign->add_option("--spread", spread, "std or var")->check(CLI::IsMember({"std", "var"}));
  assign->add_option("--checkpoint", checkpoint, "Use trained weights instead of a fresh init")
      ->check(CLI::ExistingFile);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(config_path, out_dir, train_seed, dump_dir, out, err);
    if (*eval) return cmd_eval(checkpoint, sequences, eval_seed, out_dir, out);
    if (*ablate) return cmd_ablate(config_path, variants, out_dir, out);
    if (*assign) return cmd_assign(assigner_name, scene_seed, leading, top_k, spread, checkpoint, out);
    if (*gradcheck) return cmd_gradcheck(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rtrack::cli
