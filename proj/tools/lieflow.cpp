#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lieflow/errors.hpp"
#include "lieflow/gradcheck.hpp"
#include "lieflow/pipeline.hpp"
#include "lieflow/plot.hpp"
#include "lieflow/scenegen.hpp"

namespace fs = std::filesystem;
using namespace lieflow;

namespace {

// exit codes: 0 success, 1 validation/input error, 2 runtime failure
int run(int argc, char** argv) {
  CLI::App app{"dynamic radiance field with a rigid-motion transformation field"};
  app.require_subcommand(1);

  // gen-scene
  std::string scene_path, scene_out;
  auto* gen = app.add_subcommand("gen-scene", "render a synthetic dataset from a scene spec");
  gen->add_option("spec", scene_path, "scene spec JSON")->required();
  gen->add_option("out", scene_out, "output dataset directory")->required();

  // train
  std::string train_config_path, resume_path;
  int resume_iterations = -1;
  auto* train = app.add_subcommand("train", "train from a config file");
  train->add_option("config", train_config_path, "train config JSON")->required();
  train->add_option("--resume", resume_path, "checkpoint to continue from");
  train->add_option("--iterations", resume_iterations,
                    "retarget the iteration count when resuming");

  // render
  std::string render_ckpt, render_out = "render.png", render_dataset_dir;
  int render_view = 0, render_frame = 0;
  auto* render = app.add_subcommand("render", "render one view/frame from a checkpoint");
  render->add_option("checkpoint", render_ckpt)->required();
  render->add_option("--view", render_view, "camera index")->required();
  render->add_option("--frame", render_frame, "frame index")->required();
  render->add_option("-o,--out", render_out, "output PNG");
  render->add_option("--dataset", render_dataset_dir, "override dataset directory");

  // eval
  std::string eval_ckpt, eval_split = "interp", eval_out, eval_dataset_dir;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a held-out split");
  eval->add_option("checkpoint", eval_ckpt)->required();
  eval->add_option("--split", eval_split, "interp | extrap")
      ->check(CLI::IsMember({"interp", "extrap"}));
  eval->add_option("-o,--out", eval_out, "also write the report as JSON");
  eval->add_option("--dataset", eval_dataset_dir, "override dataset directory");

  // fit-twist
  std::string tracks_path;
  auto* fit = app.add_subcommand("fit-twist", "recover twists from a tracks file");
  fit->add_option("tracks", tracks_path)->required();

  // check-grad
  std::string grad_config_path;
  auto* grad = app.add_subcommand("check-grad", "finite-difference gradient suite");
  grad->add_option("config", grad_config_path, "train config JSON (seed is used)");

  // plot
  std::string plot_in, plot_out = "plot.png";
  auto* plot = app.add_subcommand("plot", "plot metrics or an eval report to PNG");
  plot->add_option("input", plot_in, "metrics.jsonl or eval report JSON")->required();
  plot->add_option("-o,--out", plot_out, "output PNG");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const SceneSpec spec = SceneSpec::from_json_file(scene_path);
    render_dataset(spec, scene_out);
    std::cout << "dataset written to " << scene_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    std::unique_ptr<Trainer> trainer;
    if (!resume_path.empty()) {
      trainer = Trainer::resume(resume_path, "", resume_iterations);
    } else {
      TrainConfig cfg = TrainConfig::from_file(train_config_path);
      if (cfg.out_dir.empty()) {
        std::cerr << "config: out_dir is required for the train command\n";
        return 1;
      }
      trainer = std::make_unique<Trainer>(cfg, Dataset::load(cfg.dataset_dir));
    }
    trainer->run();
    const fs::path ckpt = fs::path(trainer->config().out_dir) / "checkpoint.bin";
    trainer->save(ckpt.string());
    std::cout << "checkpoint written to " << ckpt.string() << "\n";
    return 0;
  }

  if (render->parsed()) {
    auto trainer = Trainer::resume(render_ckpt, render_dataset_dir);
    const Image img = trainer->render_frame(render_view, render_frame);
    write_png(render_out, img);
    std::cout << "wrote " << render_out << "\n";
    return 0;
  }

  if (eval->parsed()) {
    auto trainer = Trainer::resume(eval_ckpt, eval_dataset_dir);
    const EvalReport report =
        trainer->evaluate(eval_split == "interp" ? "interpolation" : "extrapolation");
    std::cout << report.to_text();
    if (!eval_out.empty()) {
      std::ofstream f(eval_out);
      f << report.to_json().dump(2) << "\n";
      if (!f) throw IoFailure("eval: cannot write '" + eval_out + "'");
    }
    return 0;
  }

  if (fit->parsed()) {
    const FitTwistReport report = fit_twist_file(tracks_path);
    std::cout << report.to_text();
    return 0;
  }

  if (grad->parsed()) {
    std::uint64_t seed = 0;
    if (!grad_config_path.empty()) {
      seed = TrainConfig::from_file(grad_config_path).seed;
    }
    const auto results = run_gradient_suite(seed);
    for (const auto& r : results) {
      std::printf("[%s] %-42s max_abs %.3e  scaled %.3e  (%d coords)\n",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_abs_err, r.max_scaled_err,
                  r.checked);
    }
    return all_passed(results) ? 0 : 1;
  }

  if (plot->parsed()) {
    plot_file(plot_in, plot_out);
    std::cout << "wrote " << plot_out << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const DatasetInvalid& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const VersionMismatch& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const EmptySplit& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
