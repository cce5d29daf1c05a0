#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lieflow/adam.hpp"
#include "lieflow/hexplane.hpp"
#include "lieflow/image.hpp"
#include "lieflow/losses.hpp"
#include "lieflow/param_store.hpp"
#include "lieflow/render.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/se3field.hpp"

namespace lieflow {

struct TrainConfig {
  std::string dataset_dir;
  std::string out_dir;  // metrics + checkpoint location; empty disables logging

  int iterations = 20000;
  int rays_per_batch = 1024;
  int samples_per_ray = 64;

  double lr_radiance = 1e-3;
  double lr_se3 = 1e-3;

  double lambda_div = 1e-3;
  double lambda_mom = 1e-3;
  double lambda_se3 = 1e-4;    // rotation orthogonality diagnostic
  double lambda_trans = 1e-4;  // twist translation magnitude

  int ref_stride = 4;
  int quad_steps = 4;
  int reg_points = 32;
  int reg_times = 4;
  double fd_step = 1e-4;

  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kFull;
  Integrator integrator = Integrator::kExpOfIntegral;
  PhotometricNorm photometric = PhotometricNorm::kMse;
  DivergenceTarget divergence_target = DivergenceTarget::kInducedVelocity;

  // radiance field
  int plane_res = 64;
  int plane_feat = 16;
  int embed = 15;
  int rgb_hidden = 64;
  int view_freqs = 4;

  // transformation field
  int enc_freqs_space = 6;
  int enc_freqs_time = 4;
  int se3_hidden = 128;
  int se3_layers = 4;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_file(const std::string& path);
  void validate() const;
};

/// Multi-view frame collection produced by the scene generator. The loader
/// reads poses, the manifest split layout, and every PNG frame into float
/// buffers; the ground-truth motion block in the manifest is ignored here.
struct Dataset {
  std::vector<CameraModel> cameras;
  std::vector<int> train_cameras;
  std::vector<int> holdout_cameras;
  int frame_count = 0;
  std::vector<double> timestamps;
  std::vector<int> train_frames;
  std::vector<int> extrap_frames;
  Aabb aabb;
  Eigen::Vector3d background{0, 0, 0};
  std::vector<std::vector<Image>> images;  // [camera][frame]

  static Dataset load(const std::string& dir);
};

struct IterStats {
  int iteration = 0;
  int frame = 0;
  bool is_reference = false;
  double loss_pho = 0;
  double loss_div = 0;
  double loss_mom = 0;
  double loss_ortho = 0;
  double loss_trans = 0;
  double total = 0;
  double elapsed_s = 0;
};

struct EvalRow {
  int camera = 0;
  int frame = 0;
  double psnr = 0;
  double ssim = 0;
};

struct EvalReport {
  std::string split;
  std::vector<EvalRow> rows;
  double mean_psnr = 0;
  double mean_ssim = 0;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Joint training of the radiance and transformation fields.
///
/// Reference-frame batches drive a photometric loss through the plain
/// radiance path and update the radiance parameters only. Query-frame
/// batches render through the warp; the shared photometric term updates
/// both parameter groups while the field regularizers (divergence,
/// momentum, structure) reach only the transformation field and the
/// learned acceleration. One tape serves both optimizer groups per
/// iteration, so the routing is a property of the graph itself.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset dataset);

  /// Restores a saved run: parameters, optimizer moments, RNG stream and
  /// iteration counter. `iterations_override` (> 0) retargets the run length,
  /// e.g. to extend a finished run.
  static std::unique_ptr<Trainer> resume(const std::string& checkpoint_path,
                                         const std::string& dataset_override = "",
                                         int iterations_override = -1);

  IterStats step();
  void run();  // steps to cfg.iterations, logging one JSON line per iteration

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  const Dataset& dataset() const { return dataset_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const HexPlaneField& radiance() const { return *radiance_; }
  const Se3Field& warp_field() const { return *warp_; }
  const ReferenceSchedule& schedule() const { return schedule_; }

  void save(const std::string& path) const;

  Image render_frame(int camera, int frame) const;
  EvalReport evaluate(const std::string& split) const;  // "interpolation" | "extrapolation"

 private:
  void log_line(const IterStats& stats);

  TrainConfig cfg_;
  Dataset dataset_;
  ParamStore store_;
  std::unique_ptr<HexPlaneField> radiance_;
  std::unique_ptr<Se3Field> warp_;
  ReferenceSchedule schedule_;
  std::vector<int> radiance_group_;
  std::vector<int> se3_group_;
  AdamState adam_radiance_;
  AdamState adam_se3_;
  Rng rng_;
  int iteration_ = 0;
  double started_at_ = 0;
  std::ofstream metrics_;
};

/// Recovered-vs-ground-truth twist report for a tracks file (see README for
/// the schema). Throws ParseError with a line number on malformed input.
struct FitTwistReport {
  struct Row {
    int primitive = 0;
    int frame = 0;
    double max_component_error = 0;
  };
  std::vector<Row> rows;
  double max_error = 0;
  std::string to_text() const;
};

FitTwistReport fit_twist_file(const std::string& tracks_path);

}  // namespace lieflow
