#include "lieflow/pipeline.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "lieflow/checkpoint.hpp"
#include "lieflow/errors.hpp"
#include "lieflow/metrics.hpp"
#include "lieflow/scenegen.hpp"

namespace lieflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kTranslationOnly: return "translation_only";
    case Ablation::kRotationOnly: return "rotation_only";
    default: return "full";
  }
}

Ablation ablation_from(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "translation_only") return Ablation::kTranslationOnly;
  if (s == "rotation_only") return Ablation::kRotationOnly;
  throw std::invalid_argument("config: unknown ablation '" + s + "'");
}

std::string frame_name(int cam, int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cam%02d_f%03d.png", cam, frame);
  return buf;
}

std::string hex_u64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t u64_from_hex(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

json TrainConfig::to_json() const {
  json j;
  j["dataset"] = dataset_dir;
  j["out_dir"] = out_dir;
  j["iterations"] = iterations;
  j["rays_per_batch"] = rays_per_batch;
  j["samples_per_ray"] = samples_per_ray;
  j["lr_radiance"] = lr_radiance;
  j["lr_se3"] = lr_se3;
  j["lambda_div"] = lambda_div;
  j["lambda_mom"] = lambda_mom;
  j["lambda_se3"] = lambda_se3;
  j["lambda_trans"] = lambda_trans;
  j["ref_stride"] = ref_stride;
  j["quad_steps"] = quad_steps;
  j["reg_points"] = reg_points;
  j["reg_times"] = reg_times;
  j["fd_step"] = fd_step;
  j["seed"] = seed;
  j["ablation"] = ablation_name(ablation);
  j["integrator"] =
      integrator == Integrator::kExpOfIntegral ? "exp_of_integral" : "product_of_exp";
  j["photometric"] = photometric == PhotometricNorm::kMse ? "mse" : "l1";
  j["divergence_target"] =
      divergence_target == DivergenceTarget::kInducedVelocity ? "induced" : "v_only";
  j["plane_res"] = plane_res;
  j["plane_feat"] = plane_feat;
  j["embed"] = embed;
  j["rgb_hidden"] = rgb_hidden;
  j["view_freqs"] = view_freqs;
  j["enc_freqs_space"] = enc_freqs_space;
  j["enc_freqs_time"] = enc_freqs_time;
  j["se3_hidden"] = se3_hidden;
  j["se3_layers"] = se3_layers;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.dataset_dir = j.at("dataset").get<std::string>();
  c.out_dir = j.value("out_dir", std::string{});
  c.iterations = j.value("iterations", c.iterations);
  c.rays_per_batch = j.value("rays_per_batch", c.rays_per_batch);
  c.samples_per_ray = j.value("samples_per_ray", c.samples_per_ray);
  c.lr_radiance = j.value("lr_radiance", c.lr_radiance);
  c.lr_se3 = j.value("lr_se3", c.lr_se3);
  c.lambda_div = j.value("lambda_div", c.lambda_div);
  c.lambda_mom = j.value("lambda_mom", c.lambda_mom);
  c.lambda_se3 = j.value("lambda_se3", c.lambda_se3);
  c.lambda_trans = j.value("lambda_trans", c.lambda_trans);
  c.ref_stride = j.value("ref_stride", c.ref_stride);
  c.quad_steps = j.value("quad_steps", c.quad_steps);
  c.reg_points = j.value("reg_points", c.reg_points);
  c.reg_times = j.value("reg_times", c.reg_times);
  c.fd_step = j.value("fd_step", c.fd_step);
  c.seed = j.value("seed", c.seed);
  c.ablation = ablation_from(j.value("ablation", std::string("full")));
  const std::string integ = j.value("integrator", std::string("exp_of_integral"));
  if (integ == "exp_of_integral") {
    c.integrator = Integrator::kExpOfIntegral;
  } else if (integ == "product_of_exp") {
    c.integrator = Integrator::kProductOfExp;
  } else {
    throw std::invalid_argument("config: unknown integrator '" + integ + "'");
  }
  const std::string target = j.value("divergence_target", std::string("induced"));
  if (target == "induced") {
    c.divergence_target = DivergenceTarget::kInducedVelocity;
  } else if (target == "v_only") {
    c.divergence_target = DivergenceTarget::kVOnly;
  } else {
    throw std::invalid_argument("config: unknown divergence_target '" + target + "'");
  }
  const std::string norm = j.value("photometric", std::string("mse"));
  if (norm == "mse") {
    c.photometric = PhotometricNorm::kMse;
  } else if (norm == "l1") {
    c.photometric = PhotometricNorm::kL1;
  } else {
    throw std::invalid_argument("config: unknown photometric norm '" + norm + "'");
  }
  c.plane_res = j.value("plane_res", c.plane_res);
  c.plane_feat = j.value("plane_feat", c.plane_feat);
  c.embed = j.value("embed", c.embed);
  c.rgb_hidden = j.value("rgb_hidden", c.rgb_hidden);
  c.view_freqs = j.value("view_freqs", c.view_freqs);
  c.enc_freqs_space = j.value("enc_freqs_space", c.enc_freqs_space);
  c.enc_freqs_time = j.value("enc_freqs_time", c.enc_freqs_time);
  c.se3_hidden = j.value("se3_hidden", c.se3_hidden);
  c.se3_layers = j.value("se3_layers", c.se3_layers);
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return from_json(j);
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string("config: ") + name + " must be > 0");
  };
  if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
  positive(rays_per_batch, "rays_per_batch");
  positive(samples_per_ray, "samples_per_ray");
  positive(lr_radiance, "lr_radiance");
  positive(lr_se3, "lr_se3");
  positive(ref_stride, "ref_stride");
  positive(quad_steps, "quad_steps");
  positive(reg_points, "reg_points");
  positive(reg_times, "reg_times");
  positive(fd_step, "fd_step");
  positive(plane_res, "plane_res");
  positive(plane_feat, "plane_feat");
  positive(embed, "embed");
  positive(rgb_hidden, "rgb_hidden");
  positive(se3_hidden, "se3_hidden");
  if (se3_layers < 1) throw std::invalid_argument("config: se3_layers must be >= 1");
  if (lambda_div < 0 || lambda_mom < 0 || lambda_se3 < 0 || lambda_trans < 0) {
    throw std::invalid_argument("config: loss weights must be nonnegative");
  }
}

Dataset Dataset::load(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream pf(root / "poses.json");
  if (!pf) throw DatasetInvalid("dataset: missing poses.json in '" + dir + "'");
  std::ifstream mf(root / "manifest.json");
  if (!mf) throw DatasetInvalid("dataset: missing manifest.json in '" + dir + "'");

  json poses, manifest;
  try {
    poses = json::parse(std::string((std::istreambuf_iterator<char>(pf)),
                                    std::istreambuf_iterator<char>()));
    manifest = json::parse(std::string((std::istreambuf_iterator<char>(mf)),
                                       std::istreambuf_iterator<char>()));
  } catch (const json::parse_error& e) {
    throw DatasetInvalid(std::string("dataset: bad JSON: ") + e.what());
  }

  Dataset ds;
  try {
    for (const auto& cj : poses.at("cameras")) {
      CameraModel cam;
      cam.fx = cj.at("fx").get<double>();
      cam.fy = cj.at("fy").get<double>();
      cam.cx = cj.at("cx").get<double>();
      cam.cy = cj.at("cy").get<double>();
      cam.width = cj.at("width").get<int>();
      cam.height = cj.at("height").get<int>();
      cam.near_depth = cj.at("near").get<double>();
      cam.far_depth = cj.at("far").get<double>();
      const auto m = cj.at("cam_to_world").get<std::vector<double>>();
      if (m.size() != 16) throw DatasetInvalid("dataset: cam_to_world needs 16 entries");
      Eigen::Matrix4d g;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) g(r, c) = m[r * 4 + c];
      cam.cam_to_world.R = g.block<3, 3>(0, 0);
      cam.cam_to_world.t = g.block<3, 1>(0, 3);
      cam.require_valid();
      ds.cameras.push_back(cam);
    }
    ds.frame_count = manifest.at("frame_count").get<int>();
    ds.timestamps = manifest.at("timestamps").get<std::vector<double>>();
    ds.train_cameras = manifest.at("train_cameras").get<std::vector<int>>();
    ds.holdout_cameras = manifest.at("holdout_cameras").get<std::vector<int>>();
    ds.train_frames = manifest.at("train_frames").get<std::vector<int>>();
    ds.extrap_frames = manifest.at("extrapolation_frames").get<std::vector<int>>();
    const auto lo = manifest.at("aabb").at("min").get<std::vector<double>>();
    const auto hi = manifest.at("aabb").at("max").get<std::vector<double>>();
    ds.aabb.min = Eigen::Vector3d(lo.at(0), lo.at(1), lo.at(2));
    ds.aabb.max = Eigen::Vector3d(hi.at(0), hi.at(1), hi.at(2));
    const auto bg = manifest.at("background").get<std::vector<double>>();
    ds.background = Eigen::Vector3d(bg.at(0), bg.at(1), bg.at(2));
  } catch (const json::exception& e) {
    throw DatasetInvalid(std::string("dataset: manifest/poses: ") + e.what());
  }

  if (static_cast<int>(ds.timestamps.size()) != ds.frame_count) {
    throw DatasetInvalid("dataset: timestamps do not cover every frame");
  }
  if (ds.train_frames.empty() || ds.cameras.empty() || ds.train_cameras.empty()) {
    throw DatasetInvalid("dataset: empty training split");
  }
  for (std::size_t i = 0; i < ds.train_frames.size(); ++i) {
    if (ds.train_frames[i] != static_cast<int>(i)) {
      throw DatasetInvalid("dataset: train frames must be contiguous from 0");
    }
  }
  ds.aabb.require_valid();

  ds.images.resize(ds.cameras.size());
  for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
    ds.images[c].reserve(ds.frame_count);
    for (int f = 0; f < ds.frame_count; ++f) {
      const fs::path p = root / "frames" / frame_name(static_cast<int>(c), f);
      Image img;
      try {
        img = read_png(p.string());
      } catch (const IoFailure& e) {
        throw DatasetInvalid(std::string("dataset: ") + e.what());
      }
      if (img.width != ds.cameras[c].width || img.height != ds.cameras[c].height) {
        throw DatasetInvalid("dataset: frame size disagrees with camera: " + p.string());
      }
      ds.images[c].push_back(std::move(img));
    }
  }
  return ds;
}

Trainer::Trainer(TrainConfig cfg, Dataset dataset)
    : cfg_(std::move(cfg)), dataset_(std::move(dataset)), rng_(cfg_.seed) {
  cfg_.validate();

  HexPlaneConfig hex;
  hex.res = cfg_.plane_res;
  hex.feat = cfg_.plane_feat;
  hex.embed = cfg_.embed;
  hex.rgb_hidden = cfg_.rgb_hidden;
  hex.view_freqs = cfg_.view_freqs;
  hex.aabb = dataset_.aabb;
  radiance_ = std::make_unique<HexPlaneField>(hex, store_, rng_);

  Se3FieldConfig se3;
  se3.lp = cfg_.enc_freqs_space;
  se3.lt = cfg_.enc_freqs_time;
  se3.hidden = cfg_.se3_hidden;
  se3.layers = cfg_.se3_layers;
  se3.aabb = dataset_.aabb;
  se3.ablation = cfg_.ablation;
  se3.integrator = cfg_.integrator;
  warp_ = std::make_unique<Se3Field>(se3, store_, rng_);
  store_.add("accel_a", 1, 3);  // learnable acceleration, starts at zero

  std::vector<double> train_times;
  for (int f : dataset_.train_frames) train_times.push_back(dataset_.timestamps[f]);
  schedule_ = ReferenceSchedule::make(train_times, cfg_.ref_stride);

  radiance_group_ = store_.indices_with_prefix("hexplane.");
  se3_group_ = store_.indices_with_prefix("se3.");
  se3_group_.push_back(store_.index("accel_a"));

  started_at_ = now_seconds();
  if (!cfg_.out_dir.empty()) {
    fs::create_directories(cfg_.out_dir);
  }
}

void Trainer::log_line(const IterStats& s) {
  if (cfg_.out_dir.empty()) return;
  if (!metrics_.is_open()) {
    // fresh runs start a new log; resumed runs append to the existing one
    metrics_.open(fs::path(cfg_.out_dir) / "metrics.jsonl",
                  s.iteration == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics_) throw IoFailure("trainer: cannot open metrics log");
  }
  json j;
  j["iteration"] = s.iteration;
  j["frame"] = s.frame;
  j["is_reference"] = s.is_reference;
  j["loss_pho"] = s.loss_pho;
  j["loss_div"] = s.loss_div;
  j["loss_mom"] = s.loss_mom;
  j["loss_ortho"] = s.loss_ortho;
  j["loss_trans"] = s.loss_trans;
  j["total"] = s.total;
  j["elapsed_s"] = s.elapsed_s;
  metrics_ << j.dump() << "\n";
  metrics_.flush();
}

IterStats Trainer::step() {
  IterStats stats;
  stats.iteration = iteration_;

  const int frame =
      dataset_.train_frames[rng_.uniform_int(static_cast<int>(dataset_.train_frames.size()))];
  stats.frame = frame;
  const double t_i = dataset_.timestamps[frame];
  const double t_hat = nearest_ref(t_i, schedule_);
  const bool is_ref = t_hat == t_i;
  stats.is_reference = is_ref;

  // assemble the ray batch from this frame across the training cameras
  const int rays = cfg_.rays_per_batch;
  const int n = cfg_.samples_per_ray;
  const Eigen::Index total = static_cast<Eigen::Index>(rays) * n;
  Eigen::MatrixXd pts(total, 3);
  Eigen::MatrixXd dirs(total, 3);
  Eigen::VectorXd deltas(total);
  Eigen::MatrixXd targets(rays, 3);
  for (int b = 0; b < rays; ++b) {
    const int cam_id =
        dataset_.train_cameras[rng_.uniform_int(static_cast<int>(dataset_.train_cameras.size()))];
    const CameraModel& cam = dataset_.cameras[cam_id];
    const int row = rng_.uniform_int(cam.height);
    const int col = rng_.uniform_int(cam.width);
    const Ray ray = pixel_ray(cam, row, col);
    const Eigen::VectorXd depths =
        stratified_samples(cam.near_depth, cam.far_depth, n, /*jitter=*/true, &rng_);
    const Eigen::VectorXd d = deltas_from_depths(depths, cam.far_depth);
    for (int s = 0; s < n; ++s) {
      const Eigen::Index k = static_cast<Eigen::Index>(b) * n + s;
      pts.row(k) = (ray.origin + depths[s] * ray.dir).transpose();
      dirs.row(k) = ray.dir.transpose();
      deltas[k] = d[s];
    }
    const Image& img = dataset_.images[cam_id][frame];
    for (int ch = 0; ch < 3; ++ch) targets(b, ch) = img.at(row, col, ch);
  }

  store_.zero_grad();
  ad::Tape tape(&store_);

  HexPlaneField::TapeSample sample;
  ad::Var trans_term;
  double ortho_value = 0.0;
  if (is_ref) {
    sample = radiance_->query_tape(tape, tape.constant(pts.col(0)), tape.constant(pts.col(1)),
                                   tape.constant(pts.col(2)), t_i, dirs);
  } else {
    const Se3Field::TapeWarp warped = warp_->warp_tape(tape, pts, t_i, t_hat, cfg_.quad_steps);
    sample = radiance_->query_tape(tape, warped.x, warped.y, warped.z, t_hat, dirs);
    trans_term = translation_magnitude_tape(tape, warped.integrated.v);

    const Eigen::MatrixXd& om = tape.value(warped.integrated.omega);
    const Eigen::MatrixXd& vv = tape.value(warped.integrated.v);
    std::vector<RigidTransform> gs;
    gs.reserve(om.rows());
    for (Eigen::Index i = 0; i < om.rows(); ++i) {
      gs.push_back(exp_se3(Twist{om.row(i).transpose(), vv.row(i).transpose()}));
    }
    ortho_value = ortho_penalty(gs);
  }

  // composite: alpha blending with exclusive transmittance per ray
  const ad::Var delta_c = tape.constant(deltas);
  const ad::Var sig_delta = tape.mul(sample.sigma, delta_c);
  const ad::Var alpha = tape.sub(tape.scalar(1.0), tape.exp(tape.neg(sig_delta)));
  const ad::Var transmittance = tape.exp(tape.neg(tape.seg_cumsum_exclusive(sig_delta, n)));
  const ad::Var weight = tape.mul(transmittance, alpha);
  const ad::Var weighted = tape.seg_sum(tape.mul(sample.rgb, weight), n);
  const ad::Var t_last = tape.exp(tape.neg(tape.seg_sum(sig_delta, n)));
  const ad::Var bg = tape.constant(dataset_.background.transpose());
  const ad::Var color = tape.add(weighted, tape.mul(t_last, bg));
  const ad::Var diff = tape.sub(color, tape.constant(targets));
  const ad::Var pho = cfg_.photometric == PhotometricNorm::kMse
                          ? tape.mean(tape.mul(diff, diff))
                          : tape.mean(tape.abs(diff));
  stats.loss_pho = tape.scalar_value(pho);

  ad::Var total_loss = pho;
  if (!is_ref) {
    const RegularizerBatch reg = RegularizerBatch::sample(
        dataset_.aabb, cfg_.reg_points, cfg_.reg_times, cfg_.fd_step, cfg_.fd_step, rng_);
    const ad::Var div = divergence_loss_tape(tape, *warp_, reg, cfg_.divergence_target);
    const ad::Var mom = momentum_loss_tape(tape, *warp_, reg, "accel_a");
    stats.loss_div = tape.scalar_value(div);
    stats.loss_mom = tape.scalar_value(mom);
    stats.loss_ortho = ortho_value;
    stats.loss_trans = tape.scalar_value(trans_term);
    total_loss = tape.add(total_loss, tape.scale(div, cfg_.lambda_div));
    total_loss = tape.add(total_loss, tape.scale(mom, cfg_.lambda_mom));
    total_loss = tape.add(total_loss, tape.scale(trans_term, cfg_.lambda_trans));
    total_loss = tape.shift(total_loss, cfg_.lambda_se3 * ortho_value);
  }
  stats.total = tape.scalar_value(total_loss);

  if (!std::isfinite(stats.total)) {
    std::cerr << "non-finite loss at iteration " << iteration_ << " frame " << frame
              << " pho=" << stats.loss_pho << " div=" << stats.loss_div
              << " mom=" << stats.loss_mom << " trans=" << stats.loss_trans << "\n";
    throw NonFiniteLoss("trainer: non-finite loss at iteration " + std::to_string(iteration_));
  }

  tape.backward(total_loss);

  AdamConfig rad_cfg;
  rad_cfg.lr = cfg_.lr_radiance;
  adam_step(store_, radiance_group_, adam_radiance_, rad_cfg);
  if (!is_ref) {
    AdamConfig se3_cfg;
    se3_cfg.lr = cfg_.lr_se3;
    adam_step(store_, se3_group_, adam_se3_, se3_cfg);
  }

  ++iteration_;
  stats.elapsed_s = now_seconds() - started_at_;
  log_line(stats);
  return stats;
}

void Trainer::run() {
  while (iteration_ < cfg_.iterations) step();
}

void Trainer::save(const std::string& path) const {
  CheckpointData data;
  data.meta["kind"] = "trainer";
  data.meta["config"] = cfg_.to_json();
  data.meta["iteration"] = iteration_;
  json rng_state = json::array();
  for (std::uint64_t w : rng_.state()) rng_state.push_back(hex_u64(w));
  data.meta["rng"] = rng_state;
  data.meta["adam_radiance_step"] = adam_radiance_.step;
  data.meta["adam_se3_step"] = adam_se3_.step;

  for (int i = 0; i < store_.size(); ++i) {
    data.tensors.emplace_back(store_.name(i), store_.value(i));
  }
  auto dump_state = [&](const char* tag, const std::vector<int>& group, const AdamState& st) {
    if (st.m.empty()) return;
    for (std::size_t k = 0; k < group.size(); ++k) {
      data.tensors.emplace_back(std::string("opt.") + tag + ".m." + store_.name(group[k]),
                                st.m[k]);
      data.tensors.emplace_back(std::string("opt.") + tag + ".v." + store_.name(group[k]),
                                st.v[k]);
    }
  };
  dump_state("radiance", radiance_group_, adam_radiance_);
  dump_state("se3", se3_group_, adam_se3_);
  save_checkpoint(path, data);
}

std::unique_ptr<Trainer> Trainer::resume(const std::string& checkpoint_path,
                                         const std::string& dataset_override,
                                         int iterations_override) {
  const CheckpointData data = load_checkpoint(checkpoint_path);
  if (data.meta.value("kind", std::string{}) != "trainer") {
    throw VersionMismatch("checkpoint: not a trainer checkpoint");
  }
  TrainConfig cfg = TrainConfig::from_json(data.meta.at("config"));
  if (!dataset_override.empty()) cfg.dataset_dir = dataset_override;
  if (iterations_override > 0) cfg.iterations = iterations_override;

  auto trainer = std::make_unique<Trainer>(cfg, Dataset::load(cfg.dataset_dir));

  std::size_t cursor = 0;
  for (int i = 0; i < trainer->store_.size(); ++i) {
    const auto& [name, mat] = data.tensors.at(cursor++);
    if (name != trainer->store_.name(i)) {
      throw VersionMismatch("checkpoint: parameter table mismatch at '" + name + "'");
    }
    if (mat.rows() != trainer->store_.value(i).rows() ||
        mat.cols() != trainer->store_.value(i).cols()) {
      throw VersionMismatch("checkpoint: tensor shape mismatch at '" + name + "'");
    }
    trainer->store_.value(i) = mat;
  }
  auto load_state = [&](const std::vector<int>& group, AdamState& st, std::int64_t step) {
    st.step = step;
    if (cursor >= data.tensors.size()) return;
    if (data.tensors[cursor].first.rfind("opt.", 0) != 0) return;
    st.m.clear();
    st.v.clear();
    for (std::size_t k = 0; k < group.size(); ++k) {
      st.m.push_back(data.tensors.at(cursor++).second);
      st.v.push_back(data.tensors.at(cursor++).second);
    }
  };
  const std::int64_t rad_step = data.meta.value("adam_radiance_step", 0);
  const std::int64_t se3_step = data.meta.value("adam_se3_step", 0);
  if (rad_step > 0) load_state(trainer->radiance_group_, trainer->adam_radiance_, rad_step);
  if (se3_step > 0) load_state(trainer->se3_group_, trainer->adam_se3_, se3_step);

  std::array<std::uint64_t, 4> rng_state{};
  const auto& rj = data.meta.at("rng");
  for (int i = 0; i < 4; ++i) rng_state[i] = u64_from_hex(rj.at(i).get<std::string>());
  trainer->rng_.set_state(rng_state);
  trainer->iteration_ = data.meta.at("iteration").get<int>();
  return trainer;
}

Image Trainer::render_frame(int camera, int frame) const {
  if (camera < 0 || camera >= static_cast<int>(dataset_.cameras.size()) || frame < 0 ||
      frame >= dataset_.frame_count) {
    throw std::invalid_argument("render_frame: camera or frame out of range");
  }
  RenderConfig rcfg;
  rcfg.samples_per_ray = cfg_.samples_per_ray;
  rcfg.quad_steps = cfg_.quad_steps;
  rcfg.background = dataset_.background;
  return render_image(store_, *radiance_, warp_.get(), &schedule_, dataset_.cameras[camera],
                      dataset_.timestamps[frame], rcfg);
}

EvalReport Trainer::evaluate(const std::string& split) const {
  const std::vector<int>* frames = nullptr;
  if (split == "interpolation") {
    frames = &dataset_.train_frames;
  } else if (split == "extrapolation") {
    frames = &dataset_.extrap_frames;
  } else {
    throw std::invalid_argument("evaluate: split must be interpolation or extrapolation");
  }
  if (frames->empty() || dataset_.holdout_cameras.empty()) {
    throw EmptySplit("evaluate: split '" + split + "' has no view/frame pairs");
  }

  EvalReport report;
  report.split = split;
  double psnr_acc = 0, ssim_acc = 0;
  for (int cam : dataset_.holdout_cameras) {
    for (int frame : *frames) {
      const Image img = render_frame(cam, frame);
      EvalRow row;
      row.camera = cam;
      row.frame = frame;
      row.psnr = psnr(img, dataset_.images[cam][frame]);
      row.ssim = ssim(img, dataset_.images[cam][frame]);
      psnr_acc += row.psnr;
      ssim_acc += row.ssim;
      report.rows.push_back(row);
    }
  }
  report.mean_psnr = psnr_acc / static_cast<double>(report.rows.size());
  report.mean_ssim = ssim_acc / static_cast<double>(report.rows.size());
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "split: " << split << "\n";
  os << "view  frame     PSNR     SSIM\n";
  char buf[80];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%4d  %5d  %7.3f  %7.4f\n", r.camera, r.frame, r.psnr,
                  r.ssim);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean         %7.3f  %7.4f\n", mean_psnr, mean_ssim);
  os << buf;
  return os.str();
}

json EvalReport::to_json() const {
  json j;
  j["split"] = split;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back(
        {{"camera", r.camera}, {"frame", r.frame}, {"psnr", r.psnr}, {"ssim", r.ssim}});
  }
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  return j;
}

FitTwistReport fit_twist_file(const std::string& tracks_path) {
  std::ifstream f(tracks_path);
  if (!f) throw IoFailure("fit-twist: cannot open '" + tracks_path + "'");
  const std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ParseError("fit-twist: parse error at line " + std::to_string(line) + ": " + e.what());
  }

  FitTwistReport report;
  try {
    for (const auto& prim : j.at("primitives")) {
      const int index = prim.at("index").get<int>();
      const auto ts = prim.at("timestamps").get<std::vector<double>>();
      const auto& frames = prim.at("positions");
      const auto& gts = prim.at("pair_twists");
      auto to_matrix = [](const json& rows) {
        Eigen::MatrixXd m(rows.size(), 3);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          for (int a = 0; a < 3; ++a) m(static_cast<Eigen::Index>(k), a) = rows[k][a];
        }
        return m;
      };
      for (std::size_t fidx = 0; fidx + 1 < frames.size(); ++fidx) {
        const Eigen::MatrixXd p0 = to_matrix(frames[fidx]);
        const Eigen::MatrixXd p1 = to_matrix(frames[fidx + 1]);
        const double dt = ts.at(fidx + 1) - ts.at(fidx);
        const Twist fitted = fit_twist(p0, p1, dt);
        const auto& gt = gts.at(fidx);
        double err = 0;
        for (int a = 0; a < 3; ++a) {
          err = std::max(err, std::abs(fitted.omega[a] - gt.at(a).get<double>()));
          err = std::max(err, std::abs(fitted.v[a] - gt.at(a + 3).get<double>()));
        }
        report.rows.push_back({index, static_cast<int>(fidx), err});
        report.max_error = std::max(report.max_error, err);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit-twist: ") + e.what());
  }
  return report;
}

std::string FitTwistReport::to_text() const {
  std::ostringstream os;
  os << "primitive  pair    max component error\n";
  char buf[80];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%9d  %4d    %.3e\n", r.primitive, r.frame,
                  r.max_component_error);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "overall max error: %.3e\n", max_error);
  os << buf;
  return os.str();
}

}  // namespace lieflow
