#include "lieflow/render.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "lieflow/errors.hpp"

namespace lieflow {

void CameraModel::require_valid() const {
  if (fx <= 0 || fy <= 0 || width <= 0 || height <= 0 || !(near_depth < far_depth)) {
    throw DatasetInvalid("camera: bad intrinsics or depth range");
  }
}

Ray pixel_ray(const CameraModel& cam, int row, int col) {
  if (row < 0 || row >= cam.height || col < 0 || col >= cam.width) {
    throw PixelOutOfBounds("pixel_ray: pixel outside image");
  }
  Eigen::Vector3d dir_cam((col + 0.5 - cam.cx) / cam.fx, -(row + 0.5 - cam.cy) / cam.fy, -1.0);
  dir_cam.normalize();
  Ray ray;
  ray.origin = cam.cam_to_world.t;
  ray.dir = cam.cam_to_world.R * dir_cam;
  return ray;
}

std::vector<Ray> gen_rays(const CameraModel& cam,
                          std::span<const std::pair<int, int>> pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const auto& [row, col] : pixels) rays.push_back(pixel_ray(cam, row, col));
  return rays;
}

Eigen::VectorXd stratified_samples(double near, double far, int n, bool jitter, Rng* rng) {
  if (!(near < far) || n < 1) throw std::invalid_argument("stratified_samples: bad range");
  Eigen::VectorXd depths(n);
  const double bin = (far - near) / n;
  for (int i = 0; i < n; ++i) {
    const double offset = jitter ? rng->uniform() : 0.5;
    depths[i] = near + bin * (i + offset);
  }
  return depths;
}

Eigen::VectorXd deltas_from_depths(const Eigen::VectorXd& depths, double far) {
  const int n = static_cast<int>(depths.size());
  Eigen::VectorXd deltas(n);
  for (int i = 0; i + 1 < n; ++i) deltas[i] = depths[i + 1] - depths[i];
  deltas[n - 1] = far - depths[n - 1];
  return deltas;
}

Eigen::Vector3d volume_render(const Eigen::VectorXd& sigmas, const Eigen::MatrixXd& colors,
                              const Eigen::VectorXd& deltas,
                              const Eigen::Vector3d& background) {
  const Eigen::Index n = sigmas.size();
  if (colors.rows() != n || deltas.size() != n || colors.cols() != 3) {
    throw ShapeMismatch("volume_render: misaligned inputs");
  }
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  double transmittance = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double alpha = 1.0 - std::exp(-sigmas[i] * deltas[i]);
    acc += transmittance * alpha * colors.row(i).transpose();
    transmittance *= 1.0 - alpha;
  }
  return acc + transmittance * background;
}

int worker_count() {
  if (const char* env = std::getenv("LIEFLOW_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

Image render_image_field(const BatchFieldFn& field, const CameraModel& cam, double t,
                         const RenderConfig& cfg) {
  cam.require_valid();
  Image img(cam.width, cam.height);

  const Eigen::VectorXd depths =
      stratified_samples(cam.near_depth, cam.far_depth, cfg.samples_per_ray, false, nullptr);
  const Eigen::VectorXd deltas = deltas_from_depths(depths, cam.far_depth);
  const int n = cfg.samples_per_ray;

  auto render_rows = [&](int row_begin, int row_end) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(cam.width) * n, 3);
    Eigen::MatrixXd dirs(pts.rows(), 3);
    Eigen::VectorXd sigma;
    Eigen::MatrixXd rgb;
    for (int r = row_begin; r < row_end; ++r) {
      for (int c = 0; c < cam.width; ++c) {
        const Ray ray = pixel_ray(cam, r, c);
        for (int s = 0; s < n; ++s) {
          const Eigen::Index k = static_cast<Eigen::Index>(c) * n + s;
          pts.row(k) = (ray.origin + depths[s] * ray.dir).transpose();
          dirs.row(k) = ray.dir.transpose();
        }
      }
      field(pts, t, dirs, sigma, rgb);
      for (int c = 0; c < cam.width; ++c) {
        const Eigen::Vector3d color =
            volume_render(sigma.segment(static_cast<Eigen::Index>(c) * n, n),
                          rgb.middleRows(static_cast<Eigen::Index>(c) * n, n), deltas,
                          cfg.background);
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = color[ch];
      }
    }
  };

  const int workers = std::min(worker_count(), cam.height);
  if (workers <= 1) {
    render_rows(0, cam.height);
  } else {
    std::vector<std::thread> pool;
    const int rows_per = (cam.height + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int lo = w * rows_per;
      const int hi = std::min(cam.height, lo + rows_per);
      if (lo >= hi) break;
      pool.emplace_back(render_rows, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return img;
}

Image render_image(const ParamStore& store, const HexPlaneField& radiance,
                   const Se3Field* warp, const ReferenceSchedule* schedule,
                   const CameraModel& cam, double t_i, const RenderConfig& cfg) {
  double t_query = t_i;
  bool do_warp = false;
  if (warp != nullptr && schedule != nullptr) {
    const double t_hat = nearest_ref(t_i, *schedule);
    do_warp = t_hat != t_i;
    t_query = t_hat;
  }

  const BatchFieldFn field = [&](const Eigen::MatrixXd& pts, double /*t*/,
                                 const Eigen::MatrixXd& dirs, Eigen::VectorXd& sigma,
                                 Eigen::MatrixXd& rgb) {
    if (do_warp) {
      Eigen::MatrixXd warped;
      warp->warp_batch(store, pts, t_i, t_query, cfg.quad_steps, warped);
      radiance.query_batch(store, warped, t_query, dirs, sigma, rgb);
    } else {
      radiance.query_batch(store, pts, t_query, dirs, sigma, rgb);
    }
  };
  return render_image_field(field, cam, t_i, cfg);
}

}  // namespace lieflow
