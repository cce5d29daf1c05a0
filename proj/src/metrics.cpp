#include "lieflow/metrics.hpp"

#include <cmath>
#include <vector>

#include "lieflow/errors.hpp"

namespace lieflow {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeMismatch("metrics: image shapes disagree");
  }
}

}  // namespace

double mse(const Image& img, const Image& ref) {
  require_same_shape(img, ref);
  double acc = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = img.data[i] - ref.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(img.data.size());
}

double psnr(const Image& img, const Image& ref) {
  const double m = mse(img, ref);
  if (m < 1e-10) return 99.0;
  return -10.0 * std::log10(m);
}

double ssim(const Image& img, const Image& ref) {
  require_same_shape(img, ref);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (img.width < kWin || img.height < kWin) {
    throw ShapeMismatch("ssim: image smaller than the 11x11 window");
  }

  double kernel[kWin][kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double di = i - kWin / 2, dj = j - kWin / 2;
      kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      ksum += kernel[i][j];
    }
  }
  for (auto& row : kernel)
    for (double& k : row) k /= ksum;

  double total = 0.0;
  std::size_t count = 0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r + kWin <= img.height; ++r) {
      for (int c = 0; c + kWin <= img.width; ++c) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < kWin; ++i) {
          for (int j = 0; j < kWin; ++j) {
            const double w = kernel[i][j];
            const double x = img.at(r + i, c + j, ch);
            const double y = ref.at(r + i, c + j, ch);
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cov = sxy - mx * my;
        total += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace lieflow
