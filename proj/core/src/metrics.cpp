// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include "plasm/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace plasm::metrics {

namespace {

constexpr int64_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int64_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - (kWindow - 1) / 2.0;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[static_cast<size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable valid-region Gaussian filter of an H x W plane into
// (H-10) x (W-10); `src` is any per-pixel product of the inputs.
void filter_valid(const std::vector<double>& src, int64_t h, int64_t w,
                  const std::array<double, kWindow>& g, std::vector<double>& tmp,
                  std::vector<double>& dst) {
  const int64_t ow = w - kWindow + 1;
  const int64_t oh = h - kWindow + 1;
  tmp.resize(static_cast<size_t>(h * ow));
  dst.resize(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < h; ++y) {
    const double* row = src.data() + y * w;
    double* trow = tmp.data() + y * ow;
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < kWindow; ++i) acc += g[static_cast<size_t>(i)] * row[x + i];
      trow[x] = acc;
    }
  }
  for (int64_t y = 0; y < oh; ++y) {
    double* drow = dst.data() + y * ow;
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t j = 0; j < kWindow; ++j) acc += g[static_cast<size_t>(j)] * tmp[(y + j) * ow + x];
      drow[x] = acc;
    }
  }
}

double ssim_plane(const float* a, const float* b, int64_t h, int64_t w) {
  static const auto g = gaussian_kernel();
  const int64_t n = h * w;
  std::vector<double> xa(static_cast<size_t>(n)), xb(static_cast<size_t>(n));
  std::vector<double> xaa(static_cast<size_t>(n)), xbb(static_cast<size_t>(n)), xab(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double va = a[i], vb = b[i];
    xa[static_cast<size_t>(i)] = va;
    xb[static_cast<size_t>(i)] = vb;
    xaa[static_cast<size_t>(i)] = va * va;
    xbb[static_cast<size_t>(i)] = vb * vb;
    xab[static_cast<size_t>(i)] = va * vb;
  }
  std::vector<double> tmp, mu_a, mu_b, e_aa, e_bb, e_ab;
  filter_valid(xa, h, w, g, tmp, mu_a);
  filter_valid(xb, h, w, g, tmp, mu_b);
  filter_valid(xaa, h, w, g, tmp, e_aa);
  filter_valid(xbb, h, w, g, tmp, e_bb);
  filter_valid(xab, h, w, g, tmp, e_ab);

  double acc = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
           ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim_frame(const float* a, const float* b, int64_t channels, int64_t height, int64_t width) {
  require(height >= kWindow && width >= kWindow,
          "ssim: frame smaller than the 11x11 window");
  double acc = 0.0;
  for (int64_t c = 0; c < channels; ++c)
    acc += ssim_plane(a + c * height * width, b + c * height * width, height, width);
  return acc / static_cast<double>(channels);
}

namespace reference {

double ssim_frame(const float* a, const float* b, int64_t channels, int64_t height, int64_t width) {
  require(height >= kWindow && width >= kWindow,
          "ssim: frame smaller than the 11x11 window");
  static const auto g = gaussian_kernel();
  const int64_t oh = height - kWindow + 1;
  const int64_t ow = width - kWindow + 1;
  double acc_channels = 0.0;
  for (int64_t c = 0; c < channels; ++c) {
    const float* pa = a + c * height * width;
    const float* pb = b + c * height * width;
    double acc = 0.0;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        double ma = 0.0, mb = 0.0, eaa = 0.0, ebb = 0.0, eab = 0.0;
        for (int64_t j = 0; j < kWindow; ++j) {
          for (int64_t i = 0; i < kWindow; ++i) {
            const double wgt = g[static_cast<size_t>(j)] * g[static_cast<size_t>(i)];
            const double va = pa[(y + j) * width + (x + i)];
            const double vb = pb[(y + j) * width + (x + i)];
            ma += wgt * va;
            mb += wgt * vb;
            eaa += wgt * va * va;
            ebb += wgt * vb * vb;
            eab += wgt * va * vb;
          }
        }
        const double var_a = eaa - ma * ma;
        const double var_b = ebb - mb * mb;
        const double cov = eab - ma * mb;
        acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      }
    }
    acc_channels += acc / static_cast<double>(oh * ow);
  }
  return acc_channels / static_cast<double>(channels);
}

}  // namespace reference

double psnr_from_mse(double per_pixel_mse) {
  if (per_pixel_mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / per_pixel_mse);
}

MetricReport evaluate(const std::vector<float>& pred, const std::vector<float>& gt,
                      int64_t batch, int64_t frames, int64_t channels, int64_t height,
                      int64_t width) {
  const int64_t fe = channels * height * width;
  require(static_cast<int64_t>(pred.size()) == batch * frames * fe &&
              pred.size() == gt.size(),
          "evaluate: buffer sizes do not match the stated dimensions");

  MetricReport report;
  report.per_frame.resize(static_cast<size_t>(frames));
  double total_sq = 0.0;
  for (int64_t t = 0; t < frames; ++t) {
    double f_sq = 0.0, f_abs = 0.0, f_ssim = 0.0;
    for (int64_t b = 0; b < batch; ++b) {
      const float* pp = pred.data() + (b * frames + t) * fe;
      const float* pg = gt.data() + (b * frames + t) * fe;
      for (int64_t i = 0; i < fe; ++i) {
        const double d = static_cast<double>(pp[i]) - static_cast<double>(pg[i]);
        f_sq += d * d;
        f_abs += std::abs(d);
      }
      f_ssim += ssim_frame(pp, pg, channels, height, width);
    }
    auto& fm = report.per_frame[static_cast<size_t>(t)];
    fm.mse = f_sq / static_cast<double>(batch);
    fm.mae = f_abs / static_cast<double>(batch);
    fm.ssim = f_ssim / static_cast<double>(batch);
    fm.psnr_db = psnr_from_mse(f_sq / static_cast<double>(batch * fe));
    report.mse += fm.mse;
    report.mae += fm.mae;
    report.ssim += fm.ssim;
    total_sq += f_sq;
  }
  report.mse /= static_cast<double>(frames);
  report.mae /= static_cast<double>(frames);
  report.ssim /= static_cast<double>(frames);
  report.psnr_db = psnr_from_mse(total_sq / static_cast<double>(batch * frames * fe));
  return report;
}

std::string report_text(const MetricReport& report) {
  auto fmt = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  std::string out;
  out += "# pixels in [0,1]; mse/mae: mean over clips+frames, sum over C,H,W; "
         "psnr: 10*log10(1/per-pixel mse)\n";
  out += "mse\t" + fmt(report.mse) + "\n";
  out += "mae\t" + fmt(report.mae) + "\n";
  out += "ssim\t" + fmt(report.ssim) + "\n";
  out += "psnr_db\t" + fmt(report.psnr_db) + "\n";
  return out;
}

}  // namespace plasm::metrics
