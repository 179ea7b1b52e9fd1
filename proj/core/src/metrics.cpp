#include "sdlab/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sdlab {

double psnr(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("psnr: size mismatch");
  const double mse = (a - b).squaredNorm() / a.size();
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const ObjectGrid& a, const ObjectGrid& b) { return psnr(a.values, b.values); }

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

double ssim_window(const double* a, const double* b, int count, const int* idx) {
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < count; ++i) {
    ma += a[idx[i]];
    mb += b[idx[i]];
  }
  ma /= count;
  mb /= count;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (int i = 0; i < count; ++i) {
    const double da = a[idx[i]] - ma, db = b[idx[i]] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= count;
  vb /= count;
  cov /= count;
  return ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
         ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

}  // namespace

double ssim(const ObjectGrid& a, const ObjectGrid& b) {
  if (a.side != b.side) throw std::invalid_argument("ssim: side mismatch");
  const int n = a.side;
  const int win = 7;
  if (n < win) throw std::invalid_argument("ssim: grid smaller than window");

  int idx[win * win];
  double acc = 0.0;
  int windows = 0;
  for (int y = 0; y + win <= n; ++y)
    for (int x = 0; x + win <= n; ++x) {
      int c = 0;
      for (int wy = 0; wy < win; ++wy)
        for (int wx = 0; wx < win; ++wx) idx[c++] = (y + wy) * n + (x + wx);
      acc += ssim_window(a.values.data(), b.values.data(), win * win, idx);
      ++windows;
    }
  return acc / windows;
}

double ssim_signal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ssim_signal: size mismatch");
  const int win = 7;
  const int n = static_cast<int>(a.size());
  if (n < win) throw std::invalid_argument("ssim_signal: signal shorter than window");

  int idx[win];
  double acc = 0.0;
  int windows = 0;
  for (int x = 0; x + win <= n; ++x) {
    for (int w = 0; w < win; ++w) idx[w] = x + w;
    acc += ssim_window(a.data(), b.data(), win, idx);
    ++windows;
  }
  return acc / windows;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return (v.size() % 2 == 1) ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double iqr(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("iqr: empty input");
  std::sort(v.begin(), v.end());
  // linear-interpolated quartiles
  auto quantile = [&v](double q) {
    const double pos = q * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - i;
    return (i + 1 < v.size()) ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace sdlab
