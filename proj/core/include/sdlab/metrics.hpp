#pragma once

#include "sdlab/scene.hpp"

#include <string>

namespace sdlab {

// Peak signal-to-noise for unit-range data; identical inputs saturate at
// 99 dB instead of infinity so aggregates stay finite.
double psnr(const Vec& a, const Vec& b);
double psnr(const ObjectGrid& a, const ObjectGrid& b);

// Mean structural similarity with a 7x7 uniform window (population
// statistics, unit dynamic range).
double ssim(const ObjectGrid& a, const ObjectGrid& b);

// Same statistic over sliding length-7 windows of a 1-D signal; used to
// compare latent vectors where a 2-D window makes no sense.
double ssim_signal(const Vec& a, const Vec& b);

struct MetricReport {
  std::string experiment;
  std::string cell;
  std::uint64_t seed = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

double median(std::vector<double> v);
double iqr(std::vector<double> v);

}  // namespace sdlab
