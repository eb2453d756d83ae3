#pragma once

// Oracles and fixtures shared by the unit and acceptance tests. Nothing here
// calls into the code under test for the value it is checking.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "fedgru/gru.h"

namespace testsupport {

inline double brute_mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double brute_population_std(std::span<const double> v) {
  const double m = brute_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline double brute_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Squared-error loss written out independently of the library.
inline double half_mse(std::span<const double> pred, std::span<const double> target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / (2.0 * static_cast<double>(pred.size()));
}

// Central-difference gradient of the train-mode loss with the dropout
// masks fixed by `seed`.
inline std::vector<double> finite_difference_gradient(const fedgru::grunet::ModelParams& params,
                                                      std::span<const double> inputs,
                                                      std::span<const double> targets,
                                                      double dropout_p,
                                                      std::uint64_t seed,
                                                      double step = 1e-5) {
  using namespace fedgru::grunet;
  std::vector<double> grad(params.flatten().size());
  auto probe = params;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double keep = probe.flat()[i];
    probe.flat()[i] = keep + step;
    const auto up = forward_sequence(inputs, probe, dropout_p, Mode::train, seed).outputs;
    probe.flat()[i] = keep - step;
    const auto down = forward_sequence(inputs, probe, dropout_p, Mode::train, seed).outputs;
    probe.flat()[i] = keep;
    grad[i] = (half_mse(up, targets) - half_mse(down, targets)) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Reference per-round rates for the 10%..50% attack sweep, rounded to three
// places: [round][fraction] = {ACC, DR, FPR, FNR}.
inline constexpr std::array<double, 5> kTableFractions{0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr double kTableRates[10][5][4] = {
    {{0.92, 0.66, 0.051, 0.34}, {0.892, 0.68, 0.055, 0.32}, {0.87, 0.686, 0.051, 0.31}, {0.838, 0.67, 0.05, 0.33}, {0.806, 0.66, 0.048, 0.34}},
    {{0.926, 0.68, 0.046, 0.32}, {0.908, 0.71, 0.042, 0.29}, {0.89, 0.713, 0.04, 0.28}, {0.87, 0.73, 0.036, 0.27}, {0.84, 0.708, 0.028, 0.29}},
    {{0.926, 0.72, 0.051, 0.28}, {0.89, 0.68, 0.057, 0.32}, {0.85, 0.653, 0.06, 0.34}, {0.822, 0.65, 0.063, 0.35}, {0.784, 0.632, 0.064, 0.36}},
    {{0.942, 0.74, 0.035, 0.26}, {0.914, 0.71, 0.035, 0.29}, {0.87, 0.64, 0.028, 0.36}, {0.832, 0.62, 0.026, 0.38}, {0.794, 0.62, 0.032, 0.38}},
    {{0.934, 0.74, 0.044, 0.26}, {0.902, 0.69, 0.045, 0.31}, {0.87, 0.673, 0.048, 0.32}, {0.838, 0.665, 0.046, 0.33}, {0.796, 0.644, 0.052, 0.35}},
    {{0.936, 0.62, 0.028, 0.38}, {0.92, 0.71, 0.027, 0.29}, {0.89, 0.693, 0.028, 0.30}, {0.858, 0.695, 0.033, 0.30}, {0.84, 0.704, 0.024, 0.29}},
    {{0.94, 0.88, 0.053, 0.12}, {0.90, 0.72, 0.055, 0.28}, {0.86, 0.673, 0.054, 0.32}, {0.822, 0.645, 0.06, 0.35}, {0.788, 0.636, 0.06, 0.36}},
    {{0.93, 0.74, 0.049, 0.26}, {0.904, 0.71, 0.047, 0.29}, {0.87, 0.693, 0.051, 0.30}, {0.842, 0.68, 0.05, 0.32}, {0.822, 0.692, 0.048, 0.30}},
    {{0.868, 0.70, 0.113, 0.30}, {0.85, 0.68, 0.107, 0.32}, {0.82, 0.66, 0.114, 0.34}, {0.798, 0.665, 0.113, 0.33}, {0.782, 0.664, 0.10, 0.33}},
    {{0.90, 0.68, 0.075, 0.32}, {0.896, 0.73, 0.062, 0.27}, {0.87, 0.706, 0.057, 0.29}, {0.842, 0.685, 0.053, 0.31}, {0.81, 0.68, 0.06, 0.32}},
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fedgru_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testsupport
