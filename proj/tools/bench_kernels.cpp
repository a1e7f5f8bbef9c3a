#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <random>
#include <vector>

#include "ddgcn/kernels.hpp"

// Times the OpenMP kernels against the serial reference on square matmuls and
// elementwise sweeps, and verifies the two variants agree bitwise.

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

std::vector<double> random_matrix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

template <typename Fn>
double best_of(std::size_t reps, Fn&& fn) {
  double best = 1e300;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds(t0, Clock::now()));
  }
  return best;
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  std::cout << "kernel,size,serial_s,parallel_s,speedup,bitwise_equal\n";

  for (std::size_t n : {64u, 128u, 256u, 512u}) {
    const std::vector<double> a = random_matrix(n * n, rng);
    const std::vector<double> b = random_matrix(n * n, rng);
    std::vector<double> c_serial(n * n), c_parallel(n * n);
    const double ts = best_of(3, [&] {
      ddgcn::kern::serial::matmul_nn(a.data(), b.data(), c_serial.data(), n, n, n);
    });
    const double tp = best_of(3, [&] {
      ddgcn::kern::matmul_nn(a.data(), b.data(), c_parallel.data(), n, n, n);
    });
    std::cout << "matmul_nn," << n << "," << ts << "," << tp << "," << ts / tp << ","
              << (c_serial == c_parallel ? "yes" : "no") << "\n";
  }

  for (std::size_t n : {std::size_t(1) << 16, std::size_t(1) << 20, std::size_t(1) << 22}) {
    const std::vector<double> x = random_matrix(n, rng);
    std::vector<double> y_serial(n), y_parallel(n);
    const double ts = best_of(3, [&] { ddgcn::kern::serial::sigmoid(x.data(), y_serial.data(), n); });
    const double tp = best_of(3, [&] { ddgcn::kern::sigmoid(x.data(), y_parallel.data(), n); });
    std::cout << "sigmoid," << n << "," << ts << "," << tp << "," << ts / tp << ","
              << (y_serial == y_parallel ? "yes" : "no") << "\n";
  }
  return 0;
}
