#include <cmath>
#include <random>

#include "ddgcn/gradcheck.hpp"
#include "ddgcn/l2c.hpp"
#include "doctest.h"

using namespace ddgcn;

TEST_CASE("adjacency_weights: closed-form cases") {
  auto eye = Tensor::parameter({2, 2}, {1, 0, 0, 1});
  auto h = Tensor::constant({2, 2}, {1, 0, 1, 0});
  auto r = adjacency_weights(h, eye, eye);
  // Every pair has q.k = 1, so every score is sigma(1).
  for (double v : r.values()) CHECK(v == doctest::Approx(0.7310585786).epsilon(1e-9));

  // A negative query is killed by relu, leaving sigma(0) = 0.5 for every key.
  auto hneg = Tensor::constant({2, 2}, {-1, 0, 1, 0});
  auto rneg = adjacency_weights(hneg, eye, eye);
  CHECK(rneg.at(0, 0) == 0.5);
  CHECK(rneg.at(0, 1) == 0.5);
  CHECK(rneg.at(1, 1) == doctest::Approx(0.7310585786).epsilon(1e-9));
}

TEST_CASE("adjacency_weights: gradients to both projections") {
  std::mt19937_64 rng(3);
  auto h = Tensor::uniform({4, 3}, -1, 1, rng);
  auto wq = Tensor::uniform({3, 2}, -1, 1, rng, true);
  auto wk = Tensor::uniform({3, 2}, -1, 1, rng, true);
  auto res = check_gradients([&] { return reduce_sum(adjacency_weights(h, wq, wk)); },
                             {{"wq", wq}, {"wk", wk}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("differentiable_threshold: kept, boundary, and dropped entries") {
  L2CConfig cfg;
  auto r = Tensor::parameter({3}, {0.7, 0.5, 0.3});
  auto g = differentiable_threshold(r, cfg);

  CHECK(g->edge_count == 1);
  CHECK(g->kept == std::vector<std::uint8_t>{1, 0, 0});
  CHECK(g->masked.values()[0] == doctest::Approx(0.9999985714).epsilon(1e-9));
  CHECK(g->masked.values()[1] == 0.0);  // r == mu drops: strict inequality
  CHECK(g->masked.values()[2] == 0.0);

  backward(reduce_sum(g->masked));
  CHECK(r.grad()[0] == doctest::Approx(1.4285693877).epsilon(1e-9));
  CHECK(r.grad()[1] == 0.0);
  CHECK(r.grad()[2] == 0.0);
}

TEST_CASE("threshold law on random weights") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  L2CConfig cfg;

  std::vector<double> rv(2000);
  for (double& x : rv) {
    do {
      x = unit(rng);
    } while (std::abs(x - cfg.mu) <= 1e-3);
  }
  auto r = Tensor::parameter({rv.size()}, rv);
  auto g = differentiable_threshold(r, cfg);
  backward(reduce_sum(g->masked));

  long long kept = 0;
  for (std::size_t i = 0; i < rv.size(); ++i) {
    if (rv[i] > cfg.mu) {
      ++kept;
      CHECK(g->masked.values()[i] == rv[i] / (rv[i] + cfg.eps));  // exact
      CHECK(g->masked.values()[i] >= 1.0 - 2e-6);
      CHECK(g->masked.values()[i] < 1.0);
      CHECK(r.grad()[i] == 1.0 / (rv[i] + cfg.eps));
    } else {
      CHECK(g->masked.values()[i] == 0.0);
      CHECK(r.grad()[i] == 0.0);
    }
  }
  CHECK(g->edge_count == kept);

  // Finite differences agree with the 1/(r+eps) law away from the boundary.
  auto small = Tensor::parameter({4}, {0.72, 0.18, 0.91, 0.503});
  auto res = check_gradients(
      [&] { return reduce_sum(differentiable_threshold(small, cfg)->masked); },
      {{"r", small}});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("l0_penalty: counts kept edges to within the eps bound") {
  L2CConfig cfg;
  auto r = Tensor::parameter({4}, {0.9, 0.9, 0.9, 0.2});
  auto g = differentiable_threshold(r, cfg);
  auto l0 = l0_penalty({g});
  CHECK(l0.item() == doctest::Approx(2.9999966667).epsilon(1e-9));

  auto cold = differentiable_threshold(Tensor::parameter({4}, {0.1, 0.2, 0.3, 0.5}), cfg);
  CHECK(l0_penalty({cold}).item() == 0.0);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> rv(64);
    for (double& x : rv) x = unit(rng);
    auto graph = differentiable_threshold(Tensor::parameter({8, 8}, rv), cfg);
    auto graph2 = differentiable_threshold(
        Tensor::parameter({8, 8}, std::vector<double>(rv.rbegin(), rv.rend())), cfg);
    const double total = l0_penalty({graph, graph2}).item();
    const auto count = static_cast<double>(graph->edge_count + graph2->edge_count);
    CHECK(std::abs(total - count) <= count * 2e-6);
  }
}

TEST_CASE("symmetrize: averaging and fixpoints") {
  auto r = Tensor::constant({2, 2}, {0.8, 0.6, 0.2, 0.4});
  auto s = symmetrize(r);
  CHECK(s.at(0, 0) == 0.8);
  CHECK(s.at(0, 1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(s.at(1, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(s.at(1, 1) == 0.4);

  auto sym = Tensor::constant({2, 2}, {0.1, 0.7, 0.7, 0.9});
  auto fix = symmetrize(sym);
  for (std::size_t i = 0; i < 4; ++i) CHECK(fix.values()[i] == sym.values()[i]);
}

TEST_CASE("undirected pipeline: masked adjacency is exactly symmetric") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  L2CConfig cfg;
  cfg.undirected = true;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> rv(49);
    for (double& x : rv) x = unit(rng);
    auto g = differentiable_threshold(symmetrize(Tensor::constant({7, 7}, rv)), cfg);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(g->masked.at(i, j) == g->masked.at(j, i));  // bitwise
      }
    }
  }
}

TEST_CASE("mask consistency: nonzero exactly where raw exceeds the threshold") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  L2CConfig cfg;
  std::vector<double> rv(100);
  for (double& x : rv) x = unit(rng);
  auto g = differentiable_threshold(Tensor::constant({10, 10}, rv), cfg);
  long long nonzero = 0;
  for (std::size_t i = 0; i < rv.size(); ++i) {
    CHECK((g->masked.values()[i] != 0.0) == (rv[i] > cfg.mu));
    nonzero += g->masked.values()[i] != 0.0 ? 1 : 0;
  }
  CHECK(nonzero == g->edge_count);
}
