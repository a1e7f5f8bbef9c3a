#include <cmath>
#include <random>
#include <vector>

#include "ddgcn/dgcn.hpp"
#include "ddgcn/gradcheck.hpp"
#include "doctest.h"

using namespace ddgcn;

namespace {

// Applies row permutation perm to a square matrix on both sides: P A P^T.
std::vector<double> permute_both(const std::vector<double>& a, std::size_t n,
                                 const std::vector<std::size_t>& perm) {
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[perm[i] * n + perm[j]];
  return out;
}

std::vector<double> permute_rows(const std::vector<double>& h, std::size_t n, std::size_t d,
                                 const std::vector<std::size_t>& perm) {
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = h[perm[i] * d + j];
  return out;
}

}  // namespace

TEST_CASE("normalize_adjacency: hand-checkable matrices") {
  auto zero = Tensor::constant({3, 3}, std::vector<double>(9, 0.0));
  auto eye = normalize_adjacency(zero);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(eye.at(i, j) == (i == j ? 1.0 : 0.0));

  auto ring = normalize_adjacency(Tensor::constant({2, 2}, {0, 1, 1, 0}));
  for (double v : ring.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  // Asymmetric case run through the same formula: D = diag(2, 1).
  auto directed = normalize_adjacency(Tensor::constant({2, 2}, {0, 1, 0, 0}));
  CHECK(directed.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(directed.at(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(directed.at(1, 0) == 0.0);
  CHECK(directed.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_adjacency: symmetric input gives symmetric output") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> a(36, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      const double v = unit(rng) > 0.5 ? 1.0 : 0.0;
      a[i * 6 + j] = v;
      a[j * 6 + i] = v;
    }
  }
  auto norm = normalize_adjacency(Tensor::constant({6, 6}, a));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(norm.at(i, j) == doctest::Approx(norm.at(j, i)).epsilon(1e-12));
}

TEST_CASE("normalize_adjacency: gradient flows through entries and degrees") {
  std::mt19937_64 rng(9);
  auto a = Tensor::uniform({4, 4}, 0.2, 1.0, rng, true);
  auto res = check_gradients([&] { return reduce_sum(sigmoid(normalize_adjacency(a))); },
                             {{"a", a}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("propagate: identity and averaging") {
  auto h = Tensor::constant({2, 2}, {2, 0, 0, 2});
  auto id = Tensor::constant({2, 2}, {1, 0, 0, 1});
  auto same = propagate(h, id);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.values()[i] == h.values()[i]);

  auto half = Tensor::constant({2, 2}, {0.5, 0.5, 0.5, 0.5});
  auto avg = propagate(h, half);
  for (double v : avg.values()) CHECK(v == 1.0);
}

TEST_CASE("propagate: gradients to features and adjacency") {
  std::mt19937_64 rng(21);
  auto h = Tensor::uniform({3, 2}, -1, 1, rng, true);
  auto a = Tensor::uniform({3, 3}, -1, 1, rng, true);
  auto res = check_gradients([&] { return reduce_sum(propagate(h, a)); },
                             {{"h", h}, {"a", a}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gcn_layer: identity, annihilation, gradient") {
  auto h = Tensor::constant({2, 2}, {1, 2, 3, 4});
  auto id = Tensor::constant({2, 2}, {1, 0, 0, 1});
  auto out = gcn_layer(h, id, id);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.values()[i] == h.values()[i]);

  auto zero = Tensor::constant({2, 2}, std::vector<double>(4, 0.0));
  auto zero_out = gcn_layer(h, id, zero);
  for (double v : zero_out.values()) CHECK(v == 0.0);

  std::mt19937_64 rng(23);
  auto hr = Tensor::uniform({3, 3}, 0.1, 1.0, rng, true);
  auto w = Tensor::uniform({3, 3}, 0.1, 1.0, rng, true);
  auto a = Tensor::uniform({3, 3}, 0.1, 1.0, rng);
  auto res = check_gradients([&] { return reduce_sum(gcn_layer(hr, normalize_adjacency(a), w)); },
                             {{"h", hr}, {"w", w}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("layer_attention: closed forms and gradient") {
  auto h0 = Tensor::constant({2, 2}, {1, 2, 3, 4});
  auto h1 = Tensor::constant({2, 2}, {5, 6, 7, 8});
  auto c0 = Tensor::parameter({2, 1}, {0, 0});
  auto out = layer_attention({h0, h1}, c0);
  // c = 0 gives every score 0.5, so the output is half the stack sum.
  CHECK(out.at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out.at(1, 1) == doctest::Approx(6.0).epsilon(1e-12));

  // Single-entry stack degenerates to sigma(H c) gating H itself.
  auto c = Tensor::parameter({2, 1}, {1.0, -0.5});
  auto single = layer_attention({h0}, c);
  const double s0 = 1.0 / (1.0 + std::exp(-(1.0 * 1.0 + 2.0 * -0.5)));
  CHECK(single.at(0, 0) == doctest::Approx(s0 * 1.0).epsilon(1e-12));

  std::mt19937_64 rng(25);
  auto ha = Tensor::uniform({3, 4}, -1, 1, rng, true);
  auto hb = Tensor::uniform({3, 4}, -1, 1, rng, true);
  auto cp = Tensor::uniform({4, 1}, -1, 1, rng, true);
  auto res = check_gradients(
      [&] { return reduce_sum(layer_attention({ha, hb}, cp)); },
      {{"c", cp}, {"ha", ha}, {"hb", hb}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("smoothness: closed forms and degenerate input") {
  auto same = Tensor::constant({3, 2}, {1, 1, 1, 1, 1, 1});
  CHECK(smoothness(same, false) == doctest::Approx(1.0).epsilon(1e-12));

  auto ortho = Tensor::constant({2, 2}, {1, 0, 0, 1});
  CHECK(smoothness(ortho, false) == doctest::Approx(0.0));

  // The zero row is skipped; the remaining pair is identical.
  auto with_zero = Tensor::constant({3, 2}, {1, 0, 0, 0, 1, 0});
  CHECK(smoothness(with_zero, false) == doctest::Approx(1.0).epsilon(1e-12));

  auto zeros = Tensor::constant({2, 2}, std::vector<double>(4, 0.0));
  CHECK_THROWS(smoothness(zeros, false));
}

TEST_CASE("repeated propagation converges to the dominant direction") {
  // Connected 6-node graph; A_hat's dominant eigenvector is D^{1/2} 1 with
  // eigenvalue 1, so every feature column collapses onto it.
  const std::size_t n = 6;
  std::vector<double> a(n * n, 0.0);
  auto connect = [&](std::size_t i, std::size_t j) {
    a[i * n + j] = 1.0;
    a[j * n + i] = 1.0;
  };
  connect(0, 1);
  connect(1, 2);
  connect(2, 3);
  connect(3, 4);
  connect(4, 5);
  connect(5, 0);
  connect(0, 3);

  auto adj = Tensor::constant({n, n}, a);
  auto a_hat = normalize_adjacency(adj);

  std::mt19937_64 rng(27);
  auto h = Tensor::uniform({n, 3}, -1.0, 1.0, rng);
  auto h1 = propagate(h, a_hat);
  auto hk = h1;
  for (int step = 1; step < 100; ++step) hk = propagate(hk, a_hat);

  CHECK(smoothness(hk, false) >= smoothness(h1, false));
  CHECK(smoothness(hk, false) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> dom(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j) deg += a[i * n + j];
    dom[i] = std::sqrt(deg);
  }
  double dom_norm = 0.0;
  for (double x : dom) dom_norm += x * x;
  dom_norm = std::sqrt(dom_norm);

  for (std::size_t col = 0; col < 3; ++col) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += hk.at(i, col) * dom[i];
      norm += hk.at(i, col) * hk.at(i, col);
    }
    norm = std::sqrt(norm);
    REQUIRE(norm > 0.0);
    const double cosine = std::abs(dot) / (norm * dom_norm);
    CHECK(cosine == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("relabeling nodes relabels propagation exactly on dyadic inputs") {
  // Degrees of A+I are 4, 4, 4, 4, 1 and every feature is a multiple of 1/8,
  // so each arithmetic step is exact and any summation order gives identical
  // bits; this isolates the equivariance law from float reassociation.
  const std::size_t n = 5, d = 3;
  std::vector<double> a(n * n, 0.0);
  auto link = [&](std::size_t i, std::size_t j) { a[i * n + j] = 1.0; };
  link(0, 1);
  link(0, 2);
  link(0, 3);
  link(1, 0);
  link(1, 2);
  link(1, 3);
  link(2, 0);
  link(2, 1);
  link(2, 3);
  link(3, 0);
  link(3, 1);
  link(3, 2);

  std::mt19937_64 rng(31);
  std::vector<double> h(n * d);
  for (double& x : h) x = static_cast<double>(static_cast<int>(rng() % 33) - 16) / 8.0;

  const std::vector<std::size_t> perm{3, 1, 4, 0, 2};
  auto ap = permute_both(a, n, perm);
  auto hp = permute_rows(h, n, d, perm);

  auto base =
      propagate(Tensor::constant({n, d}, h), normalize_adjacency(Tensor::constant({n, n}, a)));
  auto moved = propagate(Tensor::constant({n, d}, hp),
                         normalize_adjacency(Tensor::constant({n, n}, ap)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(moved.at(i, j) == base.at(perm[i], j));

  // Layer attention is row-parallel, so it commutes with any relabeling
  // bitwise, dyadic or not.
  auto c = Tensor::constant({d, 1}, {0.625, -1.25, 0.375});
  auto att_base = layer_attention({Tensor::constant({n, d}, h)}, c);
  auto att_moved = layer_attention({Tensor::constant({n, d}, hp)}, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(att_moved.at(i, j) == att_base.at(perm[i], j));
}

TEST_CASE("relabeling on general inputs stays within 1e-12") {
  std::mt19937_64 rng(37);
  const std::size_t n = 7, d = 4;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> a(n * n);
  for (double& x : a) x = unit(rng) > 0.6 ? 1.0 : 0.0;
  std::vector<double> h(n * d);
  std::uniform_real_distribution<double> feat(-2.0, 2.0);
  for (double& x : h) x = feat(rng);

  std::vector<std::size_t> perm{2, 5, 0, 6, 1, 4, 3};
  auto ap = permute_both(a, n, perm);
  auto hp = permute_rows(h, n, d, perm);

  auto base =
      propagate(Tensor::constant({n, d}, h), normalize_adjacency(Tensor::constant({n, n}, a)));
  auto moved = propagate(Tensor::constant({n, d}, hp),
                         normalize_adjacency(Tensor::constant({n, n}, ap)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(moved.at(i, j) == doctest::Approx(base.at(perm[i], j)).epsilon(1e-12));
}
