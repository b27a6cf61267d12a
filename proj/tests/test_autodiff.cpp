#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "vseg/autodiff.hpp"
#include "vseg/rng.hpp"

using namespace vseg;
using ad::VarPtr;

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Rng rng(seed);
  Tensor t(c, h, w);
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

// Central finite differences over every scalar of every leaf, compared to
// reverse-mode gradients of the scalar-valued graph built by `build`.
void check_gradients(std::vector<VarPtr>& leaves,
                     const std::function<VarPtr(ad::Tape&)>& build,
                     double step = 1e-6, double tol = 1e-6) {
  ad::Tape tape;
  VarPtr loss = build(tape);
  REQUIRE(loss->value.size() == 1);
  for (const VarPtr& l : leaves) l->zero_grad();
  tape.backward(loss);
  for (VarPtr& leaf : leaves)
    for (std::size_t i = 0; i < leaf->value.v.size(); ++i) {
      const double keep = leaf->value.v[i];
      leaf->value.v[i] = keep + step;
      ad::Tape tp(false);
      const double up = build(tp)->value.v[0];
      leaf->value.v[i] = keep - step;
      ad::Tape tm(false);
      const double dn = build(tm)->value.v[0];
      leaf->value.v[i] = keep;
      const double fd = (up - dn) / (2 * step);
      const double an = leaf->grad.v[i];
      CHECK(std::abs(fd - an) <= tol * std::max({1.0, std::abs(fd), std::abs(an)}));
    }
}

}  // namespace

TEST_CASE("bilinear upsampling kernel: factor 2 weights and 9/16 center") {
  const std::vector<double> k = ad::bilinear_kernel_1d(2);
  REQUIRE(k.size() == 4);
  CHECK(k[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(k[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(k[2] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(k[3] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(k[1] * k[1] == doctest::Approx(9.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("conv2d matches a hand-evaluated 3x3 example") {
  ad::Tape tape;
  Tensor x(1, 2, 2);
  x.at(0, 0, 0) = 1;
  x.at(0, 0, 1) = 2;
  x.at(0, 1, 0) = 3;
  x.at(0, 1, 1) = 4;
  Tensor w(1, 1, 9, 0.0);
  w.v[4] = 1.0;  // center
  w.v[5] = 2.0;  // right neighbour
  Tensor b(1, 1, 1, 0.5);
  VarPtr out = tape.conv2d(ad::make_leaf(x), ad::make_leaf(w), ad::make_leaf(b),
                           1, 1);
  // out(y,x) = x(y,x) + 2*x(y,x+1) + 0.5, zero padded.
  CHECK(out->value.at(0, 0, 0) == 1 + 2 * 2 + 0.5);
  CHECK(out->value.at(0, 0, 1) == 2 + 0.5);
  CHECK(out->value.at(0, 1, 0) == 3 + 2 * 4 + 0.5);
  CHECK(out->value.at(0, 1, 1) == 4 + 0.5);
}

TEST_CASE("conv2d gradients: weights, bias and input") {
  auto x = ad::make_leaf(random_tensor(2, 5, 4, 21), true);
  auto w = ad::make_leaf(random_tensor(3, 2, 9, 22), true);
  auto b = ad::make_leaf(random_tensor(3, 1, 1, 23), true);
  std::vector<VarPtr> leaves{x, w, b};
  check_gradients(leaves, [&](ad::Tape& t) {
    return t.sum(t.sigmoid(t.conv2d(x, w, b, 1, 1)));
  });
}

TEST_CASE("strided conv2d gradients") {
  auto x = ad::make_leaf(random_tensor(1, 7, 7, 31), true);
  auto w = ad::make_leaf(random_tensor(2, 1, 49, 32), true);
  auto b = ad::make_leaf(random_tensor(2, 1, 1, 33), true);
  std::vector<VarPtr> leaves{x, w, b};
  check_gradients(leaves, [&](ad::Tape& t) {
    return t.sum(t.conv2d(x, w, b, 2, 3));
  });
}

TEST_CASE("maxpool2 uses ceil shapes and routes gradients to the argmax") {
  Tensor x(1, 3, 3);
  for (int i = 0; i < 9; ++i) x.v[i] = i;  // strictly increasing
  ad::Tape tape;
  auto leaf = ad::make_leaf(x, true);
  VarPtr out = tape.maxpool2(leaf);
  REQUIRE(out->value.h == 2);
  REQUIRE(out->value.w == 2);
  CHECK(out->value.at(0, 0, 0) == 4.0);
  CHECK(out->value.at(0, 0, 1) == 5.0);
  CHECK(out->value.at(0, 1, 0) == 7.0);
  CHECK(out->value.at(0, 1, 1) == 8.0);
  leaf->zero_grad();
  tape.backward(tape.sum(out));
  const double expect[9] = {0, 0, 0, 0, 1, 1, 0, 1, 1};
  for (int i = 0; i < 9; ++i) CHECK(leaf->grad.v[i] == expect[i]);
}

TEST_CASE("maxpool2 tie-breaking takes the first window element") {
  Tensor x(1, 2, 2, 1.0);
  ad::Tape tape;
  auto leaf = ad::make_leaf(x, true);
  leaf->zero_grad();
  tape.backward(tape.sum(tape.maxpool2(leaf)));
  CHECK(leaf->grad.v[0] == 1.0);
  CHECK(leaf->grad.v[1] == 0.0);
  CHECK(leaf->grad.v[2] == 0.0);
  CHECK(leaf->grad.v[3] == 0.0);
}

TEST_CASE("relu forward and subgradient") {
  Tensor x(1, 1, 3);
  x.v = {-2.0, 0.0, 3.0};
  ad::Tape tape;
  auto leaf = ad::make_leaf(x, true);
  VarPtr out = tape.relu(leaf);
  CHECK(out->value.v == std::vector<double>{0.0, 0.0, 3.0});
  leaf->zero_grad();
  tape.backward(tape.sum(out));
  CHECK(leaf->grad.v == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("upsample_bilinear: factor 2 values and gradients") {
  auto x = ad::make_leaf(random_tensor(2, 3, 4, 41), true);
  ad::Tape tape;
  VarPtr up = tape.upsample_bilinear(x, 2, 6, 8);
  CHECK(up->value.c == 2);
  CHECK(up->value.h == 6);
  CHECK(up->value.w == 8);
  std::vector<VarPtr> leaves{x};
  check_gradients(leaves, [&](ad::Tape& t) {
    return t.sum(t.upsample_bilinear(x, 2, 6, 8));
  });
}

TEST_CASE("upsample_bilinear of a centered delta exposes the separable kernel") {
  Tensor x(1, 3, 3, 0.0);
  x.at(0, 1, 1) = 1.0;
  ad::Tape tape(false);
  const Tensor up = tape.upsample_bilinear(ad::make_leaf(x), 2, 6, 6)->value;
  double mx = 0.0;
  for (double v : up.v) mx = std::max(mx, v);
  CHECK(mx == doctest::Approx(9.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("concat splits gradients back to its inputs") {
  auto a = ad::make_leaf(random_tensor(1, 2, 2, 51), true);
  auto b = ad::make_leaf(random_tensor(3, 2, 2, 52), true);
  std::vector<VarPtr> leaves{a, b};
  check_gradients(leaves, [&](ad::Tape& t) {
    return t.sum(t.sigmoid(t.concat({a, b})));
  });
}

TEST_CASE("shift, scale, add, weighted_sum and sigmoid gradients") {
  auto a = ad::make_leaf(random_tensor(1, 3, 3, 61), true);
  auto b = ad::make_leaf(random_tensor(1, 3, 3, 62), true);
  auto h = ad::make_leaf(random_tensor(2, 1, 1, 63), true);
  std::vector<VarPtr> leaves{a, b, h};
  check_gradients(leaves, [&](ad::Tape& t) {
    VarPtr s = t.weighted_sum({t.shift(a, 0.3), t.scale(b, 1.7)}, h);
    return t.sum(t.sigmoid(t.add(s, a)));
  });
}

TEST_CASE("balanced_bce value and logit gradient match the closed form") {
  // 2x2 case: one vessel pixel, logits z=0 everywhere -> p=0.5 ->
  // loss = (3/2) ln 2; dL/dz = pos: 0.75*(0.5-1) = -0.375, neg: 0.25*0.5.
  Tensor z(1, 2, 2, 0.0);
  Tensor y(1, 2, 2, 0.0);
  y.at(0, 0, 0) = 1.0;
  Tensor region(1, 2, 2, 1.0);
  ad::Tape tape;
  auto leaf = ad::make_leaf(z, true);
  VarPtr loss = tape.balanced_bce(leaf, y, region);
  CHECK(loss->value.v[0] == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  leaf->zero_grad();
  tape.backward(loss);
  CHECK(leaf->grad.at(0, 0, 0) == doctest::Approx(-0.375).epsilon(1e-12));
  CHECK(leaf->grad.at(0, 0, 1) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(leaf->grad.at(0, 1, 0) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(leaf->grad.at(0, 1, 1) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("balanced_bce gradient matches finite differences on random data") {
  Rng rng(71);
  Tensor y(1, 4, 4);
  for (double& v : y.v) v = rng.below(2) ? 1.0 : 0.0;
  y.v[0] = 1.0;
  y.v[1] = 0.0;  // both classes present
  Tensor region(1, 4, 4, 1.0);
  auto z = ad::make_leaf(random_tensor(1, 4, 4, 72, -2.0, 2.0), true);
  std::vector<VarPtr> leaves{z};
  check_gradients(leaves, [&](ad::Tape& t) { return t.balanced_bce(z, y, region); });
}

TEST_CASE("non-tracking tape records nothing and allocates no gradients") {
  ad::Tape tape(false);
  auto x = ad::make_leaf(random_tensor(1, 4, 4, 81), true);
  VarPtr out = tape.relu(tape.scale(x, 2.0));
  CHECK_FALSE(out->needs);
  CHECK(out->grad.empty());
}

TEST_CASE("backward accumulates into reused subexpressions") {
  // loss = sum(x + x) -> dL/dx = 2 everywhere.
  auto x = ad::make_leaf(random_tensor(1, 2, 3, 91), true);
  ad::Tape tape;
  VarPtr loss = tape.sum(tape.add(x, x));
  x->zero_grad();
  tape.backward(loss);
  for (double g : x->grad.v) CHECK(g == 2.0);
}
