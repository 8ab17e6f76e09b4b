#include "aunet/tensor.hpp"

#include <doctest.h>

using namespace aunet;

TEST_CASE("tensor construction zero-fills and reports shape") {
  TensorF t({2, 3, 4, 5});
  CHECK(t.rank() == 4);
  CHECK(t.size() == 120);
  CHECK(t.vec().isZero());
  CHECK(shape_string(t.shape()) == "[2,3,4,5]");
}

TEST_CASE("tensor rejects non-positive extents and mismatched data") {
  CHECK_THROWS_AS(TensorF({2, 0}), ShapeError);
  CHECK_THROWS_AS(TensorF({2, 2}, TensorF::Vector::Zero(3)), ShapeError);
}

TEST_CASE("4d indexing is row-major NCHW") {
  TensorD t({2, 3, 4, 5});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK(t(1, 2, 3, 4) == doctest::Approx(119));
  CHECK(t(0, 1, 0, 0) == doctest::Approx(20));
  CHECK(t(0, 0, 1, 0) == doctest::Approx(5));
}

TEST_CASE("reshape keeps elements and cast converts") {
  TensorD t({2, 3});
  t[4] = 2.5;
  const TensorD r = t.reshaped({3, 2});
  CHECK(r[4] == 2.5);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.cast<float>()[4] == 2.5f);
}

TEST_CASE("item requires one element") {
  CHECK(TensorD::scalar(3.0).item() == 3.0);
  CHECK_THROWS_AS(TensorD({2}).item(), ShapeError);
}

TEST_CASE("slice_channels extracts a channel block of every sample") {
  TensorD t({2, 3, 1, 2});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  const TensorD s = slice_channels(t, 1, 2);
  CHECK(s.shape() == Shape{2, 2, 1, 2});
  CHECK(s(0, 0, 0, 0) == t(0, 1, 0, 0));
  CHECK(s(1, 1, 0, 1) == t(1, 2, 0, 1));
  CHECK_THROWS_AS(slice_channels(t, 2, 2), ShapeError);
}

TEST_CASE("dot accumulates in double and checks shapes") {
  TensorF a = TensorF::constant({3}, 2.0f);
  TensorF b = TensorF::constant({3}, 0.5f);
  CHECK(dot(a, b) == 3.0);
  CHECK_THROWS_AS(dot(a, TensorF({4})), ShapeError);
}
