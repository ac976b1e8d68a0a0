#include <gtest/gtest.h>

#include "logonet/autograd.hpp"
#include "logonet/error.hpp"
#include "logonet/ops.hpp"
#include "logonet/tensor.hpp"
#include "test_helpers.hpp"

namespace logonet {
namespace {

TEST(Tensor, ShapeAndFill) {
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
  EXPECT_EQ(shape_string(t.shape()), "[2,3]");
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, HandlesShareStorageClonesDoNot) {
  Tensor<float> a({2}, 1.0f);
  Tensor<float> b = a;
  Tensor<float> c = a.clone();
  b[0] = 7.0f;
  EXPECT_EQ(a[0], 7.0f);
  EXPECT_EQ(c[0], 1.0f);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, CastPreservesValues) {
  Tensor<double> d({3}, std::vector<double>{0.5, -2.0, 3.25});
  const auto f = d.cast<float>();
  EXPECT_EQ(testing::as_doubles(f), testing::as_doubles(d));
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_EQ(relu(x).producer(), nullptr);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_NE(relu(x).producer(), nullptr);
}

TEST(Autograd, UntrackedInputsRecordNothing) {
  Tensor<double> x({2}, 1.0);
  EXPECT_EQ(relu(x).producer(), nullptr);
}

TEST(Autograd, TapeIsTopologicallyOrdered) {
  Tensor<double> x({2}, std::vector<double>{1.0, 2.0});
  x.set_requires_grad(true);
  const auto y = relu(x);
  const auto z = add(y, scale(y, 2.0));
  const auto loss = sum(z);
  Tape<double> tape(loss);
  const auto& nodes = tape.nodes();
  auto position = [&](const Tensor<double>& t) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].same_storage(t)) return i;
    return nodes.size();
  };
  EXPECT_LT(position(y), position(z));
  EXPECT_LT(position(z), position(loss));
  EXPECT_EQ(position(loss), nodes.size() - 1);
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  Tensor<double> x({1}, std::vector<double>{3.0});
  x.set_requires_grad(true);
  // d/dx (x*x + x) = 2x + 1
  backward(sum(add(mul_broadcast(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autograd, SecondBackwardDoublesLeafGradients) {
  Tensor<double> x({2}, std::vector<double>{1.0, -4.0});
  x.set_requires_grad(true);
  const auto loss = sum(scale(x, 3.0));
  Tape<double> tape(loss);
  tape.backward();
  tape.backward();
  EXPECT_EQ(testing::as_doubles(x.grad()), (std::vector<double>{6.0, 6.0}));
}

TEST(Autograd, NonScalarRootIsRejected) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  EXPECT_THROW(backward(relu(x)), ShapeError);
}

TEST(Autograd, CheckGradientsOnPolynomial) {
  Tensor<double> x({3}, std::vector<double>{0.3, -1.2, 2.0});
  const double err = check_gradients(
      [](const Tensor<double>& v) { return sum(mul_broadcast(mul_broadcast(v, v), v)); }, x);
  // The central difference of x^3 overshoots 3x^2 by exactly h^2, and every
  // |3x^2| here is either below 1 or large enough to shrink the ratio.
  EXPECT_NEAR(err, 1e-6, 1e-9);
}

TEST(Autograd, CheckGradientsDetectsWrongGradient) {
  // relu at a kink: the one-sided analytic gradient differs from the
  // symmetric difference, so the checker must report a large error.
  Tensor<double> x({1}, std::vector<double>{0.0});
  const double err = check_gradients([](const Tensor<double>& v) { return sum(relu(v)); }, x);
  EXPECT_GT(err, 0.1);
}

}  // namespace
}  // namespace logonet
