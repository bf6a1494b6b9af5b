#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "vdrop/errors.hpp"
#include "vdrop/quadrature.hpp"

namespace {

using vdrop::quad::integrate;

TEST(Quadrature, PolynomialIsExact) {
  const auto r = integrate([](double x) { return 3 * x * x - 2 * x + 1; }, -1.0, 2.0);
  EXPECT_NEAR(r.value, 9.0 - 3.0 + 3.0, 1e-13);
  EXPECT_EQ(r.intervals, 1);
}

TEST(Quadrature, SmoothIntegrand) {
  const auto r = integrate([](double x) { return std::exp(x); }, 0.0, 3.0, 1e-12);
  EXPECT_NEAR(r.value, std::exp(3.0) - 1.0, 1e-10);
  EXPECT_GE(r.abs_err, 0.0);
}

TEST(Quadrature, EndpointSingularityNeedsSubdivision) {
  const auto r = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-9);
  EXPECT_NEAR(r.value, 2.0, 1e-8);
  EXPECT_GT(r.intervals, 1);
}

TEST(Quadrature, ReversedLimitsFlipSign) {
  const auto f = [](double x) { return std::sin(x); };
  EXPECT_NEAR(integrate(f, 2.0, 0.0).value, -integrate(f, 0.0, 2.0).value, 1e-14);
}

TEST(Quadrature, NonFiniteIntegrandThrows) {
  EXPECT_THROW(integrate([](double) { return std::numeric_limits<double>::quiet_NaN(); }, 0.0, 1.0),
               vdrop::QuadratureError);
}

TEST(Quadrature, ExhaustedBudgetThrows) {
  EXPECT_THROW(integrate([](double x) { return std::sin(1.0 / x); }, 1e-6, 1.0, 1e-14, 0.0, 5),
               vdrop::QuadratureError);
}

}  // namespace
