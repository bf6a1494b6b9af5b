#include "vdrop/quadrature.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "vdrop/errors.hpp"

namespace vdrop::quad {

namespace {

constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};

constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double err;
  bool operator<(const Segment& other) const { return err < other.err; }
};

Segment gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double kronrod = kKronrod[7] * fc;
  double gauss = kGauss[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kNodes[i];
    const double fsum = f(mid - dx) + f(mid + dx);
    kronrod += kKronrod[i] * fsum;
    if (i % 2 == 1) gauss += kGauss[i / 2] * fsum;
  }
  const double value = kronrod * half;
  const double err = std::abs((kronrod - gauss) * half);
  if (!std::isfinite(value)) {
    throw QuadratureError("integrand is not finite on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
  }
  return {a, b, value, err};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, double abs_tol, int max_intervals) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw QuadratureError("integration limits must be finite");
  if (a == b) return {0.0, 0.0, 0};

  std::priority_queue<Segment> queue;
  Segment first = gauss_kronrod(f, a, b);
  double total = first.value;
  double total_err = first.err;
  queue.push(first);

  int intervals = 1;
  while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (intervals >= max_intervals) {
      throw QuadratureError("adaptive quadrature did not reach tolerance within " +
                            std::to_string(max_intervals) + " intervals (estimate " +
                            std::to_string(total) + ", error " + std::to_string(total_err) + ")");
    }
    const Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gauss_kronrod(f, worst.a, mid);
    const Segment right = gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.err + right.err - worst.err;
    queue.push(left);
    queue.push(right);
    ++intervals;
  }

  // Re-sum to shed the drift of the incremental updates.
  double value = 0.0;
  double err = 0.0;
  while (!queue.empty()) {
    value += queue.top().value;
    err += queue.top().err;
    queue.pop();
  }
  return {value, err, intervals};
}

}  // namespace vdrop::quad
