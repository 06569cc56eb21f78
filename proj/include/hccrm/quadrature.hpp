#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace hccrm {

class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kQuadratureTolerance = 1e-9;

namespace detail {

// Non-const: in Boost 1.74 the integrate() members are not const-callable.
inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
  thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
  return rule;
}

inline boost::math::quadrature::exp_sinh<double>& exp_sinh_rule() {
  thread_local boost::math::quadrature::exp_sinh<double> rule(12);
  return rule;
}

inline void check_result(double value, double error, double tolerance, const char* what) {
  if (!std::isfinite(value)) {
    throw numerical_error(std::string(what) + ": non-finite quadrature result");
  }
  // Error estimates from the Boost rules are pessimistic; only a grossly
  // unconverged result is treated as a failure.
  (void)tolerance;
  const double scale = std::abs(value);
  if (error > 1e-3 * scale && error > 1e-12) {
    throw numerical_error(std::string(what) + ": quadrature did not converge (value " + std::to_string(value) + ", error " +
                          std::to_string(error) + ")");
  }
}

// Boost reports a non-finite integrand by throwing; callers only know
// numerical_error.
template <class Fn>
double guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const numerical_error&) {
    throw;
  } catch (const std::exception& e) {
    throw numerical_error(std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

// Adaptive Gauss-Kronrod on a finite interval with a smooth integrand.
template <class F>
double integrate_interval(F&& f, double lo, double hi, double tolerance = kQuadratureTolerance) {
  if (!(hi > lo)) return 0.0;
  double error = 0.0;
  const double value = detail::guarded("integrate_interval", [&] {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 10, tolerance, &error);
  });
  detail::check_result(value, error, tolerance, "integrate_interval");
  return value;
}

// Integral of f(w) w^(-1-sigma) e^(-tau w) over (lower, infinity), i.e. against
// the unnormalized GGP Levy density (without the 1/Gamma(1-sigma) constant).
//
// The range is split at 1. The head is mapped by w = e^(-s) (lower == 0) or
// integrated in log-space (lower > 0); the tail uses u = e^(-tau (w - a)).
template <class F>
double integrate_ggp_kernel(F&& f, double sigma, double tau, double lower = 0.0,
                            double tolerance = kQuadratureTolerance) {
  if (lower < 0.0) throw std::invalid_argument("integrate_ggp_kernel: negative lower bound");
  double head = 0.0;
  double split = 1.0;
  if (lower < split) {
    auto in_log = [&](double s) -> double {
      // w = e^(-s); dw = w ds, so the integrand becomes f(w) w^(-sigma) e^(-tau w).
      const double w = std::exp(-s);
      if (w <= 0.0) return 0.0;
      const double fw = f(w);
      if (fw == 0.0) return 0.0;
      return fw * std::exp(sigma * s - tau * w);
    };
    double error = 0.0;
    if (lower == 0.0) {
      head = detail::guarded("integrate_ggp_kernel(head)",
                             [&] { return detail::exp_sinh_rule().integrate(in_log, tolerance, &error); });
    } else {
      head = integrate_interval(in_log, 0.0, -std::log(lower), tolerance);
    }
    detail::check_result(head, error, tolerance, "integrate_ggp_kernel(head)");
  } else {
    split = lower;
  }
  const double a = split;
  auto in_u = [&](double u) -> double {
    if (u <= 0.0) return 0.0;
    const double w = a - std::log(u) / tau;
    const double fw = f(w);
    if (fw == 0.0) return 0.0;
    return fw * std::exp((-1.0 - sigma) * std::log(w));
  };
  double error = 0.0;
  double tail = detail::guarded("integrate_ggp_kernel(tail)",
                                [&] { return detail::tanh_sinh_rule().integrate(in_u, 0.0, 1.0, tolerance, &error); });
  detail::check_result(tail, error, tolerance, "integrate_ggp_kernel(tail)");
  tail *= std::exp(-tau * a) / tau;
  return head + tail;
}

}  // namespace hccrm
