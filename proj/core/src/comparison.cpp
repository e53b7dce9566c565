#include "polyscal/comparison.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace polyscal {

namespace {

const double kPi = 3.14159265358979323846;

void require_dimension(int n, int min) {
  if (n < min) throw std::invalid_argument("dimension too small for this comparison");
}

double sectional(int n, double s) { return s / (n * (n - 1)); }

}  // namespace

double unit_ball_volume(int n) {
  if (n < 0) throw std::invalid_argument("negative dimension");
  double v_prev = 1.0;  // v_0
  double v = 2.0;       // v_1
  if (n == 0) return v_prev;
  for (int m = 2; m <= n; ++m) {
    double next = v_prev * 2.0 * kPi / m;
    v_prev = v;
    v = next;
  }
  return v;
}

ConstantsTable constants(int n) {
  require_dimension(n, 1);
  ConstantsTable t;
  t.n = n;
  t.v = unit_ball_volume(n);
  t.sigma = n * t.v;
  t.lambda = t.v / (2.0 * unit_ball_volume(n - 1));
  double prod = 1.0, fact = 1.0;
  for (int i = 1; i <= n; ++i) {
    prod *= unit_ball_volume(i) / (2.0 * unit_ball_volume(i - 1));
    fact *= i;
  }
  t.c = prod / fact;
  t.delta = 1.0 / (std::pow(2.0, n) * t.c);
  return t;
}

double spaceform_max_radius(int n, double s) {
  require_dimension(n, 2);
  double k = sectional(n, s);
  if (k <= 0.0) return std::numeric_limits<double>::infinity();
  return kPi / std::sqrt(k);
}

namespace {

void check_radius(int n, double s, double r) {
  if (r < 0.0 || !std::isfinite(r)) throw std::invalid_argument("radius must be nonnegative");
  double max_r = spaceform_max_radius(n, s);
  if (r > max_r * (1.0 + 1e-12))
    throw std::domain_error("radius beyond the diameter of the spherical space form");
}

double snk(double k, double t) {
  if (k == 0.0) return t;
  if (k > 0.0) {
    double b = std::sqrt(k);
    return std::sin(b * t) / b;
  }
  double a = std::sqrt(-k);
  return std::sinh(a * t) / a;
}

}  // namespace

double spaceform_ball_volume_quadrature(int n, double s, double r) {
  require_dimension(n, 2);
  check_radius(n, s, r);
  if (r == 0.0) return 0.0;
  double k = sectional(n, s);
  double sigma = n * unit_ball_volume(n);
  auto f = [&](double t) { return std::pow(snk(k, t), n - 1); };
  double err = 0.0;
  double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, r, 12, 1e-11, &err);
  return sigma * integral;
}

double spaceform_ball_volume(int n, double s, double r) {
  require_dimension(n, 2);
  check_radius(n, s, r);
  if (r == 0.0) return 0.0;
  double k = sectional(n, s);
  if (n == 2) {
    if (std::abs(k) * r * r < 1e-6) {
      // 2*pi*(1 - cos(sqrt(k) r))/k expanded about k = 0.
      return kPi * r * r - kPi * k * std::pow(r, 4) / 12.0 +
             kPi * k * k * std::pow(r, 6) / 360.0;
    }
    if (k > 0.0) return 2.0 * kPi * (1.0 - std::cos(std::sqrt(k) * r)) / k;
    return 2.0 * kPi * (std::cosh(std::sqrt(-k) * r) - 1.0) / (-k);
  }
  if (n == 3) {
    if (std::abs(k) * r * r < 1e-6) {
      return 4.0 * kPi / 3.0 * std::pow(r, 3) - 4.0 * kPi / 15.0 * k * std::pow(r, 5) +
             8.0 * kPi / 315.0 * k * k * std::pow(r, 7);
    }
    if (k > 0.0) {
      double b = std::sqrt(k);
      return kPi / (b * b * b) * (2.0 * b * r - std::sin(2.0 * b * r));
    }
    double a = std::sqrt(-k);
    return kPi / (a * a * a) * (std::sinh(2.0 * a * r) - 2.0 * a * r);
  }
  return spaceform_ball_volume_quadrature(n, s, r);
}

double macroscopic_scalar_curvature(int n, double r, double ball_volume, double tol) {
  require_dimension(n, 2);
  if (!(r > 0.0)) throw std::invalid_argument("scale must be positive");
  if (!(ball_volume > 0.0) || !std::isfinite(ball_volume))
    throw std::invalid_argument("ball volume must be positive and finite");
  // Largest admissible s puts the domain edge exactly at r.
  double s_max = n * (n - 1) * (kPi / r) * (kPi / r);
  double vol_min = spaceform_ball_volume(n, s_max, r);
  if (ball_volume < vol_min * (1.0 - 1e-12))
    throw std::domain_error(
        "no space form matches: the profile volume is below the full-sphere volume at the "
        "domain edge");
  if (ball_volume <= vol_min) return s_max;
  double lo = -static_cast<double>(n * (n - 1));
  while (spaceform_ball_volume(n, lo, r) < ball_volume) {
    lo *= 4.0;
    if (lo < -1e150) throw std::domain_error("profile volume too large for any space form");
  }
  double hi = std::min(static_cast<double>(n * (n - 1)), s_max);
  while (spaceform_ball_volume(n, hi, r) > ball_volume && hi < s_max) {
    hi = std::min(s_max, hi <= 0.0 ? 1.0 : hi * 4.0);
  }
  for (int it = 0; it < 500 && hi - lo > tol; ++it) {
    double mid = 0.5 * (lo + hi);
    if (spaceform_ball_volume(n, mid, r) >= ball_volume)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double macroscopic_scalar_curvature(const std::function<double(double)>& profile, int n, double r,
                                    double tol) {
  return macroscopic_scalar_curvature(n, r, profile(r), tol);
}

LimitFit infinitesimal_limit_check(const std::function<double(double)>& profile, int n,
                                   double scal_expected, const std::vector<double>& r_grid) {
  if (r_grid.size() < 2) throw std::invalid_argument("limit fit needs at least two scales");
  LimitFit fit;
  fit.scal_values.reserve(r_grid.size());
  // Least squares for scal_r ~ a + b r^2.
  double s00 = 0, s01 = 0, s11 = 0, t0 = 0, t1 = 0;
  for (double r : r_grid) {
    double y = macroscopic_scalar_curvature(n, r, profile(r));
    fit.scal_values.push_back(y);
    double x = r * r;
    s00 += 1.0;
    s01 += x;
    s11 += x * x;
    t0 += y;
    t1 += x * y;
  }
  double det = s00 * s11 - s01 * s01;
  if (std::abs(det) < 1e-30) throw std::invalid_argument("degenerate scale grid");
  fit.limit = (s11 * t0 - s01 * t1) / det;
  fit.quadratic_coeff = (s00 * t1 - s01 * t0) / det;
  fit.deviation = std::abs(fit.limit - scal_expected);
  return fit;
}

double cover_ball_bound_exponential(int n, double kappa, double mu0, double r) {
  require_dimension(n, 1);
  ConstantsTable t = constants(n);
  double w = (r - mu0 / 2.0) / (4.0 * kappa * mu0);
  return t.c / std::pow(2.0, n) * std::pow(mu0, n) * (std::pow(3.0, w) - 1.0);
}

double cover_ball_bound_polynomial(int n, double kappa, double r) {
  require_dimension(n, 1);
  ConstantsTable t = constants(n);
  return t.c / (std::pow(2.0, n) * std::pow(5.0 * kappa, n)) * std::pow(r, n);
}

double hyperbolic_ball_upper_large(int n, double C, double r) {
  require_dimension(n, 2);
  double sigma = n * unit_ball_volume(n);
  return sigma / ((n - 1) * std::pow(2.0, n - 1)) * (std::exp((n - 1) * C * r) - 1.0);
}

double hyperbolic_ball_upper_small(int n, double C, double r) {
  require_dimension(n, 2);
  double sigma = n * unit_ball_volume(n);
  return sigma / n * std::pow(std::sinh(1.0), n - 1) * std::pow(C * r, n);
}

std::vector<GrowthCaseReport> check_growth_cases(int n, double kappa, double mu0, double C,
                                                 const std::vector<double>& r_grid) {
  require_dimension(n, 2);
  if (!(kappa >= 1.0)) throw std::invalid_argument("kappa must be at least 1");
  if (!(mu0 > 0.0) || !(C > 0.0)) throw std::invalid_argument("mu0 and C must be positive");
  double split = 5.0 * kappa * mu0;
  std::vector<GrowthCaseReport> out(4);
  for (int i = 0; i < 4; ++i) {
    out[i].case_id = i + 1;
    out[i].min_margin = std::numeric_limits<double>::infinity();
    out[i].pass = true;
  }
  auto feed = [&](GrowthCaseReport& rep, double margin, double r) {
    ++rep.points;
    if (margin < rep.min_margin) {
      rep.min_margin = margin;
      rep.worst_r = r;
    }
    if (margin < 0.0) rep.pass = false;
  };
  for (double r : r_grid) {
    if (r < 0.0) continue;
    bool far = r >= split, near = r <= split;
    bool large = r >= 1.0, small = r <= 1.0;
    if (far && large)
      feed(out[0], cover_ball_bound_exponential(n, kappa, mu0, r) -
                       hyperbolic_ball_upper_large(n, C, r), r);
    if (far && small)
      feed(out[1], cover_ball_bound_exponential(n, kappa, mu0, r) -
                       hyperbolic_ball_upper_small(n, C, r), r);
    if (near && large)
      feed(out[2], cover_ball_bound_polynomial(n, kappa, r) -
                       hyperbolic_ball_upper_large(n, C, r), r);
    if (near && small)
      feed(out[3], cover_ball_bound_polynomial(n, kappa, r) -
                       hyperbolic_ball_upper_small(n, C, r), r);
  }
  out[0].rate_ok = (n - 1) * C <= std::log(3.0) / (4.0 * kappa * mu0);
  out[0].pass = out[0].pass && out[0].rate_ok;
  for (GrowthCaseReport& rep : out) {
    if (rep.points == 0) {
      rep.min_margin = 0.0;
      rep.worst_r = -1.0;
    }
  }
  return out;
}

double growth_schedule_constant(int n, double kappa, double mu0) {
  require_dimension(n, 2);
  if (!(kappa >= 1.0)) throw std::invalid_argument("kappa must be at least 1");
  if (!(mu0 > 0.0)) throw std::invalid_argument("mu0 must be positive");
  ConstantsTable t = constants(n);
  const double log3 = std::log(3.0);
  double split = 5.0 * kappa * mu0;
  // The power cap certifies the hyperbolic volume only while C*r <= 1.
  double best = 1.0;
  // Exponential rate of the cover bound must dominate the cap's rate.
  best = std::min(best, log3 / (4.0 * (n - 1) * kappa * mu0));
  if (split >= 1.0) {
    // exp/exp entry value at r = split, where the bracket term is >= 2.
    best = std::min(best, std::log1p((n - 1) * t.c * std::pow(mu0, n) / t.sigma) /
                              (5.0 * (n - 1) * kappa * mu0));
    // exp/exp entry slope; the rate condition cancels the exponential factors.
    best = std::min(best, t.c / (2.0 * t.sigma) * std::pow(mu0, n - 1) *
                              (log3 / (4.0 * kappa)) * std::pow(3.0, -1.0 / (8.0 * kappa)));
    // poly/exp region [1, split]: smallest lower bound vs largest cap.
    best = std::min(best,
                    std::log1p((n - 1) * t.c / (2.0 * std::pow(5.0 * kappa, n) * t.sigma)) /
                        (5.0 * (n - 1) * kappa * mu0));
  } else {
    // exp/exp entry value at r = 1 (the bracket exponent is >= 1/(8*kappa*mu0)).
    double bracket = std::pow(3.0, 1.0 / (8.0 * kappa * mu0)) - 1.0;
    double arg = (n - 1) * t.c / (2.0 * t.sigma) * bracket * std::pow(mu0, n);
    if (!std::isfinite(arg)) arg = std::numeric_limits<double>::max();
    best = std::min(best, std::log1p(arg) / (n - 1));
    // exp/exp entry slope at r = 1: largest C with
    //   (sigma/2^{n-1}) C e^{(n-1)C}
    //     <= (c/2^n) mu0^n (log3/(4 kappa mu0)) 3^{1/(8 kappa mu0)},
    // solved in log space so the huge right-hand side at small mu0 is safe.
    double log_target = std::log(t.c) - n * std::log(2.0) + n * std::log(mu0) +
                        std::log(log3 / (4.0 * kappa * mu0)) + log3 / (8.0 * kappa * mu0);
    double offset = std::log(t.sigma) - (n - 1) * std::log(2.0);
    auto slope_ok = [&](double C) { return offset + std::log(C) + (n - 1) * C <= log_target; };
    if (!slope_ok(1.0)) {
      double lo = 0.0, hi = 1.0;
      for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        (slope_ok(mid) ? lo : hi) = mid;
      }
      best = std::min(best, lo);
    }
    // exp/power region [split, 1]: numeric infimum of (lower bound)/r^n.
    double inf_ratio = std::numeric_limits<double>::infinity();
    const int samples = 1024;
    for (int i = 0; i <= samples; ++i) {
      double r = split + (1.0 - split) * i / samples;
      inf_ratio = std::min(
          inf_ratio, cover_ball_bound_exponential(n, kappa, mu0, r) / std::pow(r, n));
    }
    best = std::min(best, 0.99 * std::pow(inf_ratio * n /
                                              (t.sigma * std::pow(std::sinh(1.0), n - 1)),
                                          1.0 / n));
  }
  // poly/power region r <= min(1, split): exact algebra, r^n cancels.
  best = std::min(best, std::pow(n * t.c / (std::pow(2.0, n) * std::pow(5.0 * kappa, n) *
                                            t.sigma * std::pow(std::sinh(1.0), n - 1)),
                                 1.0 / n));
  return best;
}

bool growth_cases_pass(const std::vector<GrowthCaseReport>& reports) {
  for (const GrowthCaseReport& r : reports)
    if (!r.pass) return false;
  return true;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw std::invalid_argument("bad log grid");
  std::vector<double> g(points);
  double step = std::log(hi / lo) / (points - 1);
  for (int i = 0; i < points; ++i) g[i] = lo * std::exp(step * i);
  g.back() = hi;
  return g;
}

std::vector<double> default_growth_grid(double kappa, double mu0) {
  std::vector<double> g = log_grid(1e-2, 1e2, 81);
  g.push_back(1.0);
  g.push_back(5.0 * kappa * mu0);
  return g;
}

AdmissibleC admissible_growth_constant(int n, double kappa, double mu0, double c_lo, double c_hi,
                                       int grid_points, const std::vector<double>* r_grid) {
  std::vector<double> grid_storage;
  if (!r_grid) {
    grid_storage = default_growth_grid(kappa, mu0);
    r_grid = &grid_storage;
  }
  std::vector<double> cs = log_grid(c_lo, c_hi, grid_points);
  auto passes = [&](int i) {
    return growth_cases_pass(check_growth_cases(n, kappa, mu0, cs[i], *r_grid));
  };
  AdmissibleC result;
  result.grid_points = grid_points;
  result.value = cs.front();
  if (!passes(0)) return result;  // even the smallest C fails; report the grid floor
  // The pass set is downward closed: find the last passing index.
  int lo = 0, hi = grid_points - 1;
  if (passes(hi)) {
    lo = hi;
  } else {
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      (passes(mid) ? lo : hi) = mid;
    }
  }
  result.found = true;
  result.grid_index = lo;
  result.value = cs[lo];
  return result;
}

}  // namespace polyscal
