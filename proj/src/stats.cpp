#include "avl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace avl {

void rng::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t v = engine_();
    for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
  }
}

std::uint64_t rng::below(std::uint64_t n) {
  // Reject the first (2^64 mod n) values so the modulo is unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % n;
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// cc[0] + cc[1] x + ... + cc[n-1] x^(n-1)
double poly(const double* cc, int n, double x) {
  double r = cc[0];
  if (n > 1) {
    double p = x * cc[n - 1];
    for (int j = n - 2; j > 0; --j) p = (p + cc[j]) * x;
    r += p;
  }
  return r;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t label) { return splitmix64(base ^ splitmix64(label)); }

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -HUGE_VAL;
  if (p >= 1.0) return HUGE_VAL;
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // One Halley step brings the ~1e-9 approximation to full precision.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

normality_result shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw stats_error("shapiro_wilk needs 3 <= n <= 5000");
  for (double v : sample)
    if (!std::isfinite(v)) throw stats_error("shapiro_wilk: non-finite sample value");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  normality_result res;
  res.n = n;
  const double range = x.back() - x.front();
  if (range < 1e-19) {
    res.degenerate = true;
    res.w = 1.0;
    res.p_value = 0.0;
    return res;
  }

  static constexpr double g[] = {-2.273, .459};
  static constexpr double c1[] = {0., .221157, -.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0., .042981, -.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {.544, -.39978, .025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -.77857, .062767, -.0020322};
  static constexpr double c5[] = {-1.5861, -.31082, -.083751, .0038915};
  static constexpr double c6[] = {-.4803, -.082676, .0030302};

  const double an = static_cast<double>(n);
  const std::size_t nn2 = n / 2;
  std::vector<double> a(nn2);

  // Coefficients for the half sample.
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2;
  } else {
    const double an25 = an + .25;
    std::vector<double> m(nn2);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < nn2; ++i) {
      m[i] = normal_quantile((static_cast<double>(i + 1) - .375) / an25);
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1. / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;
    std::size_t i1;
    double fac;
    if (n > 5) {
      i1 = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2. * (m[0] * m[0]) - 2. * (m[1] * m[1])) /
                      (1. - 2. * (a1 * a1) - 2. * (a2 * a2)));
      a[1] = a2;
    } else {
      i1 = 1;
      fac = std::sqrt((summ2 - 2. * (m[0] * m[0])) / (1. - 2. * (a1 * a1)));
    }
    a[0] = a1;
    for (std::size_t i = i1; i < nn2; ++i) a[i] = -m[i] / fac;
  }

  // 1 - W via the correlation of the (range-scaled) sample with the
  // antisymmetric coefficient vector, which keeps precision near W = 1.
  double sx = 0.0, sa = 0.0;
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < nn2; ++i) {
    coef[i] = -a[i];
    coef[n - 1 - i] = a[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    x[i] /= range;
    sx += x[i];
    sa += coef[i];
  }
  sx /= an;
  sa /= an;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coef[i] - sa;
    const double xsx = x[i] - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  const double w = 1. - w1;
  res.w = w;

  if (n == 3) {
    constexpr double pi6 = 1.90985931710274; // 6 / pi
    constexpr double stqr = 1.04719755119660; // pi / 3
    res.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return res;
  }

  double y = std::log(w1);
  const double xx = std::log(an);
  double mean, sd;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      res.p_value = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    mean = poly(c3, 4, an);
    sd = std::exp(poly(c4, 4, an));
  } else {
    mean = poly(c5, 4, xx);
    sd = std::exp(poly(c6, 3, xx));
  }
  res.p_value = normal_upper_tail((y - mean) / sd);
  return res;
}

std::pair<std::size_t, std::size_t> iqr_bounds(std::size_t n_trials) {
  if (n_trials < 4) throw stats_error("iqr_bounds needs at least 4 trials");
  const std::size_t q = n_trials / 4;
  return {q, n_trials - q};
}

} // namespace avl
