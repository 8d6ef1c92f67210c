#include "plr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "plr/error.hpp"

namespace plr {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
};

Moments moments(std::span<const double> xs) {
  Moments m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(xs.size() - 1);
  return m;
}

double student_cdf(double t, double df) {
  const boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

}  // namespace

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha,
                         double variance_floor) {
  require(a.size() >= 2 && b.size() >= 2, "Welch's t-test needs at least two samples per side");
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = std::max(ma.var, variance_floor) / na;
  const double vb = std::max(mb.var, variance_floor) / nb;

  WelchResult r;
  r.mean_a = ma.mean;
  r.mean_b = mb.mean;
  r.t = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const double lower = student_cdf(r.t, r.df);
  r.p_a_less = lower;
  r.p_two_sided = std::min(1.0, 2.0 * std::min(lower, 1.0 - lower));
  r.significant = r.p_two_sided < alpha;
  return r;
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 3, "spearman needs paired samples of size >= 3");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const Moments mx = moments(rx);
  const Moments my = moments(ry);
  double cov = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) cov += (rx[i] - mx.mean) * (ry[i] - my.mean);
  cov /= static_cast<double>(rx.size() - 1);

  CorrelationResult out;
  out.n = x.size();
  if (mx.var <= 0.0 || my.var <= 0.0) return out;
  out.rho = cov / std::sqrt(mx.var * my.var);
  const double df = static_cast<double>(out.n) - 2.0;
  if (std::abs(out.rho) >= 1.0) {
    out.p_two_sided = 0.0;
    return out;
  }
  const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
  const double lower = student_cdf(t, df);
  out.p_two_sided = std::min(1.0, 2.0 * std::min(lower, 1.0 - lower));
  return out;
}

}  // namespace plr
