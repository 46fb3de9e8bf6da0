#include "survbal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "survbal/error.hpp"

namespace survbal {

namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || b != c) throw ShapeError("metric inputs have mismatched lengths");
}

}  // namespace

double KmCurve::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return surv[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::before(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return surv[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::restricted_mean(double tau) const {
  double area = 0.0, prev_t = 0.0, prev_s = 1.0;
  for (std::size_t k = 0; k < times.size() && times[k] < tau; ++k) {
    area += (times[k] - prev_t) * prev_s;
    prev_t = times[k];
    prev_s = surv[k];
  }
  if (tau > prev_t) area += (tau - prev_t) * prev_s;
  return area;
}

KmCurve km_fit(std::span<const double> times, std::span<const char> events) {
  if (times.size() != events.size()) throw ShapeError("times and events differ in length");
  if (times.empty()) throw ValidationError("Kaplan-Meier needs at least one observation");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve km;
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    if (t < 0.0) throw ValidationError("negative survival time");
    std::size_t d = 0, total = 0;
    while (k < order.size() && times[order[k]] == t) {
      d += events[order[k]] ? 1 : 0;
      ++total;
      ++k;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      km.times.push_back(t);
      km.surv.push_back(s);
    }
    at_risk -= total;
  }
  return km;
}

double SurvivalCurve::at(double t) const {
  if (knots.empty()) return 1.0;
  if (t <= knots.front()) return surv.front();
  if (t >= knots.back()) return surv.back();
  const auto it = std::upper_bound(knots.begin(), knots.end(), t);
  const auto k = static_cast<std::size_t>(it - knots.begin());
  const double t0 = knots[k - 1], t1 = knots[k];
  if (t1 == t0) return surv[k];
  return surv[k - 1] + (surv[k] - surv[k - 1]) * (t - t0) / (t1 - t0);
}

SurvivalCurve isd_from_bins(std::span<const double> probs, const TimeBins& bins) {
  if (probs.size() != bins.count()) throw ShapeError("bin count does not match probability row");
  const auto s = survival_at_bin_starts(probs);
  SurvivalCurve c;
  for (std::size_t j = 0; j < s.size(); ++j) {
    c.knots.push_back(bins.lower(j));
    c.surv.push_back(j == 0 ? 1.0 : s[j]);
  }
  c.knots.push_back(bins.upper(bins.count() - 1));
  c.surv.push_back(0.0);
  return c;
}

double predict_time(std::span<const double> probs, const TimeBins& bins) {
  if (probs.size() != bins.count()) throw ShapeError("bin count does not match probability row");
  const auto s = survival_at_bin_starts(probs);
  const std::size_t n = s.size();
  double prev = 1.0;
  for (std::size_t j = 1; j < n; ++j) {
    if (s[j] <= 0.5) {
      const double lo = bins.lower(j - 1), hi = bins.lower(j);
      return lo + (prev - 0.5) / (prev - s[j]) * (hi - lo);
    }
    prev = s[j];
  }
  return 0.5 * (bins.lower(n - 1) + bins.upper(n - 1));
}

std::vector<double> pseudo_observations(std::span<const double> times, std::span<const char> events) {
  const std::size_t n = times.size();
  if (n != events.size()) throw ShapeError("times and events differ in length");
  if (n < 2) throw UndefinedMetricError("pseudo-observations need at least two instances");
  const double tau = *std::max_element(times.begin(), times.end());
  const double full = km_fit(times, events).restricted_mean(tau);

  // Leave-one-out fits on a pre-sorted copy.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  std::vector<double> out(n);
  for (std::size_t skip = 0; skip < n; ++skip) {
    double s = 1.0, area = 0.0, prev_t = 0.0;
    std::size_t at_risk = n - 1;
    for (std::size_t k = 0; k < n;) {
      const double t = times[order[k]];
      std::size_t d = 0, total = 0;
      while (k < n && times[order[k]] == t) {
        if (order[k] != skip) {
          d += events[order[k]] ? 1 : 0;
          ++total;
        }
        ++k;
      }
      if (d > 0 && at_risk > 0) {
        area += (t - prev_t) * s;
        prev_t = t;
        s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      }
      at_risk -= total;
    }
    if (tau > prev_t) area += (tau - prev_t) * s;
    const double po = static_cast<double>(n) * full - static_cast<double>(n - 1) * area;
    out[skip] = std::max(0.0, po);
  }
  return out;
}

double mae_po(std::span<const double> preds, std::span<const double> times, std::span<const char> events,
              std::span<const double> pseudo) {
  check_lengths(preds.size(), times.size(), events.size());
  if (preds.empty()) throw UndefinedMetricError("empty test set");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    acc += std::abs((events[i] ? times[i] : pseudo[i]) - preds[i]);
  return acc / static_cast<double>(preds.size());
}

double mae_po(std::span<const double> preds, std::span<const double> times, std::span<const char> events) {
  check_lengths(preds.size(), times.size(), events.size());
  if (preds.empty()) throw UndefinedMetricError("empty test set");
  const bool any_censored = std::any_of(events.begin(), events.end(), [](bool e) { return !e; });
  if (!any_censored) return mae_po(preds, times, events, std::vector<double>(preds.size(), 0.0));
  return mae_po(preds, times, events, pseudo_observations(times, events));
}

double mae_po(std::span<const double> preds, const Dataset& test) {
  const auto summary = TestSetSummary::from(test);
  return mae_po(preds, summary.times, summary.events, summary.pseudo);
}

double mae_uncensored(std::span<const double> preds, std::span<const double> times, std::span<const char> events) {
  check_lengths(preds.size(), times.size(), events.size());
  double acc = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (events[i]) {
      acc += std::abs(times[i] - preds[i]);
      ++m;
    }
  if (m == 0) throw UndefinedMetricError("no uncensored instances");
  return acc / static_cast<double>(m);
}

double c_index(std::span<const double> preds, std::span<const double> times, std::span<const char> events) {
  check_lengths(preds.size(), times.size(), events.size());
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (!(times[i] < times[j])) continue;
      ++comparable;
      if (preds[i] < preds[j])
        concordant += 1.0;
      else if (preds[i] == preds[j])
        concordant += 0.5;
    }
  }
  if (comparable == 0) throw UndefinedMetricError("no comparable pairs for the concordance index");
  return concordant / static_cast<double>(comparable);
}

double integrated_brier(std::span<const SurvivalCurve> isds, std::span<const double> times,
                        std::span<const char> events, std::span<const double> grid, const BrierOptions& options) {
  check_lengths(isds.size(), times.size(), events.size());
  if (isds.empty()) throw UndefinedMetricError("empty test set");
  if (grid.size() < 2) throw ValidationError("Brier grid needs at least two points");
  std::vector<char> cens_flags(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) cens_flags[i] = events[i] ? 0 : 1;
  const KmCurve g = km_fit(times, cens_flags);
  const auto n = static_cast<double>(isds.size());

  std::vector<double> bs(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    const double g_t = std::max(g.at(t), options.weight_floor);
    double acc = 0.0;
    for (std::size_t i = 0; i < isds.size(); ++i) {
      const double s = isds[i].at(t);
      if (times[i] <= t && events[i])
        acc += s * s / std::max(g.before(times[i]), options.weight_floor);
      else if (times[i] > t)
        acc += (1.0 - s) * (1.0 - s) / g_t;
    }
    bs[k] = acc / n;
  }
  double area = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) area += 0.5 * (bs[k] + bs[k - 1]) * (grid[k] - grid[k - 1]);
  const double span = grid.back() - grid.front();
  if (!(span > 0.0)) throw ValidationError("Brier grid must span a positive interval");
  return area / span;
}

std::vector<double> default_brier_grid(std::span<const double> times, std::size_t n) {
  if (times.empty() || n < 2) throw ValidationError("grid needs observed times and n >= 2");
  std::vector<double> sorted(times.begin(), times.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = 0.95 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double top = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = top * static_cast<double>(k) / static_cast<double>(n - 1);
  return grid;
}

double ci95(std::span<const double> values) {
  if (values.size() < 2) throw ValidationError("confidence interval needs at least two values");
  const auto m = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return 1.96 * std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("t-test needs at least two values per sample");
  auto moments = [](std::span<const double> v) {
    const auto m = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (m - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  TTestResult r;
  if (se2 == 0.0) {
    r.t = ma == mb ? 0.0 : (ma < mb ? -INFINITY : INFINITY);
    r.df = na + nb - 2.0;
    r.p_two_sided = ma == mb ? 1.0 : 0.0;
    r.p_less = ma < mb ? 0.0 : (ma == mb ? 0.5 : 1.0);
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_less = boost::math::cdf(dist, r.t);
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

TestSetSummary TestSetSummary::from(const Dataset& test) {
  TestSetSummary s;
  for (const auto& inst : test.instances) {
    s.times.push_back(inst.t_obs);
    s.events.push_back(inst.delta_obs);
  }
  const bool any_censored = std::any_of(s.events.begin(), s.events.end(), [](char e) { return !e; });
  s.pseudo = any_censored ? pseudo_observations(s.times, s.events) : std::vector<double>(s.times.size(), 0.0);
  s.grid = default_brier_grid(s.times);
  return s;
}

MetricReport evaluate_posterior(const BinProbTensor& probs, const TestSetSummary& test, const TimeBins& bins) {
  const std::size_t n = probs.instances();
  if (n != test.times.size()) throw ShapeError("prediction tensor does not match test set");
  const std::span<const char> evs(test.events);

  std::vector<double> v_mae, v_unc, v_ci, v_ibs;
  std::vector<double> preds(n);
  std::vector<SurvivalCurve> isds(n);
  for (std::size_t s = 0; s < probs.samples(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = predict_time(probs.row(i, s), bins);
      isds[i] = isd_from_bins(probs.row(i, s), bins);
    }
    v_mae.push_back(mae_po(preds, test.times, evs, test.pseudo));
    v_unc.push_back(mae_uncensored(preds, test.times, evs));
    v_ci.push_back(c_index(preds, test.times, evs));
    v_ibs.push_back(integrated_brier(isds, test.times, evs, test.grid));
  }
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  auto half = [](const std::vector<double>& v) { return v.size() >= 2 ? ci95(v) : 0.0; };
  MetricReport r;
  r.mae_po = mean(v_mae);
  r.mae_uncensored = mean(v_unc);
  r.c_index = mean(v_ci);
  r.ibs = mean(v_ibs);
  r.ci95 = {half(v_mae), half(v_unc), half(v_ci), half(v_ibs)};
  return r;
}

}  // namespace survbal
