#include "dgeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace dgeval {

namespace {

// log P(X = i) for X ~ Binomial(n, 0.5).
double log_pmf_half(int i, int n) {
  return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
         n * std::log(2.0);
}

}  // namespace

double binomial_two_sided(int k, int n) {
  if (n < 0 || k < 0 || k > n) {
    throw ValidationError(fmt::format("binomial test needs 0 <= k <= n, got k={} n={}", k, n));
  }
  if (n == 0) return 1.0;

  // Include every outcome whose point probability is at most pmf(k), with a
  // relative tolerance so the mirrored term (pmf(n-k) = pmf(k) exactly in
  // real arithmetic) survives floating-point jitter. Adjacent pmf values
  // differ by factors around 1 +- 2/n, far above the tolerance.
  double threshold = log_pmf_half(k, n) + std::log1p(1e-7);
  double p = 0.0;
  for (int i = 0; i <= n; ++i) {
    double lp = log_pmf_half(i, n);
    if (lp <= threshold) p += std::exp(lp);
  }
  return std::min(p, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError(
        fmt::format("paired t-test length mismatch: {} vs {}", a.size(), b.size()));
  }
  if (a.size() < 2) {
    throw ValidationError("paired t-test needs at least two pairs");
  }
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult result;
  if (sd == 0.0) {
    result.zero_variance = true;
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = mean > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
    }
    return result;
  }

  result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(n - 1));
  result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t)));
  return result;
}

PreferenceSummary preference_summary(const std::vector<PreferenceVote>& votes,
                                     const std::string& model_a, const std::string& model_b) {
  if (votes.empty()) throw ValidationError("preference summary over zero votes");
  PreferenceSummary s;
  s.model_a = model_a;
  s.model_b = model_b;
  for (const auto& v : votes) {
    if (v.winner == model_a) {
      ++s.count_a;
    } else if (v.winner == model_b) {
      ++s.count_b;
    } else {
      throw ValidationError(fmt::format("vote for unknown model '{}' (query {})", v.winner,
                                        v.query_id));
    }
  }
  int total = s.count_a + s.count_b;
  s.pct_a = round_half_up(100.0 * s.count_a / total, 1);
  s.pct_b = round_half_up(100.0 * s.count_b / total, 1);
  s.p_value = binomial_two_sided(s.count_a, total);
  return s;
}

double round_half_up(double value, int decimals) {
  double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

}  // namespace dgeval
