#pragma once

#include <span>
#include <string>
#include <vector>

#include "dgeval/errors.hpp"

namespace dgeval {

// Exact two-sided binomial test under null probability 0.5: sums every point
// probability not exceeding that of k (with a relative tie tolerance for
// floating-point equality), computed in log space so n in the hundreds stays
// stable. Throws ValidationError unless 0 <= k <= n.
double binomial_two_sided(int k, int n);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;  // all differences equal; t/p follow the guard path
};

// Standard paired t statistic with a two-sided p from the t-distribution
// survival function. Equal-length inputs with at least two pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct PreferenceVote {
  std::string query_id;
  std::string winner;
};

struct PreferenceSummary {
  std::string model_a;
  std::string model_b;
  int count_a = 0;
  int count_b = 0;
  double pct_a = 0.0;  // rounded half-up to 1 decimal
  double pct_b = 0.0;
  double p_value = 1.0;  // exact two-sided binomial under 0.5

  bool operator==(const PreferenceSummary&) const = default;
};

// Forced-choice tally over two model names. A winner matching neither name
// raises ValidationError.
PreferenceSummary preference_summary(const std::vector<PreferenceVote>& votes,
                                     const std::string& model_a, const std::string& model_b);

// Half-up decimal rounding used by every report formatter (12.25 -> 12.3 at
// one decimal). Inputs are non-negative scores and percentages.
double round_half_up(double value, int decimals);

}  // namespace dgeval
