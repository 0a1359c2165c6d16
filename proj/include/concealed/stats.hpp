#pragma once

#include <cstddef>
#include <vector>

namespace concealed::stats {

/// Pearson chi-square goodness of fit against the uniform distribution. Returns the p-value.
double chi_square_uniform_p(const std::vector<std::size_t>& counts);

/// Pearson correlation; 0 when either side has zero variance or fewer than two points.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);

}  // namespace concealed::stats
