#include "concealed/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace concealed::stats {

double chi_square_uniform_p(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2)
        throw std::invalid_argument{"chi-square needs at least two cells"};
    double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total == 0)
        throw std::invalid_argument{"chi-square needs observations"};
    double expected = total / static_cast<double>(counts.size());
    double statistic = 0;
    for (auto c : counts)
        statistic += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    boost::math::chi_squared dist{static_cast<double>(counts.size() - 1)};
    return boost::math::cdf(boost::math::complement(dist, statistic));
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument{"pearson needs equal-length samples"};
    if (x.size() < 2)
        return 0.0;
    double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0)
        return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace concealed::stats
