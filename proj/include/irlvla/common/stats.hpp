#pragma once

#include <vector>

namespace irlvla {

double mean(const std::vector<double>& v);

// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of average ranks. Returns 0 when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace irlvla
