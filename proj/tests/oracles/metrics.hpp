#pragma once

// Brute-force ranking metrics over plain vectors: grades[i] is the grade of
// the document at rank i + 1, judged holds every judged grade of the query.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double reciprocal_rank(const std::vector<int>& grades, std::size_t k) {
  for (std::size_t i = 0; i < grades.size() && i < k; ++i) {
    if (grades[i] >= 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

inline double dcg(const std::vector<int>& grades, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < grades.size() && i < k; ++i) {
    s += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return s;
}

inline double ndcg(const std::vector<int>& grades, std::vector<int> judged, std::size_t k) {
  std::sort(judged.begin(), judged.end(), std::greater<>());
  const double ideal = dcg(judged, k);
  return ideal > 0.0 ? dcg(grades, k) / ideal : 0.0;
}

}  // namespace oracle
