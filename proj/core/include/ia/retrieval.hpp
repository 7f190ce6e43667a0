#pragma once

#include <span>
#include <vector>

#include "ia/tensor.hpp"

namespace ia {

// D[i,j] = 1 - cosine(q_i, g_j). Throws NumericError naming the offending row
// when an embedding has zero norm.
Tensor distance_matrix(const Tensor& queries, const Tensor& gallery);

struct RetrievalReport {
  std::vector<double> cmc;           // top-k accuracy, k = 1..gallery size
  double map = 0.0;                  // mean of per_query_ap
  std::vector<double> per_query_ap;

  double top_k(size_t k) const { return cmc.at(k - 1); }
};

// Ranks each query's gallery by ascending distance (ties broken by gallery
// index) and accumulates CMC and average precision.
RetrievalReport cmc_map(const Tensor& dist, std::span<const int> query_ids,
                        std::span<const int> gallery_ids);

}  // namespace ia
