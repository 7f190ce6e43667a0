#include "ia/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ia {

Tensor distance_matrix(const Tensor& queries, const Tensor& gallery) {
  if (queries.rank() != 2 || gallery.rank() != 2 || queries.extent(1) != gallery.extent(1)) {
    throw DimensionError("distance_matrix: " + shape_str(queries.shape()) + " vs " +
                         shape_str(gallery.shape()));
  }
  const int64_t nq = queries.extent(0), ng = gallery.extent(0), d = queries.extent(1);
  auto norms = [d](const Tensor& t, const char* what) {
    std::vector<double> out(static_cast<size_t>(t.extent(0)));
    for (int64_t i = 0; i < t.extent(0); ++i) {
      double s = 0.0;
      const double* row = t.data() + i * d;
      for (int64_t j = 0; j < d; ++j) s += row[j] * row[j];
      if (s <= 0.0) {
        throw NumericError(std::string(what) + " row " + std::to_string(i) +
                           " has zero norm, cosine distance undefined");
      }
      out[static_cast<size_t>(i)] = std::sqrt(s);
    }
    return out;
  };
  const auto qn = norms(queries, "query");
  const auto gn = norms(gallery, "gallery");
  Tensor dist({nq, ng});
  for (int64_t i = 0; i < nq; ++i) {
    const double* q = queries.data() + i * d;
    for (int64_t j = 0; j < ng; ++j) {
      const double* g = gallery.data() + j * d;
      double dot = 0.0;
      for (int64_t t = 0; t < d; ++t) dot += q[t] * g[t];
      dist[i * ng + j] = 1.0 - dot / (qn[static_cast<size_t>(i)] * gn[static_cast<size_t>(j)]);
    }
  }
  return dist;
}

RetrievalReport cmc_map(const Tensor& dist, std::span<const int> query_ids,
                        std::span<const int> gallery_ids) {
  if (dist.rank() != 2 || dist.extent(0) != static_cast<int64_t>(query_ids.size()) ||
      dist.extent(1) != static_cast<int64_t>(gallery_ids.size())) {
    throw DimensionError("cmc_map: distance matrix " + shape_str(dist.shape()) +
                         " does not match " + std::to_string(query_ids.size()) + " queries x " +
                         std::to_string(gallery_ids.size()) + " gallery items");
  }
  const std::set<int> gallery_set(gallery_ids.begin(), gallery_ids.end());
  for (int id : query_ids) {
    if (!gallery_set.contains(id)) {
      throw EvalError("query identity " + std::to_string(id) + " has no gallery match");
    }
  }

  const int64_t nq = dist.extent(0), ng = dist.extent(1);
  RetrievalReport report;
  report.cmc.assign(static_cast<size_t>(ng), 0.0);
  report.per_query_ap.reserve(static_cast<size_t>(nq));

  std::vector<int64_t> order(static_cast<size_t>(ng));
  for (int64_t qi = 0; qi < nq; ++qi) {
    std::iota(order.begin(), order.end(), 0);
    const double* row = dist.data() + qi * ng;
    std::sort(order.begin(), order.end(), [row](int64_t a, int64_t b) {
      return row[a] != row[b] ? row[a] < row[b] : a < b;
    });
    const int qid = query_ids[static_cast<size_t>(qi)];
    int64_t first_hit = -1;
    int relevant_seen = 0;
    double ap = 0.0;
    for (int64_t rank = 0; rank < ng; ++rank) {
      if (gallery_ids[static_cast<size_t>(order[static_cast<size_t>(rank)])] != qid) continue;
      if (first_hit < 0) first_hit = rank;
      ++relevant_seen;
      ap += static_cast<double>(relevant_seen) / static_cast<double>(rank + 1);
    }
    ap /= static_cast<double>(relevant_seen);
    report.per_query_ap.push_back(ap);
    for (int64_t k = first_hit; k < ng; ++k) report.cmc[static_cast<size_t>(k)] += 1.0;
  }
  for (double& v : report.cmc) v /= static_cast<double>(nq);
  report.map = std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(), 0.0) /
               static_cast<double>(nq);
  return report;
}

}  // namespace ia
