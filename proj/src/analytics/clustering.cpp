#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <random>

#include "epolis/analytics/analytics.hpp"
#include "epolis/error.hpp"

namespace epolis::analytics {

namespace {

double dist2(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<Vector> seed_plus_plus(const std::vector<Vector>& pts, int k, std::mt19937_64& rng) {
  std::vector<Vector> c{pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)]};
  std::vector<double> d(pts.size());
  while (static_cast<int>(c.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d[i] = std::numeric_limits<double>::infinity();
      for (const auto& x : c) d[i] = std::min(d[i], dist2(pts[i], x));
      total += d[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      pick = std::discrete_distribution<std::size_t>(d.begin(), d.end())(rng);
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng);
    }
    c.push_back(pts[pick]);
  }
  return c;
}

KMeansResult lloyd(const std::vector<Vector>& pts, std::vector<Vector> centroids, int max_iterations) {
  KMeansResult r;
  std::size_t n = pts.size(), k = centroids.size(), dim = pts[0].size();
  r.assignments.assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool moved = false;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = dist2(pts[i], centroids[0]);
      for (std::size_t j = 1; j < k; ++j)
        if (double dj = dist2(pts[i], centroids[j]); dj < bd) bd = dj, best = static_cast<int>(j);
      moved |= r.assignments[i] != best;
      r.assignments[i] = best;
      inertia += bd;
    }
    r.inertia_trace.push_back(inertia);
    r.inertia = inertia;
    if (!moved && it > 0) break;
    std::vector<Vector> sum(k, Vector(dim, 0.0));
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      count[r.assignments[i]]++;
      for (std::size_t t = 0; t < dim; ++t) sum[r.assignments[i]][t] += pts[i][t];
    }
    for (std::size_t j = 0; j < k; ++j)
      if (count[j])
        for (std::size_t t = 0; t < dim; ++t) centroids[j][t] = sum[j][t] / count[j];
  }
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

KMeansResult kmeans(const std::vector<Vector>& points, int k, const KMeansOptions& options) {
  if (k < 1 || static_cast<std::size_t>(k) > points.size())
    throw Error(ErrorCode::Validation, "k = " + std::to_string(k) + " outside [1, " + std::to_string(points.size()) + "]");
  for (const auto& p : points)
    if (p.size() != points[0].size()) throw Error(ErrorCode::Validation, "vectors differ in length");
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    auto run = lloyd(points, seed_plus_plus(points, k, rng), std::max(1, options.max_iterations));
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

std::optional<double> silhouette(const std::vector<Vector>& points, const std::vector<int>& assignments) {
  if (points.size() != assignments.size()) throw Error(ErrorCode::Validation, "one assignment per point expected");
  std::map<int, int> size;
  for (int a : assignments) size[a]++;
  if (size.size() < 2) return std::nullopt;
  double total = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (size[assignments[i]] == 1) continue;
    std::map<int, double> sum;
    for (std::size_t j = 0; j < points.size(); ++j)
      if (j != i) sum[assignments[j]] += std::sqrt(dist2(points[i], points[j]));
    double a = sum[assignments[i]] / (size[assignments[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, s] : sum)
      if (c != assignments[i]) b = std::min(b, s / size[c]);
    double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0;
  }
  return total / points.size();
}

ClusteringResult opinion_groups(const std::map<std::int64_t, Vector>& vectors, int kmin, int kmax,
                                const KMeansOptions& options) {
  int n = static_cast<int>(vectors.size());
  if (n < 2) throw Error(ErrorCode::Validation, "clustering needs at least two vectors");
  if (kmin < 2 || kmax > n - 1 || kmin > kmax)
    throw Error(ErrorCode::Validation, "k range [" + std::to_string(kmin) + ", " + std::to_string(kmax) +
                                           "] outside [2, " + std::to_string(n - 1) + "]");
  std::vector<std::int64_t> uids;
  std::vector<Vector> pts;
  for (const auto& [uid, v] : vectors) {
    uids.push_back(uid);
    pts.push_back(v);
  }
  ClusteringResult out;
  auto assign = [&](const KMeansResult& r) {
    out.assignments.clear();
    for (int i = 0; i < n; ++i) out.assignments[uids[i]] = r.assignments[i];
    out.centroids = r.centroids;
  };
  if (std::all_of(pts.begin(), pts.end(), [&](const Vector& p) { return p == pts[0]; })) {
    out.k = 1;
    out.degenerate = true;
    assign(kmeans(pts, 1, options));
    return out;
  }
  std::optional<double> best;
  for (int k = kmin; k <= kmax; ++k) {
    auto r = kmeans(pts, k, options);
    auto s = silhouette(pts, r.assignments);
    out.table.push_back({k, r.inertia, s});
    if (s && (!best || *s > *best)) {
      best = s;
      out.k = k;
      assign(r);
    }
  }
  out.silhouette = best;
  return out;
}

}  // namespace epolis::analytics
