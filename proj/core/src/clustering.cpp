#include <algorithm>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "survbal/acquisition.hpp"
#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

PcaResult pca(const Eigen::MatrixXd& X, std::size_t n_components) {
  if (X.rows() < 2) throw ValidationError("PCA needs at least two rows");
  const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(n_components), X.cols());
  PcaResult out;
  out.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigen returns ascending eigenvalues.
  out.components.resize(X.cols(), k);
  out.variances.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index src = X.cols() - 1 - c;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.components.col(c) = v;
    out.variances(c) = eig.eigenvalues()(src);
  }
  return out;
}

Eigen::MatrixXd pca_transform(const PcaResult& p, const Eigen::MatrixXd& X) {
  return (X.rowwise() - p.mean.transpose()) * p.components;
}

KMeansResult kmeans(const Eigen::MatrixXd& X, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 1 || k > n) throw ValidationError("k-means needs 1 <= k <= number of points");
  auto rng = make_rng({seed, 0xc1u});
  auto sq = [&](Eigen::Index i, const Eigen::RowVectorXd& c) { return (X.row(i) - c).squaredNorm(); };

  KMeansResult out;
  out.centroids.resize(static_cast<Eigen::Index>(k), X.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  out.centroids.row(0) = X.row(static_cast<Eigen::Index>(first(rng)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq(static_cast<Eigen::Index>(i), out.centroids.row(static_cast<Eigen::Index>(c - 1))));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    out.centroids.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(pick));
  }

  out.assignment.assign(n, 0);
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    bool changed = out.iterations == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq(static_cast<Eigen::Index>(i), out.centroids.row(static_cast<Eigen::Index>(c)));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignment[i] != best) changed = true;
      out.assignment[i] = best;
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), X.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(out.assignment[i])) += X.row(static_cast<Eigen::Index>(i));
      ++counts[out.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        out.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq(static_cast<Eigen::Index>(i), out.centroids.row(static_cast<Eigen::Index>(out.assignment[i])));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      out.centroids.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(far));
      out.assignment[far] = c;
    }
  }
  return out;
}

std::vector<std::size_t> score_cfb(const Dataset& pool, const CfbOptions& options, std::uint64_t seed) {
  if (pool.censored_count() < options.n_clusters)
    throw ValidationError("pool has fewer censored instances than clusters");
  const Eigen::MatrixXd X = pool.covariates();
  const auto model = pca(X, std::max<std::size_t>(1, options.pca_dims));
  const Eigen::MatrixXd Z = pca_transform(model, X);
  const auto km = kmeans(Z, options.n_clusters, seed);

  const std::size_t k = options.n_clusters;
  std::vector<double> censored_frac(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    censored_frac[km.assignment[i]] += pool.instances[i].censored() ? 1.0 : 0.0;
    ++counts[km.assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) censored_frac[c] = counts[c] ? censored_frac[c] / static_cast<double>(counts[c]) : 0.0;

  std::vector<std::size_t> cluster_order(k);
  std::iota(cluster_order.begin(), cluster_order.end(), 0);
  std::stable_sort(cluster_order.begin(), cluster_order.end(),
                   [&](std::size_t a, std::size_t b) { return censored_frac[a] > censored_frac[b]; });

  std::vector<std::size_t> out;
  for (auto c : cluster_order) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (km.assignment[i] != c || !pool.instances[i].censored()) continue;
      members.emplace_back((Z.row(static_cast<Eigen::Index>(i)) - km.centroids.row(static_cast<Eigen::Index>(c))).norm(), i);
    }
    std::sort(members.begin(), members.end());
    for (const auto& m : members) out.push_back(m.second);
  }
  return out;
}

}  // namespace survbal
