#include "nag/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {
namespace {

struct EigenPair {
  double lambda;
  std::vector<double> vec;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void scale(std::span<double> a, double s) {
  for (double& x : a) x *= s;
}

[[noreturn]] void too_many_requested(std::size_t s, std::size_t available) {
  std::ostringstream os;
  os << "requested " << s << " structural eigenvectors but only " << available
     << " non-trivial Laplacian eigenvalues are available";
  throw ConfigError(os.str());
}

double laplacian_residual(const CsrMatrix& adj_norm, std::span<const double> v, double lambda) {
  std::vector<double> av(v.size());
  spmv(adj_norm, v, av);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = (v[i] - av[i]) - lambda * v[i];
    acc += r * r;
  }
  return std::sqrt(acc);
}

SpectralEncoding pack(std::vector<EigenPair> pairs, std::size_t n) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EigenPair& a, const EigenPair& b) { return a.lambda < b.lambda; });
  SpectralEncoding enc;
  enc.s = pairs.size();
  enc.vectors = Tensor2(n, pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    canonicalize_sign(pairs[k].vec);
    enc.eigenvalues.push_back(pairs[k].lambda);
    for (std::size_t i = 0; i < n; ++i) enc.vectors(i, k) = pairs[k].vec[i];
  }
  return enc;
}

SpectralEncoding dense_eigs(const CsrMatrix& adj_norm, std::size_t s, const SpectralOptions& opt) {
  const std::size_t n = adj_norm.n_rows;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    auto cols = adj_norm.row_cols(r);
    auto vals = adj_norm.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) lap(r, cols[i]) -= vals[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw InternalError("dense eigendecomposition failed");

  std::vector<EigenPair> pairs;
  std::size_t available = 0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    const double lambda = solver.eigenvalues()(k);
    if (lambda <= opt.trivial_threshold) continue;
    ++available;
    if (pairs.size() < s) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = solver.eigenvectors()(i, k);
      pairs.push_back({lambda, std::move(v)});
    }
  }
  if (available < s) too_many_requested(s, available);
  return pack(std::move(pairs), n);
}

// Thick-restart Lanczos for the largest eigenvalues of the normalized
// adjacency restricted to the orthogonal complement of `locked`. Largest
// eigenvalues mu of Â are the smallest lambda = 1 - mu of the Laplacian.
class RestartedLanczos {
 public:
  RestartedLanczos(const CsrMatrix& op, const std::vector<std::vector<double>>& locked,
                   std::size_t& matvec_budget, std::mt19937_64& gen, double tolerance)
      : op_(op), locked_(locked), budget_(matvec_budget), gen_(gen), tol_(tolerance),
        n_(op.n_rows) {}

  std::vector<EigenPair> run(std::size_t nev) {
    const std::size_t dim = n_ - std::min(n_, locked_.size());
    if (dim == 0 || nev == 0) return {};
    nev = std::min(nev, dim);
    const std::size_t m = std::min(dim, std::max<std::size_t>(3 * nev, nev + 30));

    basis_.assign(m + 1, std::vector<double>(n_, 0.0));
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    if (!random_unit_vector(0, basis_[0])) return {};

    std::size_t kept = 0;
    std::vector<double> w(n_);
    for (;;) {
      double beta_last = 0.0;
      for (std::size_t j = kept; j < m; ++j) {
        if (budget_ == 0) throw InternalError("Lanczos did not converge within 10*n iterations");
        --budget_;
        spmv(op_, basis_[j], w);
        t(j, j) = dot(basis_[j], w);
        orthogonalize(w, j + 1);
        double beta = norm2(w);
        std::vector<double>& next = basis_[j + 1];
        if (beta <= 1e-12) {
          // Invariant subspace: continue from a fresh direction with zero coupling.
          beta = 0.0;
          if (j + 1 < dim) {
            if (!random_unit_vector(j + 1, next)) std::fill(next.begin(), next.end(), 0.0);
          } else {
            std::fill(next.begin(), next.end(), 0.0);
          }
        } else {
          for (std::size_t i = 0; i < n_; ++i) next[i] = w[i] / beta;
        }
        if (j + 1 < m) {
          t(j, j + 1) = beta;
          t(j + 1, j) = beta;
        } else {
          beta_last = beta;
        }
      }

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(t);
      if (ritz.info() != Eigen::Success) throw InternalError("Lanczos projected eigenproblem failed");
      const Eigen::VectorXd& theta = ritz.eigenvalues();
      const Eigen::MatrixXd& y = ritz.eigenvectors();
      const auto top = [&](std::size_t i) { return static_cast<Eigen::Index>(m - 1 - i); };

      std::size_t converged = 0;
      for (std::size_t i = 0; i < nev; ++i)
        if (std::abs(beta_last * y(static_cast<Eigen::Index>(m - 1), top(i))) <= tol_) ++converged;

      if (converged == nev || m == dim) {
        std::vector<EigenPair> out;
        for (std::size_t i = 0; i < nev; ++i) out.push_back({theta(top(i)), combine(y, top(i), m)});
        return out;
      }

      // Restart: keep the leading Ritz vectors, couple them to the residual direction.
      const std::size_t keep = std::min(m - 1, nev + (m - nev) / 2);
      std::vector<std::vector<double>> fresh;
      fresh.reserve(keep + 1);
      for (std::size_t i = 0; i < keep; ++i) fresh.push_back(combine(y, top(i), m));
      fresh.push_back(basis_[m]);
      t.setZero();
      for (std::size_t i = 0; i < keep; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto kk = static_cast<Eigen::Index>(keep);
        t(ii, ii) = theta(top(i));
        const double coupling = beta_last * y(static_cast<Eigen::Index>(m - 1), top(i));
        t(ii, kk) = coupling;
        t(kk, ii) = coupling;
      }
      for (std::size_t i = 0; i <= keep; ++i) basis_[i] = std::move(fresh[i]);
      kept = keep;
    }
  }

 private:
  void orthogonalize(std::span<double> w, std::size_t count) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : locked_) {
        const double c = dot(q, w);
        for (std::size_t i = 0; i < n_; ++i) w[i] -= c * q[i];
      }
      for (std::size_t b = 0; b < count; ++b) {
        const double c = dot(basis_[b], w);
        const double* q = basis_[b].data();
        for (std::size_t i = 0; i < n_; ++i) w[i] -= c * q[i];
      }
    }
  }

  bool random_unit_vector(std::size_t count, std::vector<double>& out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int attempt = 0; attempt < 8; ++attempt) {
      for (double& x : out) x = normal(gen_);
      orthogonalize(out, count);
      const double nrm = norm2(out);
      if (nrm > 1e-8) {
        scale(out, 1.0 / nrm);
        return true;
      }
    }
    return false;
  }

  std::vector<double> combine(const Eigen::MatrixXd& y, Eigen::Index col, std::size_t m) const {
    std::vector<double> v(n_, 0.0);
    for (std::size_t b = 0; b < m; ++b) {
      const double c = y(static_cast<Eigen::Index>(b), col);
      const double* q = basis_[b].data();
      for (std::size_t i = 0; i < n_; ++i) v[i] += c * q[i];
    }
    const double nrm = norm2(v);
    if (nrm > 0.0) scale(v, 1.0 / nrm);
    return v;
  }

  const CsrMatrix& op_;
  const std::vector<std::vector<double>>& locked_;
  std::size_t& budget_;
  std::mt19937_64& gen_;
  double tol_;
  std::size_t n_;
  std::vector<std::vector<double>> basis_;
};

SpectralEncoding lanczos_eigs(const CsrMatrix& adj_norm, std::size_t s, const SpectralOptions& opt) {
  const std::size_t n = adj_norm.n_rows;

  // Null space of L: sqrt(degree) on each non-singleton component. Degrees are
  // structural (row nnz) because adjacency entries are 0/1.
  std::size_t n_comp = 0;
  const auto comp = connected_components(adj_norm, &n_comp);
  std::vector<std::vector<double>> locked;
  {
    std::vector<std::vector<double>> by_comp(n_comp);
    for (std::size_t i = 0; i < n; ++i) {
      const auto deg = adj_norm.row_offsets[i + 1] - adj_norm.row_offsets[i];
      if (deg == 0) continue;
      auto& v = by_comp[comp[i]];
      if (v.empty()) v.assign(n, 0.0);
      v[i] = std::sqrt(static_cast<double>(deg));
    }
    for (auto& v : by_comp) {
      if (v.empty()) continue;
      scale(v, 1.0 / norm2(v));
      locked.push_back(std::move(v));
    }
  }
  const std::size_t n_trivial = locked.size();
  if (s > n - n_trivial) too_many_requested(s, n - n_trivial);

  std::size_t budget = 10 * n;
  auto gen = make_stream(opt.seed, "spectral.lanczos");
  // Internal convergence is tighter than the acceptance residual.
  const double inner_tol = std::min(opt.residual_tolerance * 1e-2, 1e-10);

  std::vector<EigenPair> found;
  std::vector<EigenPair> skipped_trivial;
  const auto lambda_of = [](double mu) { return 1.0 - mu; };
  const auto sorted_lambda = [&]() {
    std::vector<double> l;
    for (const auto& p : found) l.push_back(p.lambda);
    std::sort(l.begin(), l.end());
    return l;
  };

  // Each pass runs Lanczos from a fresh random start orthogonal to everything
  // found so far, so a second copy of a repeated eigenvalue cannot hide. The
  // search ends when a pass finds nothing below the current s-th eigenvalue.
  for (;;) {
    const bool verifying = found.size() >= s;
    const std::size_t need = verifying ? 1 : s - found.size();
    RestartedLanczos lanczos(adj_norm, locked, budget, gen, inner_tol);
    auto pairs = lanczos.run(need);
    if (pairs.empty()) break;

    bool smaller_found = !verifying;
    const double threshold = verifying ? sorted_lambda()[s - 1] : 0.0;
    for (auto& p : pairs) {
      p.lambda = lambda_of(p.lambda);
      locked.push_back(p.vec);
      if (p.lambda <= opt.trivial_threshold) {
        skipped_trivial.push_back(std::move(p));
        continue;
      }
      if (verifying && p.lambda < threshold - 1e-10) smaller_found = true;
      found.push_back(std::move(p));
    }
    if (verifying && !smaller_found) break;
  }

  std::stable_sort(found.begin(), found.end(),
                   [](const EigenPair& a, const EigenPair& b) { return a.lambda < b.lambda; });
  if (found.size() < s) too_many_requested(s, found.size());
  found.resize(s);

  for (auto& p : found) {
    // Refine the eigenvalue with the Rayleigh quotient of the final vector.
    std::vector<double> av(n);
    spmv(adj_norm, p.vec, av);
    p.lambda = 1.0 - dot(p.vec, av);
    if (laplacian_residual(adj_norm, p.vec, p.lambda) > opt.residual_tolerance)
      throw InternalError("Lanczos eigenpair failed the residual check");
  }
  return pack(std::move(found), n);
}

}  // namespace

void canonicalize_sign(std::span<double> v) {
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return;
  const double cutoff = peak * (1.0 - 1e-9);
  for (double x : v) {
    if (std::abs(x) >= cutoff) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

SpectralEncoding laplacian_eigs(const CsrMatrix& adj_norm, std::size_t s,
                                const SpectralOptions& options) {
  if (adj_norm.n_rows != adj_norm.n_cols) throw InternalError("laplacian_eigs: matrix not square");
  if (s == 0) {
    SpectralEncoding enc;
    enc.vectors = Tensor2(adj_norm.n_rows, 0);
    return enc;
  }
  const bool dense = options.solver == EigenSolver::dense ||
                     (options.solver == EigenSolver::automatic &&
                      adj_norm.n_rows <= options.dense_limit);
  return dense ? dense_eigs(adj_norm, s, options) : lanczos_eigs(adj_norm, s, options);
}

Tensor2 fuse_features(const Tensor2& x, const SpectralEncoding& enc) {
  if (enc.s == 0) return x;
  if (enc.vectors.rows() != x.rows() || enc.vectors.cols() != enc.s)
    throw InternalError("fuse_features: row count of features and eigenvectors differ");
  const std::size_t d = x.cols();
  Tensor2 out(x.rows(), d + enc.s);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    auto u = enc.vectors.row(r);
    std::copy(u.begin(), u.end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

}  // namespace nag
