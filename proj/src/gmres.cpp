#include "kifmm/gmres.hpp"

#include <chrono>
#include <cmath>

namespace kifmm {

namespace {

Vector precondition(const GmresOptions& o, const Vector& v) { return o.preconditioner ? o.preconditioner(v) : v; }

}  // namespace

GmresResult gmres(const LinearOperator& op, const Vector& b, const GmresOptions& o) {
  if (!(o.tol > 0.0)) throw ConfigError("gmres: tol must be positive");
  if (o.restart < 1) throw ConfigError("gmres: restart must be >= 1");
  if (o.max_iter < 0) throw ConfigError("gmres: max_iter must be >= 0");
  const Index n = b.size();
  GmresResult res;
  IterationStats& st = res.stats;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x = Vector::Zero(n);
    st.converged = true;
    return res;
  }
  if (o.x0 && o.x0->size() != n) throw std::invalid_argument("gmres: x0 has the wrong length");
  res.x = o.x0 ? *o.x0 : Vector::Zero(n);
  Vector r = o.x0 ? Vector(b - op(res.x)) : b;
  double rel = r.norm() / bnorm;

  const int m = o.restart;
  Matrix V(n, m + 1);
  Matrix H = Matrix::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);

  while (rel > o.tol && st.iterations < o.max_iter) {
    const double beta = r.norm();
    V.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    H.setZero();
    int k = 0;
    bool breakdown = false;
    while (k < m && st.iterations < o.max_iter) {
      const auto t0 = std::chrono::steady_clock::now();
      Vector w = op(precondition(o, V.col(k)));
      const double w0 = w.norm();
      for (int i = 0; i <= k; ++i) {
        const double h = V.col(i).dot(w);
        H(i, k) = h;
        w -= h * V.col(i);
      }
      double wn = w.norm();
      if (wn > 0.0) {
        double loss = 0.0;
        for (int i = 0; i <= k; ++i) loss = std::max(loss, std::abs(V.col(i).dot(w)) / wn);
        if (loss > o.reorth_threshold) {
          for (int i = 0; i <= k; ++i) {
            const double h = V.col(i).dot(w);
            H(i, k) += h;
            w -= h * V.col(i);
          }
          wn = w.norm();
        }
      }
      H(k + 1, k) = wn;
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double den = std::hypot(H(k, k), H(k + 1, k));
      if (den == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else {
        cs[k] = H(k, k) / den;
        sn[k] = H(k + 1, k) / den;
      }
      H(k, k) = den;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++st.iterations;
      st.residual_history.push_back(std::abs(g[k]) / bnorm);
      st.iteration_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (wn <= 1e-14 * std::max(w0, 1e-300)) {
        breakdown = true;
        break;
      }
      if (std::abs(g[k]) / bnorm <= o.tol) break;
      V.col(k) = w / wn;
    }
    // Solve the k x k triangular system; drop trailing columns with a zero pivot.
    int used = k;
    while (used > 0 && H(used - 1, used - 1) == 0.0) --used;
    if (used > 0) {
      const Vector y = H.topLeftCorner(used, used).triangularView<Eigen::Upper>().solve(g.head(used));
      res.x += precondition(o, V.leftCols(used) * y);
    }
    r = b - op(res.x);
    rel = r.norm() / bnorm;
    ++st.restarts;
    if (breakdown && used == 0) break;
  }
  st.final_residual = rel;
  st.converged = rel <= o.tol;
  return res;
}

}  // namespace kifmm
