#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/LU>

#include "essr/counts.hpp"
#include "essr/mdp.hpp"

namespace essr {

enum class SrVariant { exact, empirical, substochastic, features };

inline std::string_view to_string(SrVariant v) {
  switch (v) {
    case SrVariant::exact: return "exact-SR";
    case SrVariant::empirical: return "empirical-SR";
    case SrVariant::substochastic: return "substochastic-SR";
    case SrVariant::features: return "successor-features";
  }
  return "?";
}

/// Psi = (I - gamma P)^{-1} (times Phi for features), tagged with its origin.
struct SuccessorMatrix {
  Matrix values;
  double gamma = 0.0;
  SrVariant variant = SrVariant::exact;

  Index rows() const { return static_cast<Index>(values.rows()); }
  /// ||Psi(s)||_1; entries are nonnegative so this is the row sum.
  double row_l1(Index s) const { return values.row(static_cast<Eigen::Index>(s)).lpNorm<1>(); }
};

/// Max-norm residual allowed on a direct solve.
inline constexpr double kSolveResidualTolerance = 1e-9;

namespace detail {

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("discount must lie in [0, 1), got " + std::to_string(gamma));
}

inline void check_substochastic(const Matrix& p) {
  if (p.rows() != p.cols()) throw std::invalid_argument("transition matrix must be square");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double x = p(i, j);
      if (!std::isfinite(x) || x < 0.0)
        throw std::invalid_argument("transition matrix has a negative or non-finite entry");
      total += x;
    }
    if (total > 1.0 + 1e-9)
      throw std::invalid_argument("transition matrix row " + std::to_string(i) + " sums above 1");
  }
}

/// Solves (I - gamma P) X = rhs by LU with partial pivoting and checks the residual.
inline Matrix solve_resolvent(const Matrix& p, double gamma, const Matrix& rhs) {
  const Eigen::Index n = p.rows();
  const Matrix system = Matrix::Identity(n, n) - gamma * p;
  const Eigen::PartialPivLU<Matrix> lu(system);
  Matrix x = lu.solve(rhs);
  const double residual = (system * x - rhs).cwiseAbs().maxCoeff();
  if (!x.allFinite() || residual > kSolveResidualTolerance)
    throw std::runtime_error("successor solve failed: residual " + std::to_string(residual));
  return x;
}

}  // namespace detail

/// Dense solve of Psi = (I - gamma P)^{-1}.
inline SuccessorMatrix exact_sr(const Matrix& p, double gamma,
                                SrVariant variant = SrVariant::exact) {
  detail::check_gamma(gamma);
  detail::check_substochastic(p);
  return {detail::solve_resolvent(p, gamma, Matrix::Identity(p.rows(), p.cols())), gamma,
          variant};
}

/// Number of powers T kept by neumann_sr: the smallest T with
/// gamma^{T+1} / (1 - gamma) < tolerance.
inline std::int64_t neumann_truncation(double gamma, double tolerance) {
  detail::check_gamma(gamma);
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (gamma == 0.0) return 0;
  std::int64_t t = 0;
  double tail = gamma / (1.0 - gamma);
  while (!(tail < tolerance)) {
    tail *= gamma;
    ++t;
  }
  return t;
}

/// sum_{t=0}^{T} (gamma P)^t with T from neumann_truncation. Agrees with
/// exact_sr entrywise to within `tolerance` for (sub)stochastic P.
inline SuccessorMatrix neumann_sr(const Matrix& p, double gamma, double tolerance,
                                  SrVariant variant = SrVariant::exact) {
  detail::check_substochastic(p);
  const std::int64_t terms = neumann_truncation(gamma, tolerance);
  const Eigen::Index n = p.rows();
  Matrix sum = Matrix::Identity(n, n);
  Matrix power = Matrix::Identity(n, n);
  const Matrix step = gamma * p;
  for (std::int64_t t = 1; t <= terms; ++t) {
    power = power * step;
    sum += power;
  }
  return {std::move(sum), gamma, variant};
}

/// P~(s, s') = n(s, s') / (n(s) + phantom + 1), with n(s) the observed row
/// total. phantom = 0 is the textbook substochastic matrix; the literal
/// pseudo-code uses phantom = |S||A|.
inline Matrix substochastic_matrix(const CountMatrix& n, std::int64_t phantom = 0) {
  const Index ns = n.num_states();
  Matrix p = Matrix::Zero(ns, ns);
  for (Index s = 0; s < ns; ++s) {
    const double denom = static_cast<double>(n.row_total(s) + phantom + 1);
    for (Index x = 0; x < ns; ++x) p(s, x) = static_cast<double>(n(s, x)) / denom;
  }
  return p;
}

/// SSR under the definition2 counting scheme.
inline SuccessorMatrix ssr_from_counts(const CountMatrix& n, double gamma) {
  return exact_sr(substochastic_matrix(n), gamma, SrVariant::substochastic);
}

inline SuccessorMatrix ssr_from_counts(const CountModel& model, CountingScheme scheme,
                                       double gamma) {
  const std::int64_t phantom =
      scheme == CountingScheme::algorithm1
          ? static_cast<std::int64_t>(model.num_states() * model.num_actions())
          : 0;
  return exact_sr(substochastic_matrix(model.state_counts(), phantom), gamma,
                  SrVariant::substochastic);
}

struct ChiVector {
  Vector values;
  double gamma = 0.0;
};

namespace detail {
inline void require_substochastic(const SuccessorMatrix& ssr, std::string_view what) {
  if (ssr.variant != SrVariant::substochastic)
    throw std::invalid_argument(std::string(what) + " needs a substochastic-SR, got " +
                                std::string(to_string(ssr.variant)));
}
}  // namespace detail

/// chi(s) = (1 + gamma) - ||Psi~(s)||_1.
inline ChiVector chi(const SuccessorMatrix& ssr) {
  detail::require_substochastic(ssr, "chi");
  Vector values(ssr.values.rows());
  for (Eigen::Index s = 0; s < values.size(); ++s)
    values(s) = (1.0 + ssr.gamma) - ssr.values.row(s).lpNorm<1>();
  return {std::move(values), ssr.gamma};
}

/// Slack on both sides of the count-recovery bound check.
inline constexpr double kBoundSlack = 1e-9;

struct CountBoundRow {
  std::int64_t visits = 0;
  double lower = 0.0;
  double chi = 0.0;
  double upper = 0.0;
  bool holds = false;
  /// The bound's derivation divides by n(s); unvisited states are checked
  /// empirically only.
  bool unvisited = false;
};

/// gamma/(n(s)+1) - gamma^2/(1-gamma) <= chi(s) <= gamma/(n(s)+1), per state,
/// with n(s) the observed row total.
inline std::vector<CountBoundRow> theorem1_bounds(const CountMatrix& n, double gamma) {
  const auto c = chi(ssr_from_counts(n, gamma));
  std::vector<CountBoundRow> rows(n.num_states());
  for (Index s = 0; s < n.num_states(); ++s) {
    auto& r = rows[s];
    r.visits = n.row_total(s);
    r.upper = gamma / static_cast<double>(r.visits + 1);
    r.lower = r.upper - gamma * gamma / (1.0 - gamma);
    r.chi = c.values(static_cast<Eigen::Index>(s));
    r.holds = r.lower - kBoundSlack <= r.chi && r.chi <= r.upper + kBoundSlack;
    r.unvisited = r.visits == 0;
  }
  return rows;
}

/// P~ = (I - N) P^ with N = diag(1 / (n(s) + 1)).
struct PtildeDecomposition {
  Vector inverse_counts;  ///< diagonal of N
  Matrix p_hat;           ///< zero on unvisited rows, where it is undefined
  Matrix p_tilde;
  std::vector<bool> visited;

  /// max |P~ - (I - N) P^| over visited rows.
  double reconstruction_error() const {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < p_tilde.rows(); ++s) {
      if (!visited[static_cast<Index>(s)]) continue;
      const auto rebuilt = (1.0 - inverse_counts(s)) * p_hat.row(s);
      worst = std::max(worst, (p_tilde.row(s) - rebuilt).cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

inline PtildeDecomposition decompose_ptilde(const CountMatrix& n) {
  const Index ns = n.num_states();
  PtildeDecomposition d{Vector(ns), Matrix::Zero(ns, ns), substochastic_matrix(n),
                        std::vector<bool>(ns)};
  for (Index s = 0; s < ns; ++s) {
    const auto total = n.row_total(s);
    const auto i = static_cast<Eigen::Index>(s);
    d.inverse_counts(i) = 1.0 / static_cast<double>(total + 1);
    d.visited[s] = total > 0;
    if (total == 0) continue;
    for (Index x = 0; x < ns; ++x)
      d.p_hat(i, static_cast<Eigen::Index>(x)) =
          static_cast<double>(n(s, x)) / static_cast<double>(total);
  }
  return d;
}

/// r_int(s) = -||Psi~(s)||_1. Always <= -1; -1 exactly for states with no
/// outgoing mass.
inline Vector intrinsic_reward_l1(const SuccessorMatrix& ssr) {
  detail::require_substochastic(ssr, "intrinsic_reward_l1");
  Vector r(ssr.values.rows());
  for (Eigen::Index s = 0; s < r.size(); ++s) r(s) = -ssr.values.row(s).lpNorm<1>();
  return r;
}

/// Row-major text dump: "<rows> <cols>" then one line per row.
inline std::string format_matrix(const Matrix& m, int precision = 10) {
  std::ostringstream out;
  out << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(precision);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace essr
