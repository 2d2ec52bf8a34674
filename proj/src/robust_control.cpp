#include "corerl/robust_control.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>

#include "corerl/error.hpp"

namespace corerl {

namespace {

constexpr double kHurwitzMargin = 1e-10;
constexpr int kNewtonMaxIterations = 200;
constexpr int kBisectionMaxIterations = 60;

std::string shape(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

// Kronecker-form solve of A^T X + X A + Q = 0 without the Hurwitz precondition.
Matrix lyapunov_kronecker(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  const Eigen::Index N = n * n;
  const Matrix I = Matrix::Identity(n, n);
  const Matrix At = A.transpose();

  // Column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X.
  Matrix L = Matrix::Zero(N, N);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      L.block(j * n, i * n, n, n) += I(j, i) * At;
      L.block(j * n, i * n, n, n) += At(j, i) * I;
    }
  }

  Eigen::FullPivLU<Matrix> lu(L);
  lu.setThreshold(1e-13);
  if (lu.rank() < N) {
    throw Error(ErrorCode::SingularSystem,
                "Lyapunov operator is numerically singular (rank " +
                    std::to_string(lu.rank()) + " of " + std::to_string(N) + ")");
  }
  const Vector rhs = -Eigen::Map<const Vector>(Q.data(), N);
  Vector x = lu.solve(rhs);
  // One step of iterative refinement.
  x += lu.solve(rhs - L * x);
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return symmetrize(X);
}

// LQR-style Riccati solution on the B2 channel only, from the stable
// invariant subspace of the Hamiltonian. Used to seed Newton-Kleinman.
std::optional<Matrix> lqr_seed(const Matrix& A, const Matrix& R, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  Matrix H(2 * n, 2 * n);
  H << A, -R, -Q, -A.transpose();
  Eigen::ComplexEigenSolver<Matrix> es(H);
  if (es.info() != Eigen::Success) return std::nullopt;

  Eigen::MatrixXcd basis(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n && k < n; ++i) {
    if (es.eigenvalues()(i).real() < 0.0) basis.col(k++) = es.eigenvectors().col(i);
  }
  if (k != n) return std::nullopt;

  const Eigen::MatrixXcd U = basis.topRows(n);
  const Eigen::MatrixXcd V = basis.bottomRows(n);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(U);
  if (!lu.isInvertible()) return std::nullopt;
  const Matrix P = (V * lu.inverse()).real();
  if (!P.allFinite()) return std::nullopt;
  return symmetrize(P);
}

bool is_psd(const Matrix& P) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(P));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -1e-9 * scale;
}

// Newton-Kleinman on A^T P + P A + Q - P R P = 0 with R possibly indefinite.
// Gives up once two consecutive iterates leave A - R P non-Hurwitz.
std::optional<Matrix> newton_kleinman(const Matrix& A, const Matrix& R,
                                      const Matrix& Q, Matrix P) {
  int non_hurwitz_streak = 0;
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    const Matrix Ak = A - R * P;
    if (!is_hurwitz(Ak)) {
      if (++non_hurwitz_streak >= 2) return std::nullopt;
    } else {
      non_hurwitz_streak = 0;
    }
    Matrix next;
    try {
      next = lyapunov_kronecker(Ak, Q + P * R * P);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!next.allFinite()) return std::nullopt;
    const double step = (next - P).norm();
    P = std::move(next);
    if (step <= 1e-13 * (1.0 + P.norm())) break;
  }
  return P;
}

bool acceptable(const LinearPlant& plant, const Matrix& R, const Matrix& P,
                double gamma) {
  if (!P.allFinite()) return false;
  const double res = care_residual(plant, P, gamma).norm();
  if (res > 1e-8 * (1.0 + P.norm())) return false;
  if (!is_psd(P)) return false;
  return is_hurwitz(plant.A - R * P);
}

}  // namespace

void LinearPlant::validate() const {
  const Eigen::Index n = A.rows();
  if (n < 1 || A.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "A must be square and nonempty, got " + shape(A));
  }
  if (B1.rows() != n) throw Error(ErrorCode::DimensionMismatch, "B1 rows != n: " + shape(B1));
  if (B2.rows() != n || B2.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "B2 must be n x m2, got " + shape(B2));
  }
  if (C1.cols() != n) throw Error(ErrorCode::DimensionMismatch, "C1 cols != n: " + shape(C1));
}

double max_real_eigenvalue(const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "eigenvalues need a square matrix, got " + shape(A));
  }
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& A) { return max_real_eigenvalue(A) < -kHurwitzMargin; }

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  if (A.rows() != A.cols() || Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "solve_lyapunov shapes A=" + shape(A) + " Q=" + shape(Q));
  }
  const double lead = max_real_eigenvalue(A);
  if (!(lead < 0.0)) {
    throw Error(ErrorCode::NotHurwitz,
                "A has an eigenvalue with real part " + std::to_string(lead));
  }
  return lyapunov_kronecker(A, symmetrize(Q));
}

Matrix care_residual(const LinearPlant& plant, const Matrix& P, double gamma) {
  const Matrix& A = plant.A;
  const Matrix Q = plant.C1.transpose() * plant.C1;
  const Matrix B1P = plant.B1.transpose() * P;
  const Matrix B2P = plant.B2.transpose() * P;
  return A.transpose() * P + P * A + Q + B1P.transpose() * B1P / (gamma * gamma) -
         B2P.transpose() * B2P;
}

RiccatiSolution solve_care(const LinearPlant& plant, double gamma) {
  plant.validate();
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorCode::NoStabilizingSolution, "gamma must be positive and finite");
  }
  if (!stabilizability_check(plant.A, plant.B2)) {
    throw Error(ErrorCode::NotStabilizable, "(A, B2) fails the PBH test");
  }

  const Eigen::Index n = plant.state_dim();
  const Matrix Q = plant.C1.transpose() * plant.C1;
  const Matrix R2 = plant.B2 * plant.B2.transpose();
  const Matrix R1 = plant.B1 * plant.B1.transpose();
  const auto R_at = [&](double inv_gamma_sq) -> Matrix { return R2 - inv_gamma_sq * R1; };

  // Seed: B2-only LQR. A small identity shift on Q keeps the Hamiltonian
  // free of imaginary-axis eigenvalues when (C1, A) is not detectable.
  const double shift = 1e-8 * (1.0 + Q.norm());
  const auto seed = lqr_seed(plant.A, R2, Q + shift * Matrix::Identity(n, n));
  if (!seed) {
    throw Error(ErrorCode::NoStabilizingSolution, "could not seed from the B2-channel LQR");
  }

  const double target = 1.0 / (gamma * gamma);
  const Matrix R = R_at(target);

  std::optional<Matrix> P = newton_kleinman(plant.A, R, Q, *seed);
  if (!P || !acceptable(plant, R, *P, gamma)) {
    // Continuation in gamma^-2 from the LQR end, warm-starting each solve.
    P.reset();
    const auto lqr = newton_kleinman(plant.A, R2, Q, *seed);
    Matrix current = lqr ? *lqr : *seed;
    double eps = 0.0;
    double step = target / 8.0;
    while (eps < target && step > target * 1e-7) {
      const double trial = std::min(target, eps + step);
      const auto next = newton_kleinman(plant.A, R_at(trial), Q, current);
      if (next && is_psd(*next) && is_hurwitz(plant.A - R_at(trial) * *next)) {
        current = *next;
        eps = trial;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (eps >= target) P = current;
  }

  if (!P || !acceptable(plant, R, *P, gamma)) {
    throw Error(ErrorCode::NoStabilizingSolution,
                "no stabilizing PSD Riccati solution at gamma = " + std::to_string(gamma));
  }

  RiccatiSolution sol;
  sol.P = symmetrize(*P);
  sol.gamma = gamma;
  sol.residual = care_residual(plant, sol.P, gamma).norm();
  return sol;
}

HInfController synthesize_hinf(const LinearPlant& plant, std::pair<double, double> gamma_bracket,
                               double tol) {
  auto [lo, hi] = gamma_bracket;
  if (!(lo > 0.0) || !(hi >= lo) || !(tol > 0.0)) {
    throw Error(ErrorCode::InfeasibleBracket, "bracket must satisfy 0 < lo <= hi and tol > 0");
  }
  plant.validate();
  if (!stabilizability_check(plant.A, plant.B2)) {
    throw Error(ErrorCode::NotStabilizable, "(A, B2) fails the PBH test");
  }

  const auto feasible = [&](double g) -> std::optional<RiccatiSolution> {
    try {
      return solve_care(plant, g);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoStabilizingSolution) return std::nullopt;
      throw;
    }
  };

  auto best = feasible(hi);
  if (!best) {
    throw Error(ErrorCode::InfeasibleBracket,
                "upper bracket gamma = " + std::to_string(hi) + " is infeasible");
  }
  if (auto at_lo = feasible(lo)) {
    best = std::move(at_lo);
  } else {
    for (int it = 0; it < kBisectionMaxIterations && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (auto sol = feasible(mid)) {
        hi = mid;
        best = std::move(sol);
      } else {
        lo = mid;
      }
    }
  }

  HInfController ctrl;
  ctrl.P = best->P;
  ctrl.K = plant.B2.transpose() * best->P;
  ctrl.zeta = best->gamma;
  if (!is_hurwitz(plant.A - plant.B2 * ctrl.K)) {
    throw Error(ErrorCode::NoStabilizingSolution, "synthesized gain does not stabilize A - B2 K");
  }
  return ctrl;
}

MatrixNorms matrix_norms(const Matrix& M) {
  if (M.size() == 0) throw Error(ErrorCode::DimensionMismatch, "matrix_norms needs a nonempty matrix");
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  return {s.maxCoeff(), s.minCoeff(), M.norm()};
}

bool stabilizability_check(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "stabilizability_check shapes A=" + shape(A) + " B=" + shape(B));
  }
  Eigen::EigenSolver<Matrix> es(A, false);
  const double scale = std::max(1.0, A.norm() + B.norm());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() < -kHurwitzMargin) continue;
    Eigen::MatrixXcd pbh(n, n + B.cols());
    pbh.leftCols(n) = A.cast<std::complex<double>>() -
                      lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto& s = svd.singularValues();
    if (s.size() < n || s(n - 1) <= 1e-9 * scale) return false;
  }
  return true;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::ConfigError, "matrix must be a nonempty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::ConfigError, "ragged matrix row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row.at(c).get<double>();
  }
  return M;
}

nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

LinearPlant plant_from_json(const nlohmann::json& j) {
  LinearPlant p;
  for (const char* key : {"A", "B1", "B2", "C1"}) {
    if (!j.contains(key)) throw Error(ErrorCode::ConfigError, std::string("missing plant key ") + key);
  }
  p.A = matrix_from_json(j.at("A"));
  p.B1 = matrix_from_json(j.at("B1"));
  p.B2 = matrix_from_json(j.at("B2"));
  p.C1 = matrix_from_json(j.at("C1"));
  p.validate();
  return p;
}

nlohmann::json plant_to_json(const LinearPlant& plant) {
  return {{"A", matrix_to_json(plant.A)},
          {"B1", matrix_to_json(plant.B1)},
          {"B2", matrix_to_json(plant.B2)},
          {"C1", matrix_to_json(plant.C1)}};
}

nlohmann::json controller_to_json(const HInfController& ctrl) {
  return {{"K", matrix_to_json(ctrl.K)}, {"P", matrix_to_json(ctrl.P)}, {"zeta", ctrl.zeta}};
}

HInfController controller_from_json(const nlohmann::json& j) {
  HInfController c;
  c.K = matrix_from_json(j.at("K"));
  c.P = matrix_from_json(j.at("P"));
  c.zeta = j.at("zeta").get<double>();
  return c;
}

}  // namespace corerl
