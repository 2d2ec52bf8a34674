#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <utility>

namespace corerl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Linearized known model: s' = A s + B1 w + B2 u, z = C1 s.
struct LinearPlant {
  Matrix A;   // n x n
  Matrix B1;  // n x m1, disturbance input
  Matrix B2;  // n x m2, control input
  Matrix C1;  // p1 x n, controlled output

  Eigen::Index state_dim() const { return A.rows(); }

  /// Throws DimensionMismatch if the shapes do not share one state dimension.
  void validate() const;
};

struct RiccatiSolution {
  Matrix P;
  double gamma = 0.0;
  double residual = 0.0;  // Frobenius norm of the ARE residual
};

/// State-feedback H-infinity controller u = -K s with K = B2^T P.
/// `zeta` is the achieved attenuation level (written gamma in some texts).
struct HInfController {
  Matrix K;
  Matrix P;
  double zeta = 0.0;
};

struct MatrixNorms {
  double spectral_norm = 0.0;
  double min_singular_value = 0.0;
  double frobenius = 0.0;
};

/// Solves A^T X + X A + Q = 0 for Hurwitz A.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// Residual A^T P + P A + C1^T C1 + gamma^-2 P B1 B1^T P - P B2 B2^T P.
Matrix care_residual(const LinearPlant& plant, const Matrix& P, double gamma);

/// Stabilizing PSD solution of the H-infinity state-feedback Riccati equation.
RiccatiSolution solve_care(const LinearPlant& plant, double gamma);

/// Bisects gamma in [lo, hi] down to the smallest feasible attenuation.
HInfController synthesize_hinf(const LinearPlant& plant,
                               std::pair<double, double> gamma_bracket,
                               double tol = 1e-4);

bool is_hurwitz(const Matrix& A);
double max_real_eigenvalue(const Matrix& A);
MatrixNorms matrix_norms(const Matrix& M);

/// PBH rank test on every eigenvalue with nonnegative real part.
bool stabilizability_check(const Matrix& A, const Matrix& B);

Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& M);
LinearPlant plant_from_json(const nlohmann::json& j);
nlohmann::json plant_to_json(const LinearPlant& plant);
nlohmann::json controller_to_json(const HInfController& ctrl);
HInfController controller_from_json(const nlohmann::json& j);

}  // namespace corerl
