#pragma once

#include <Eigen/Dense>

#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Modeling layer for semidefinite programs: scalar / symmetric / rectangular
// matrix variables, affine matrix expressions, block assembly and a solve
// interface backed by a log-barrier path-following method (sdp_solver.cpp).
namespace rsaw::lmi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Variable handles. Matrix variables map onto a contiguous range of scalar
// entries starting at `first`; handles are only meaningful for the problem
// that created them.
struct ScalarVar {
  int id = -1;
};

struct SymMatrixVar {
  int first = -1;
  int dim = 0;
  bool diagonal = false;
  int count() const { return diagonal ? dim : dim * (dim + 1) / 2; }
};

struct RectMatrixVar {
  int first = -1;
  int rows = 0;
  int cols = 0;
  int count() const { return rows * cols; }
};

// Affine matrix expression: constant + sum_i y_i * coeff_i, with y_i scalar
// decision-variable entries. Immutable once built; all operations return new
// values.
class MatExpr {
 public:
  MatExpr() = default;

  static MatExpr constant(Matrix m);
  static MatExpr zero(int rows, int cols);
  static MatExpr identity(int n);
  static MatExpr of(const ScalarVar& v);
  static MatExpr of(const SymMatrixVar& v);
  static MatExpr of(const RectMatrixVar& v);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_constant() const { return terms_.empty(); }

  const Matrix& constant_part() const { return constant_; }
  const std::map<int, Matrix>& terms() const { return terms_; }

  MatExpr transpose() const;
  MatExpr row(int k) const;

  // Evaluates at a full assignment of scalar entries.
  Matrix eval(const Vector& y) const;

  // Max |entry| over constant and coefficients; used for margin scaling.
  double max_abs() const;

  friend MatExpr operator+(const MatExpr& a, const MatExpr& b);
  friend MatExpr operator-(const MatExpr& a, const MatExpr& b);
  friend MatExpr operator-(const MatExpr& a);
  friend MatExpr operator*(double a, const MatExpr& m);
  friend MatExpr operator*(const MatExpr& m, double a);
  friend MatExpr operator*(const Matrix& a, const MatExpr& m);
  friend MatExpr operator*(const MatExpr& m, const Matrix& a);
  // Defined when either side is constant or a 1x1 (scalar) expression;
  // a product of two non-constant matrix expressions is not affine.
  friend MatExpr operator*(const MatExpr& a, const MatExpr& b);

  static MatExpr make(int rows, int cols, Matrix constant, std::map<int, Matrix> terms);

 private:
  int rows_ = 0;
  int cols_ = 0;
  Matrix constant_;                // rows_ x cols_
  std::map<int, Matrix> terms_;    // scalar entry id -> coefficient matrix
};

// He(Z) = Z + Z^T; requires a square argument.
MatExpr he(const MatExpr& m);

// Concatenates a 2-D grid of expressions; row heights and column widths must
// be consistent. Throws ShapeError naming the offending cell otherwise.
MatExpr block(const std::vector<std::vector<MatExpr>>& grid);

MatExpr trace(const MatExpr& m);

enum class Sense {
  PSD,  // expr >= 0
  NSD,  // expr <= 0
  PD,   // expr >  0, encoded as expr - margin*I >= 0
  ND,   // expr <  0, encoded as expr + margin*I <= 0
};

struct LmiConstraint {
  MatExpr expr;  // square, symmetric within 1e-12
  Sense sense = Sense::PSD;
  std::optional<double> margin;  // absolute; strict senses only
  std::string label;
};

enum class SolveStatus { Optimal, Infeasible, IllPosed, NumericalTrouble };

const char* to_string(SolveStatus s);

struct SolveSettings {
  double tolerance = 1e-8;        // relative objective-gap target
  double strict_margin_rel = 1e-7;  // default margin = rel * max(1, |const|)
  int max_newton_iters = 600;
  double t_init = 1.0;
  double t_factor = 20.0;
  bool feasibility_only = false;  // stop after the feasibility phase
};

struct SolverStats {
  int newton_iters = 0;
  int stages = 0;
  double gap = 0.0;
  double phase1_slack = 0.0;  // most negative feasibility shift reached
};

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalTrouble;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  Vector y;  // full scalar assignment (empty unless Optimal)
  SolverStats stats;

  double value(const ScalarVar& v) const;
  Matrix value(const SymMatrixVar& v) const;
  Matrix value(const RectMatrixVar& v) const;
  Matrix value(const MatExpr& e) const { return e.eval(y); }
};

enum class ObjectiveKind { None, MinimizeLinear, MaximizeLinear, MaximizeDetRoot };

class SdpProblem {
 public:
  ScalarVar scalar(std::string name, std::optional<double> lower_bound = {});
  SymMatrixVar symmetric(std::string name, int dim);
  SymMatrixVar diagonal(std::string name, int dim);
  RectMatrixVar rect(std::string name, int rows, int cols);

  void require(MatExpr expr, Sense sense, std::optional<double> margin = {},
               std::string label = {});
  void require(LmiConstraint c);

  void minimize(const MatExpr& linear);  // 1x1 affine expression
  void maximize(const MatExpr& linear);
  // Maximizes det(V)^{1/dim}; same maximizer as log-det.
  void maximize_det_root(const SymMatrixVar& v);

  int num_scalars() const { return static_cast<int>(lower_bounds_.size()); }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  const std::vector<std::string>& scalar_names() const { return names_; }
  const std::vector<std::optional<double>>& lower_bounds() const { return lower_bounds_; }
  ObjectiveKind objective_kind() const { return objective_kind_; }
  const MatExpr& objective_expr() const { return objective_; }
  const SymMatrixVar& det_target() const { return det_target_; }

 private:
  int allocate(const std::string& name, int n, std::optional<double> lb = {});
  void check_declared(const MatExpr& e, const char* where) const;

  std::vector<std::string> names_;
  std::vector<std::optional<double>> lower_bounds_;
  std::vector<LmiConstraint> constraints_;
  ObjectiveKind objective_kind_ = ObjectiveKind::None;
  MatExpr objective_;
  SymMatrixVar det_target_;
};

// Solves the problem. Statuses are distinct outcomes, not errors: callers
// must branch on them.
SdpSolution solve(const SdpProblem& p, const SolveSettings& settings = {});

// Re-checks a solution by direct eigenvalue computation of every constraint.
struct CheckReport {
  bool ok = false;
  double worst_violation = 0.0;  // most negative slack seen (0 if none)
  std::vector<double> min_eigs;  // per constraint, in original orientation
};
CheckReport check_solution(const SdpProblem& p, const SdpSolution& s, double tol = 1e-7);

}  // namespace rsaw::lmi
