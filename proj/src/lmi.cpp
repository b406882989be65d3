#include "rsaw/lmi.hpp"

#include <cmath>
#include <sstream>

namespace rsaw::lmi {

namespace {

void check_same_shape(const MatExpr& a, const MatExpr& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "shape mismatch in " << op << ": " << a.rows() << "x" << a.cols()
       << " vs " << b.rows() << "x" << b.cols();
    throw ShapeError(os.str());
  }
}

}  // namespace

MatExpr MatExpr::constant(Matrix m) {
  MatExpr e;
  e.rows_ = static_cast<int>(m.rows());
  e.cols_ = static_cast<int>(m.cols());
  e.constant_ = std::move(m);
  return e;
}

MatExpr MatExpr::zero(int rows, int cols) { return constant(Matrix::Zero(rows, cols)); }

MatExpr MatExpr::identity(int n) { return constant(Matrix::Identity(n, n)); }

MatExpr MatExpr::of(const ScalarVar& v) {
  MatExpr e;
  e.rows_ = e.cols_ = 1;
  e.constant_ = Matrix::Zero(1, 1);
  e.terms_[v.id] = Matrix::Ones(1, 1);
  return e;
}

MatExpr MatExpr::of(const SymMatrixVar& v) {
  MatExpr e;
  e.rows_ = e.cols_ = v.dim;
  e.constant_ = Matrix::Zero(v.dim, v.dim);
  int k = v.first;
  if (v.diagonal) {
    for (int i = 0; i < v.dim; ++i) {
      Matrix c = Matrix::Zero(v.dim, v.dim);
      c(i, i) = 1.0;
      e.terms_[k++] = c;
    }
  } else {
    for (int i = 0; i < v.dim; ++i) {
      for (int j = i; j < v.dim; ++j) {
        Matrix c = Matrix::Zero(v.dim, v.dim);
        c(i, j) = 1.0;
        c(j, i) = 1.0;  // one scalar drives both symmetric positions
        e.terms_[k++] = c;
      }
    }
  }
  return e;
}

MatExpr MatExpr::of(const RectMatrixVar& v) {
  MatExpr e;
  e.rows_ = v.rows;
  e.cols_ = v.cols;
  e.constant_ = Matrix::Zero(v.rows, v.cols);
  int k = v.first;
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < v.cols; ++j) {
      Matrix c = Matrix::Zero(v.rows, v.cols);
      c(i, j) = 1.0;
      e.terms_[k++] = c;
    }
  }
  return e;
}

MatExpr MatExpr::transpose() const {
  MatExpr e;
  e.rows_ = cols_;
  e.cols_ = rows_;
  e.constant_ = constant_.transpose();
  for (const auto& [id, c] : terms_) e.terms_[id] = c.transpose();
  return e;
}

MatExpr MatExpr::row(int k) const {
  if (k < 0 || k >= rows_) throw ShapeError("row index out of range");
  MatExpr e;
  e.rows_ = 1;
  e.cols_ = cols_;
  e.constant_ = constant_.row(k);
  for (const auto& [id, c] : terms_) {
    if (c.row(k).cwiseAbs().maxCoeff() == 0.0) continue;
    e.terms_[id] = c.row(k);
  }
  return e;
}

Matrix MatExpr::eval(const Vector& y) const {
  Matrix m = constant_;
  for (const auto& [id, c] : terms_) {
    if (id >= y.size()) throw ArgumentError("assignment shorter than referenced variable ids");
    m += y[id] * c;
  }
  return m;
}

double MatExpr::max_abs() const {
  double m = constant_.size() ? constant_.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& [id, c] : terms_) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

MatExpr operator+(const MatExpr& a, const MatExpr& b) {
  check_same_shape(a, b, "operator+");
  MatExpr e = a;
  e.constant_ += b.constant_;
  for (const auto& [id, c] : b.terms_) {
    auto it = e.terms_.find(id);
    if (it == e.terms_.end())
      e.terms_[id] = c;
    else
      it->second += c;
  }
  return e;
}

MatExpr operator-(const MatExpr& a, const MatExpr& b) { return a + (-b); }

MatExpr operator-(const MatExpr& a) {
  MatExpr e = a;
  e.constant_ = -e.constant_;
  for (auto& [id, c] : e.terms_) c = -c;
  return e;
}

MatExpr operator*(double a, const MatExpr& m) {
  MatExpr e = m;
  e.constant_ *= a;
  for (auto& [id, c] : e.terms_) c *= a;
  return e;
}

MatExpr operator*(const MatExpr& m, double a) { return a * m; }

MatExpr MatExpr::make(int rows, int cols, Matrix constant, std::map<int, Matrix> terms) {
  MatExpr e;
  e.rows_ = rows;
  e.cols_ = cols;
  e.constant_ = std::move(constant);
  e.terms_ = std::move(terms);
  return e;
}

MatExpr operator*(const Matrix& a, const MatExpr& m) {
  if (m.rows() == 1 && m.cols() == 1 && !(a.rows() == 1 && a.cols() == 1)) {
    // scalar expression scaling a constant matrix
    MatExpr e;
    e.rows_ = static_cast<int>(a.rows());
    e.cols_ = static_cast<int>(a.cols());
    e.constant_ = m.constant_(0, 0) * a;
    for (const auto& [id, c] : m.terms_) e.terms_[id] = c(0, 0) * a;
    return e;
  }
  if (a.cols() != m.rows()) throw ShapeError("left multiply: inner dimensions differ");
  MatExpr e;
  e.rows_ = static_cast<int>(a.rows());
  e.cols_ = m.cols_;
  e.constant_ = a * m.constant_;
  for (const auto& [id, c] : m.terms_) e.terms_[id] = a * c;
  return e;
}

MatExpr operator*(const MatExpr& m, const Matrix& a) {
  if (m.rows() == 1 && m.cols() == 1 && !(a.rows() == 1 && a.cols() == 1)) return a * m;
  if (m.cols() != a.rows()) throw ShapeError("right multiply: inner dimensions differ");
  MatExpr e;
  e.rows_ = m.rows_;
  e.cols_ = static_cast<int>(a.cols());
  e.constant_ = m.constant_ * a;
  for (const auto& [id, c] : m.terms_) e.terms_[id] = c * a;
  return e;
}

MatExpr operator*(const MatExpr& a, const MatExpr& b) {
  if (a.is_constant()) return a.constant_part() * b;
  if (b.is_constant()) return a * b.constant_part();
  throw ArgumentError("product of two variable expressions is not affine");
}

MatExpr he(const MatExpr& m) {
  if (m.rows() != m.cols()) throw ShapeError("he() requires a square expression");
  return m + m.transpose();
}

MatExpr block(const std::vector<std::vector<MatExpr>>& grid) {
  if (grid.empty() || grid[0].empty()) throw ShapeError("block: empty grid");
  const size_t ncols = grid[0].size();
  std::vector<int> row_h(grid.size(), 0);
  std::vector<int> col_w(ncols, 0);
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].size() != ncols) throw ShapeError("block: ragged grid");
    for (size_t j = 0; j < ncols; ++j) {
      const MatExpr& cell = grid[i][j];
      if (row_h[i] == 0) row_h[i] = cell.rows();
      if (col_w[j] == 0) col_w[j] = cell.cols();
      if (cell.rows() != row_h[i] || cell.cols() != col_w[j]) {
        std::ostringstream os;
        os << "block: cell (" << i << "," << j << ") is " << cell.rows() << "x"
           << cell.cols() << ", expected " << row_h[i] << "x" << col_w[j];
        throw ShapeError(os.str());
      }
    }
  }
  int total_r = 0, total_c = 0;
  for (int h : row_h) total_r += h;
  for (int w : col_w) total_c += w;

  Matrix constant = Matrix::Zero(total_r, total_c);
  std::map<int, Matrix> terms;
  int r0 = 0;
  for (size_t i = 0; i < grid.size(); ++i) {
    int c0 = 0;
    for (size_t j = 0; j < ncols; ++j) {
      const MatExpr& cell = grid[i][j];
      constant.block(r0, c0, row_h[i], col_w[j]) = cell.constant_part();
      for (const auto& [id, c] : cell.terms()) {
        auto it = terms.find(id);
        if (it == terms.end())
          it = terms.emplace(id, Matrix::Zero(total_r, total_c)).first;
        it->second.block(r0, c0, row_h[i], col_w[j]) += c;
      }
      c0 += col_w[j];
    }
    r0 += row_h[i];
  }
  return MatExpr::make(total_r, total_c, std::move(constant), std::move(terms));
}

MatExpr trace(const MatExpr& m) {
  if (m.rows() != m.cols()) throw ShapeError("trace() requires a square expression");
  Matrix constant = Matrix::Zero(1, 1);
  constant(0, 0) = m.constant_part().trace();
  std::map<int, Matrix> terms;
  for (const auto& [id, c] : m.terms()) {
    double t = c.trace();
    if (t == 0.0) continue;
    Matrix k = Matrix::Zero(1, 1);
    k(0, 0) = t;
    terms[id] = k;
  }
  return MatExpr::make(1, 1, std::move(constant), std::move(terms));
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::IllPosed: return "IllPosed";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "?";
}

double SdpSolution::value(const ScalarVar& v) const {
  if (v.id < 0 || v.id >= y.size()) throw ArgumentError("variable not in solution");
  return y[v.id];
}

Matrix SdpSolution::value(const SymMatrixVar& v) const {
  Matrix m = Matrix::Zero(v.dim, v.dim);
  int k = v.first;
  if (v.diagonal) {
    for (int i = 0; i < v.dim; ++i) m(i, i) = y[k++];
  } else {
    for (int i = 0; i < v.dim; ++i)
      for (int j = i; j < v.dim; ++j) {
        m(i, j) = m(j, i) = y[k++];
      }
  }
  return m;
}

Matrix SdpSolution::value(const RectMatrixVar& v) const {
  Matrix m = Matrix::Zero(v.rows, v.cols);
  int k = v.first;
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) m(i, j) = y[k++];
  return m;
}

int SdpProblem::allocate(const std::string& name, int n, std::optional<double> lb) {
  int first = num_scalars();
  for (int i = 0; i < n; ++i) {
    names_.push_back(n == 1 ? name : name + "[" + std::to_string(i) + "]");
    lower_bounds_.push_back(lb);
  }
  return first;
}

ScalarVar SdpProblem::scalar(std::string name, std::optional<double> lower_bound) {
  return ScalarVar{allocate(name, 1, lower_bound)};
}

SymMatrixVar SdpProblem::symmetric(std::string name, int dim) {
  if (dim < 1) throw ArgumentError("symmetric: dim must be >= 1");
  SymMatrixVar v{0, dim, false};
  v.first = allocate(name, v.count());
  return v;
}

SymMatrixVar SdpProblem::diagonal(std::string name, int dim) {
  if (dim < 1) throw ArgumentError("diagonal: dim must be >= 1");
  SymMatrixVar v{0, dim, true};
  v.first = allocate(name, v.count());
  return v;
}

RectMatrixVar SdpProblem::rect(std::string name, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ArgumentError("rect: dims must be >= 1");
  RectMatrixVar v{0, rows, cols};
  v.first = allocate(name, v.count());
  return v;
}

void SdpProblem::check_declared(const MatExpr& e, const char* where) const {
  if (!e.terms().empty()) {
    int last = e.terms().rbegin()->first;
    if (last >= num_scalars() || e.terms().begin()->first < 0) {
      std::ostringstream os;
      os << where << ": expression references undeclared variable id " << last;
      throw ArgumentError(os.str());
    }
  }
}

void SdpProblem::require(MatExpr expr, Sense sense, std::optional<double> margin,
                         std::string label) {
  require(LmiConstraint{std::move(expr), sense, margin, std::move(label)});
}

void SdpProblem::require(LmiConstraint c) {
  if (c.expr.rows() != c.expr.cols())
    throw ShapeError("constraint expression must be square");
  check_declared(c.expr, "require");
  // symmetry within 1e-12 relative to the expression scale
  MatExpr d = c.expr - c.expr.transpose();
  double scale = std::max(1.0, c.expr.max_abs());
  if (d.max_abs() > 1e-12 * scale)
    throw ShapeError("constraint expression is not symmetric" +
                     (c.label.empty() ? std::string() : " (" + c.label + ")"));
  constraints_.push_back(std::move(c));
}

void SdpProblem::minimize(const MatExpr& linear) {
  if (linear.rows() != 1 || linear.cols() != 1)
    throw ShapeError("objective must be a 1x1 expression");
  check_declared(linear, "minimize");
  objective_kind_ = ObjectiveKind::MinimizeLinear;
  objective_ = linear;
}

void SdpProblem::maximize(const MatExpr& linear) {
  minimize(linear);
  objective_kind_ = ObjectiveKind::MaximizeLinear;
}

void SdpProblem::maximize_det_root(const SymMatrixVar& v) {
  if (v.first < 0 || v.first + v.count() > num_scalars())
    throw ArgumentError("det-root target is not declared in this problem");
  objective_kind_ = ObjectiveKind::MaximizeDetRoot;
  det_target_ = v;
}

}  // namespace rsaw::lmi
