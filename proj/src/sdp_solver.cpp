// Log-barrier path-following solver for block-diagonal SDPs in the form
//   minimize f0(y)  s.t.  F_b(y) = F_b0 + sum_i y_i F_bi  >= 0  for all blocks b
// with f0 either linear (c'y) or -logdet of a symmetric matrix variable.
//
// A feasibility phase minimizes the uniform shift lambda over
// F_b(y) + lambda I >= 0 and exits early once strictly feasible. The main
// phase follows the central path min t*f0 + sum_b -logdet F_b(y). The Newton
// systems inherit an arrow sparsity pattern from scenario problems (shared
// design variables coupling many per-sample certificate groups), which the
// sparse LDLT factorization exploits after AMD reordering.

#include "rsaw/lmi.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>

namespace rsaw::lmi {

namespace {

struct Block {
  int n = 0;
  Matrix f0;
  std::vector<std::pair<int, Matrix>> terms;  // (scalar id, coefficient)
};

struct Model {
  int nvars = 0;
  std::vector<Block> blocks;
  Vector c;          // linear objective, already in minimize orientation
  double obj_sign = 1.0;  // multiply reported value to undo orientation
  bool det_objective = false;
  SymMatrixVar det_target;
  double nu = 0.0;   // total barrier parameter (sum of block dims)
};

double min_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix assemble_det_target(const Model& m, const Vector& y) {
  const SymMatrixVar& v = m.det_target;
  Matrix q = Matrix::Zero(v.dim, v.dim);
  int k = v.first;
  if (v.diagonal) {
    for (int i = 0; i < v.dim; ++i) q(i, i) = y[k++];
  } else {
    for (int i = 0; i < v.dim; ++i)
      for (int j = i; j < v.dim; ++j) q(i, j) = q(j, i) = y[k++];
  }
  return q;
}

Model compile(const SdpProblem& p, const SolveSettings& st) {
  Model m;
  m.nvars = p.num_scalars();
  m.c = Vector::Zero(m.nvars);

  switch (p.objective_kind()) {
    case ObjectiveKind::None:
      break;
    case ObjectiveKind::MinimizeLinear:
    case ObjectiveKind::MaximizeLinear: {
      double sign = p.objective_kind() == ObjectiveKind::MaximizeLinear ? -1.0 : 1.0;
      m.obj_sign = sign;
      for (const auto& [id, coeff] : p.objective_expr().terms())
        m.c[id] += sign * coeff(0, 0);
      break;
    }
    case ObjectiveKind::MaximizeDetRoot:
      m.det_objective = true;
      m.det_target = p.det_target();
      break;
  }

  for (const auto& cst : p.constraints()) {
    Block b;
    b.n = cst.expr.rows();
    double sgn = (cst.sense == Sense::PSD || cst.sense == Sense::PD) ? 1.0 : -1.0;
    double margin = 0.0;
    if (cst.sense == Sense::PD || cst.sense == Sense::ND) {
      double scale = std::max(1.0, cst.expr.constant_part().cwiseAbs().maxCoeff());
      margin = cst.margin.value_or(st.strict_margin_rel * scale);
    }
    Matrix f0 = sgn * cst.expr.constant_part() - margin * Matrix::Identity(b.n, b.n);
    // symmetrize exactly; modeling layer guarantees 1e-12 symmetry
    f0 = 0.5 * (f0 + f0.transpose()).eval();
    double norm = f0.size() ? f0.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& [id, coeff] : cst.expr.terms())
      norm = std::max(norm, coeff.cwiseAbs().maxCoeff());
    norm = std::max(norm, 1e-10);
    b.f0 = f0 / norm;
    for (const auto& [id, coeff] : cst.expr.terms()) {
      Matrix ci = (sgn / norm) * 0.5 * (coeff + coeff.transpose());
      b.terms.emplace_back(id, std::move(ci));
    }
    m.blocks.push_back(std::move(b));
  }

  // scalar lower bounds become 1x1 blocks
  for (int i = 0; i < m.nvars; ++i) {
    if (!p.lower_bounds()[i]) continue;
    Block b;
    b.n = 1;
    b.f0 = Matrix::Constant(1, 1, -*p.lower_bounds()[i]);
    b.terms.emplace_back(i, Matrix::Ones(1, 1));
    m.blocks.push_back(std::move(b));
  }

  // the det-root target must stay positive definite along the path
  if (m.det_objective) {
    MatExpr q = MatExpr::of(m.det_target);
    Block b;
    b.n = m.det_target.dim;
    b.f0 = -st.strict_margin_rel * Matrix::Identity(b.n, b.n);
    for (const auto& [id, coeff] : q.terms()) b.terms.emplace_back(id, coeff);
    m.blocks.push_back(std::move(b));
  }

  for (const auto& b : m.blocks) m.nu += b.n;
  return m;
}

// State of one barrier evaluation: factorizations of all blocks at y.
struct BarrierEval {
  bool interior = false;
  double phi = 0.0;  // sum of -logdet F_b(y)
  std::vector<Eigen::LLT<Matrix>> llts;
  std::vector<Matrix> values;
};

BarrierEval eval_barrier(const Model& m, const Vector& y) {
  BarrierEval ev;
  ev.llts.resize(m.blocks.size());
  ev.values.resize(m.blocks.size());
  for (size_t b = 0; b < m.blocks.size(); ++b) {
    const Block& blk = m.blocks[b];
    Matrix f = blk.f0;
    for (const auto& [id, ci] : blk.terms) f += y[id] * ci;
    
    ev.llts[b].compute(f);
    if (ev.llts[b].info() != Eigen::Success) return ev;  // not interior
    double logdet = 0.0;
    for (int i = 0; i < blk.n; ++i) logdet += std::log(ev.llts[b].matrixL()(i, i));
    ev.phi -= 2.0 * logdet;
    ev.values[b] = std::move(f);
  }
  ev.interior = true;
  return ev;
}

struct Objective {
  // returns f0 value; fills grad (dense) if requested
  double value = 0.0;
  Vector grad;
};

// f0 and gradient; Hessian contribution of the det part is handled with the
// same trace machinery as barrier blocks inside newton_step.
bool eval_objective(const Model& m, const Vector& y, Objective& out) {
  out.value = m.c.dot(y);
  out.grad = m.c;
  if (m.det_objective) {
    Matrix q = assemble_det_target(m, y);
    Eigen::LLT<Matrix> llt(q);
    if (llt.info() != Eigen::Success) return false;
    double logdet = 0.0;
    for (int i = 0; i < q.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
    out.value += -2.0 * logdet;
    Matrix qinv = llt.solve(Matrix::Identity(q.rows(), q.cols()));
    const SymMatrixVar& v = m.det_target;
    int k = v.first;
    if (v.diagonal) {
      for (int i = 0; i < v.dim; ++i) out.grad[k++] += -qinv(i, i);
    } else {
      for (int i = 0; i < v.dim; ++i)
        for (int j = i; j < v.dim; ++j)
          out.grad[k++] += (i == j) ? -qinv(i, i) : -2.0 * qinv(i, j);
    }
  }
  return true;
}

struct NewtonOutcome {
  bool ok = false;
  double decrement2 = 0.0;  // lambda^2 = dy' H dy
  Vector dy;
};

class NewtonSolver {
 public:
  explicit NewtonSolver(const Model& m) : m_(m) {
    // fixed sparsity pattern across iterations
    std::vector<Eigen::Triplet<double>> pattern;
    for (const auto& blk : m_.blocks) {
      for (size_t a = 0; a < blk.terms.size(); ++a)
        for (size_t c = 0; c <= a; ++c)
          pattern.emplace_back(blk.terms[a].first, blk.terms[c].first, 0.0);
    }
    if (m_.det_objective) {
      const SymMatrixVar& v = m_.det_target;
      for (int a = 0; a < v.count(); ++a)
        for (int c = 0; c <= a; ++c)
          pattern.emplace_back(v.first + a, v.first + c, 0.0);
    }
    for (int i = 0; i < m_.nvars; ++i) pattern.emplace_back(i, i, 0.0);
    h_.resize(m_.nvars, m_.nvars);
    h_.setFromTriplets(pattern.begin(), pattern.end());
    h_.makeCompressed();
    ldlt_.analyzePattern(h_);
  }

  // Newton step for t*f0 + phi at y, given factored blocks.
  NewtonOutcome step(double t, const Vector& y, const BarrierEval& ev, double ridge) {
    NewtonOutcome out;
    Objective obj;
    if (!eval_objective(m_, y, obj)) return out;
    Vector g = t * obj.grad;

    // zero the stored Hessian values, keep pattern
    for (int k = 0; k < h_.nonZeros(); ++k) h_.valuePtr()[k] = 0.0;

    auto add = [&](int r, int c, double v) {
      // lower triangle only
      if (r < c) std::swap(r, c);
      h_.coeffRef(r, c) += v;
    };

    std::vector<Matrix> gi;  // F^{-1} F_i per block, reused buffer
    for (size_t b = 0; b < m_.blocks.size(); ++b) {
      const Block& blk = m_.blocks[b];
      const auto& llt = ev.llts[b];
      gi.clear();
      gi.reserve(blk.terms.size());
      for (const auto& [id, ci] : blk.terms) gi.push_back(llt.solve(ci));
      for (size_t a = 0; a < blk.terms.size(); ++a) {
        g[blk.terms[a].first] -= gi[a].trace();
        for (size_t c = 0; c <= a; ++c) {
          // tr(Ga*Gc); Ga = F^{-1} Fa is not symmetric in general
          double hij = (gi[a].array() * gi[c].transpose().array()).sum();
          add(blk.terms[a].first, blk.terms[c].first, hij);
        }
      }
    }

    if (m_.det_objective) {
      Matrix q = assemble_det_target(m_, y);
      Eigen::LLT<Matrix> llt(q);
      if (llt.info() != Eigen::Success) return out;
      const SymMatrixVar& v = m_.det_target;
      MatExpr qe = MatExpr::of(v);
      std::vector<Matrix> gq;
      gq.reserve(qe.terms().size());
      std::vector<int> ids;
      for (const auto& [id, ci] : qe.terms()) {
        gq.push_back(llt.solve(ci));
        ids.push_back(id);
      }
      for (size_t a = 0; a < gq.size(); ++a)
        for (size_t c = 0; c <= a; ++c) {
          double hij = (gq[a].array() * gq[c].transpose().array()).sum();
          add(ids[a], ids[c], t * hij);
        }
    }

    for (int i = 0; i < m_.nvars; ++i) add(i, i, ridge);

    ldlt_.factorize(h_);
    if (ldlt_.info() != Eigen::Success) return out;
    out.dy = ldlt_.solve(-g);
    if (!out.dy.allFinite()) return out;
    out.decrement2 = -g.dot(out.dy);
    if (out.decrement2 < 0) out.decrement2 = 0;  // numerical noise near optimum
    out.ok = true;
    return out;
  }

 private:
  const Model& m_;
  Eigen::SparseMatrix<double> h_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
};

struct PathResult {
  bool converged = false;
  bool trouble = false;
  bool unbounded = false;
  Vector y;
  double f0 = 0.0;
  double gap = 0.0;
  int newton_iters = 0;
  int stages = 0;
};

// Central-path loop: minimize t*f0 + phi, increasing t until nu/t meets the
// relative tolerance. early_exit, when set, stops as soon as the given
// predicate holds (used by the feasibility phase).
PathResult follow_path(const Model& m, Vector y, const SolveSettings& st,
                       const std::function<bool(const Vector&)>& early_exit = {}) {
  PathResult res;
  res.y = std::move(y);
  NewtonSolver newton(m);

  double t = st.t_init;
  const int max_stages = 64;
  for (int stage = 0; stage < max_stages; ++stage) {
    res.stages = stage + 1;
    bool stage_done = false;
    double ridge = 1e-12;
    for (int it = 0; it < st.max_newton_iters; ++it) {
      if (res.newton_iters >= st.max_newton_iters * 4) {
        res.trouble = true;
        return res;
      }
      BarrierEval ev = eval_barrier(m, res.y);
      if (!ev.interior) {
        res.trouble = true;  // lost interiority: should not happen
        return res;
      }
      NewtonOutcome nw = newton.step(t, res.y, ev, ridge);
      ++res.newton_iters;
      if (!nw.ok) {
        ridge = std::max(ridge * 100, 1e-10);
        if (ridge > 1e2) {
          res.trouble = true;
          return res;
        }
        continue;
      }
      if (nw.decrement2 / 2.0 <= 1e-9) {
        stage_done = true;
        break;
      }

      Objective obj;
      eval_objective(m, res.y, obj);
      double f_cur = t * obj.value + ev.phi;

      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        Vector cand = res.y + alpha * nw.dy;
        BarrierEval ce = eval_barrier(m, cand);
        if (ce.interior) {
          Objective cobj;
          if (eval_objective(m, cand, cobj)) {
            double f_new = t * cobj.value + ce.phi;
            if (f_new <= f_cur - 0.25 * alpha * nw.decrement2 ||
                (ls > 40 && f_new < f_cur)) {
              res.y = std::move(cand);
              moved = true;
              break;
            }
          }
        }
        alpha *= 0.5;
      }
      if (!moved) {
        if (nw.decrement2 / 2.0 > 1e-5) {
          // substantial descent direction exists but the line search cannot
          // realize it: numerical dead end
          res.trouble = true;
          return res;
        }
        stage_done = true;
        break;
      }
      if (early_exit && early_exit(res.y)) {
        Objective obj2;
        eval_objective(m, res.y, obj2);
        res.f0 = obj2.value;
        res.converged = true;
        return res;
      }
      if (res.y.cwiseAbs().maxCoeff() > 1e13) {
        res.unbounded = true;
        return res;
      }
      Objective ocur;
      eval_objective(m, res.y, ocur);
      if (ocur.value < -1e14) {
        res.unbounded = true;
        return res;
      }
    }
    if (!stage_done) {
      res.trouble = true;
      return res;
    }

    Objective obj;
    eval_objective(m, res.y, obj);
    res.f0 = obj.value;
    res.gap = m.nu / t;
    if (early_exit && early_exit(res.y)) {
      res.converged = true;
      return res;
    }
    if (res.gap <= st.tolerance * std::max(1.0, std::abs(res.f0))) {
      res.converged = true;
      return res;
    }
    t *= st.t_factor;
  }
  res.trouble = true;
  return res;
}

}  // namespace

SdpSolution solve(const SdpProblem& p, const SolveSettings& st) {
  SdpSolution sol;
  Model m = compile(p, st);

  // Degenerate case: no variables. Feasibility is a constant-matrix check.
  if (m.nvars == 0) {
    bool feas = true;
    double worst = 0.0;
    for (const auto& b : m.blocks) {
      double e = min_eig(b.f0);
      worst = std::min(worst, e);
      if (e < -1e-11) feas = false;
    }
    sol.status = feas ? SolveStatus::Optimal : SolveStatus::Infeasible;
    sol.stats.phase1_slack = worst;
    sol.objective_value = 0.0;
    sol.y = Vector::Zero(0);
    return sol;
  }

  Vector y = Vector::Zero(m.nvars);

  // ---- feasibility phase ----
  double lam0 = 0.0;
  for (const auto& b : m.blocks) {
    Matrix f = b.f0;
    for (const auto& [id, ci] : b.terms) f += y[id] * ci;
    lam0 = std::max(lam0, -min_eig(f));
  }

  if (lam0 > 0.0 || st.feasibility_only) {
    // extended model over (y, lambda): minimize lambda, ids align with the
    // original problem followed by lambda at index nvars
    Model pm;
    pm.nvars = m.nvars + 1;
    pm.c = Vector::Zero(pm.nvars);
    pm.c[m.nvars] = 1.0;
    pm.blocks = m.blocks;
    for (auto& b : pm.blocks) {
      b.terms.emplace_back(m.nvars, Matrix::Identity(b.n, b.n));
    }
    for (const auto& b : pm.blocks) pm.nu += b.n;

    Vector y1 = Vector::Zero(pm.nvars);
    y1[m.nvars] = lam0 + 1.0;

    // exit as soon as the shift is comfortably negative
    const double exit_slack = 1e-4;
    SolveSettings p1 = st;
    p1.tolerance = std::min(st.tolerance, 1e-9);
    PathResult r1 = follow_path(pm, std::move(y1), p1, [&](const Vector& v) {
      return v[m.nvars] < -exit_slack;
    });
    sol.stats.newton_iters += r1.newton_iters;
    sol.stats.stages += r1.stages;
    sol.stats.phase1_slack = r1.y.size() ? r1.y[m.nvars] : lam0;

    double lam = r1.y[m.nvars];
    if (r1.unbounded) {
      // shift unbounded below: strictly feasible with huge slack
      lam = -1.0;
    } else if (r1.trouble) {
      sol.status = SolveStatus::NumericalTrouble;
      return sol;
    }
    if (lam >= -1e-11) {
      // converged with nonnegative shift: no strictly feasible point
      sol.status = lam > 1e-9 ? SolveStatus::Infeasible : SolveStatus::NumericalTrouble;
      return sol;
    }
    y = r1.y.head(m.nvars);
    if (st.feasibility_only) {
      sol.status = SolveStatus::Optimal;
      sol.y = y;
      sol.objective_value = 0.0;
      return sol;
    }
  } else {
    // y = 0 interior already; nudge away from any exactly-singular boundary
    BarrierEval ev = eval_barrier(m, y);
    if (!ev.interior) {
      // fall back to the phase-1 route with a tiny initial shift
      SolveSettings st2 = st;
      Model pm;
      pm.nvars = m.nvars + 1;
      pm.c = Vector::Zero(pm.nvars);
      pm.c[m.nvars] = 1.0;
      pm.blocks = m.blocks;
      for (auto& b : pm.blocks) b.terms.emplace_back(m.nvars, Matrix::Identity(b.n, b.n));
      for (const auto& b : pm.blocks) pm.nu += b.n;
      Vector y1 = Vector::Zero(pm.nvars);
      y1[m.nvars] = 1.0;
      PathResult r1 = follow_path(pm, std::move(y1), st2, [&](const Vector& v) {
        return v[m.nvars] < -1e-4;
      });
      sol.stats.newton_iters += r1.newton_iters;
      if (!(r1.converged || r1.unbounded) || r1.y[m.nvars] >= -1e-11) {
        sol.status = SolveStatus::NumericalTrouble;
        return sol;
      }
      y = r1.y.head(m.nvars);
    }
  }

  // ---- main phase ----
  if (m.det_objective) {
    // ensure the det target is PD at the start (its own block guarantees it
    // post phase 1; phase 1 might have been skipped)
    Matrix q = assemble_det_target(m, y);
    if (Eigen::LLT<Matrix>(q).info() != Eigen::Success) {
      sol.status = SolveStatus::NumericalTrouble;
      return sol;
    }
  }

  PathResult r = follow_path(m, std::move(y), st);
  sol.stats.newton_iters += r.newton_iters;
  sol.stats.stages += r.stages;
  sol.stats.gap = r.gap;
  if (r.unbounded) {
    sol.status = SolveStatus::IllPosed;
    return sol;
  }
  if (!r.converged) {
    sol.status = SolveStatus::NumericalTrouble;
    return sol;
  }
  sol.status = SolveStatus::Optimal;
  sol.y = r.y;
  if (m.det_objective) {
    Matrix q = assemble_det_target(m, sol.y);
    Eigen::LLT<Matrix> llt(q);
    double logdet = 0.0;
    for (int i = 0; i < q.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
    sol.objective_value = std::exp(2.0 * logdet / q.rows());  // det^{1/dim}
  } else {
    double v = 0.0;
    const MatExpr& obj = p.objective_expr();
    if (p.objective_kind() != ObjectiveKind::None) {
      v = obj.constant_part()(0, 0);
      for (const auto& [id, coeff] : obj.terms()) v += coeff(0, 0) * sol.y[id];
    }
    sol.objective_value = v;
  }
  return sol;
}

CheckReport check_solution(const SdpProblem& p, const SdpSolution& s, double tol) {
  CheckReport rep;
  if (s.status != SolveStatus::Optimal) return rep;
  rep.ok = true;
  for (const auto& cst : p.constraints()) {
    Matrix v = cst.expr.eval(s.y);
    v = 0.5 * (v + v.transpose()).eval();
    double e = min_eig(cst.sense == Sense::PSD || cst.sense == Sense::PD ? v : Matrix(-v));
    rep.min_eigs.push_back(e);
    double scale = std::max(1.0, cst.expr.constant_part().cwiseAbs().maxCoeff());
    double required = 0.0;
    if (cst.sense == Sense::PD || cst.sense == Sense::ND) {
      double margin = cst.margin.value_or(1e-7 * scale);
      required = margin / 2.0;
    }
    double slack = e - required;
    if (slack < -tol * scale) {
      rep.ok = false;
      rep.worst_violation = std::min(rep.worst_violation, slack);
    }
  }
  return rep;
}

}  // namespace rsaw::lmi
