#include "offrev/lp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace offrev {

int LinearProgram::add_variable(double lo, double hi, double obj, std::string name) {
  if (lo > hi) throw ValidationError("variable '" + name + "' has lower bound above upper");
  lower.push_back(lo);
  upper.push_back(hi);
  objective.push_back(obj);
  var_names.push_back(name.empty() ? "x" + std::to_string(lower.size() - 1) : std::move(name));
  return static_cast<int>(lower.size()) - 1;
}

int LinearProgram::add_constraint(ConstraintSense sense, double rhs, std::vector<Term> terms,
                                  std::string name) {
  for (const Term& t : terms) {
    if (t.var < 0 || t.var >= num_variables())
      throw ValidationError("constraint '" + name + "' references undeclared variable");
  }
  rows.push_back({sense, rhs, std::move(terms), std::move(name)});
  return static_cast<int>(rows.size()) - 1;
}

double max_constraint_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (int j = 0; j < lp.num_variables(); ++j) {
    worst = std::max(worst, lp.lower[static_cast<size_t>(j)] - x(j));
    worst = std::max(worst, x(j) - lp.upper[static_cast<size_t>(j)]);
  }
  for (const auto& row : lp.rows) {
    double lhs = 0.0;
    for (const auto& t : row.terms) lhs += t.coeff * x(t.var);
    switch (row.sense) {
      case ConstraintSense::less_equal: worst = std::max(worst, lhs - row.rhs); break;
      case ConstraintSense::greater_equal: worst = std::max(worst, row.rhs - lhs); break;
      case ConstraintSense::equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  return worst;
}

namespace {

enum class VarState { basic, at_lower, at_upper, free_zero };

// Dense two-phase tableau simplex over box-bounded variables. Nonbasic
// variables rest on a bound (free ones at zero); a pivot either swaps a
// basis member or flips the entering variable to its opposite bound.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, double tolerance)
      : lp_(lp), reduced_cost_tol_(std::max(1e-11, tolerance * 0.1)) {
    build();
  }

  LpSolution run() {
    phase_one();
    phase_two();
    return extract();
  }

 private:
  const LinearProgram& lp_;
  double reduced_cost_tol_;
  int m_ = 0;       // rows
  int n_all_ = 0;   // structural + slack + artificial
  int n_real_ = 0;  // structural + slack
  Eigen::MatrixXd tab_;       // m x n_all, row-reduced working matrix
  Eigen::MatrixXd a_orig_;    // m x n_all, untouched copy for refinement
  Eigen::VectorXd rhs_;
  Eigen::VectorXd lo_, hi_;
  Eigen::VectorXd cost_;      // current phase objective (minimization)
  Eigen::VectorXd x_;
  Eigen::RowVectorXd zrow_;   // reduced costs
  std::vector<VarState> state_;
  std::vector<int> basis_;    // row -> var
  int iterations_ = 0;
  bool bland_ = false;

  static constexpr double kPivotTol = 1e-8;
  static constexpr double kFeasTol = 1e-7;

  void build() {
    m_ = lp_.num_constraints();
    const int n = lp_.num_variables();
    int slacks = 0;
    for (const auto& row : lp_.rows)
      if (row.sense != ConstraintSense::equal) ++slacks;
    n_real_ = n + slacks;
    n_all_ = n_real_ + m_;  // one artificial per row

    // Dense tableau: refuse instances that would not fit rather than thrash.
    const double cells = static_cast<double>(m_) * n_all_;
    if (cells > 6e7)
      throw SolverError("linear program too large for the dense solver (" +
                        std::to_string(m_) + " rows x " + std::to_string(n_all_) +
                        " columns)");

    tab_ = Eigen::MatrixXd::Zero(m_, n_all_);
    rhs_ = Eigen::VectorXd::Zero(m_);
    lo_ = Eigen::VectorXd::Constant(n_all_, 0.0);
    hi_ = Eigen::VectorXd::Constant(n_all_, 0.0);
    for (int j = 0; j < n; ++j) {
      lo_(j) = lp_.lower[static_cast<size_t>(j)];
      hi_(j) = lp_.upper[static_cast<size_t>(j)];
    }
    int slack = n;
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[static_cast<size_t>(i)];
      for (const auto& t : row.terms) tab_(i, t.var) += t.coeff;
      rhs_(i) = row.rhs;
      if (row.sense == ConstraintSense::less_equal) {
        tab_(i, slack) = 1.0;
        lo_(slack) = 0.0;
        hi_(slack) = kInf;
        ++slack;
      } else if (row.sense == ConstraintSense::greater_equal) {
        tab_(i, slack) = -1.0;
        lo_(slack) = 0.0;
        hi_(slack) = kInf;
        ++slack;
      }
    }

    // Start nonbasic variables on a finite bound (free ones at zero).
    x_ = Eigen::VectorXd::Zero(n_all_);
    state_.assign(static_cast<size_t>(n_all_), VarState::at_lower);
    for (int j = 0; j < n_real_; ++j) {
      if (std::isfinite(lo_(j))) {
        x_(j) = lo_(j);
        state_[static_cast<size_t>(j)] = VarState::at_lower;
      } else if (std::isfinite(hi_(j))) {
        x_(j) = hi_(j);
        state_[static_cast<size_t>(j)] = VarState::at_upper;
      } else {
        x_(j) = 0.0;
        state_[static_cast<size_t>(j)] = VarState::free_zero;
      }
    }

    // Artificial basis absorbing the residual of the nonbasic point.
    basis_.assign(static_cast<size_t>(m_), -1);
    const Eigen::VectorXd residual = rhs_ - tab_.leftCols(n_real_) * x_.head(n_real_);
    for (int i = 0; i < m_; ++i) {
      const int art = n_real_ + i;
      tab_(i, art) = residual(i) >= 0.0 ? 1.0 : -1.0;
      lo_(art) = 0.0;
      hi_(art) = kInf;
      x_(art) = std::abs(residual(i));
      state_[static_cast<size_t>(art)] = VarState::basic;
      basis_[static_cast<size_t>(i)] = art;
      if (tab_(i, art) < 0.0) {
        tab_.row(i) = -tab_.row(i);
        rhs_(i) = -rhs_(i);
      }
    }
    a_orig_ = tab_;
  }

  void reset_reduced_costs() {
    zrow_ = cost_.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = cost_(basis_[static_cast<size_t>(i)]);
      if (cb != 0.0) zrow_ -= cb * tab_.row(i);
    }
  }

  // Entering variable for the minimization, or -1 at optimality.
  int choose_entering(int* direction) const {
    int best = -1;
    double best_score = reduced_cost_tol_;
    for (int j = 0; j < n_all_; ++j) {
      const VarState s = state_[static_cast<size_t>(j)];
      if (s == VarState::basic) continue;
      if (lo_(j) == hi_(j)) continue;  // fixed
      const double d = zrow_(j);
      int dir = 0;
      if ((s == VarState::at_lower || s == VarState::free_zero) && d < -reduced_cost_tol_)
        dir = +1;
      else if ((s == VarState::at_upper || s == VarState::free_zero) && d > reduced_cost_tol_)
        dir = -1;
      if (dir == 0) continue;
      if (bland_) {
        *direction = dir;
        return j;  // lowest index
      }
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
        *direction = dir;
      }
    }
    return best;
  }

  void pivot(int row, int col) {
    const double piv = tab_(row, col);
    tab_.row(row) /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = tab_(i, col);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(row);
    }
    const double zf = zrow_(col);
    if (zf != 0.0) zrow_ -= zf * tab_.row(row);
    basis_[static_cast<size_t>(row)] = col;
  }

  // One simplex step; returns false at optimality. Throws UnboundedError.
  bool step() {
    int dir = 0;
    const int e = choose_entering(&dir);
    if (e < 0) return false;

    // Ratio test: how far can x_e move before a basic variable or x_e's own
    // opposite bound blocks.
    double t_limit = kInf;
    int leave_row = -1;
    int leave_to_upper = 0;
    for (int i = 0; i < m_; ++i) {
      const double coef = tab_(i, e);
      if (std::abs(coef) < 1e-12) continue;
      const int b = basis_[static_cast<size_t>(i)];
      const double delta = -dir * coef;  // d x_b / d t
      double cap = kInf;
      int to_upper = 0;
      if (delta > 0.0 && std::isfinite(hi_(b))) {
        cap = (hi_(b) - x_(b)) / delta;
        to_upper = 1;
      } else if (delta < 0.0 && std::isfinite(lo_(b))) {
        cap = (x_(b) - lo_(b)) / (-delta);
      }
      if (cap < -1e-12) cap = 0.0;
      cap = std::max(cap, 0.0);
      const bool better =
          cap < t_limit - 1e-12 ||
          (cap < t_limit + 1e-12 && leave_row >= 0 &&
           (bland_ ? b < basis_[static_cast<size_t>(leave_row)]
                   : std::abs(coef) > std::abs(tab_(leave_row, e))));
      if (cap < kInf && better) {
        t_limit = cap;
        leave_row = i;
        leave_to_upper = to_upper;
      }
    }
    // A flip to the opposite bound wins only when strictly shorter than any
    // basic limit; ties go to the pivot so the basis keeps making progress.
    const double span = hi_(e) - lo_(e);
    if (std::isfinite(span) && (leave_row < 0 || span < t_limit - 1e-12)) {
      // Bound flip, basis unchanged.
      move_entering(e, dir, span);
      state_[static_cast<size_t>(e)] =
          state_[static_cast<size_t>(e)] == VarState::at_lower ? VarState::at_upper
                                                               : VarState::at_lower;
      ++iterations_;
      return true;
    }
    if (leave_row < 0) {
      throw UnboundedError("unbounded: variable '" + var_name(e) +
                           "' can improve the objective without limit");
    }

    move_entering(e, dir, t_limit);
    const int leaving = basis_[static_cast<size_t>(leave_row)];
    pivot(leave_row, e);
    state_[static_cast<size_t>(e)] = VarState::basic;
    if (lo_(leaving) == hi_(leaving))
      state_[static_cast<size_t>(leaving)] = VarState::at_lower;
    else
      state_[static_cast<size_t>(leaving)] =
          leave_to_upper ? VarState::at_upper : VarState::at_lower;
    x_(leaving) = leave_to_upper ? hi_(leaving) : lo_(leaving);
    ++iterations_;
    return true;
  }

  void move_entering(int e, int dir, double t) {
    if (t == 0.0) return;
    for (int i = 0; i < m_; ++i) {
      const double coef = tab_(i, e);
      if (coef != 0.0) x_(basis_[static_cast<size_t>(i)]) -= dir * t * coef;
    }
    x_(e) += dir * t;
  }

  void iterate(const char* phase) {
    const int soft_limit = 200 + 40 * (m_ + n_all_);
    const int hard_limit = 4 * soft_limit + 20000;
    int local = 0;
    while (step()) {
      ++local;
      if (local == soft_limit) {
        bland_ = true;  // anti-cycling fallback
        reset_reduced_costs();
      }
      if (local > hard_limit)
        throw SolverError(std::string("simplex iteration limit exceeded in ") + phase);
    }
  }

  void phase_one() {
    cost_ = Eigen::VectorXd::Zero(n_all_);
    cost_.tail(m_).setConstant(1.0);
    reset_reduced_costs();
    bland_ = false;
    iterate("phase 1");
    refine_basic_values();

    double infeasibility = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[static_cast<size_t>(i)];
      if (b >= n_real_) infeasibility += std::abs(x_(b));
    }
    const double scale = m_ > 0 ? std::max(1.0, rhs_.cwiseAbs().maxCoeff()) : 1.0;
    if (infeasibility > kFeasTol * scale) {
      std::string hint;
      for (int i = 0; i < m_; ++i) {
        const int b = basis_[static_cast<size_t>(i)];
        if (b >= n_real_ && std::abs(x_(b)) > kFeasTol * scale) {
          const auto& row = lp_.rows[static_cast<size_t>(i)];
          hint = row.name.empty() ? "constraint #" + std::to_string(i) : row.name;
          break;
        }
      }
      throw InfeasibleError("infeasible linear program (unsatisfied: " + hint + ")");
    }

    // Drive zero-valued artificials out of the basis; rows with no usable
    // pivot are redundant and keep a pinned artificial.
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[static_cast<size_t>(i)];
      if (b < n_real_) continue;
      int col = -1;
      for (int j = 0; j < n_real_; ++j) {
        if (state_[static_cast<size_t>(j)] == VarState::basic) continue;
        if (std::abs(tab_(i, j)) > kPivotTol) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        // Degenerate swap: values are unchanged, only basis membership moves.
        const int old = basis_[static_cast<size_t>(i)];
        pivot(i, col);
        state_[static_cast<size_t>(col)] = VarState::basic;
        state_[static_cast<size_t>(old)] = VarState::at_lower;
        x_(old) = 0.0;
      }
    }
    // Pin every artificial so phase 2 cannot reuse them.
    for (int j = n_real_; j < n_all_; ++j) {
      hi_(j) = 0.0;
      if (state_[static_cast<size_t>(j)] != VarState::basic) x_(j) = 0.0;
    }
  }

  void phase_two() {
    cost_ = Eigen::VectorXd::Zero(n_all_);
    const double sign = lp_.maximize ? -1.0 : 1.0;
    for (int j = 0; j < lp_.num_variables(); ++j)
      cost_(j) = sign * lp_.objective[static_cast<size_t>(j)];
    reset_reduced_costs();
    bland_ = false;
    iterate("phase 2");
    refine_basic_values();
  }

  // Re-solve the basis system against the untouched matrix to strip the
  // round-off accumulated by pivoting.
  void refine_basic_values() {
    if (m_ == 0) return;
    Eigen::MatrixXd basis_cols(m_, m_);
    for (int i = 0; i < m_; ++i) basis_cols.col(i) = a_orig_.col(basis_[static_cast<size_t>(i)]);

    Eigen::VectorXd shift = rhs_;  // rhs_ already carries the build-time row flips
    for (int j = 0; j < n_all_; ++j) {
      if (state_[static_cast<size_t>(j)] == VarState::basic) continue;
      if (x_(j) != 0.0) shift -= x_(j) * a_orig_.col(j);
    }
    const Eigen::VectorXd xb = basis_cols.fullPivLu().solve(shift);
    for (int i = 0; i < m_; ++i) x_(basis_[static_cast<size_t>(i)]) = xb(i);
  }

  std::string var_name(int j) const {
    if (j < lp_.num_variables()) return lp_.var_names[static_cast<size_t>(j)];
    if (j < n_real_) return "slack#" + std::to_string(j - lp_.num_variables());
    return "artificial#" + std::to_string(j - n_real_);
  }

  LpSolution extract() const {
    LpSolution sol;
    const int n = lp_.num_variables();
    sol.x = x_.head(n);
    for (int j = 0; j < n; ++j)
      sol.x(j) = std::min(std::max(sol.x(j), lp_.lower[static_cast<size_t>(j)]),
                          lp_.upper[static_cast<size_t>(j)]);
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += lp_.objective[static_cast<size_t>(j)] * sol.x(j);
    sol.iterations = iterations_;
    return sol;
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, double tolerance) {
  if (lp.num_variables() == 0) throw ValidationError("linear program has no variables");
  Simplex simplex(lp, tolerance);
  LpSolution sol = simplex.run();
  const double violation = max_constraint_violation(lp, sol.x);
  if (violation > 1e-7)
    throw SolverError("solver returned an infeasible point (violation " +
                      std::to_string(violation) + ")");
  return sol;
}

}  // namespace offrev
