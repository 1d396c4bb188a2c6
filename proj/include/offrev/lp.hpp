#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"

namespace offrev {

enum class ConstraintSense { less_equal, greater_equal, equal };

constexpr double kInf = std::numeric_limits<double>::infinity();

/// A linear program over box-bounded variables. Rows are built as sparse
/// term lists; the solver densifies internally (desk-scale instances).
struct LinearProgram {
  struct Term {
    int var;
    double coeff;
  };
  struct Row {
    ConstraintSense sense;
    double rhs;
    std::vector<Term> terms;
    std::string name;
  };

  bool maximize = true;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;
  std::vector<std::string> var_names;
  std::vector<Row> rows;

  int add_variable(double lo, double hi, double obj = 0.0, std::string name = {});
  int add_constraint(ConstraintSense sense, double rhs, std::vector<Term> terms,
                     std::string name = {});
  void set_objective(int var, double coeff) { objective.at(static_cast<size_t>(var)) = coeff; }

  int num_variables() const { return static_cast<int>(lower.size()); }
  int num_constraints() const { return static_cast<int>(rows.size()); }
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

/// Two-phase bounded-variable simplex. Returns a vertex solution with the
/// objective within `tolerance` (relative) of the optimum and constraint
/// violations below 1e-9 absolute. Throws InfeasibleError / UnboundedError
/// with a cause hint where one is cheap to extract.
LpSolution solve_lp(const LinearProgram& lp, double tolerance = 1e-8);

/// Largest absolute constraint/bound violation of x; independent of any
/// state the solver reports.
double max_constraint_violation(const LinearProgram& lp, const Eigen::VectorXd& x);

}  // namespace offrev
