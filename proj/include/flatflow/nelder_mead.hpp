#pragma once

// Budgeted derivative-free minimisation on top of GSL's simplex method.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace flatflow {

struct SimplexResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Minimises `f` from `x0` with initial simplex steps `step`, spending at most
/// `max_evals` objective evaluations. Returns the best point evaluated; ties
/// go to the lexicographically smaller point.
inline SimplexResult simplex_minimize(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x0, const std::vector<double>& step,
                                      int max_evals, double size_tol = 0.0) {
  struct State {
    const std::function<double(const std::vector<double>&)>* f;
    SimplexResult best;
    int budget;
    std::vector<double> scratch;
  };
  const std::size_t n = x0.size();
  State state{&f, {}, max_evals, std::vector<double>(n)};

  struct Thunk {
    static double eval(const gsl_vector* v, void* params) {
      auto& s = *static_cast<State*>(params);
      for (std::size_t k = 0; k < s.scratch.size(); ++k) s.scratch[k] = gsl_vector_get(v, k);
      // Beyond the budget GSL may still probe; answer without counting.
      if (s.best.evaluations >= s.budget) return s.best.value;
      double value = (*s.f)(s.scratch);
      if (!std::isfinite(value)) value = std::numeric_limits<double>::max();
      ++s.best.evaluations;
      if (value < s.best.value || (value == s.best.value && s.scratch < s.best.x) || s.best.x.empty()) {
        s.best.value = value;
        s.best.x = s.scratch;
      }
      return value;
    }
  };
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t k = 0; k < n; ++k) {
    gsl_vector_set(x, k, x0[k]);
    gsl_vector_set(ss, k, step[k]);
  }
  gsl_multimin_function fn{&Thunk::eval, n, &state};
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(solver, &fn, x, ss);
  while (state.best.evaluations < state.budget) {
    if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (size_tol > 0.0 && gsl_multimin_fminimizer_size(solver) < size_tol) break;
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return state.best;
}

}  // namespace flatflow
