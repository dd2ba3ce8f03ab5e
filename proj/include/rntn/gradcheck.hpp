#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rntn/model.hpp"

// Independent finite-difference oracle used to certify every analytic
// gradient in the library.

namespace rntn {

struct CheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

inline constexpr double kCheckRelTol = 1e-5;
inline constexpr double kCheckAbsFloor = 1e-10;
inline constexpr double kCheckEps = 1e-5;

// Central differences (L(t+eps) - L(t-eps)) / 2eps for every coordinate of
// `theta`, restoring each coordinate afterwards. The loss must be a pure,
// deterministic function of theta; a non-finite loss value aborts. The
// difference quotient is formed in extended precision, so losses evaluated
// in extended precision keep their headroom.
std::vector<double> finite_diff(const std::function<long double()>& loss,
                                std::vector<double>& theta, double eps);

// Independent extended-precision re-evaluations of the forward pass, used
// as the oracle's loss functions: separate scalar-loop code with no shared
// path through the implementation under test.
//
// Sum of the step's output state (h, plus c for the LSTM family).
long double step_output_sum_extended(const CellParams& p, const Vector& x,
                                     const StepState& prev);
// Total sequence NLL (nats) of tokens[1..] given their prefixes.
long double model_nll_extended(const Model& model,
                               const std::vector<int>& tokens);

// Per-coordinate relative error |a - n| / max(|a|, |n|, abs_floor).
// A coordinate also passes when both magnitudes sit below the floor.
CheckReport compare(const std::string& name, const std::vector<double>& analytic,
                    const std::vector<double>& numeric, double rel_tol,
                    double abs_floor);

// Runs BPTT on the sequence, then certifies each named parameter of the
// model against finite differences of sequence_nll.
std::vector<CheckReport> check_model_gradients(
    Model& model, const std::vector<int>& tokens, std::size_t bptt_k = 0,
    double eps = kCheckEps, double rel_tol = kCheckRelTol,
    double abs_floor = kCheckAbsFloor);

// Builds a randomized model+sequence instance and certifies it. Returns
// one report per parameter, prefixed with the cell-kind name.
std::vector<CheckReport> check_random_instance(CellKind kind,
                                               std::size_t embed_dim,
                                               std::size_t hidden_dim,
                                               std::size_t vocab,
                                               std::size_t seq_len,
                                               std::uint64_t seed);

bool all_pass(const std::vector<CheckReport>& reports);

// Fixed-width table of reports, one line per parameter.
std::string format_reports(const std::vector<CheckReport>& reports);

}  // namespace rntn
