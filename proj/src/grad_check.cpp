#include "hyper/grad_check.hpp"

#include <cmath>

#include "hyper/errors.hpp"

namespace hyper {

namespace {

double evaluate(const LossGraphFn& loss_fn, const ParamMap& params) {
  Tape tape;
  const double v = loss_fn(tape, params).value()[0];
  if (!std::isfinite(v)) throw NumericError("finite difference probe produced a non-finite loss");
  return v;
}

}  // namespace

FiniteDiffReport finite_diff_check(const LossGraphFn& loss_fn, const ParamMap& params, double eps,
                                   const std::vector<Probe>& probes) {
  if (eps <= 0.0) throw ContractError("finite difference step must be positive");
  Gradients analytic;
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    if (!std::isfinite(loss.value()[0])) throw NumericError("loss is not finite");
    analytic = tape.backward(loss);
  }

  std::vector<Probe> todo = probes;
  if (todo.empty()) {
    for (const auto& [id, t] : params)
      for (std::size_t i = 0; i < t.size(); ++i) todo.push_back({id, i});
  }

  FiniteDiffReport report;
  ParamMap work = params;
  for (const Probe& p : todo) {
    Tensor& t = work.at(p.param);
    const double orig = t[p.index];
    t[p.index] = orig + eps;
    const double up = evaluate(loss_fn, work);
    t[p.index] = orig - eps;
    const double down = evaluate(loss_fn, work);
    t[p.index] = orig;

    const double numeric = (up - down) / (2.0 * eps);
    const double exact = analytic.contains(p.param) ? analytic.at(p.param)[p.index] : 0.0;
    const double err = std::abs(exact - numeric) / std::max(std::abs(numeric), 1e-8);
    if (err > report.max_rel_error || report.probes == 0) {
      report.max_rel_error = std::max(err, report.max_rel_error);
      if (err >= report.max_rel_error) {
        report.worst = p;
        report.worst_analytic = exact;
        report.worst_numeric = numeric;
      }
    }
    ++report.probes;
  }
  return report;
}

double finite_diff_max_error(const LossGraphFn& loss_fn, const ParamMap& params, double eps) {
  return finite_diff_check(loss_fn, params, eps).max_rel_error;
}

}  // namespace hyper
