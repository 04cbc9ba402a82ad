#include "mixlen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mixlen/errors.hpp"

namespace mixlen {

namespace {

double evaluate(const GraphBuilder& build) {
  Tape tape;
  const double v = tape.value(build(tape)).item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: non-finite forward value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, std::span<Parameter* const> params,
                           double tol, double step) {
  Tape recorded;
  const NodeId out = build(recorded);
  if (!recorded.value(out).all_finite()) {
    throw EvaluationError("grad_check: non-finite forward value");
  }
  const Gradients grads = recorded.backward(out);

  GradCheckReport report;
  for (Parameter* p : params) {
    const Tensor analytic = grads.of(*p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = evaluate(build);
      p->value[i] = saved - step;
      const double down = evaluate(build);
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (report.checked++ == 0 || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace mixlen
