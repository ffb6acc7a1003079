#include "msstrn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "msstrn/errors.hpp"

namespace msstrn {

const ParamCheck* GradCheckReport::worst() const {
  auto it = std::max_element(params.begin(), params.end(), [](const ParamCheck& a, const ParamCheck& b) {
    return a.max_rel_error < b.max_rel_error;
  });
  return it == params.end() ? nullptr : &*it;
}

namespace {

double evaluate(const ScalarProgram& program, ParameterStore& params) {
  Tape tape;
  Var out = program(tape, params);
  const double v = out.value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: program returned a non-finite value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarProgram& program, ParameterStore& params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
  params.zero_grad();
  {
    Tape tape;
    Var out = program(tape, params);
    if (!std::isfinite(out.value().item())) {
      throw NumericError("grad_check: program returned a non-finite value");
    }
    tape.backward(out);
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    if (!params[pi].trainable) continue;
    ParamCheck check;
    check.name = params[pi].name;
    const std::size_t count = params[pi].value.size();
    for (std::size_t i = 0; i < count; ++i) {
      const double original = params[pi].value[i];
      params[pi].value[i] = original + eps;
      const double up = evaluate(program, params);
      params[pi].value[i] = original - eps;
      const double down = evaluate(program, params);
      params[pi].value[i] = original;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = params[pi].grad[i];
      const double rel =
          std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      if (i == 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
        check.worst_analytic = analytic;
        check.worst_numeric = numeric;
      }
      ++report.entries_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace msstrn
