// SPDX-License-Identifier: Apache-2.0
#include "tgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tgcn::ad {

double GradcheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : inputs) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradcheckReport gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                          const GradcheckOptions& options, std::vector<std::string> names) {
  for (auto& t : inputs) t.zero_grad();
  Tensor loss = f();
  backward(loss);

  GradcheckReport report;
  report.tolerance = options.tolerance;
  bool ok = true;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k];
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

    GradcheckEntry entry;
    entry.name = k < names.size() ? names[k] : "input" + std::to_string(k);
    auto data = x.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + options.step;
      const double up = f().item();
      data[i] = saved - options.step;
      const double down = f().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.scale_floor});
      const double rel = abs_err / denom;
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
      }
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    }
    ok = ok && entry.max_rel_error <= options.tolerance;
    report.inputs.push_back(std::move(entry));
  }
  report.passed = ok;
  return report;
}

}  // namespace tgcn::ad
