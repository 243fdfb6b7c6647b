// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tgcn/autodiff.hpp"

namespace tgcn::ad {

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> inputs;
  double tolerance = 0.0;
  bool passed = false;
  double max_rel_error() const;
};

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Denominator floor: rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double scale_floor = 1e-6;
};

/// Compares the analytic gradient of a scalar function of `inputs` against
/// central differences. `f` is re-evaluated with perturbed input data, so it
/// must be deterministic and read the inputs' current values. Input gradients
/// are overwritten.
GradcheckReport gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                          const GradcheckOptions& options = {},
                          std::vector<std::string> names = {});

}  // namespace tgcn::ad
