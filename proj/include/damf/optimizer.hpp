#pragma once

#include <vector>

#include "damf/encoder.hpp"
#include "damf/types.hpp"

namespace damf {

struct AdamConfig {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

// Adam over a fixed parameter set. State is positional, so the pointer list
// must stay stable for the optimizer's lifetime. A parameter whose gradient
// is exactly zero at every step is left bitwise untouched (m and v stay
// zero), which is what lets the warm-up phase guarantee a zero diff on the
// domain head without special-casing it here.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, AdamConfig config = {});

  // One update using the gradients currently stored in the params.
  // Does not clear them.
  void step(Scalar lr);

  int steps_taken() const { return t_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

}  // namespace damf
