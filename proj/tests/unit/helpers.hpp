#pragma once

#include "fedtheory/linalg.hpp"
#include "fedtheory/theory.hpp"

#include <initializer_list>

namespace testing {

inline fedtheory::ModelVector vec(std::initializer_list<double> values) {
  fedtheory::ModelVector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v(k++) = x;
  return v;
}

// Record for a client whose optimum sits at x_t - delta and whose local run
// ended at optimum + delta_end.
inline fedtheory::ClientRoundRecord record(double weight, const fedtheory::ModelVector& delta,
                                           const fedtheory::ModelVector& delta_end,
                                           const fedtheory::ModelVector& x_t) {
  fedtheory::ClientRoundRecord r;
  r.weight = weight;
  r.delta = delta;
  r.delta_end = delta_end;
  r.optimum = x_t - delta;
  r.sigma = delta.norm() > 0 ? delta_end.norm() / delta.norm() : 0.0;
  return r;
}

}  // namespace testing
