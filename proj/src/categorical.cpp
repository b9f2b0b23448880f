#include "vdd/categorical.hpp"

#include <cmath>

namespace vdd {

double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

Vec log_softmax(const Vec& logits) {
  require(logits.size() > 0, "log_softmax: empty logits");
  require(all_finite(logits), "log_softmax: non-finite logits");
  return logits.array() - log_sum_exp(logits);
}

double categorical_entropy(const Vec& logits) {
  const Vec lp = log_softmax(logits);
  double h = 0.0;
  for (int i = 0; i < lp.size(); ++i) h -= std::exp(lp[i]) * lp[i];
  return h;
}

int categorical_sample(const Vec& logits, double u) {
  require(u >= 0.0 && u < 1.0, "categorical_sample: u must lie in [0,1)");
  const Vec lp = log_softmax(logits);
  double cum = 0.0;
  for (int i = 0; i < lp.size(); ++i) {
    cum += std::exp(lp[i]);
    if (u < cum) return i;
  }
  return static_cast<int>(lp.size()) - 1;
}

}  // namespace vdd
