#pragma once

#include "vdd/types.hpp"

namespace vdd {

// Max-shifted log-sum-exp.
double log_sum_exp(const Vec& v);

// log softmax(logits); exp of the result sums to one.
Vec log_softmax(const Vec& logits);

// Entropy of softmax(logits) in nats.
double categorical_entropy(const Vec& logits);

// Inverse-CDF sample over softmax(logits) using a single uniform u in [0,1).
int categorical_sample(const Vec& logits, double u);

}  // namespace vdd
