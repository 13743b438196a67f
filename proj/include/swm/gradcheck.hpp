#pragma once

// Finite-difference check of the model's analytic gradients on a tiny
// random instance.

#include <cstdint>

#include "swm/autodiff.hpp"
#include "swm/model.hpp"

namespace swm {

struct TinyInstance {
  SwmConfig config;
  SwmParams params;
  EncodedSentence sentence;
  int label = 1;
};

/// Dims 4, three words, one or two senses per word, parameters uniform in
/// (-0.5, 0.5) so that no gradient is accidentally tiny.
TinyInstance tiny_instance(std::uint64_t seed);

/// Checks every parameter the variant uses. Dropout is off.
ad::GradCheckReport<double> check_variant_gradients(Variant variant, std::uint64_t seed, double h = 1e-5,
                                                    double tol = 1e-4);

}  // namespace swm
