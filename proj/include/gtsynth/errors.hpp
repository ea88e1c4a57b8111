#pragma once

#include <stdexcept>
#include <string>

namespace gtsynth {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed tree document or a tree that breaks a structural invariant
/// (duplicate id, dangling edge, cycle, out-of-range rho or pi).
struct TreeError : Error {
  using Error::Error;
};

/// Invalid argument value (layer index, probability vector, budget...).
struct DomainError : Error {
  using Error::Error;
};

/// Some node ends up with two or more neighbours in the layer above.
struct HyperChainViolation : Error {
  using Error::Error;
};

/// Mixture weights that do not factor into independent Bernoulli signs.
struct NotProductForm : Error {
  using Error::Error;
};

/// A size guard (sign enumeration, codebook index space, memory) tripped.
struct GuardExceeded : Error {
  using Error::Error;
};

/// A statistical procedure was handed too little data.
struct InsufficientData : Error {
  using Error::Error;
};

}  // namespace gtsynth
