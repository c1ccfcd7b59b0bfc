#include "smartreply/rng.h"

#include "smartreply/error.h"

namespace smartreply {

Tensor SampleGaussian(Rng& rng, const Shape& shape) {
  if (shape.empty() || NumElements(shape) == 0) {
    throw ContractError("SampleGaussian needs a nonempty shape, got " +
                        ShapeToString(shape));
  }
  Tensor out(shape);
  for (float& v : out.mutable_data()) v = rng.Gaussian();
  return out;
}

}  // namespace smartreply
