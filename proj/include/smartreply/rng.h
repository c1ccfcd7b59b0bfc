#ifndef SMARTREPLY_RNG_H_
#define SMARTREPLY_RNG_H_

#include <cstdint>
#include <random>

#include "smartreply/tensor.h"

namespace smartreply {

// Seeded generator (mt19937_64). One instance per thread or request; never
// shared. Identical seeds give identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  float Gaussian() { return normal_(engine_); }
  float Uniform() { return uniform_(engine_); }
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  // Deterministically derived child seed; used to give each epoch, shard or
  // request its own stream.
  std::uint64_t Fork() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<float> normal_{0.0f, 1.0f};
  std::uniform_real_distribution<float> uniform_{0.0f, 1.0f};
};

// I.i.d. standard normal entries, drawn in row-major order.
Tensor SampleGaussian(Rng& rng, const Shape& shape);

}  // namespace smartreply

#endif  // SMARTREPLY_RNG_H_
