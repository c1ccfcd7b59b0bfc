#ifndef SMARTREPLY_ENCODER_H_
#define SMARTREPLY_ENCODER_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smartreply/autodiff.h"
#include "smartreply/corpus.h"
#include "smartreply/rng.h"
#include "smartreply/tensor.h"

namespace smartreply {

enum class EncoderKind { kBiLstm, kFeedForward };

std::string ToString(EncoderKind kind);
EncoderKind ParseEncoderKind(const std::string& name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kBiLstm;
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 64;
  // LSTM hidden size per direction, or feed-forward hidden width.
  std::size_t hidden = 64;
  // Bi-LSTM layers, or feed-forward layers (the last one is linear).
  std::size_t layers = 1;
  // Output width of the feed-forward variant.
  std::size_t ff_output = 128;
  float dropout = 0.2f;
  bool share_embeddings = true;

  std::size_t output_dim() const {
    return kind == EncoderKind::kBiLstm ? 2 * hidden : ff_output;
  }
  void Validate() const;
  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

// Gate order in every [.. x 4h] block: input, forget, cell, output.
template <typename T>
struct BasicLstmDirection {
  BasicTensor<T> wx;  // [in x 4h]
  BasicTensor<T> wh;  // [h x 4h]
  BasicTensor<T> b;   // [1 x 4h]
};

template <typename T>
struct BasicDense {
  BasicTensor<T> w;
  BasicTensor<T> b;
};

// One encoder stack above the embedding layer.
template <typename T>
struct BasicTower {
  std::vector<BasicLstmDirection<T>> forward;   // per layer
  std::vector<BasicLstmDirection<T>> backward;  // per layer
  std::vector<BasicDense<T>> dense;             // feed-forward variant
};

enum class Side { kMessage, kReply };

// Parallel message/reply encoders Phi_X, Phi_Y.
template <typename T>
struct BasicDualEncoder {
  EncoderConfig config;
  BasicTensor<T> message_embedding;  // [vocab x e]
  BasicTensor<T> reply_embedding;    // empty when shared
  BasicTower<T> message;
  BasicTower<T> reply;

  static BasicDualEncoder Init(const EncoderConfig& config, std::uint64_t seed);

  const BasicTensor<T>& embedding(Side side) const {
    return side == Side::kReply && !config.share_embeddings ? reply_embedding
                                                            : message_embedding;
  }
  const BasicTower<T>& tower(Side side) const {
    return side == Side::kMessage ? message : reply;
  }

  // Stable names used for checkpoints and optimizer bookkeeping.
  std::vector<std::pair<std::string, BasicTensor<T>*>> NamedParameters();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> NamedParameters() const;

  template <typename U>
  BasicDualEncoder<U> Cast() const;
};

using DualEncoder = BasicDualEncoder<float>;

// Encodes a batch into an [n x d] node. Dropout is applied after the
// embedding layer iff `dropout_rng` is non-null (training mode); inverted
// scaling keeps inference free of dropout arithmetic. Padding never reaches
// the outputs: recurrences stop at each sequence's true length.
template <typename T>
BasicVar<T> EncodeBatch(BasicTape<T>& tape, const BasicDualEncoder<T>& encoder,
                        Side side, std::span<const TokenIds> sequences,
                        Rng* dropout_rng);

// Inference-mode helpers on a forward-only tape.
Tensor EncodeBatch(const DualEncoder& encoder, Side side,
                   std::span<const TokenIds> sequences);
Tensor Encode(const DualEncoder& encoder, Side side, const TokenIds& tokens);

}  // namespace smartreply

#endif  // SMARTREPLY_ENCODER_H_
