#include "smartreply/encoder.h"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "smartreply/error.h"

namespace smartreply {

std::string ToString(EncoderKind kind) {
  return kind == EncoderKind::kBiLstm ? "bilstm" : "feedforward";
}

EncoderKind ParseEncoderKind(const std::string& name) {
  if (name == "bilstm") return EncoderKind::kBiLstm;
  if (name == "feedforward") return EncoderKind::kFeedForward;
  throw ContractError("unknown encoder kind '" + name +
                      "' (expected bilstm or feedforward)");
}

void EncoderConfig::Validate() const {
  if (vocab_size < 2) throw ContractError("encoder vocab_size must be >= 2");
  if (embedding_dim == 0 || hidden == 0 || layers == 0) {
    throw ContractError("encoder sizes must be positive");
  }
  if (kind == EncoderKind::kFeedForward && ff_output == 0) {
    throw ContractError("feed-forward encoder needs ff_output > 0");
  }
  if (!(dropout >= 0.0f && dropout < 1.0f)) {
    throw ContractError("dropout must lie in [0, 1)");
  }
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"kind", ToString(kind)},          {"vocab_size", vocab_size},
          {"embedding_dim", embedding_dim},  {"hidden", hidden},
          {"layers", layers},                {"ff_output", ff_output},
          {"dropout", dropout},              {"share_embeddings", share_embeddings}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = ParseEncoderKind(j.value("kind", ToString(c.kind)));
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.ff_output = j.value("ff_output", c.ff_output);
  c.dropout = j.value("dropout", c.dropout);
  c.share_embeddings = j.value("share_embeddings", c.share_embeddings);
  return c;
}

namespace {

template <typename T>
BasicTensor<T> RandomMatrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  BasicTensor<T> t = BasicTensor<T>::Zeros(rows, cols);
  for (T& v : t.mutable_data()) v = static_cast<T>(rng.Gaussian() * scale);
  return t;
}

template <typename T>
BasicLstmDirection<T> InitLstm(Rng& rng, std::size_t in, std::size_t h) {
  BasicLstmDirection<T> d;
  d.wx = RandomMatrix<T>(rng, in, 4 * h, 1.0 / std::sqrt(static_cast<double>(in)));
  d.wh = RandomMatrix<T>(rng, h, 4 * h, 1.0 / std::sqrt(static_cast<double>(h)));
  d.b = BasicTensor<T>::Zeros(1, 4 * h);
  // Forget-gate bias of one keeps early gradients flowing through the cell.
  for (std::size_t j = h; j < 2 * h; ++j) d.b[j] = T(1);
  return d;
}

template <typename T>
BasicTower<T> InitTower(Rng& rng, const EncoderConfig& c) {
  BasicTower<T> tower;
  if (c.kind == EncoderKind::kBiLstm) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::size_t in = l == 0 ? c.embedding_dim : 2 * c.hidden;
      tower.forward.push_back(InitLstm<T>(rng, in, c.hidden));
      tower.backward.push_back(InitLstm<T>(rng, in, c.hidden));
    }
  } else {
    std::size_t in = c.embedding_dim;
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::size_t out = l + 1 == c.layers ? c.ff_output : c.hidden;
      tower.dense.push_back({RandomMatrix<T>(rng, in, out,
                                             1.0 / std::sqrt(static_cast<double>(in))),
                             BasicTensor<T>::Zeros(1, out)});
      in = out;
    }
  }
  return tower;
}

template <typename T, typename P>
void AppendTower(const std::string& prefix, BasicTower<T>& tower,
                 std::vector<std::pair<std::string, P>>& out) {
  for (std::size_t l = 0; l < tower.forward.size(); ++l) {
    for (auto [dir, d] : {std::pair{"fwd", &tower.forward[l]},
                          std::pair{"bwd", &tower.backward[l]}}) {
      const std::string base = prefix + ".lstm" + std::to_string(l) + "." + dir;
      out.emplace_back(base + ".wx", &d->wx);
      out.emplace_back(base + ".wh", &d->wh);
      out.emplace_back(base + ".b", &d->b);
    }
  }
  for (std::size_t l = 0; l < tower.dense.size(); ++l) {
    const std::string base = prefix + ".dense" + std::to_string(l);
    out.emplace_back(base + ".w", &tower.dense[l].w);
    out.emplace_back(base + ".b", &tower.dense[l].b);
  }
}

template <typename U, typename T>
BasicTower<U> CastTower(const BasicTower<T>& t) {
  BasicTower<U> out;
  auto cast_dir = [](const BasicLstmDirection<T>& d) {
    return BasicLstmDirection<U>{d.wx.template Cast<U>(), d.wh.template Cast<U>(),
                                 d.b.template Cast<U>()};
  };
  for (const auto& d : t.forward) out.forward.push_back(cast_dir(d));
  for (const auto& d : t.backward) out.backward.push_back(cast_dir(d));
  for (const auto& d : t.dense) {
    out.dense.push_back({d.w.template Cast<U>(), d.b.template Cast<U>()});
  }
  return out;
}

// Runs one direction over time-major input rows [steps*n x in]; returns the
// per-step hidden states (carried past each sequence's end) and the final one.
template <typename T>
std::vector<BasicVar<T>> RunDirection(BasicTape<T>& tape,
                                      const BasicLstmDirection<T>& p,
                                      BasicVar<T> inputs,
                                      const std::vector<std::vector<std::uint8_t>>& masks,
                                      std::size_t n, bool reverse) {
  const std::size_t steps = masks.size();
  const std::size_t h = p.wh.rows();
  BasicVar<T> proj = ad::Add(ad::MatMul(inputs, tape.Parameter(p.wx)), tape.Parameter(p.b));
  BasicVar<T> wh = tape.Parameter(p.wh);
  BasicVar<T> hs = tape.Constant(BasicTensor<T>::Zeros(n, h));
  BasicVar<T> cs = hs;
  std::vector<BasicVar<T>> outputs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    BasicVar<T> g = ad::Add(ad::SliceRows(proj, t * n, (t + 1) * n), ad::MatMul(hs, wh));
    BasicVar<T> i = ad::Sigmoid(ad::SliceCols(g, 0, h));
    BasicVar<T> f = ad::Sigmoid(ad::SliceCols(g, h, 2 * h));
    BasicVar<T> c_hat = ad::Tanh(ad::SliceCols(g, 2 * h, 3 * h));
    BasicVar<T> o = ad::Sigmoid(ad::SliceCols(g, 3 * h, 4 * h));
    BasicVar<T> c_new = ad::Add(ad::Mul(f, cs), ad::Mul(i, c_hat));
    BasicVar<T> h_new = ad::Mul(o, ad::Tanh(c_new));
    cs = ad::SelectRows<T>(masks[t], c_new, cs);
    hs = ad::SelectRows<T>(masks[t], h_new, hs);
    outputs[t] = hs;
  }
  return outputs;
}

}  // namespace

template <typename T>
BasicDualEncoder<T> BasicDualEncoder<T>::Init(const EncoderConfig& config,
                                              std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  BasicDualEncoder<T> enc;
  enc.config = config;
  enc.message_embedding = RandomMatrix<T>(rng, config.vocab_size, config.embedding_dim, 0.1);
  if (!config.share_embeddings) {
    enc.reply_embedding = RandomMatrix<T>(rng, config.vocab_size, config.embedding_dim, 0.1);
  }
  enc.message = InitTower<T>(rng, config);
  enc.reply = InitTower<T>(rng, config);
  return enc;
}

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>*>> BasicDualEncoder<T>::NamedParameters() {
  std::vector<std::pair<std::string, BasicTensor<T>*>> out;
  out.emplace_back("encoder.message.embedding", &message_embedding);
  if (!config.share_embeddings) out.emplace_back("encoder.reply.embedding", &reply_embedding);
  AppendTower("encoder.message", message, out);
  AppendTower("encoder.reply", reply, out);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const BasicTensor<T>*>>
BasicDualEncoder<T>::NamedParameters() const {
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  for (auto& [name, p] : const_cast<BasicDualEncoder<T>*>(this)->NamedParameters()) {
    out.emplace_back(name, p);
  }
  return out;
}

template <typename T>
template <typename U>
BasicDualEncoder<U> BasicDualEncoder<T>::Cast() const {
  BasicDualEncoder<U> out;
  out.config = config;
  out.message_embedding = message_embedding.template Cast<U>();
  out.reply_embedding = reply_embedding.template Cast<U>();
  out.message = CastTower<U>(message);
  out.reply = CastTower<U>(reply);
  return out;
}

template <typename T>
BasicVar<T> EncodeBatch(BasicTape<T>& tape, const BasicDualEncoder<T>& encoder,
                        Side side, std::span<const TokenIds> sequences,
                        Rng* dropout_rng) {
  const EncoderConfig& c = encoder.config;
  const std::size_t n = sequences.size();
  if (n == 0) throw ContractError("encode needs at least one sequence");
  std::size_t steps = 0;
  for (const auto& s : sequences) {
    if (s.empty()) throw ContractError("cannot encode an empty token sequence");
    steps = std::max(steps, s.size());
  }
  const BasicTensor<T>& table = encoder.embedding(side);
  // Time-major gather: row t*n + i holds token t of sequence i.
  std::vector<std::size_t> ids(steps * n, static_cast<std::size_t>(kPadId));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < sequences[i].size(); ++t) {
      const TokenId id = sequences[i][t];
      if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
        throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(table.rows()));
      }
      ids[t * n + i] = static_cast<std::size_t>(id);
    }
  }
  BasicVar<T> x = ad::GatherRows(tape.Parameter(table), ids);
  if (dropout_rng != nullptr && c.dropout > 0.0f) {
    const T keep = static_cast<T>(1.0f - c.dropout);
    BasicTensor<T> mask(x.shape());
    for (T& m : mask.mutable_data()) {
      m = static_cast<T>(dropout_rng->Uniform()) < keep ? T(1) / keep : T(0);
    }
    x = ad::Mul(x, tape.Constant(std::move(mask)));
  }
  const BasicTower<T>& tower = encoder.tower(side);

  if (c.kind == EncoderKind::kFeedForward) {
    BasicTensor<T> avg = BasicTensor<T>::Zeros(n, steps * n);
    for (std::size_t i = 0; i < n; ++i) {
      const T w = T(1) / static_cast<T>(sequences[i].size());
      for (std::size_t t = 0; t < sequences[i].size(); ++t) avg.at(i, t * n + i) = w;
    }
    BasicVar<T> hcur = ad::MatMul(tape.Constant(std::move(avg)), x);
    for (std::size_t l = 0; l < tower.dense.size(); ++l) {
      hcur = ad::Add(ad::MatMul(hcur, tape.Parameter(tower.dense[l].w)),
                     tape.Parameter(tower.dense[l].b));
      if (l + 1 < tower.dense.size()) hcur = ad::Tanh(hcur);
    }
    return hcur;
  }

  std::vector<std::vector<std::uint8_t>> masks(steps, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < sequences[i].size(); ++t) masks[t][i] = 1;
  }
  BasicVar<T> layer_in = x;
  BasicVar<T> fwd_final, bwd_final;
  for (std::size_t l = 0; l < tower.forward.size(); ++l) {
    auto fwd = RunDirection(tape, tower.forward[l], layer_in, masks, n, false);
    auto bwd = RunDirection(tape, tower.backward[l], layer_in, masks, n, true);
    fwd_final = fwd.back();
    bwd_final = bwd.front();
    if (l + 1 < tower.forward.size()) {
      std::vector<BasicVar<T>> rows;
      for (std::size_t t = 0; t < steps; ++t) {
        std::vector<BasicVar<T>> both = {fwd[t], bwd[t]};
        rows.push_back(ad::ConcatCols<T>(both));
      }
      layer_in = ad::ConcatRows<T>(rows);
    }
  }
  std::vector<BasicVar<T>> halves = {fwd_final, bwd_final};
  return ad::ConcatCols<T>(halves);
}

Tensor EncodeBatch(const DualEncoder& encoder, Side side,
                   std::span<const TokenIds> sequences) {
  Tape tape(false);
  return EncodeBatch(tape, encoder, side, sequences, nullptr).value();
}

Tensor Encode(const DualEncoder& encoder, Side side, const TokenIds& tokens) {
  return EncodeBatch(encoder, side, std::span<const TokenIds>(&tokens, 1));
}

template struct BasicDualEncoder<float>;
template struct BasicDualEncoder<double>;
template BasicDualEncoder<double> BasicDualEncoder<float>::Cast<double>() const;
template BasicDualEncoder<float> BasicDualEncoder<double>::Cast<float>() const;
template BasicDualEncoder<float> BasicDualEncoder<float>::Cast<float>() const;
template BasicVar<float> EncodeBatch(BasicTape<float>&, const BasicDualEncoder<float>&,
                                     Side, std::span<const TokenIds>, Rng*);
template BasicVar<double> EncodeBatch(BasicTape<double>&, const BasicDualEncoder<double>&,
                                      Side, std::span<const TokenIds>, Rng*);

}  // namespace smartreply
