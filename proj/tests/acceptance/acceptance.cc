// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance math lc ...     run the named ones
//
// The exit status is non-zero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "smartreply/autodiff.h"
#include "smartreply/bench.h"
#include "smartreply/container.h"
#include "smartreply/diversify.h"
#include "smartreply/error.h"
#include "smartreply/eval.h"
#include "smartreply/inference.h"
#include "smartreply/lifecycle.h"
#include "smartreply/matching.h"
#include "smartreply/mcvae.h"
#include "smartreply/model_io.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace smartreply {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using TapeD = BasicTape<double>;
using VarD = BasicVar<double>;
using TensorD = BasicTensor<double>;

double SecondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failed checks; the first few go into the summary line.
class Checks {
 public:
  bool Expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failures_.push_back(what);
    return ok;
  }
  void Note(const std::string& n) { notes_.push_back(n); }
  bool ok() const { return failures_.empty(); }

  std::string Summary() const {
    std::ostringstream out;
    out << (total_ - failures_.size()) << "/" << total_ << " checks";
    for (const auto& n : notes_) out << "; " << n;
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) out << "\n    failed: " << failures_[i];
    if (failures_.size() > 5) out << "\n    ... " << failures_.size() - 5 << " more";
    return out.str();
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

TensorD RandomD(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  TensorD t = SampleGaussian(rng, {r, c}).Cast<double>();
  for (double& v : t.mutable_data()) v *= scale;
  return t;
}

// Symmetric normalisation written out term by term in double precision.
double NaiveSymmetricLoss(const Tensor& theta) {
  const std::size_t n = theta.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = -std::exp(static_cast<double>(theta.at(i, i)));
    for (std::size_t j = 0; j < n; ++j) {
      denom += std::exp(static_cast<double>(theta.at(i, j))) +
               std::exp(static_cast<double>(theta.at(j, i)));
    }
    total -= std::log(std::exp(static_cast<double>(theta.at(i, i))) / denom);
  }
  return total / static_cast<double>(n);
}

// KL(N(mu, diag exp(logvar)) || N(0, I)) for one row.
double HandKl(const std::vector<double>& mu, const std::vector<double>& logvar) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    kl += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i]);
  }
  return kl;
}

void GradCheckInto(Checks& c, const std::string& name, const GradCheckResult& r) {
  c.Expect(r.max_relative_error < 1e-3,
           fmt::format("{} grad check {:.2e} at {}[{}]", name, r.max_relative_error, r.worst_param,
                       r.worst_index));
}

Checks MathKernels() {
  Checks c;
  const auto t0 = Clock::now();

  c.Expect(ad::SymmetricNllValue(Tensor::Matrix({{3.7f}})) == 0.0, "batch of one gives loss 0");
  c.Expect(std::abs(ad::SymmetricNllValue(Tensor::Zeros(2, 2)) - std::log(3.0)) < 1e-6,
           "all-zero batch of two gives ln 3");
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.Index(6);
    Tensor t = SampleGaussian(rng, {n, n});
    c.Expect(std::abs(ad::SymmetricNllValue(t) - NaiveSymmetricLoss(t)) < 1e-9,
             fmt::format("symmetric loss vs term-by-term sum, trial {}", trial));
  }

  // Closed-form KL against hand values.
  struct KlCase {
    std::vector<double> mu, logvar;
    double expect;
  };
  const std::vector<KlCase> kl_cases = {
      {{0, 0, 0}, {0, 0, 0}, 0.0},
      {{1}, {0}, 0.5},
      {{1, 2}, {0, 0}, 2.5},
      {{0}, {1}, 0.5 * (std::exp(1.0) - 2.0)},
      {{0.5, -1}, {-1, 2}, 0.5 * (0.25 + std::exp(-1.0) - 1 + 1) + 0.5 * (1 + std::exp(2.0) - 1 - 2)},
  };
  for (const auto& k : kl_cases) {
    TapeD tape(false);
    TensorD mu({1, k.mu.size()}), lv({1, k.mu.size()});
    for (std::size_t i = 0; i < k.mu.size(); ++i) mu[i] = k.mu[i], lv[i] = k.logvar[i];
    const double got = KlDivergence(tape.Constant(mu), tape.Constant(lv)).value()[0];
    c.Expect(std::abs(got - k.expect) < 1e-6 && std::abs(HandKl(k.mu, k.logvar) - k.expect) < 1e-12,
             fmt::format("KL hand case {} vs {}", got, k.expect));
  }
  std::vector<float> zero_mu(8, 0.0f), unit_sigma(8, 1.0f);
  c.Expect(KlDivergenceValue(zero_mu, unit_sigma) == 0.0, "KL of the prior against itself is 0");

  // Reparameterization: eps = 0 gives mu, unit sigma with mu = 0 gives eps,
  // and the gradients are dz/dmu = 1, dz/dsigma = eps.
  {
    Tensor mu = SampleGaussian(rng, {3, 4});
    Tensor sigma = Tensor::Zeros(3, 4);
    for (float& s : sigma.mutable_data()) s = 0.5f + rng.Uniform();
    Tensor eps = SampleGaussian(rng, {3, 4});
    Tensor ones = Tensor::Zeros(3, 4);
    for (float& v : ones.mutable_data()) v = 1.0f;
    Tape tape(false);
    Var z0 = Reparameterize(tape.Constant(mu), tape.Constant(sigma), tape.Constant(Tensor::Zeros(3, 4)));
    c.Expect(z0.value().vec() == mu.vec(), "eps = 0 gives z = mu");
    Var z1 = Reparameterize(tape.Constant(Tensor::Zeros(3, 4)), tape.Constant(ones), tape.Constant(eps));
    c.Expect(z1.value().vec() == eps.vec(), "mu = 0, sigma = 1 gives z = eps");
    Tape rec;
    Var mv = rec.Parameter(mu), sv = rec.Parameter(sigma);
    rec.Backward(ad::SumAll(Reparameterize(mv, sv, rec.Constant(eps))));
    bool grads = true;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      grads = grads && rec.ParamGrad(mu)[i] == 1.0f && rec.ParamGrad(sigma)[i] == eps[i];
    }
    c.Expect(grads, "reparameterization gradients are 1 and eps");
  }

  // Gradient checks over every differentiable component.
  {
    TensorD x = RandomD(rng, 4, 5);
    TensorD w1 = RandomD(rng, 5, 6, 0.5), b1 = RandomD(rng, 1, 6, 0.1);
    TensorD w2 = RandomD(rng, 6, 3, 0.5), b2 = RandomD(rng, 1, 3, 0.1);
    auto f = [&](TapeD& tape) {
      VarD h = ad::Tanh(ad::Add(ad::MatMul(tape.Constant(x), tape.Parameter(w1)), tape.Parameter(b1)));
      VarD y = ad::Add(ad::MatMul(h, tape.Parameter(w2)), tape.Parameter(b2));
      return ad::SumAll(ad::Mul(y, y));
    };
    GradCheckInto(c, "two-layer tanh net", GradCheck<double>(f, {&w1, &b1, &w2, &b2}, 1e-5));
  }
  {
    TensorD a = RandomD(rng, 3, 4), b = RandomD(rng, 3, 4);
    TensorD row = RandomD(rng, 1, 4), table = RandomD(rng, 5, 4), pos = RandomD(rng, 3, 4);
    for (double& v : pos.mutable_data()) v = std::abs(v) + 0.5;
    const std::vector<std::size_t> ids = {4, 0, 4};
    const std::vector<std::uint8_t> take = {1, 0, 1};
    auto f = [&](TapeD& tape) {
      VarD va = tape.Parameter(a), vb = tape.Parameter(b);
      VarD s1 = ad::Sigmoid(ad::Sub(va, vb));
      VarD s2 = ad::Exp(ad::Scale(ad::Add(vb, tape.Parameter(row)), 0.3));
      VarD s3 = ad::Log(tape.Parameter(pos));
      VarD sel = ad::SelectRows<double>(take, s1, ad::GatherRows(tape.Parameter(table), ids));
      std::vector<VarD> parts = {sel, s2, s3};
      VarD cat = ad::ConcatCols<double>(parts);
      std::vector<VarD> stack = {cat, ad::SliceRows(cat, 0, 1)};
      VarD tr = ad::Transpose(ad::SliceRows(ad::SliceCols(ad::ConcatRows<double>(stack), 2, 10), 1, 4));
      VarD r1 = ad::SumRows(tr), r2 = ad::SumCols(tr);
      VarD sq = ad::MatMul(ad::Transpose(r2), r2);
      return ad::Add(ad::Add(ad::MeanAll(ad::Mul(r1, r1)), ad::SumAll(sq)),
                     ad::SymmetricNll(ad::Scale(sq, 0.05)));
    };
    GradCheckInto(c, "every op", GradCheck<double>(f, {&a, &b, &row, &table, &pos}, 1e-5));
  }
  {
    TensorD xs = RandomD(rng, 3, 4), ys = RandomD(rng, 3, 4);
    auto f = [&](TapeD& tape) {
      return ad::SymmetricNll(ad::MatMul(tape.Parameter(xs), ad::Transpose(tape.Parameter(ys))));
    };
    GradCheckInto(c, "symmetric loss", GradCheck<double>(f, {&xs, &ys}, 1e-5));
  }
  for (EncoderKind kind : {EncoderKind::kBiLstm, EncoderKind::kFeedForward}) {
    EncoderConfig ec;
    ec.kind = kind;
    ec.vocab_size = 12;
    ec.embedding_dim = 3;
    ec.hidden = 3;
    ec.layers = 2;
    ec.ff_output = 4;
    auto enc = DualEncoder::Init(ec, 17).Cast<double>();
    std::vector<TokenIds> xs = {{2, 3, 4}, {5}, {6, 7}};
    std::vector<TokenIds> ys = {{8, 9}, {10, 2, 3}, {11}};
    std::vector<TensorD*> params;
    for (auto& [name, p] : enc.NamedParameters()) params.push_back(p);
    auto f = [&](TapeD& tape) {
      VarD px = EncodeBatch<double>(tape, enc, Side::kMessage, xs, nullptr);
      VarD py = EncodeBatch<double>(tape, enc, Side::kReply, ys, nullptr);
      return ad::SymmetricNll(ad::MatMul(px, ad::Transpose(py)));
    };
    GradCheckInto(c, std::string(ToString(kind)) + " encoder", GradCheck<double>(f, params, 1e-4));
  }
  {
    auto p = BasicCvaeParams<double>::Init(3, 2, 4, 6);
    TensorD x = RandomD(rng, 8, 3), y = RandomD(rng, 8, 3), eps = RandomD(rng, 8, 2);
    std::vector<TensorD*> params;
    for (auto& [name, t] : p.NamedParameters()) params.push_back(t);
    auto f = [&](TapeD& tape) {
      return ElboLoss(tape, p, tape.Constant(x), tape.Constant(y), eps, 0.5).loss;
    };
    GradCheckInto(c, "CVAE ELBO", GradCheck<double>(f, params, 1e-5));
  }

  const double secs = SecondsSince(t0);
  c.Expect(secs < 60.0, fmt::format("runtime {:.1f} s under a minute", secs));
  c.Note(fmt::format("{:.2f} s", secs));
  return c;
}

CvaeParams RandomCvae(std::size_t d, std::size_t z, std::size_t h, std::uint64_t seed) {
  CvaeParams p = CvaeParams::Init(d, z, h, seed);
  Rng rng(seed + 100);
  p.dec_b1 = SampleGaussian(rng, p.dec_b1.shape());
  p.dec_b2 = SampleGaussian(rng, p.dec_b2.shape());
  return p;
}

Checks Equivalence() {
  Checks c;
  // K = R: the pruned path with every response as a candidate reproduces
  // the plain-loop scorer vote for vote.
  const std::size_t r = 500, d = 32, z = 256, s = 300;
  Rng data(11);
  Tensor responses = SampleGaussian(data, {r, d});
  std::vector<float> lm(r);
  for (float& v : lm) v = -4.0f * data.Uniform();
  CvaeParams p = RandomCvae(d, z, d, 4);
  std::vector<std::size_t> all(r);
  for (std::size_t i = 0; i < r; ++i) all[i] = i;
  std::size_t equal = 0;
  for (int m = 0; m < 100; ++m) {
    Tensor x = SampleGaussian(data, {1, d});
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(m);
    Rng rng(seed);
    VoteTally t = ConstrainedSampleVote(x.data(), responses, lm, all, p, s, rng);
    equal += t.ByResponse() == testing::UnconstrainedVotes(x.data(), responses, lm, p, s, seed);
  }
  c.Expect(equal == 100, fmt::format("K = R tallies equal on {}/100 messages", equal));
  c.Note(fmt::format("K=R tallies {}/100 identical", equal));

  // beta = 1 keeps the matching order.
  Rng rng(11);
  std::size_t kept = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.Index(30);
    Tensor raw = SampleGaussian(rng, {k});
    MatchScores ms = TopK(raw.data(), k);
    MmrResult mr = MmrRerank(ms.softmax, SampleGaussian(rng, {k, 6}), 1.0);
    bool same = true;
    for (std::size_t i = 0; i < k; ++i) same = same && mr.order[i] == i;
    kept += same;
  }
  c.Expect(kept == 100, fmt::format("beta = 1 keeps matching order on {}/100 sets", kept));

  // beta = 0 by hand: a duplicate pair and an orthogonal vector.
  //   novelty = (1 + 0)/2, (1 + 0)/2, (0 + 0)/2 -> the orthogonal one first.
  MmrResult hand = MmrRerank(std::vector<float>{1.0f / 3, 1.0f / 3, 1.0f / 3},
                             Tensor::Matrix({{1, 0}, {1, 0}, {0, 1}}), 0.0);
  c.Expect(hand.novelty == std::vector<double>{0.5, 0.5, 0.0}, "hand novelty values");
  c.Expect(hand.order == std::vector<std::size_t>{2, 0, 1}, "beta = 0 hand ordering");
  return c;
}

std::vector<std::string> RandomTexts(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> words = {"i",    "can",  "can't", "make",  "it",  "thanks", "thx",
                                          "so",   "much", "very",  "not",   "yes", "yeah",   "see",
                                          "you",  "soon", "ok",    "okay",  "no",  "sure",   "never",
                                          "we'll", "go",  "!",     ".",     "?",   ","};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 1 + rng.Index(5);
    for (std::size_t k = 0; k < len; ++k) s += (k ? " " : "") + words[rng.Index(words.size())];
    out.push_back(s);
  }
  return out;
}

Checks LexicalClustering() {
  Checks c;
  const auto tables = LexicalTables::Default();
  auto joined = [&](std::vector<std::string> texts) {
    auto cl = BuildClusters(texts, tables);
    return cl.cluster_of[0] == cl.cluster_of[1];
  };
  c.Expect(joined({"Thanks!", "Thanks."}), "Thanks! / Thanks. join");
  c.Expect(joined({"Thank you so much.", "Thank you very much"}), "one-word edit joins");
  c.Expect(!joined({"I can make it", "I can't make it"}), "negation pair stays split");
  c.Expect(!joined({"I will go", "I will not go"}), "inserted negation stays split");

  auto texts = RandomTexts(1000, 42);
  auto cl = BuildClusters(texts, tables);
  std::vector<int> hits(texts.size(), 0);
  bool consistent = true;
  for (std::size_t k = 0; k < cl.num_clusters(); ++k) {
    consistent = consistent && !cl.members[k].empty();
    for (std::size_t m : cl.members[k]) {
      ++hits[m];
      consistent = consistent && cl.cluster_of[m] == static_cast<std::int32_t>(k);
    }
  }
  c.Expect(consistent && std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }),
           "every text in exactly one cluster");
  std::size_t whole = 0;
  for (const auto& mem : cl.members) {
    std::vector<std::string> sub;
    for (std::size_t m : mem) sub.push_back(texts[m]);
    whole += BuildClusters(sub, tables).num_clusters() == 1;
  }
  c.Expect(whole == cl.num_clusters(), "reclustering a cluster keeps it whole");
  auto again = BuildClusters(texts, tables);
  c.Expect(again.cluster_of == cl.cluster_of, "reclustering is idempotent");
  // Same partition under a shuffled input order.
  Rng rng(1);
  std::vector<std::size_t> perm(texts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::string> shuffled;
  for (std::size_t i : perm) shuffled.push_back(texts[i]);
  auto sc = BuildClusters(shuffled, tables);
  std::map<std::int32_t, std::int32_t> mapping;
  bool same = sc.num_clusters() == cl.num_clusters();
  for (std::size_t i = 0; i < perm.size() && same; ++i) {
    auto [it, fresh] = mapping.emplace(sc.cluster_of[i], cl.cluster_of[perm[i]]);
    same = it->second == cl.cluster_of[perm[i]];
  }
  c.Expect(same, "partition independent of input order");
  c.Note(fmt::format("{} clusters over 1000 texts", cl.num_clusters()));
  return c;
}

fs::path SourceDir() { return SMARTREPLY_SOURCE_DIR; }

// The shipped desk configuration; R, K, z and s are checked, not assumed.
SystemConfig DeskConfig() { return SystemConfig::Load(SourceDir() / "configs" / "desk.json"); }

// The M-CVAE variant compared against the baseline; see the README.
constexpr const char* kMcvaeRanker = "mcvae";

Checks EndToEnd() {
  Checks c;
  const SystemConfig desk = DeskConfig();
  const SyntheticConfig synthetic = SyntheticConfig::Default();
  c.Expect(desk.pipeline.k == 15 && desk.pipeline.samples == 300 && desk.cvae.z_dim == 256,
           "desk config uses K = 15, s = 300, z = 256");
  c.Expect(synthetic.intents.size() >= 8, "at least 8 message intents");
  // Only the first two rows are gated; the rest are printed for context.
  const auto specs = ParseRankerList(std::string("matching-nolc,") + kMcvaeRanker + ",matching,mmr,mcvae-mmr");

  double base_dup = 0, mcvae_dup = 0, base_def = 0, mcvae_def = 0;
  std::vector<std::string> per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t0 = Clock::now();
    SystemConfig config = desk.WithSeed(seed);
    TrainedSystem sys = TrainSystem(config, synthetic, LexicalTables::Default());
    auto messages = SelectEvalMessages(sys.split.validation, config.eval_messages);
    EvalReport r = Evaluate(sys.models, messages, synthetic.Compatibility(), specs, config.pipeline);
    const double secs = SecondsSince(t0);
    c.Expect(sys.models.artifact.texts.size() == 500,
             fmt::format("seed {}: R = {}", seed, sys.models.artifact.texts.size()));
    c.Expect(secs < 30 * 60, fmt::format("seed {}: pipeline {:.0f} s under 30 min", seed, secs));
    const EvalRow& b = r.Row("matching-nolc");
    const EvalRow& m = r.Row(kMcvaeRanker);
    base_dup += b.duplicate_rate / 3, mcvae_dup += m.duplicate_rate / 3;
    base_def += b.defect_rate / 3, mcvae_def += m.defect_rate / 3;
    per_seed.push_back(fmt::format("seed {}: dup {:.3f}->{:.3f} def {:.3f}->{:.3f} ({:.0f} s)", seed,
                                   b.duplicate_rate, m.duplicate_rate, b.defect_rate, m.defect_rate,
                                   secs));
    std::cout << "    " << per_seed.back() << "\n     ";
    for (const auto& row : r.rows) {
      std::cout << fmt::format(" {} {:.3f}/{:.3f}", row.ranker, row.duplicate_rate, row.defect_rate);
    }
    std::cout << std::endl;
  }
  const double change = (mcvae_dup - base_dup) / base_dup;
  const double delta = mcvae_def - base_def;
  c.Expect(change <= -0.30, fmt::format("duplicate proxy change {:+.1f}% <= -30%", 100 * change));
  c.Expect(delta <= 0.05, fmt::format("defect proxy delta {:+.1f} pp <= +5 pp", 100 * delta));
  c.Note(fmt::format("{} vs matching-nolc over 3 seeds: duplicates {:.3f} -> {:.3f} ({:+.1f}%), "
                     "defects {:.3f} -> {:.3f} ({:+.1f} pp)",
                     kMcvaeRanker, base_dup, mcvae_dup, 100 * change, base_def, mcvae_def, 100 * delta));
  return c;
}

// Desk-shaped models for timing: latency depends on R, K, s, d, z and the
// hidden width, not on how well the weights were trained.
SuggestionModels DeskShapedModels(const SystemConfig& config) {
  const SyntheticConfig synthetic = SyntheticConfig::Default();
  auto pairs = GenerateSynthetic(synthetic, config.pairs, config.seed);
  SuggestionModels m;
  m.vocab = BuildVocabulary(pairs, config.min_frequency);
  EncoderConfig ec = config.encoder;
  ec.vocab_size = m.vocab.size();
  m.encoder = DualEncoder::Init(ec, config.matching.seed);
  NgramLm lm = TrainLmStage(config, pairs);
  m.artifact = BuildResponseSet(pairs, m.vocab, m.encoder, lm, LexicalTables::Default(), config.response_set);
  const std::size_t d = m.artifact.phi_y.cols();
  m.cvae = CvaeParams::Init(d, config.cvae.z_dim, config.cvae.hidden ? config.cvae.hidden : d, config.cvae.seed);
  return m;
}

Checks Latency() {
  Checks c;
  const SystemConfig config = DeskConfig();
  SuggestionModels models = DeskShapedModels(config);
  const std::size_t r = models.artifact.texts.size();
  c.Expect(r == 500, fmt::format("R = {}", r));
  std::vector<std::string> messages;
  const SyntheticConfig synthetic = SyntheticConfig::Default();
  for (const auto& p : GenerateSynthetic(synthetic, 200, 99)) messages.push_back(p.message_text);
  BenchConfig bench;
  bench.queries = 500;
  bench.warmup = 50;
  BenchReport rep = RunBench(models, messages, config.pipeline, bench);
  std::cout << rep.ToTable();
  c.Expect(std::abs(rep.cost.scoring_ratio - 500.0 / 15.0) < 1e-9,
           fmt::format("analytic R/K = {:.1f}", rep.cost.scoring_ratio));
  c.Expect(rep.vote_speedup >= 5.0,
           fmt::format("constrained vote stage {:.1f}x faster than unconstrained", rep.vote_speedup));
  const double matching = rep.Find("matching")->total_us.p50;
  const double mcvae = rep.Find("mcvae")->total_us.p50;
  c.Expect(matching < mcvae, fmt::format("matching p50 {:.0f} us < mcvae p50 {:.0f} us", matching, mcvae));
  c.Note(fmt::format("vote stage {:.1f}x (analytic R/K {:.1f}), sample+vote {:.2f}x (analytic {:.2f}), "
                     "p50 matching {:.0f} us / mcvae {:.0f} us",
                     rep.vote_speedup, rep.cost.scoring_ratio, rep.sample_vote_speedup,
                     rep.cost.total_ratio, matching, mcvae));
  return c;
}

fs::path ScratchDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / fmt::format("smartreply_accept_{}_{}", name, ::getpid());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Checks Persistence() {
  Checks c;
  fs::path dir = ScratchDir("persist");
  auto pairs = testing::TwoIntentCorpus(600, 8);
  Vocabulary vocab = Vocabulary::Build(pairs, 1);
  EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.embedding_dim = 16;
  ec.hidden = 12;
  DualEncoder enc = DualEncoder::Init(ec, 5);
  std::vector<Tokens> replies;
  for (const auto& p : pairs) replies.push_back(p.reply);
  NgramLm lm = NgramLm::Train(replies);
  const ResponseSetOptions set_config{150, 60};
  ResponseSetArtifact artifact = BuildResponseSet(pairs, vocab, enc, lm, LexicalTables::Default(), set_config);
  CvaeParams cvae = RandomCvae(artifact.phi_y.cols(), 8, 16, 2);

  // Round trip: load then save reproduces every file byte for byte, and
  // the loaded tensors equal the originals.
  SaveMatching(dir / kMatchingFile, vocab, enc);
  SaveLm(dir / kLmFile, lm);
  SaveCvae(dir / kCvaeFile, cvae, CvaeConfig{}, "0badf00d");
  SaveResponseSet(dir / kResponseSetDir, artifact);
  Vocabulary v2;
  DualEncoder e2;
  LoadMatching(dir / kMatchingFile, &v2, &e2);
  bool params_equal = true;
  auto pa = enc.NamedParameters(), pb = e2.NamedParameters();
  for (std::size_t i = 0; i < pa.size(); ++i) params_equal = params_equal && pa[i].second->vec() == pb[i].second->vec();
  c.Expect(params_equal && pa.size() == pb.size(), "encoder parameters round-trip exactly");
  ResponseSetArtifact a2 = LoadResponseSet(dir / kResponseSetDir);
  c.Expect(a2.phi_y.vec() == artifact.phi_y.vec() && a2.texts == artifact.texts &&
               a2.cluster_ids == artifact.cluster_ids && a2.lm_scores == artifact.lm_scores,
           "response set round-trips exactly");
  fs::path again = dir / "again";
  fs::create_directories(again);
  SaveMatching(again / kMatchingFile, v2, e2);
  SaveLm(again / kLmFile, LoadLm(dir / kLmFile));
  std::string hash;
  CvaeParams c2 = LoadCvae(dir / kCvaeFile, &hash);
  SaveCvae(again / kCvaeFile, c2, CvaeConfig{}, hash);
  SaveResponseSet(again / kResponseSetDir, a2);
  for (fs::path f : {fs::path(kMatchingFile), fs::path(kLmFile), fs::path(kCvaeFile),
                     fs::path(kResponseSetDir) / kResponseSetFile}) {
    c.Expect(ReadFileBytes(dir / f) == ReadFileBytes(again / f), "re-saved " + f.string() + " is identical");
  }

  // Corruption: every single-byte flip of the CVAE file is refused, and a
  // sample of flips across the larger files.
  auto check_flips = [&](const fs::path& file, std::size_t stride, const std::function<void()>& load) {
    const auto bytes = ReadFileBytes(file);
    std::size_t caught = 0, tried = 0;
    for (std::size_t i = 0; i < bytes.size(); i += stride, ++tried) {
      auto bad = bytes;
      bad[i] ^= 0x5a;
      WriteFileBytes(file, bad);
      try {
        load();
      } catch (const IoError&) {
        ++caught;
      }
    }
    WriteFileBytes(file, bytes);
    c.Expect(caught == tried, fmt::format("{}: {}/{} corrupted copies rejected", file.filename().string(), caught, tried));
  };
  check_flips(dir / kCvaeFile, 1, [&] { LoadCvae(dir / kCvaeFile); });
  check_flips(dir / kMatchingFile, 97, [&] {
    Vocabulary v;
    DualEncoder e;
    LoadMatching(dir / kMatchingFile, &v, &e);
  });
  check_flips(dir / kResponseSetDir / kResponseSetFile, 31, [&] { LoadResponseSet(dir / kResponseSetDir); });
  {
    auto bytes = ReadFileBytes(dir / kLmFile);
    bytes.resize(bytes.size() / 2);
    WriteFileBytes(dir / kLmFile, bytes);
    bool caught = false;
    try {
      LoadLm(dir / kLmFile);
    } catch (const IoError&) {
      caught = true;
    }
    c.Expect(caught, "truncated file rejected");
  }

  // Rebuilding the response set from the same inputs is byte-identical.
  fs::path rebuilt = dir / "rebuilt";
  SaveResponseSet(rebuilt, BuildResponseSet(pairs, vocab, enc, lm, LexicalTables::Default(), set_config));
  for (const char* f : {kResponseSetFile, kResponseManifest}) {
    c.Expect(ReadFileBytes(dir / kResponseSetDir / f) == ReadFileBytes(rebuilt / f),
             std::string("rebuilt ") + f + " is identical");
  }
  fs::remove_all(dir);
  return c;
}

Checks Training() {
  Checks c;
  {
    auto pairs = testing::TwoIntentCorpus(3000, 7);
    Split split = SplitPairs(pairs, 0.1, 7);
    Vocabulary v = Vocabulary::Build(split.train, 1);
    EncoderConfig ec;
    ec.vocab_size = v.size();
    ec.embedding_dim = 32;
    ec.hidden = 32;
    MatchingConfig mc;
    mc.batch_size = 32;
    mc.epochs = 4;
    TrainingReport rep;
    TrainMatching(DualEncoder::Init(ec, 3), EncodePairs(v, split.train), EncodePairs(v, split.validation), mc, &rep);
    const double v0 = rep.epochs.front().validation_loss;
    c.Expect(rep.best_validation_loss <= 0.5 * v0,
             fmt::format("matching validation loss {:.3f} -> {:.3f}", v0, rep.best_validation_loss));
    c.Note(fmt::format("matching validation loss {:.3f} -> {:.3f} ({:.0f}% lower)", v0,
                       rep.best_validation_loss, 100 * (1 - rep.best_validation_loss / v0)));
  }

  auto pairs = testing::TwoIntentCorpus(640, 11);
  Vocabulary vocab = Vocabulary::Build(pairs, 1);
  EncoderConfig ec;
  ec.kind = EncoderKind::kFeedForward;
  ec.vocab_size = vocab.size();
  ec.embedding_dim = 8;
  ec.hidden = 8;
  ec.ff_output = 8;
  DualEncoder base = DualEncoder::Init(ec, 3);
  std::span<const MessageReplyPair> all(pairs);
  EncodedPairs train = EncodePairs(vocab, all.subspan(0, 512));
  EncodedPairs val = EncodePairs(vocab, all.subspan(512));
  CvaeConfig cc;
  cc.z_dim = 4;
  cc.hidden = 16;
  cc.epochs = 4;
  cc.batch_size = 32;
  cc.seed = 5;

  const std::vector<std::uint8_t> before = MatchingToContainer(vocab, base).Serialize();
  TrainCvae(base, train, val, cc);
  c.Expect(MatchingToContainer(vocab, base).Serialize() == before, "encoder bytes unchanged by CVAE training");

  cc.epochs = 20;
  cc.kl_weight = 1000.0f;
  CvaeTrainingReport forced;
  TrainCvae(base, train, val, cc, &forced);
  c.Expect(forced.posterior_collapse, "collapse detector fires at kl_weight 1000");
  cc.kl_weight = 0.0f;
  CvaeTrainingReport free_run;
  TrainCvae(base, train, val, cc, &free_run);
  c.Expect(free_run.epochs.back().train.kl > 10 * kCollapseKl, "latent in use without the KL term");
  c.Note(fmt::format("final KL {:.2e} forced vs {:.2f} free", forced.epochs.back().train.kl,
                     free_run.epochs.back().train.kl));
  return c;
}

struct Criterion {
  const char* name;
  const char* title;
  Checks (*run)();
};

const std::vector<Criterion>& Criteria() {
  static const std::vector<Criterion> all = {
      {"math", "math kernels", MathKernels},
      {"equivalence", "equivalence oracles", Equivalence},
      {"lc", "lexical clustering", LexicalClustering},
      {"e2e", "end-to-end desk experiment", EndToEnd},
      {"latency", "latency", Latency},
      {"persistence", "persistence", Persistence},
      {"training", "training", Training},
  };
  return all;
}

}  // namespace
}  // namespace smartreply

int main(int argc, char** argv) {
  using namespace smartreply;
  spdlog::set_level(spdlog::level::warn);
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(Criteria().begin(), Criteria().end(), [&](const Criterion& c) { return w == c.name; })) {
      std::cerr << "unknown criterion '" << w << "'; known:";
      for (const auto& c : Criteria()) std::cerr << " " << c.name;
      std::cerr << "\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& crit : Criteria()) {
    if (!wanted.empty() && !wanted.count(crit.name)) continue;
    const auto t0 = Clock::now();
    Checks result;
    try {
      result = crit.run();
    } catch (const std::exception& e) {
      result.Expect(false, std::string("exception: ") + e.what());
    }
    failed += !result.ok();
    std::cout << (result.ok() ? "PASS " : "FAIL ") << crit.title << " (" << fmt::format("{:.1f}", SecondsSince(t0))
              << " s): " << result.Summary() << std::endl;
  }
  return failed ? 1 : 0;
}
