#include "trajlm/backbone.hpp"

#include <cmath>

#include "trajlm/errors.hpp"
#include "trajlm/rng.hpp"
#include "trajlm/scene.hpp"

namespace trajlm {

namespace {

Tensor seeded_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

/// Causal additive mask: position i may attend to j <= i only.
Tensor causal_mask(std::size_t n) {
  Tensor mask({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) mask(i, j) = -1e30;
  return mask;
}

/// Multi-head causal self-attention on an S x d sequence.
ad::Value self_attention(ad::Graph& g, ad::Value x, ad::Value wq, ad::Value wk, ad::Value wv,
                         ad::Value wo, std::size_t n_heads, const Tensor& mask) {
  const std::size_t d = g.val(x).cols();
  const std::size_t dh = d / n_heads;
  ad::Value q = ad::matmul(x, wq);
  ad::Value k = ad::matmul(x, wk);
  ad::Value v = ad::matmul(x, wv);
  ad::Value heads;
  for (std::size_t h = 0; h < n_heads; ++h) {
    ad::Value qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    ad::Value kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    ad::Value vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    ad::Value logits =
        ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    ad::Value attn = ad::softmax_rows(logits, &mask);
    ad::Value out = ad::matmul(attn, vh);
    heads = h == 0 ? out : ad::concat_cols(heads, out);
  }
  return ad::matmul(heads, wo);
}

}  // namespace

ToyBackbone::ToyBackbone(BackboneSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.d_llm % spec_.n_heads != 0) {
    throw ConfigError("backbone width " + std::to_string(spec_.d_llm) +
                      " not divisible by head count " + std::to_string(spec_.n_heads));
  }
  Rng rng(seed);
  const std::size_t d = spec_.d_llm;
  embed_ = seeded_matrix(spec_.vocab, d, 0.1, rng);
  pos_ = seeded_matrix(spec_.max_seq, d, 0.1, rng);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    Block b;
    b.ln1_g = Tensor::full({1, d}, 1.0);
    b.ln1_b = Tensor({1, d});
    b.wq = seeded_matrix(d, d, w_scale, rng);
    b.wk = seeded_matrix(d, d, w_scale, rng);
    b.wv = seeded_matrix(d, d, w_scale, rng);
    b.wo = seeded_matrix(d, d, w_scale, rng);
    b.ln2_g = Tensor::full({1, d}, 1.0);
    b.ln2_b = Tensor({1, d});
    b.mlp_w1 = seeded_matrix(d, 4 * d, w_scale, rng);
    b.mlp_b1 = Tensor({1, 4 * d});
    b.mlp_w2 = seeded_matrix(4 * d, d, 0.5 / std::sqrt(static_cast<double>(d)), rng);
    b.mlp_b2 = Tensor({1, d});
    blocks_.push_back(std::move(b));
  }
  lnf_g = Tensor::full({1, d}, 1.0);
  lnf_b = Tensor({1, d});
}

std::vector<std::uint32_t> ToyBackbone::tokenize(const std::string& text) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<std::uint32_t>(c) % spec_.vocab);
  return ids;
}

ad::Value ToyBackbone::forward(ad::Graph& g, ad::Value embedded) const {
  const Tensor& in = g.val(embedded);
  const std::size_t s = in.rows();
  if (in.cols() != spec_.d_llm) {
    throw ConfigError("backbone forward: input width " + std::to_string(in.cols()) +
                      ", expected " + std::to_string(spec_.d_llm));
  }
  if (s > spec_.max_seq) {
    throw ConfigError("backbone forward: sequence length " + std::to_string(s) +
                      " exceeds maximum " + std::to_string(spec_.max_seq));
  }

  // Add positional rows; all backbone parameters enter the graph frozen.
  Tensor pos_slice({s, spec_.d_llm});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < spec_.d_llm; ++j) pos_slice(i, j) = pos_(i, j);
  ad::Value x = ad::add(embedded, g.input(std::move(pos_slice)));

  const Tensor mask = causal_mask(s);
  for (const Block& b : blocks_) {
    ad::Value n1 = ad::layer_norm_rows(x, g.input(b.ln1_g), g.input(b.ln1_b));
    ad::Value attn = self_attention(g, n1, g.input(b.wq), g.input(b.wk), g.input(b.wv),
                                    g.input(b.wo), spec_.n_heads, mask);
    x = ad::add(x, attn);
    ad::Value n2 = ad::layer_norm_rows(x, g.input(b.ln2_g), g.input(b.ln2_b));
    ad::Value hidden = ad::gelu(ad::add_rowvec(ad::matmul(n2, g.input(b.mlp_w1)), g.input(b.mlp_b1)));
    ad::Value mlp = ad::add_rowvec(ad::matmul(hidden, g.input(b.mlp_w2)), g.input(b.mlp_b2));
    x = ad::add(x, mlp);
  }
  return ad::layer_norm_rows(x, g.input(lnf_g), g.input(lnf_b));
}

std::uint64_t ToyBackbone::parameter_checksum() const {
  std::uint64_t h = fnv1a64(nullptr, 0);
  auto mix = [&h](const Tensor& t) { h = fnv1a64(t.data(), t.numel() * sizeof(double), h); };
  mix(embed_);
  mix(pos_);
  for (const Block& b : blocks_) {
    mix(b.ln1_g);
    mix(b.ln1_b);
    mix(b.wq);
    mix(b.wk);
    mix(b.wv);
    mix(b.wo);
    mix(b.ln2_g);
    mix(b.ln2_b);
    mix(b.mlp_w1);
    mix(b.mlp_b1);
    mix(b.mlp_w2);
    mix(b.mlp_b2);
  }
  mix(lnf_g);
  mix(lnf_b);
  return h;
}

Tensor embed_tokens(const FrozenBackbone& backbone, const std::vector<std::uint32_t>& ids) {
  const Tensor& table = backbone.vocab_embeddings();
  const std::size_t d = backbone.spec().d_llm;
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) throw DataError("token id out of vocabulary range");
    for (std::size_t j = 0; j < d; ++j) out(i, j) = table(ids[i], j);
  }
  return out;
}

Tensor embed_prompt(const FrozenBackbone& backbone, const std::string& text) {
  const auto ids = backbone.tokenize(text);
  const std::size_t allowed = backbone.spec().max_seq - kEncodedSteps;
  if (ids.size() > allowed) {
    throw ConfigError("prompt is " + std::to_string(ids.size()) + " tokens, limit is " +
                      std::to_string(allowed) + " after reserving scene positions");
  }
  if (ids.empty()) return Tensor({0, backbone.spec().d_llm});
  return embed_tokens(backbone, ids);
}

std::unique_ptr<FrozenBackbone> make_backbone(const std::string& name, std::uint64_t seed,
                                              const BackboneSpec* override_spec) {
  if (name == "toy" || name == "toy-v1") {
    BackboneSpec spec = override_spec ? *override_spec : BackboneSpec{};
    spec.identity = "toy-v1";
    return std::make_unique<ToyBackbone>(spec, seed);
  }
  throw ConfigError("unknown backbone '" + name + "' (available: toy)");
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace trajlm
