#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "trajlm/graph.hpp"
#include "trajlm/tensor.hpp"

namespace trajlm {

struct BackboneSpec {
  std::size_t d_llm = 64;
  std::size_t vocab = 256;
  std::size_t layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_seq = 128;
  std::string identity = "toy-v1";
};

/// A frozen sequence model: embedding lookup, causal forward pass, read-only
/// vocabulary table. Implementations must never mutate parameters after
/// construction.
class FrozenBackbone {
public:
  virtual ~FrozenBackbone() = default;
  virtual const BackboneSpec& spec() const = 0;
  virtual const Tensor& vocab_embeddings() const = 0;
  virtual std::vector<std::uint32_t> tokenize(const std::string& text) const = 0;
  /// Hidden states for an embedded sequence, one row per input position.
  virtual ad::Value forward(ad::Graph& g, ad::Value embedded) const = 0;
  /// Stable digest over all parameters in a canonical order.
  virtual std::uint64_t parameter_checksum() const = 0;
};

/// Deterministic stand-in: byte-level tokenizer, seeded random parameters,
/// pre-norm self-attention blocks with a closing layer norm.
class ToyBackbone : public FrozenBackbone {
public:
  ToyBackbone(BackboneSpec spec, std::uint64_t seed);

  const BackboneSpec& spec() const override { return spec_; }
  const Tensor& vocab_embeddings() const override { return embed_; }
  std::vector<std::uint32_t> tokenize(const std::string& text) const override;
  ad::Value forward(ad::Graph& g, ad::Value embedded) const override;
  std::uint64_t parameter_checksum() const override;

private:
  struct Block {
    Tensor ln1_g, ln1_b;
    Tensor wq, wk, wv, wo;
    Tensor ln2_g, ln2_b;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };

  BackboneSpec spec_;
  Tensor embed_;     // V x d_llm
  Tensor pos_;       // max_seq x d_llm
  std::vector<Block> blocks_;
  Tensor lnf_g, lnf_b;
};

/// Token ids to embedding rows (no positions; the forward pass owns those).
Tensor embed_tokens(const FrozenBackbone& backbone, const std::vector<std::uint32_t>& ids);

/// Prompt text to embeddings, enforcing the budget left after the scene
/// tokens: length <= max_seq - T.
Tensor embed_prompt(const FrozenBackbone& backbone, const std::string& text);

/// Backbone registry: "toy" (alias "toy-v1") with the given seed. External
/// models would plug in here behind the same interface.
std::unique_ptr<FrozenBackbone> make_backbone(const std::string& name, std::uint64_t seed,
                                              const BackboneSpec* override_spec = nullptr);

/// FNV-1a over raw tensor bytes; backbone checksums build on this.
std::uint64_t fnv1a64(const void* data, std::size_t bytes,
                      std::uint64_t seed = 14695981039346656037ULL);

}  // namespace trajlm
