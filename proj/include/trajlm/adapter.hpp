#pragma once

#include "trajlm/graph.hpp"
#include "trajlm/rng.hpp"
#include "trajlm/tensor.hpp"

namespace trajlm {

/// Maps scene features into the backbone's embedding space as learned
/// combinations of frozen vocabulary embeddings.
struct AdapterParams {
  Tensor combo;   // P x V, rows mix vocabulary embeddings into prototypes
  Tensor wq;      // d_scene x d_adapter
  Tensor wk, wv;  // d_llm x d_adapter
  Tensor wo;      // d_adapter x d_llm

  static AdapterParams init(std::size_t prototypes, std::size_t vocab, std::size_t d_scene,
                            std::size_t d_adapter, std::size_t d_llm, Rng& rng);
};

struct AdapterHandles {
  ad::Value combo, wq, wk, wv, wo;
};
AdapterHandles register_adapter(ad::Graph& g, const AdapterParams& params, bool trainable);

/// Prototype bank: combo x vocab_table, shape P x d_llm. The vocabulary table
/// itself is read-only input.
ad::Value build_prototypes(ad::Graph& g, const AdapterHandles& h, ad::Value vocab_embeddings);

/// Cross-attention of scene features over the prototype bank, projected to
/// the backbone width. Row t of the output depends only on row t of the input.
ad::Value reprogram(ad::Graph& g, const AdapterHandles& h, ad::Value scene_features,
                    ad::Value prototypes);

}  // namespace trajlm
