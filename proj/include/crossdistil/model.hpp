#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crossdistil/data.hpp"
#include "crossdistil/numgrad.hpp"

namespace crossdistil {

using numgrad::Tensor;

enum class BackboneKind { SharedBottom, GatedExperts };

// Network shape. ReLU follows every hidden layer; towers end in a linear
// unit emitting one logit.
struct ModelConfig {
  std::size_t embedding_dim = 8;
  BackboneKind backbone = BackboneKind::SharedBottom;
  // Trunk widths (shared_bottom) or per-expert widths (gated_experts).
  std::vector<std::size_t> hidden{64, 32};
  std::size_t shared_experts = 2;
  std::vector<std::size_t> tower_hidden{16};
  double init_scale = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

enum class Head { A = 0, B = 1, APlus = 2, BPlus = 3 };

inline constexpr std::array<Head, 4> kAllHeads{Head::A, Head::B, Head::APlus, Head::BPlus};

const char* head_name(Head h);
inline Task head_task(Head h) { return (h == Head::A || h == Head::APlus) ? Task::A : Task::B; }

/// Row-major batch of field ids (rows x fields).
struct IdBatch {
  std::size_t rows = 0;
  std::size_t fields = 0;
  std::vector<std::size_t> ids;

  static IdBatch from(const Dataset& ds, std::span<const std::size_t> indices);
  std::vector<std::size_t> column(std::size_t field) const;
};

/// Logits of the four heads for one batch, each rows x 1.
struct HeadLogits {
  Tensor r_a, r_b, r_a_plus, r_b_plus;

  const Tensor& operator[](Head h) const;
  HeadLogits slice(std::size_t start, std::size_t count) const;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

/// Shared embeddings and backbone with four towers. Teacher towers (A+, B+)
/// read the same backbone output as their task's student tower.
class MultiTaskNet {
 public:
  MultiTaskNet() = default;
  MultiTaskNet(const ModelConfig& cfg, std::vector<std::size_t> vocab_sizes,
               std::vector<std::string> field_names = {});

  HeadLogits forward(const IdBatch& batch) const;

  // Softmax mixture weights of a task's gate (gated_experts only).
  Tensor gate_weights(const IdBatch& batch, Task task) const;

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::size_t>& vocab_sizes() const { return vocab_; }
  const std::vector<std::string>& field_names() const { return fields_; }

  // Every trainable tensor with a stable name, in a fixed order.
  const std::vector<std::pair<std::string, Tensor>>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  std::vector<Tensor> tower_parameters(Head h) const;
  std::vector<Tensor> shared_parameters() const;  // embeddings and backbone
  std::size_t parameter_count() const;
  void zero_grad();

  // Independent copy with identical values.
  MultiTaskNet clone() const;

 private:
  void register_linear(const std::string& prefix, Linear& l, std::size_t in, std::size_t out,
                       Rng& rng, bool zero_init = false);
  std::vector<Linear> build_mlp(const std::string& prefix, std::size_t in,
                                const std::vector<std::size_t>& widths, Rng& rng);
  Tensor embed(const IdBatch& batch) const;

  ModelConfig cfg_;
  std::vector<std::size_t> vocab_;
  std::vector<std::string> fields_;

  std::vector<Tensor> embeddings_;
  std::vector<Linear> trunk_;
  std::vector<std::vector<Linear>> experts_;  // shared experts, then private A, private B
  std::array<Linear, 2> gates_;
  std::array<std::vector<Linear>, 4> towers_;

  std::vector<std::pair<std::string, Tensor>> params_;
};

// Applies the layers with ReLU after each; `relu_last` controls the final one.
Tensor apply_mlp(const std::vector<Linear>& layers, Tensor x, bool relu_last);

}  // namespace crossdistil
