#include "crossdistil/model.hpp"

#include <cmath>

#include "crossdistil/errors.hpp"

namespace crossdistil {

namespace ng = numgrad;

void ModelConfig::validate() const {
  if (embedding_dim == 0) throw ConfigError("model: embedding_dim must be >= 1");
  if (hidden.empty()) throw ConfigError("model: at least one hidden layer is required");
  for (auto w : hidden) {
    if (w == 0) throw ConfigError("model: hidden widths must be >= 1");
  }
  for (auto w : tower_hidden) {
    if (w == 0) throw ConfigError("model: tower widths must be >= 1");
  }
  if (backbone == BackboneKind::GatedExperts && shared_experts == 0) {
    throw ConfigError("model: gated_experts needs shared_experts >= 1");
  }
  if (!(init_scale > 0.0)) throw ConfigError("model: init_scale must be positive");
}

const char* head_name(Head h) {
  switch (h) {
    case Head::A: return "a";
    case Head::B: return "b";
    case Head::APlus: return "a_plus";
    case Head::BPlus: return "b_plus";
  }
  return "?";
}

IdBatch IdBatch::from(const Dataset& ds, std::span<const std::size_t> indices) {
  IdBatch b;
  b.rows = indices.size();
  b.fields = ds.field_count();
  b.ids.reserve(b.rows * b.fields);
  for (std::size_t i : indices) {
    const auto& s = ds[i];
    b.ids.insert(b.ids.end(), s.field_ids.begin(), s.field_ids.end());
  }
  return b;
}

std::vector<std::size_t> IdBatch::column(std::size_t field) const {
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = ids[r * fields + field];
  return out;
}

const Tensor& HeadLogits::operator[](Head h) const {
  switch (h) {
    case Head::A: return r_a;
    case Head::B: return r_b;
    case Head::APlus: return r_a_plus;
    case Head::BPlus: return r_b_plus;
  }
  throw UsageError("invalid head");
}

HeadLogits HeadLogits::slice(std::size_t start, std::size_t count) const {
  return {ng::slice_rows(r_a, start, count), ng::slice_rows(r_b, start, count),
          ng::slice_rows(r_a_plus, start, count), ng::slice_rows(r_b_plus, start, count)};
}

Tensor apply_mlp(const std::vector<Linear>& layers, Tensor x, bool relu_last) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = ng::add(ng::matmul(x, layers[i].weight), layers[i].bias);
    if (i + 1 < layers.size() || relu_last) x = ng::relu(x);
  }
  return x;
}

// ---- construction ----

void MultiTaskNet::register_linear(const std::string& prefix, Linear& l, std::size_t in,
                                   std::size_t out, Rng& rng, bool zero_init) {
  const double s = cfg_.init_scale / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out, 0.0), b(out, 0.0);
  if (!zero_init) {
    for (auto& v : w) v = rng.uniform(-s, s);
    for (auto& v : b) v = rng.uniform(-s, s);
  }
  l.weight = Tensor(in, out, std::move(w), true);
  l.bias = Tensor(1, out, std::move(b), true);
  params_.emplace_back(prefix + ".w", l.weight);
  params_.emplace_back(prefix + ".b", l.bias);
}

std::vector<Linear> MultiTaskNet::build_mlp(const std::string& prefix, std::size_t in,
                                            const std::vector<std::size_t>& widths, Rng& rng) {
  std::vector<Linear> layers(widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) {
    register_linear(prefix + "." + std::to_string(i), layers[i], in, widths[i], rng);
    in = widths[i];
  }
  return layers;
}

MultiTaskNet::MultiTaskNet(const ModelConfig& cfg, std::vector<std::size_t> vocab_sizes,
                           std::vector<std::string> field_names)
    : cfg_(cfg), vocab_(std::move(vocab_sizes)), fields_(std::move(field_names)) {
  cfg_.validate();
  if (vocab_.empty()) throw ConfigError("model: at least one field is required");
  if (fields_.empty()) {
    for (std::size_t f = 0; f < vocab_.size(); ++f) fields_.push_back("f" + std::to_string(f));
  }
  if (fields_.size() != vocab_.size()) throw ConfigError("model: field names / vocab mismatch");

  Rng rng(cfg_.seed);
  const std::size_t d = cfg_.embedding_dim;
  const double emb_scale = cfg_.init_scale / std::sqrt(static_cast<double>(d));
  for (std::size_t f = 0; f < vocab_.size(); ++f) {
    if (vocab_[f] == 0) throw ConfigError("model: vocabulary sizes must be >= 1");
    std::vector<double> v(vocab_[f] * d);
    for (auto& x : v) x = rng.uniform(-emb_scale, emb_scale);
    embeddings_.emplace_back(vocab_[f], d, std::move(v), true);
    params_.emplace_back("emb." + fields_[f], embeddings_.back());
  }

  const std::size_t in = vocab_.size() * d;
  const std::size_t width = cfg_.hidden.back();
  if (cfg_.backbone == BackboneKind::SharedBottom) {
    trunk_ = build_mlp("trunk", in, cfg_.hidden, rng);
  } else {
    for (std::size_t e = 0; e < cfg_.shared_experts; ++e) {
      experts_.push_back(build_mlp("expert.s" + std::to_string(e), in, cfg_.hidden, rng));
    }
    experts_.push_back(build_mlp("expert.a", in, cfg_.hidden, rng));
    experts_.push_back(build_mlp("expert.b", in, cfg_.hidden, rng));
    // Zero gates give a uniform mixture at init.
    register_linear("gate.a", gates_[0], in, cfg_.shared_experts + 1, rng, true);
    register_linear("gate.b", gates_[1], in, cfg_.shared_experts + 1, rng, true);
  }

  for (Head h : kAllHeads) {
    auto widths = cfg_.tower_hidden;
    widths.push_back(1);
    towers_[static_cast<int>(h)] = build_mlp(std::string("tower.") + head_name(h), width, widths, rng);
  }
}

MultiTaskNet MultiTaskNet::clone() const {
  MultiTaskNet out(cfg_, vocab_, fields_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].second.values();
    auto dst = out.params_[i].second.mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

// ---- accessors ----

std::vector<Tensor> MultiTaskNet::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::vector<Tensor> MultiTaskNet::tower_parameters(Head h) const {
  std::vector<Tensor> out;
  for (const auto& l : towers_[static_cast<int>(h)]) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

std::vector<Tensor> MultiTaskNet::shared_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_) {
    if (!name.starts_with("tower.")) out.push_back(t);
  }
  return out;
}

std::size_t MultiTaskNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void MultiTaskNet::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

// ---- forward ----

Tensor MultiTaskNet::embed(const IdBatch& batch) const {
  if (batch.fields != vocab_.size()) {
    throw ConfigError("forward: batch has " + std::to_string(batch.fields) +
                      " fields, model expects " + std::to_string(vocab_.size()));
  }
  std::vector<Tensor> parts;
  parts.reserve(batch.fields);
  for (std::size_t f = 0; f < batch.fields; ++f) {
    const auto col = batch.column(f);
    for (std::size_t id : col) {
      if (id >= vocab_[f]) {
        throw ConfigError("forward: field '" + fields_[f] + "' id " + std::to_string(id) +
                          " out of range (vocabulary size " + std::to_string(vocab_[f]) + ")");
      }
    }
    parts.push_back(ng::row_gather(embeddings_[f], col));
  }
  return ng::concat_cols(parts);
}

Tensor MultiTaskNet::gate_weights(const IdBatch& batch, Task task) const {
  if (cfg_.backbone != BackboneKind::GatedExperts) {
    throw UsageError("gate_weights: model has no gates");
  }
  const Linear& g = gates_[task == Task::A ? 0 : 1];
  return ng::row_softmax(ng::add(ng::matmul(embed(batch), g.weight), g.bias));
}

HeadLogits MultiTaskNet::forward(const IdBatch& batch) const {
  const Tensor x = embed(batch);
  Tensor rep_a, rep_b;
  if (cfg_.backbone == BackboneKind::SharedBottom) {
    rep_a = rep_b = apply_mlp(trunk_, x, true);
  } else {
    const std::size_t n_shared = cfg_.shared_experts;
    std::vector<Tensor> shared_out;
    for (std::size_t e = 0; e < n_shared; ++e) shared_out.push_back(apply_mlp(experts_[e], x, true));
    const Tensor ones = Tensor::filled(1, cfg_.hidden.back(), 1.0);
    const auto mixture = [&](int t) {
      const Linear& g = gates_[t];
      const Tensor w = ng::row_softmax(ng::add(ng::matmul(x, g.weight), g.bias));
      const Tensor priv = apply_mlp(experts_[n_shared + t], x, true);
      Tensor acc;
      for (std::size_t e = 0; e <= n_shared; ++e) {
        // Expand the gate column across the expert width, then weight.
        const Tensor we = ng::matmul(ng::slice_cols(w, e, 1), ones);
        const Tensor term = ng::mul(we, e < n_shared ? shared_out[e] : priv);
        acc = e == 0 ? term : ng::add(acc, term);
      }
      return acc;
    };
    rep_a = mixture(0);
    rep_b = mixture(1);
  }
  const auto tower = [&](Head h, const Tensor& rep) {
    return apply_mlp(towers_[static_cast<int>(h)], rep, false);
  };
  return HeadLogits{tower(Head::A, rep_a), tower(Head::B, rep_b), tower(Head::APlus, rep_a),
                    tower(Head::BPlus, rep_b)};
}

}  // namespace crossdistil
