#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "eimtrng/bits.hpp"
#include "eimtrng/entropy.hpp"
#include "eimtrng/errors.hpp"
#include "eimtrng/pagecrypt.hpp"
#include "eimtrng/rng.hpp"

namespace eimtrng {

inline constexpr std::size_t kPageBits = 65536;  // 8 KiB, one DRAM row
inline constexpr std::size_t kFloatsPerPage = kPageBits / 32;

struct ToyDataset {
  std::size_t dim = 32;
  std::size_t classes = 10;
  std::vector<std::vector<float>> train_x, test_x;
  std::vector<std::uint32_t> train_y, test_y;
};

// Balanced Gaussian blobs, one per class; deterministic in the seed.
inline ToyDataset make_toy_dataset(std::uint64_t seed, std::size_t train_per_class = 200,
                                   std::size_t test_per_class = 50, std::size_t dim = 32,
                                   std::size_t classes = 10, double separation = 4.0,
                                   double noise = 1.0) {
  Rng rng(derive_seed(seed, 0xda7a5e7));
  ToyDataset ds;
  ds.dim = dim;
  ds.classes = classes;

  std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
  for (auto& mean : means) {
    double norm = 0;
    for (auto& m : mean) {
      m = rng.next_normal();
      norm += m * m;
    }
    norm = std::sqrt(norm);
    for (auto& m : mean) m = m / norm * separation;
  }

  auto sample_split = [&](std::size_t per_class, std::vector<std::vector<float>>& xs,
                          std::vector<std::uint32_t>& ys) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        std::vector<float> x(dim);
        for (std::size_t d = 0; d < dim; ++d)
          x[d] = static_cast<float>(means[c][d] + noise * rng.next_normal());
        xs.push_back(std::move(x));
        ys.push_back(static_cast<std::uint32_t>(c));
      }
    }
  };
  sample_split(train_per_class, ds.train_x, ds.train_y);
  sample_split(test_per_class, ds.test_x, ds.test_y);
  return ds;
}

// Fully connected ReLU network with softmax cross-entropy. Weights live as
// float32 so page serialization round-trips bit-exactly; math runs in double.
struct MlpModel {
  std::vector<std::uint32_t> dims{32, 64, 64, 10};
  std::vector<std::vector<float>> weights;  // [layer][out * in_dim + in]
  std::vector<std::vector<float>> biases;   // [layer][out]

  std::size_t layer_count() const { return dims.size() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l)
      n += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
    return n;
  }

  static MlpModel init(std::uint64_t seed, std::vector<std::uint32_t> dims = {32, 64, 64, 10}) {
    MlpModel m;
    m.dims = std::move(dims);
    Rng rng(derive_seed(seed, 0x1417));
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      std::size_t in = m.dims[l], out = m.dims[l + 1];
      double scale = std::sqrt(2.0 / static_cast<double>(in));
      std::vector<float> w(in * out);
      for (auto& x : w) x = static_cast<float>(scale * rng.next_normal());
      m.weights.push_back(std::move(w));
      m.biases.emplace_back(out, 0.0f);
    }
    return m;
  }

  std::vector<double> forward(const std::vector<float>& x) const {
    std::vector<double> act(x.begin(), x.end());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      std::size_t in = dims[l], out = dims[l + 1];
      std::vector<double> next(out);
      for (std::size_t o = 0; o < out; ++o) {
        double z = biases[l][o];
        const float* wrow = &weights[l][o * in];
        for (std::size_t i = 0; i < in; ++i) z += static_cast<double>(wrow[i]) * act[i];
        next[o] = (l + 1 < layer_count()) ? std::max(0.0, z) : z;
      }
      act = std::move(next);
    }
    return act;  // logits
  }

  std::uint32_t predict(const std::vector<float>& x) const {
    auto logits = forward(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;  // NaN logits fall through to 0
    return static_cast<std::uint32_t>(best);
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

inline double evaluate_accuracy(const MlpModel& model, const std::vector<std::vector<float>>& xs,
                                const std::vector<std::uint32_t>& ys) {
  if (xs.empty()) throw std::invalid_argument("evaluate_accuracy: empty split");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) hits += model.predict(xs[i]) == ys[i];
  return static_cast<double>(hits) / static_cast<double>(xs.size());
}

namespace detail {

struct Gradients {
  std::vector<std::vector<double>> weights, biases;
};

// Mean softmax cross-entropy over the given sample indices; fills grads if
// provided. All accumulation in double.
inline double loss_and_gradients(const MlpModel& model, const std::vector<std::vector<float>>& xs,
                                 const std::vector<std::uint32_t>& ys,
                                 const std::vector<std::size_t>& idx, Gradients* grads) {
  std::size_t layers = model.layer_count();
  if (grads) {
    grads->weights.clear();
    grads->biases.clear();
    for (std::size_t l = 0; l < layers; ++l) {
      grads->weights.emplace_back(model.weights[l].size(), 0.0);
      grads->biases.emplace_back(model.biases[l].size(), 0.0);
    }
  }

  double loss = 0.0;
  double inv_n = 1.0 / static_cast<double>(idx.size());
  std::vector<std::vector<double>> acts(layers + 1);
  for (std::size_t s : idx) {
    const auto& x = xs[s];
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      std::size_t in = model.dims[l], out = model.dims[l + 1];
      acts[l + 1].assign(out, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        double z = model.biases[l][o];
        const float* wrow = &model.weights[l][o * in];
        for (std::size_t i = 0; i < in; ++i) z += static_cast<double>(wrow[i]) * acts[l][i];
        acts[l + 1][o] = (l + 1 < layers) ? std::max(0.0, z) : z;
      }
    }

    auto& logits = acts[layers];
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - mx);
    loss += inv_n * (std::log(denom) - (logits[ys[s]] - mx));

    if (!grads) continue;
    std::vector<double> delta(logits.size());
    for (std::size_t o = 0; o < logits.size(); ++o)
      delta[o] = inv_n * (std::exp(logits[o] - mx) / denom - (o == ys[s] ? 1.0 : 0.0));

    for (std::size_t l = layers; l-- > 0;) {
      std::size_t in = model.dims[l], out = model.dims[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        grads->biases[l][o] += delta[o];
        double* grow = &grads->weights[l][o * in];
        for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * acts[l][i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        if (acts[l][i] <= 0.0) continue;  // ReLU gate
        double g = 0.0;
        const auto& w = model.weights[l];
        for (std::size_t o = 0; o < out; ++o) g += static_cast<double>(w[o * in + i]) * delta[o];
        prev[i] = g;
      }
      delta = std::move(prev);
    }
  }
  return loss;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace detail

inline double mlp_loss(const MlpModel& model, const std::vector<std::vector<float>>& xs,
                       const std::vector<std::uint32_t>& ys, const std::vector<std::size_t>& idx) {
  return detail::loss_and_gradients(model, xs, ys, idx, nullptr);
}

// Full-batch gradient descent with momentum; deterministic.
inline void gradient_descent(MlpModel& model, const std::vector<std::vector<float>>& xs,
                             const std::vector<std::uint32_t>& ys,
                             const std::vector<std::size_t>& idx, std::size_t epochs, double lr,
                             double momentum = 0.9) {
  detail::Gradients grads, velocity;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    velocity.weights.emplace_back(model.weights[l].size(), 0.0);
    velocity.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  for (std::size_t e = 0; e < epochs; ++e) {
    detail::loss_and_gradients(model, xs, ys, idx, &grads);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
        velocity.weights[l][i] = momentum * velocity.weights[l][i] - lr * grads.weights[l][i];
        model.weights[l][i] = static_cast<float>(model.weights[l][i] + velocity.weights[l][i]);
      }
      for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
        velocity.biases[l][i] = momentum * velocity.biases[l][i] - lr * grads.biases[l][i];
        model.biases[l][i] = static_cast<float>(model.biases[l][i] + velocity.biases[l][i]);
      }
    }
  }
}

inline constexpr std::size_t kTrainEpochs = 300;
inline constexpr double kTrainLr = 0.05;

inline MlpModel train_toy(std::uint64_t seed, const ToyDataset& ds) {
  MlpModel model = MlpModel::init(seed, {static_cast<std::uint32_t>(ds.dim), 64, 64,
                                         static_cast<std::uint32_t>(ds.classes)});
  gradient_descent(model, ds.train_x, ds.train_y, detail::all_indices(ds.train_x.size()),
                   kTrainEpochs, kTrainLr);
  return model;
}

// --- weight page serialization ---

inline std::vector<WeightPage> serialize_to_pages(const MlpModel& model) {
  std::vector<float> flat;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    flat.insert(flat.end(), model.weights[l].begin(), model.weights[l].end());
    flat.insert(flat.end(), model.biases[l].begin(), model.biases[l].end());
  }
  std::size_t pages = (flat.size() + kFloatsPerPage - 1) / kFloatsPerPage;
  flat.resize(pages * kFloatsPerPage, 0.0f);  // zero-pad the tail page

  std::vector<WeightPage> out;
  for (std::size_t p = 0; p < pages; ++p) {
    std::vector<std::uint8_t> bytes(kPageBits / 8);
    std::memcpy(bytes.data(), flat.data() + p * kFloatsPerPage, bytes.size());
    out.push_back({BitVector::from_bytes(bytes, kPageBits), static_cast<std::uint32_t>(p)});
  }
  return out;
}

inline MlpModel deserialize_from_pages(const std::vector<WeightPage>& pages,
                                       const std::vector<std::uint32_t>& dims) {
  MlpModel model;
  model.dims = dims;
  std::vector<float> flat(pages.size() * kFloatsPerPage);
  for (std::size_t p = 0; p < pages.size(); ++p) {
    auto bytes = pages[p].bits.to_bytes();
    std::memcpy(flat.data() + p * kFloatsPerPage, bytes.data(), bytes.size());
  }
  if (flat.size() < model.parameter_count())
    throw ConfigError("deserialize_from_pages: not enough pages for dims");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    std::size_t in = dims[l], out = dims[l + 1];
    model.weights.emplace_back(flat.begin() + pos, flat.begin() + pos + in * out);
    pos += in * out;
    model.biases.emplace_back(flat.begin() + pos, flat.begin() + pos + out);
    pos += out;
  }
  return model;
}

// --- obfuscation by secret-row swaps ---

// Key-derived encrypted-counterpart pad for one page. Only sign and mantissa
// bits are scrambled so swapped-in weights stay finite and finetunable.
inline BitVector page_pad(std::uint64_t key_fold, std::uint32_t page_index, std::size_t nbits) {
  std::vector<std::uint8_t> bytes((nbits + 7) / 8, 0);
  Rng rng(derive_seed(key_fold, 0x5ec4e7, page_index));
  for (std::size_t i = 0; i + 4 <= bytes.size(); i += 4) {
    std::uint32_t w = static_cast<std::uint32_t>(rng.next_u64()) & 0x807fffffu;
    std::memcpy(bytes.data() + i, &w, 4);
  }
  return BitVector::from_bytes(bytes, nbits);
}

// Swap order: key-seeded shuffle of page indices; swapping N pages exchanges
// the first N with their secret counterparts. XOR makes each swap its own
// inverse, so applying the operation twice restores the model.
inline std::vector<std::uint32_t> swap_order(std::uint64_t key_fold, std::size_t pages) {
  std::vector<std::uint32_t> order(pages);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(key_fold, 0x0bf5ca7e));
  for (std::size_t i = pages; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
  return order;
}

inline MlpModel obfuscate_by_swaps(const MlpModel& model, std::size_t n_swaps,
                                   const KeyMaterial& key) {
  std::vector<WeightPage> pages = serialize_to_pages(model);
  if (n_swaps > pages.size()) throw ConfigError("obfuscate_by_swaps: n_swaps exceeds page count");
  std::uint64_t fold = fold_key(key.bits);
  std::vector<std::uint32_t> order = swap_order(fold, pages.size());
  for (std::size_t k = 0; k < n_swaps; ++k) {
    std::uint32_t p = order[k];
    pages[p].bits ^= page_pad(fold, p, pages[p].bits.size());
  }
  return deserialize_from_pages(pages, model.dims);
}

struct CollapseScan {
  std::size_t min_swaps = 0;
  bool collapsed = false;
  std::vector<double> accuracy_by_n;  // index = n_swaps
};

// Smallest N whose obfuscated accuracy reaches random-guess level.
inline CollapseScan min_swaps_to_collapse(const MlpModel& model, const KeyMaterial& key,
                                          const ToyDataset& ds, double tolerance = 0.05) {
  std::size_t pages = serialize_to_pages(model).size();
  double floor = 1.0 / static_cast<double>(ds.classes) + tolerance;
  CollapseScan scan;
  for (std::size_t n = 0; n <= pages; ++n) {
    MlpModel obf = obfuscate_by_swaps(model, n, key);
    double acc = evaluate_accuracy(obf, ds.test_x, ds.test_y);
    scan.accuracy_by_n.push_back(acc);
    if (!scan.collapsed && acc <= floor) {
      scan.min_swaps = n;
      scan.collapsed = true;
    }
  }
  if (!scan.collapsed) scan.min_swaps = pages;
  return scan;
}

inline constexpr std::size_t kFinetuneEpochs = 400;
inline constexpr double kFinetuneLr = 0.02;

// Finetune on a fraction of the training data; deterministic subsample.
inline double finetune_recovery(MlpModel model, const ToyDataset& ds, double data_fraction,
                                std::size_t epochs, std::uint64_t seed) {
  if (!(data_fraction > 0.0 && data_fraction <= 1.0))
    throw std::invalid_argument("finetune_recovery: data_fraction must be in (0,1]");
  std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(
                                               data_fraction * static_cast<double>(ds.train_x.size())));
  std::vector<std::size_t> idx = detail::all_indices(ds.train_x.size());
  Rng rng(derive_seed(seed, 0xf17e));
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  idx.resize(n);
  gradient_descent(model, ds.train_x, ds.train_y, idx, epochs, kFinetuneLr);
  return evaluate_accuracy(model, ds.test_x, ds.test_y);
}

// --- model checkpoint: magic "EIMW", version u8, layer count u32, dims u32
// each, then per layer weights then biases as float32 little-endian ---

inline std::vector<std::uint8_t> serialize_model(const MlpModel& model) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "EIMW", 4);
  out.push_back(1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.dims.size()));
  for (auto d : model.dims) detail::put_le<std::uint32_t>(out, d);
  auto put_floats = [&](const std::vector<float>& v) {
    for (float f : v) {
      std::uint32_t w;
      std::memcpy(&w, &f, 4);
      detail::put_le<std::uint32_t>(out, w);
    }
  };
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    put_floats(model.weights[l]);
    put_floats(model.biases[l]);
  }
  return out;
}

inline MlpModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  detail::expect_magic(r, "EIMW");
  if (r.get_u8() != 1) throw IoError("unsupported EIMW version");
  MlpModel model;
  std::uint32_t ndims = r.get_le<std::uint32_t>();
  if (ndims < 2) throw IoError("EIMW: need at least 2 dims");
  model.dims.clear();
  for (std::uint32_t i = 0; i < ndims; ++i) model.dims.push_back(r.get_le<std::uint32_t>());
  auto get_floats = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& f : v) {
      std::uint32_t w = r.get_le<std::uint32_t>();
      std::memcpy(&f, &w, 4);
    }
    return v;
  };
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    model.weights.push_back(get_floats(static_cast<std::size_t>(model.dims[l]) * model.dims[l + 1]));
    model.biases.push_back(get_floats(model.dims[l + 1]));
  }
  return model;
}

inline void write_model(const std::string& path, const MlpModel& model) {
  detail::write_file(path, serialize_model(model));
}

inline MlpModel read_model(const std::string& path) {
  return deserialize_model(detail::read_file(path));
}

}  // namespace eimtrng
