#include <catch2/catch_amalgamated.hpp>

#include "eimtrng/dnn.hpp"

using namespace eimtrng;

namespace {

const ToyDataset& dataset() {
  static ToyDataset ds = make_toy_dataset(7);
  return ds;
}

const MlpModel& trained() {
  static MlpModel model = train_toy(7, dataset());
  return model;
}

KeyMaterial test_key(std::uint64_t seed) {
  KeyMaterial key;
  key.bits = BitVector(kKeyBits);
  Rng rng(seed);
  for (std::size_t i = 0; i < kKeyBits; ++i) key.bits.set(i, rng.bernoulli(0.5));
  return key;
}

}  // namespace

TEST_CASE("toy dataset is balanced and deterministic") {
  const ToyDataset& ds = dataset();
  REQUIRE(ds.train_x.size() == 2000);
  REQUIRE(ds.test_x.size() == 500);
  std::vector<int> per_class(ds.classes, 0);
  for (auto y : ds.train_y) ++per_class[y];
  for (int n : per_class) REQUIRE(n == 200);

  ToyDataset again = make_toy_dataset(7);
  REQUIRE(again.train_x == ds.train_x);
  REQUIRE(again.train_y == ds.train_y);
}

TEST_CASE("training is deterministic and reaches 90 percent test accuracy") {
  const MlpModel& model = trained();
  REQUIRE(evaluate_accuracy(model, dataset().test_x, dataset().test_y) >= 0.90);
  MlpModel again = train_toy(7, dataset());
  REQUIRE(again == model);
}

TEST_CASE("untrained model scores near random guess") {
  MlpModel fresh = MlpModel::init(3);
  double acc = evaluate_accuracy(fresh, dataset().test_x, dataset().test_y);
  REQUIRE(acc >= 0.02);
  REQUIRE(acc <= 0.30);
}

TEST_CASE("constant-output model scores exactly 1/c on a balanced split") {
  MlpModel model = MlpModel::init(1);
  for (auto& w : model.weights.back()) w = 0.0f;
  for (auto& b : model.biases.back()) b = 0.0f;
  model.biases.back()[4] = 1.0f;
  REQUIRE(evaluate_accuracy(model, dataset().test_x, dataset().test_y) == 0.10);
}

TEST_CASE("analytic gradients match central finite differences") {
  MlpModel model = MlpModel::init(11);
  const ToyDataset& ds = dataset();
  std::vector<std::size_t> idx(64);
  std::iota(idx.begin(), idx.end(), 0);

  detail::Gradients grads;
  detail::loss_and_gradients(model, ds.train_x, ds.train_y, idx, &grads);

  Rng rng(55);
  int checked = 0;
  while (checked < 100) {
    std::size_t l = rng.next_below(model.layer_count());
    std::size_t i = rng.next_below(model.weights[l].size());
    float original = model.weights[l][i];
    double h = 1e-3 * std::max(0.01, std::fabs(static_cast<double>(original)));
    float wp = static_cast<float>(original + h);
    float wm = static_cast<float>(original - h);
    model.weights[l][i] = wp;
    double lp = mlp_loss(model, ds.train_x, ds.train_y, idx);
    model.weights[l][i] = wm;
    double lm = mlp_loss(model, ds.train_x, ds.train_y, idx);
    model.weights[l][i] = original;
    double numeric = (lp - lm) / (static_cast<double>(wp) - static_cast<double>(wm));
    double analytic = grads.weights[l][i];
    double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
    if (std::fabs(analytic) < 1e-10 && std::fabs(numeric) < 1e-10) continue;  // dead ReLU path
    REQUIRE(std::fabs(numeric - analytic) / denom <= 1e-4);
    ++checked;
  }
}

TEST_CASE("page serialization round-trips the model bit-exactly") {
  const MlpModel& model = trained();
  auto pages = serialize_to_pages(model);
  REQUIRE(pages.size() == 4);  // 6922 float32 parameters in 8 KiB pages
  MlpModel back = deserialize_from_pages(pages, model.dims);
  REQUIRE(back == model);
}

TEST_CASE("model checkpoint files round-trip") {
  const MlpModel& model = trained();
  auto bytes = serialize_model(model);
  REQUIRE(bytes[0] == 'E');
  REQUIRE(bytes[3] == 'W');
  MlpModel back = deserialize_model(bytes);
  REQUIRE(back == model);
  bytes[2] = 'X';
  REQUIRE_THROWS_AS(deserialize_model(bytes), IoError);
}

TEST_CASE("zero swaps leave the model and its accuracy unchanged") {
  const MlpModel& model = trained();
  MlpModel obf = obfuscate_by_swaps(model, 0, test_key(1));
  REQUIRE(obf == model);
}

TEST_CASE("swap obfuscation is a key-stable involution") {
  const MlpModel& model = trained();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    KeyMaterial key = test_key(seed);
    for (std::size_t n : {1u, 2u, 4u}) {
      MlpModel obf = obfuscate_by_swaps(model, n, key);
      REQUIRE_FALSE(obf == model);
      MlpModel restored = obfuscate_by_swaps(obf, n, key);
      REQUIRE(restored == model);
    }
  }
}

TEST_CASE("swapped-in weights stay finite") {
  MlpModel obf = obfuscate_by_swaps(trained(), 4, test_key(5));
  for (std::size_t l = 0; l < obf.layer_count(); ++l) {
    for (float w : obf.weights[l]) REQUIRE(std::isfinite(w));
    for (float b : obf.biases[l]) REQUIRE(std::isfinite(b));
  }
}

TEST_CASE("full swap collapses accuracy to the random-guess floor") {
  const MlpModel& model = trained();
  double mean = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    MlpModel obf = obfuscate_by_swaps(model, 4, test_key(100 + s));
    mean += evaluate_accuracy(obf, dataset().test_x, dataset().test_y) / seeds;
  }
  REQUIRE(mean >= 0.05);
  REQUIRE(mean <= 0.15);
}

TEST_CASE("median accuracy is non-increasing in swap count within the noise band") {
  const MlpModel& model = trained();
  const int seeds = 10;
  std::vector<double> medians;
  for (std::size_t n = 0; n <= 4; ++n) {
    std::vector<double> accs;
    for (int s = 0; s < seeds; ++s) {
      MlpModel obf = obfuscate_by_swaps(model, n, test_key(200 + s));
      accs.push_back(evaluate_accuracy(obf, dataset().test_x, dataset().test_y));
    }
    std::nth_element(accs.begin(), accs.begin() + seeds / 2, accs.end());
    medians.push_back(accs[seeds / 2]);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) REQUIRE(medians[i] <= medians[i - 1] + 0.05);
}

TEST_CASE("min swaps to collapse: already-random model needs none") {
  MlpModel fresh = MlpModel::init(17);
  CollapseScan scan = min_swaps_to_collapse(fresh, test_key(1), dataset());
  double base = evaluate_accuracy(fresh, dataset().test_x, dataset().test_y);
  if (base <= 0.15) {
    REQUIRE(scan.min_swaps == 0);
    REQUIRE(scan.collapsed);
  }
}

TEST_CASE("min swaps to collapse exists for the trained model") {
  CollapseScan scan = min_swaps_to_collapse(trained(), test_key(9), dataset());
  REQUIRE(scan.collapsed);
  REQUIRE(scan.min_swaps <= 4);
  REQUIRE(scan.accuracy_by_n.size() == 5);
  // regression pin for this seed pair
  REQUIRE(scan.min_swaps == 2);
}

TEST_CASE("n_swaps beyond the page count is rejected") {
  REQUIRE_THROWS_AS(obfuscate_by_swaps(trained(), 5, test_key(1)), ConfigError);
}

TEST_CASE("finetune with zero epochs returns the input model's accuracy") {
  const MlpModel& model = trained();
  double base = evaluate_accuracy(model, dataset().test_x, dataset().test_y);
  REQUIRE(finetune_recovery(model, dataset(), 0.01, 0, 1) == base);
}

TEST_CASE("full-data finetune of the unobfuscated model keeps its accuracy") {
  const MlpModel& model = trained();
  double base = evaluate_accuracy(model, dataset().test_x, dataset().test_y);
  double after = finetune_recovery(model, dataset(), 1.0, 100, 2);
  REQUIRE(after >= base - 0.05);
}

TEST_CASE("finetune rejects an empty fraction") {
  REQUIRE_THROWS_AS(finetune_recovery(trained(), dataset(), 0.0, 10, 1), std::invalid_argument);
}

TEST_CASE("one percent finetune of a fully swapped model matches a random init") {
  const MlpModel& model = trained();
  const ToyDataset& ds = dataset();
  double diff_sum = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    MlpModel obf = obfuscate_by_swaps(model, 4, test_key(300 + s));
    double obf_acc = finetune_recovery(obf, ds, 0.01, kFinetuneEpochs, 400 + s);
    MlpModel fresh = MlpModel::init(derive_seed(500, s),
                                    {static_cast<std::uint32_t>(ds.dim), 64, 64,
                                     static_cast<std::uint32_t>(ds.classes)});
    double fresh_acc = finetune_recovery(fresh, ds, 0.01, kFinetuneEpochs, 400 + s);
    diff_sum += std::fabs(obf_acc - fresh_acc);
  }
  REQUIRE(diff_sum / seeds <= 0.10);
}
