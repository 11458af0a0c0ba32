// eimtrng: RowHammer bit-flip simulator, TRNG characterization, and
// weight-page protection toolkit.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eimtrng/characterize.hpp"
#include "eimtrng/config.hpp"
#include "eimtrng/dnn.hpp"
#include "eimtrng/dram_model.hpp"
#include "eimtrng/engine.hpp"
#include "eimtrng/entropy.hpp"
#include "eimtrng/pagecrypt.hpp"

namespace fs = std::filesystem;
using namespace eimtrng;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 success, 2 usage/config, 3 io, 4 invariant violation
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInvariant = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::uint32_t workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "key = value config file");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--workers", opts.workers, "worker thread count");
}

KeyValueFile load_config(const std::string& path) {
  try {
    return KeyValueFile::load(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_manifest(const CommonOpts& opts, const std::string& subcommand,
                    const std::vector<std::string>& outputs) {
  auto now = std::chrono::system_clock::now().time_since_epoch();
  nlohmann::json manifest = {
      {"subcommand", subcommand},
      {"config", opts.config_path},
      {"master_seed", opts.seed},
      {"out", opts.out_dir},
      {"workers", opts.workers},
      {"outputs", outputs},
      {"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now).count()},
      {"tool_version", kVersion},
  };
  write_text(fs::path(opts.out_dir) / "manifest.json", manifest.dump(2) + "\n");
}

struct ArrayGeometry {
  std::uint32_t rows;
  std::size_t cols;
};

ArrayGeometry geometry_from(const KeyValueFile& kv) {
  return {static_cast<std::uint32_t>(kv.get_u64("rows", 8)), kv.get_u64("cols", 65536)};
}

CampaignConfig campaign_from(const KeyValueFile& kv, const CommonOpts& opts) {
  CampaignConfig cfg;
  cfg.victim_row = static_cast<std::uint32_t>(kv.get_u64("victim_row", cfg.victim_row));
  cfg.aggressor1 = static_cast<std::uint32_t>(kv.get_u64("aggressor1", cfg.victim_row - 1));
  cfg.aggressor2 = static_cast<std::uint32_t>(kv.get_u64("aggressor2", cfg.victim_row + 1));
  cfg.hammer_count = kv.get_u64("hammer_count", cfg.hammer_count);
  cfg.start_hc = kv.get_u64("start_hc", cfg.start_hc);
  cfg.end_hc = kv.get_u64("end_hc", cfg.end_hc);
  cfg.step = kv.get_u64("step", cfg.step);
  cfg.sets = static_cast<std::uint32_t>(kv.get_u64("sets", cfg.sets));
  cfg.iterations_per_set =
      static_cast<std::uint32_t>(kv.get_u64("iterations_per_set", cfg.iterations_per_set));
  cfg.victim_pattern = kv.get_string("victim_pattern", cfg.victim_pattern);
  cfg.aggressor_pattern = kv.get_string("aggressor_pattern", cfg.aggressor_pattern);
  cfg.master_seed = opts.seed;
  cfg.workers = opts.workers;
  cfg.validate();
  return cfg;
}

int cmd_characterize(const CommonOpts& opts) {
  KeyValueFile kv = load_config(opts.config_path);
  ProcessConfig process = ProcessConfig::from_kv(kv);
  ArrayGeometry geo = geometry_from(kv);
  CampaignConfig cfg = campaign_from(kv, opts);
  kv.reject_unused();

  DramArray array = sample_array(process, geo.rows, geo.cols, opts.seed);
  ProbabilityReport report = run_probability_analysis(cfg, array);

  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "probability.json", to_json(report).dump(2) + "\n");
  write_text(fs::path(opts.out_dir) / "counts.csv", counts_csv(report));
  write_text(fs::path(opts.out_dir) / "probability.csv", probability_csv(report));
  write_manifest(opts, "characterize", {"probability.json", "counts.csv", "probability.csv"});
  std::cout << "consistent vulnerable cells: " << report.consistent_vulnerable_cells.size() << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  KeyValueFile kv = load_config(opts.config_path);
  ProcessConfig process = ProcessConfig::from_kv(kv);
  ArrayGeometry geo = geometry_from(kv);
  CampaignConfig cfg = campaign_from(kv, opts);
  kv.reject_unused();

  DramArray array = sample_array(process, geo.rows, geo.cols, opts.seed);
  SweepReport report = run_hc_sweep(cfg, array);

  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "sweep.json", to_json(report).dump(2) + "\n");
  write_text(fs::path(opts.out_dir) / "sweep.csv", sweep_csv(report));
  write_manifest(opts, "sweep", {"sweep.json", "sweep.csv"});
  std::cout << "hc points: " << report.hc_points.size()
            << ", consistent cells: " << report.consistent_vulnerable_cells.size() << "\n";
  return 0;
}

int cmd_protect(const CommonOpts& opts, const std::string& model_path) {
  KeyValueFile kv = load_config(opts.config_path);
  ProcessConfig process = ProcessConfig::from_kv(kv);
  std::uint64_t hc = kv.get_u64("hammer_count", 500000);
  std::string aggressor_pattern = kv.get_string("aggressor_pattern", "ALL0");
  kv.reject_unused();

  MlpModel model = read_model(model_path);
  std::vector<WeightPage> pages = serialize_to_pages(model);
  if (hc == 0)
    std::cout << "warning: hammer_count = 0 leaves pages unencrypted (insecure)\n";

  std::vector<WeightPage> encrypted;
  std::vector<KeyRecord> records;
  for (const auto& page : pages) {
    DramArray array = sample_array(process, 3, kPageBits, derive_seed(opts.seed, page.page_id));
    Rng rng(derive_seed(opts.seed, 0xe16c0de, page.page_id));
    auto [enc, record] = encode_page(page, array, 1, hc, rng, aggressor_pattern);
    encrypted.push_back(enc);
    records.push_back(record);
  }
  EncodedBundle bundle = shuffle_layout(encrypted, records);

  fs::create_directories(opts.out_dir);
  write_bundle((fs::path(opts.out_dir) / "bundle.eimb").string(), bundle);
  std::vector<std::string> outputs = {"bundle.eimb", "model.meta"};
  for (const auto& record : records) {
    std::string name = "key_" + std::to_string(record.page_id) + ".eimk";
    write_key_record((fs::path(opts.out_dir) / name).string(), record);
    outputs.push_back(name);
  }
  // layer dims; needed to rebuild the checkpoint on recovery
  std::string meta;
  for (auto d : model.dims) meta += std::to_string(d) + "\n";
  write_text(fs::path(opts.out_dir) / "model.meta", meta);
  write_manifest(opts, "protect", outputs);
  std::cout << "protected " << pages.size() << " pages at hc " << hc << "\n";
  return 0;
}

int cmd_recover(const CommonOpts& opts, const std::string& bundle_path,
                const std::vector<std::string>& key_paths, const std::string& meta_path,
                const std::string& out_model) {
  EncodedBundle bundle = read_bundle(bundle_path);
  std::vector<KeyRecord> records;
  for (const auto& path : key_paths) records.push_back(read_key_record(path));
  std::sort(records.begin(), records.end(),
            [](const KeyRecord& a, const KeyRecord& b) { return a.page_id < b.page_id; });
  if (records.size() != bundle.encrypted_pages.size())
    throw ConfigError("recover: key file count does not match bundle page count");
  bundle.key_records = records;

  std::vector<WeightPage> pages = unshuffle(bundle);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    pages[i].page_id = records[i].page_id;
    pages[i] = decode_page(pages[i], records[i]);
  }

  std::ifstream meta(meta_path);
  if (!meta) throw IoError("cannot open model meta file: " + meta_path);
  std::vector<std::uint32_t> dims;
  std::uint32_t d;
  while (meta >> d) dims.push_back(d);
  if (dims.size() < 2) throw ConfigError("model meta file must list at least two layer dims");

  MlpModel model = deserialize_from_pages(pages, dims);
  write_model(out_model, model);
  std::cout << "recovered model -> " << out_model << "\n";
  return 0;
}

int cmd_randomness(const CommonOpts& opts, const std::vector<std::string>& key_paths) {
  nlohmann::json all = nlohmann::json::array();
  for (const auto& path : key_paths) {
    KeyRecord record = read_key_record(path);
    all.push_back({{"file", path}, {"tests", randomness_report(record.key_material.bits)}});
  }
  std::string text = all.dump(2) + "\n";
  if (!opts.out_dir.empty() && opts.out_dir != "-") {
    fs::create_directories(opts.out_dir);
    write_text(fs::path(opts.out_dir) / "randomness.json", text);
  }
  std::cout << text;
  return 0;
}

int cmd_dnn_eval(const CommonOpts& opts) {
  KeyValueFile kv = load_config(opts.config_path);
  std::uint32_t key_seeds = static_cast<std::uint32_t>(kv.get_u64("key_seeds", 10));
  double data_fraction = kv.get_double("finetune_fraction", 0.01);
  std::uint64_t finetune_epochs = kv.get_u64("finetune_epochs", kFinetuneEpochs);
  kv.reject_unused();

  ToyDataset ds = make_toy_dataset(opts.seed);
  MlpModel model = train_toy(opts.seed, ds);
  double base_acc = evaluate_accuracy(model, ds.test_x, ds.test_y);
  std::size_t n_pages = serialize_to_pages(model).size();

  std::ostringstream curves;
  curves << "n_swaps,seed,accuracy\n";
  nlohmann::json collapse = nlohmann::json::array();
  for (std::uint32_t s = 0; s < key_seeds; ++s) {
    KeyMaterial key;
    key.bits = BitVector(kKeyBits);
    Rng rng(derive_seed(opts.seed, 0xd4e, s));
    for (std::size_t i = 0; i < kKeyBits; ++i) key.bits.set(i, rng.bernoulli(0.5));

    CollapseScan scan = min_swaps_to_collapse(model, key, ds);
    for (std::size_t n = 0; n < scan.accuracy_by_n.size(); ++n)
      curves << n << "," << s << "," << scan.accuracy_by_n[n] << "\n";

    MlpModel obf = obfuscate_by_swaps(model, n_pages, key);
    double obf_ft = finetune_recovery(obf, ds, data_fraction, finetune_epochs, derive_seed(opts.seed, s));
    MlpModel fresh = MlpModel::init(derive_seed(opts.seed, 0xf8e5, s), model.dims);
    double fresh_ft =
        finetune_recovery(fresh, ds, data_fraction, finetune_epochs, derive_seed(opts.seed, s));
    collapse.push_back({{"seed", s},
                        {"min_swaps", scan.min_swaps},
                        {"collapsed", scan.collapsed},
                        {"finetuned_obfuscated", obf_ft},
                        {"finetuned_random_init", fresh_ft}});
  }

  fs::create_directories(opts.out_dir);
  write_text(fs::path(opts.out_dir) / "curves.csv", curves.str());
  nlohmann::json summary = {{"base_test_accuracy", base_acc},
                            {"pages", n_pages},
                            {"runs", collapse}};
  write_text(fs::path(opts.out_dir) / "dnn_eval.json", summary.dump(2) + "\n");
  write_manifest(opts, "dnn-eval", {"curves.csv", "dnn_eval.json"});
  std::cout << "base accuracy: " << base_acc << ", pages: " << n_pages << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RowHammer-based TRNG and weight-obfuscation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.footer(
      "Trace DSL: statements separated by ';' or newline; ACT <row>, PRE,\n"
      "WR <row> <hexstring|ALL0|ALL1|CHECKER|ROWSTRIPE>, RD <row>, NOP <cycles>,\n"
      "REPEAT <count> { ... }; '#' comments.\n"
      "Config keys: vulnerable_fraction, threshold_median, threshold_sigma,\n"
      "steepness_median, steepness_sigma, direction_bias, temp_sensitivity,\n"
      "temperature_celsius, rows, cols, victim_row, aggressor1, aggressor2,\n"
      "hammer_count, start_hc, end_hc, step, sets, iterations_per_set,\n"
      "victim_pattern, aggressor_pattern, key_seeds, finetune_fraction,\n"
      "finetune_epochs.\n"
      "Exit codes: 0 success, 2 usage/config, 3 io, 4 invariant violation.");

  CommonOpts characterize_opts, sweep_opts, protect_opts, recover_opts, randomness_opts, dnn_opts;
  std::string model_path, bundle_path, meta_path, out_model = "recovered.eimw";
  std::vector<std::string> key_paths;

  auto* characterize = app.add_subcommand("characterize", "bit-flip probability analysis");
  add_common(characterize, characterize_opts);

  auto* sweep = app.add_subcommand("sweep", "bit-flip count analysis across HCs");
  add_common(sweep, sweep_opts);

  auto* protect = app.add_subcommand("protect", "encode model weight pages");
  add_common(protect, protect_opts);
  protect->add_option("--model", model_path, "EIMW model checkpoint")->required();

  auto* recover = app.add_subcommand("recover", "decode a bundle back to a model");
  add_common(recover, recover_opts, false);
  recover->add_option("--bundle", bundle_path, "EIMB bundle file")->required();
  recover->add_option("--keys", key_paths, "EIMK key files")->required();
  recover->add_option("--meta", meta_path, "model.meta with layer dims")->required();
  recover->add_option("--out-model", out_model, "output EIMW path");

  auto* randomness = app.add_subcommand("randomness", "randomness test battery on keys");
  add_common(randomness, randomness_opts, false);
  randomness->add_option("--keys", key_paths, "EIMK key files")->required();

  auto* dnn_eval = app.add_subcommand("dnn-eval", "accuracy collapse and recovery study");
  add_common(dnn_eval, dnn_opts);

  try {
    app.parse(argc, argv);
    if (characterize->parsed()) return cmd_characterize(characterize_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (protect->parsed()) return cmd_protect(protect_opts, model_path);
    if (recover->parsed())
      return cmd_recover(recover_opts, bundle_path, key_paths, meta_path, out_model);
    if (randomness->parsed()) return cmd_randomness(randomness_opts, key_paths);
    if (dnn_eval->parsed()) return cmd_dnn_eval(dnn_opts);
    return kExitConfig;
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}
