#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/data/balance.hpp"
#include "fairkit/train/methods.hpp"

namespace fairkit::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Resolved options of one training run. Every field has a flag and a YAML
/// key of the same name.
struct TrainConfig {
  std::string dataset = "synthetic";  // "synthetic", or a directory under data_dir
  std::string data_dir;
  std::string synthetic_spec;         // YAML spec for the synthetic dataset
  std::string encoder_architecture = "vector";
  Index emb_size = 8;
  int num_classes = 2;
  int num_groups = 2;

  std::string BT;     // "", Resampling, Reweighting, Downsampling
  std::string BTObj;  // "", joint, y, g, EO
  bool adv_debiasing = false;
  std::string method = "Standard";

  double adv_lambda = 1.0;
  int n_discriminators = 3;
  double diff_lambda = 0.0;
  Index adv_hidden = 64;
  double fairbatch_alpha = 0.01;
  double fcl_lambda_y = 0.1;
  double fcl_lambda_g = 0.1;
  double temperature = 0.07;
  double eo_cla_lambda = 1.0;

  bool INLP = false;
  int inlp_iterations = 10;
  bool gate_soft = false;
  int gate_soft_grid = 11;

  std::vector<Index> hidden_dims{300, 300};
  std::string activation = "ReLU";
  std::string optimizer = "Adam";
  double lr = 1e-3;
  Index batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 0;
  std::string results_dir = "results";
  std::string conf_file;

  bool operator==(const TrainConfig&) const = default;

  /// Cross-field checks; throws Config naming the field.
  void validate() const;

  /// The at-training method after folding in adv_debiasing.
  train::Method resolved_method() const;
  train::MethodConfig method_config() const;
  std::optional<data::BalanceObjective> balance_objective() const;

  /// Short names for the balancing objective: joint→JB, y→CB, g→BD, EO→BTEO.
  std::string balance_label() const;

  /// e.g. {"pre:EO-resampling", "at:Adv", "post:INLP"}.
  std::vector<std::string> stages() const;

  /// Name used to group runs in analysis, e.g. "BTEO-Resampling+Adv+INLP".
  std::string method_label() const;

  /// Trade-off hyperparameters of the active stages, keyed by field name.
  std::map<std::string, double> hyper_index() const;
};

/// Every registered key, in emission order.
const std::vector<std::string>& config_keys();

/// flags > YAML (--conf_file) > defaults. `args` excludes the program name.
/// Unknown keys and malformed values throw Config naming the key.
TrainConfig parse_config(const std::vector<std::string>& args);

/// Applies one YAML file on top of `base`.
TrainConfig apply_yaml(const TrainConfig& base, const std::filesystem::path& path);

std::string to_yaml(const TrainConfig& config);
TrainConfig from_yaml_text(const std::string& text, const TrainConfig& base = {});

/// FNV-1a over the YAML echo without results_dir and conf_file, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

}  // namespace fairkit::cli
