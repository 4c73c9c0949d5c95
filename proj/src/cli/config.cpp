#include "fairkit/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "fairkit/error.hpp"

namespace fairkit::cli {

namespace {

using Member = std::variant<std::string TrainConfig::*, int TrainConfig::*, Index TrainConfig::*,
                            std::uint64_t TrainConfig::*, double TrainConfig::*, bool TrainConfig::*,
                            std::vector<Index> TrainConfig::*>;

struct Field {
  const char* name;
  Member member;
};

const std::vector<Field>& registry() {
  static const std::vector<Field> fields{
      {"dataset", &TrainConfig::dataset},
      {"data_dir", &TrainConfig::data_dir},
      {"synthetic_spec", &TrainConfig::synthetic_spec},
      {"encoder_architecture", &TrainConfig::encoder_architecture},
      {"emb_size", &TrainConfig::emb_size},
      {"num_classes", &TrainConfig::num_classes},
      {"num_groups", &TrainConfig::num_groups},
      {"BT", &TrainConfig::BT},
      {"BTObj", &TrainConfig::BTObj},
      {"adv_debiasing", &TrainConfig::adv_debiasing},
      {"method", &TrainConfig::method},
      {"adv_lambda", &TrainConfig::adv_lambda},
      {"n_discriminators", &TrainConfig::n_discriminators},
      {"diff_lambda", &TrainConfig::diff_lambda},
      {"adv_hidden", &TrainConfig::adv_hidden},
      {"fairbatch_alpha", &TrainConfig::fairbatch_alpha},
      {"fcl_lambda_y", &TrainConfig::fcl_lambda_y},
      {"fcl_lambda_g", &TrainConfig::fcl_lambda_g},
      {"temperature", &TrainConfig::temperature},
      {"eo_cla_lambda", &TrainConfig::eo_cla_lambda},
      {"INLP", &TrainConfig::INLP},
      {"inlp_iterations", &TrainConfig::inlp_iterations},
      {"gate_soft", &TrainConfig::gate_soft},
      {"gate_soft_grid", &TrainConfig::gate_soft_grid},
      {"hidden_dims", &TrainConfig::hidden_dims},
      {"activation", &TrainConfig::activation},
      {"optimizer", &TrainConfig::optimizer},
      {"lr", &TrainConfig::lr},
      {"batch_size", &TrainConfig::batch_size},
      {"epochs", &TrainConfig::epochs},
      {"seed", &TrainConfig::seed},
      {"results_dir", &TrainConfig::results_dir},
      {"conf_file", &TrainConfig::conf_file},
  };
  return fields;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : registry())
    if (key == f.name) return &f;
  return nullptr;
}

[[noreturn]] void bad_value(const std::string& key, const char* expected, const std::string& got) {
  throw Error(ErrorKind::Config, key + ": expected " + expected + ", got '" + got + "'");
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    bad_value(key, std::is_signed_v<Int> ? "an integer" : "a non-negative integer", text);
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) bad_value(key, "a number", text);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, "a boolean", text);
}

std::vector<Index> parse_list(const std::string& key, const std::string& text) {
  std::vector<Index> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<Index>(key, item));
  return out;
}

void set_from_string(TrainConfig& cfg, const Field& f, const std::string& text) {
  const std::string key = f.name;
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) cfg.*member = text;
        else if constexpr (std::is_same_v<T, bool>) cfg.*member = parse_bool(key, text);
        else if constexpr (std::is_same_v<T, double>) cfg.*member = parse_real(key, text);
        else if constexpr (std::is_same_v<T, std::vector<Index>>) cfg.*member = parse_list(key, text);
        else cfg.*member = parse_int<T>(key, text);
      },
      f.member);
}

void set_from_yaml(TrainConfig& cfg, const Field& f, const YAML::Node& node) {
  const std::string key = f.name;
  if (std::holds_alternative<std::vector<Index> TrainConfig::*>(f.member)) {
    auto& list = cfg.*std::get<std::vector<Index> TrainConfig::*>(f.member);
    list.clear();
    if (node.IsNull()) return;
    if (!node.IsSequence()) bad_value(key, "a list of integers", YAML::Dump(node));
    for (const auto& item : node) {
      if (!item.IsScalar()) bad_value(key, "a list of integers", YAML::Dump(node));
      list.push_back(parse_int<Index>(key, item.Scalar()));
    }
    return;
  }
  if (node.IsNull()) {
    if (!std::holds_alternative<std::string TrainConfig::*>(f.member)) bad_value(key, "a value", "null");
    set_from_string(cfg, f, "");
    return;
  }
  if (!node.IsScalar()) bad_value(key, "a scalar", YAML::Dump(node));
  set_from_string(cfg, f, node.Scalar());
}

// Shortest decimal that reads back to the same double.
std::string format_real(double v) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::Config, message);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : registry()) k.emplace_back(f.name);
    return k;
  }();
  return keys;
}

train::Method TrainConfig::resolved_method() const {
  const train::Method m = train::method_from_string(method);
  return adv_debiasing && m == train::Method::Standard ? train::Method::Adv : m;
}

train::MethodConfig TrainConfig::method_config() const {
  train::MethodConfig mc;
  mc.method = resolved_method();
  mc.adv_lambda = adv_lambda;
  mc.n_discriminators = n_discriminators;
  mc.diff_lambda = diff_lambda;
  mc.adv_hidden = adv_hidden;
  mc.fairbatch_alpha = fairbatch_alpha;
  mc.fcl_lambda_y = fcl_lambda_y;
  mc.fcl_lambda_g = fcl_lambda_g;
  mc.temperature = temperature;
  mc.eo_cla_lambda = eo_cla_lambda;
  mc.hidden_dims = hidden_dims;
  if (activation == "ReLU") mc.activation = nn::Activation::ReLU;
  else if (activation == "Tanh") mc.activation = nn::Activation::Tanh;
  else throw Error(ErrorKind::Config, "activation must be ReLU or Tanh, got '" + activation + "'");
  if (optimizer == "Adam") mc.optimizer.kind = nn::OptimizerKind::Adam;
  else if (optimizer == "SGD") mc.optimizer.kind = nn::OptimizerKind::SGD;
  else throw Error(ErrorKind::Config, "optimizer must be Adam or SGD, got '" + optimizer + "'");
  mc.optimizer.lr = lr;
  mc.batch_size = batch_size;
  mc.epochs = epochs;
  mc.seed = seed;
  return mc;
}

std::optional<data::BalanceObjective> TrainConfig::balance_objective() const {
  if (BT.empty() && BTObj.empty()) return std::nullopt;
  require(!BT.empty(), "BTObj '" + BTObj + "' needs a BT mode (Resampling, Reweighting or Downsampling)");
  require(!BTObj.empty(), "BT '" + BT + "' needs a BTObj objective (joint, y, g or EO)");
  data::BalanceObjective obj;
  if (BT == "Resampling") obj.mode = data::BalanceMode::Resampling;
  else if (BT == "Reweighting") obj.mode = data::BalanceMode::Reweighting;
  else if (BT == "Downsampling") obj.mode = data::BalanceMode::Downsampling;
  else throw Error(ErrorKind::Config, "BT must be Resampling, Reweighting or Downsampling, got '" + BT + "'");
  if (BTObj == "joint") obj.target = data::BalanceTarget::Joint;
  else if (BTObj == "y") obj.target = data::BalanceTarget::ClassDown;
  else if (BTObj == "g") obj.target = data::BalanceTarget::GroupOnly;
  else if (BTObj == "EO") obj.target = data::BalanceTarget::EqualOpp;
  else throw Error(ErrorKind::Config, "BTObj must be joint, y, g or EO, got '" + BTObj + "'");
  return obj;
}

std::string TrainConfig::balance_label() const {
  if (BTObj == "joint") return "JB";
  if (BTObj == "y") return "CB";
  if (BTObj == "g") return "BD";
  if (BTObj == "EO") return "BTEO";
  return "";
}

void TrainConfig::validate() const {
  require(encoder_architecture == "vector",
          "encoder_architecture '" + encoder_architecture + "' is not supported; only 'vector' inputs are");
  require(!dataset.empty(), "dataset must not be empty");
  require(emb_size >= 1, "emb_size must be >= 1");
  require(num_classes >= 2, "num_classes must be >= 2");
  require(num_groups >= 1, "num_groups must be >= 1");
  const auto obj = balance_objective();
  require(!obj || obj->target != data::BalanceTarget::ClassDown || obj->mode == data::BalanceMode::Downsampling,
          "BTObj y only supports BT Downsampling");
  const train::Method m = train::method_from_string(method);
  require(!adv_debiasing || m == train::Method::Standard || train::is_adversarial(m),
          "adv_debiasing conflicts with method " + method);
  require(!gate_soft || resolved_method() == train::Method::Gate, "gate_soft needs method Gate");
  require(!(gate_soft && INLP), "INLP and gate_soft cannot be combined");
  require(inlp_iterations >= 0, "inlp_iterations must be >= 0");
  require(gate_soft_grid >= 2, "gate_soft_grid must be >= 2");
  require(results_dir.size() > 0, "results_dir must not be empty");
  method_config().validate();
}

std::vector<std::string> TrainConfig::stages() const {
  std::vector<std::string> out;
  if (!BT.empty()) out.push_back("pre:" + BTObj + "-" + lower(BT));
  out.push_back("at:" + train::to_string(resolved_method()));
  if (INLP) out.emplace_back("post:INLP");
  if (gate_soft) out.emplace_back("post:Gate-soft");
  return out;
}

std::string TrainConfig::method_label() const {
  std::vector<std::string> parts;
  if (!BT.empty()) parts.push_back(balance_label() + "-" + BT);
  const train::Method m = resolved_method();
  if (m != train::Method::Standard || (parts.empty() && !INLP)) parts.push_back(train::to_string(m));
  if (INLP) parts.emplace_back("INLP");
  if (gate_soft) parts.emplace_back("Gate-soft");
  std::string label;
  for (const auto& p : parts) label += (label.empty() ? "" : "+") + p;
  return label;
}

std::map<std::string, double> TrainConfig::hyper_index() const {
  using train::Method;
  std::map<std::string, double> idx;
  switch (resolved_method()) {
    case Method::Adv:
    case Method::AAdv:
      idx["adv_lambda"] = adv_lambda;
      break;
    case Method::EAdv:
      idx["adv_lambda"] = adv_lambda;
      idx["n_discriminators"] = n_discriminators;
      break;
    case Method::DAdv:
    case Method::ADAdv:
      idx["adv_lambda"] = adv_lambda;
      idx["diff_lambda"] = diff_lambda;
      idx["n_discriminators"] = n_discriminators;
      break;
    case Method::FairBatch:
      idx["fairbatch_alpha"] = fairbatch_alpha;
      break;
    case Method::FairSCL:
      idx["fcl_lambda_y"] = fcl_lambda_y;
      idx["fcl_lambda_g"] = fcl_lambda_g;
      break;
    case Method::EO_CLA:
      idx["eo_cla_lambda"] = eo_cla_lambda;
      break;
    case Method::Standard:
    case Method::Gate:
      break;
  }
  if (INLP) idx["inlp_iterations"] = inlp_iterations;
  if (gate_soft) idx["gate_soft_grid"] = gate_soft_grid;
  return idx;
}

TrainConfig from_yaml_text(const std::string& text, const TrainConfig& base) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed YAML: ") + e.what());
  }
  TrainConfig cfg = base;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw Error(ErrorKind::Config, "configuration must be a YAML mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    const Field* f = find_field(key);
    if (!f) throw Error(ErrorKind::Config, "unknown configuration key '" + key + "'");
    set_from_yaml(cfg, *f, kv.second);
  }
  return cfg;
}

TrainConfig apply_yaml(const TrainConfig& base, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read configuration " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_yaml_text(ss.str(), base);
}

std::string to_yaml(const TrainConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  for (const auto& f : registry()) {
    out << YAML::Key << f.name << YAML::Value;
    std::visit(
        [&](auto member) {
          const auto& v = cfg.*member;
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) out << YAML::DoubleQuoted << v;
          else if constexpr (std::is_same_v<T, bool>) out << YAML::TrueFalseBool << v;
          else if constexpr (std::is_same_v<T, double>) out << format_real(v);
          else if constexpr (std::is_same_v<T, std::vector<Index>>) {
            out << YAML::Flow << YAML::BeginSeq;
            for (Index x : v) out << static_cast<long long>(x);
            out << YAML::EndSeq;
          } else out << std::to_string(v);
        },
        f.member);
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const TrainConfig& config) {
  TrainConfig c = config;
  c.results_dir.clear();
  c.conf_file.clear();
  const std::string text = to_yaml(c);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"fairkit train"};
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  for (const auto& f : registry()) {
    const std::string name = std::string("--") + f.name;
    if (std::holds_alternative<bool TrainConfig::*>(f.member)) app.add_flag(name, flags[f.name]);
    else app.add_option(name, values[f.name]);
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorKind::Config, e.what());
  }

  TrainConfig cfg;
  if (app.count("--conf_file")) cfg = apply_yaml(cfg, values["conf_file"]);
  for (const auto& f : registry()) {
    const std::string name = std::string("--") + f.name;
    if (!app.count(name)) continue;
    if (std::holds_alternative<bool TrainConfig::*>(f.member))
      cfg.*std::get<bool TrainConfig::*>(f.member) = flags[f.name];
    else set_from_string(cfg, f, values[f.name]);
  }
  return cfg;
}

}  // namespace fairkit::cli
