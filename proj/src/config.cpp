// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eanet/error.hpp"
#include "src/text_util.hpp"

namespace eanet {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(key + ": '" + v + "' is not a boolean");
}

std::string to_string(DataSource s) { return s == DataSource::Synth ? "synth" : "csv"; }

DataSource data_source_from_string(const std::string& v) {
  if (v == "synth") return DataSource::Synth;
  if (v == "csv") return DataSource::Csv;
  throw ConfigError("data.source: unknown source '" + v + "' (expected synth or csv)");
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& cell : split(v, ',')) out.push_back(parse_double(cell, key));
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

bool is_model_key(const std::string& key) {
  static const KeyValues known = to_key_values(ModelConfig{});
  return known.count(key) > 0;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& run_setters() {
  static const std::map<std::string, Setter> setters = {
      {"seed", [](RunConfig& c, const std::string& v, const std::string& k) { c.seed = parse_size(v, k); }},
      {"out", [](RunConfig& c, const std::string& v, const std::string&) { c.out = v; }},
      {"optim.kind",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.optimizer.kind = optimizer_kind_from_string(v);
       }},
      {"optim.lr", [](RunConfig& c, const std::string& v, const std::string& k) { c.optimizer.lr = parse_double(v, k); }},
      {"optim.beta1",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.optimizer.beta1 = parse_double(v, k); }},
      {"optim.beta2",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.optimizer.beta2 = parse_double(v, k); }},
      {"optim.eps", [](RunConfig& c, const std::string& v, const std::string& k) { c.optimizer.eps = parse_double(v, k); }},
      {"optim.clip_norm",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.optimizer.clip_norm = parse_double(v, k); }},
      {"train.epochs", [](RunConfig& c, const std::string& v, const std::string& k) { c.epochs = parse_size(v, k); }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.batch_size = parse_size(v, k); }},
      {"train.patience", [](RunConfig& c, const std::string& v, const std::string& k) { c.patience = parse_size(v, k); }},
      {"train.target_metric",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.target_metric = v == "none" ? std::numeric_limits<double>::quiet_NaN() : parse_double(v, k);
       }},
      {"pretrain.mask_rate",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.mask_rate = parse_double(v, k); }},
      {"finetune.init", [](RunConfig& c, const std::string& v, const std::string&) { c.init_checkpoint = v; }},
      {"data.source",
       [](RunConfig& c, const std::string& v, const std::string&) { c.source = data_source_from_string(v); }},
      {"data.train", [](RunConfig& c, const std::string& v, const std::string&) { c.train_path = v; }},
      {"data.test", [](RunConfig& c, const std::string& v, const std::string&) { c.test_path = v; }},
      {"data.standardize",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.standardize = parse_bool(v, k); }},
      {"data.valid_fraction",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.valid_fraction = parse_double(v, k); }},
      {"data.synth.task",
       [](RunConfig& c, const std::string& v, const std::string&) { c.synth.task = synth_task_from_string(v); }},
      {"data.synth.length",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.length = parse_size(v, k); }},
      {"data.synth.channels",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.channels = parse_size(v, k); }},
      {"data.synth.n_classes",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.n_classes = parse_size(v, k); }},
      {"data.synth.frequencies",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.frequencies = parse_list(v, k); }},
      {"data.synth.noise",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.noise = parse_double(v, k); }},
      {"data.synth.train_per_class",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.train_per_class = parse_size(v, k); }},
      {"data.synth.test_per_class",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.test_per_class = parse_size(v, k); }},
      {"data.synth.train_count",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.train_count = parse_size(v, k); }},
      {"data.synth.test_count",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.test_count = parse_size(v, k); }},
      {"data.synth.min_frequency",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.min_frequency = parse_double(v, k); }},
      {"data.synth.max_frequency",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.max_frequency = parse_double(v, k); }},
      {"data.synth.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) { c.synth.seed = parse_size(v, k); }},
  };
  return setters;
}

}  // namespace

void set_run_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  if (is_model_key(key)) {
    config.model = model_config_from_key_values({{key, value}}, config.model);
  } else {
    auto it = run_setters().find(key);
    if (it == run_setters().end()) throw ConfigError("unknown key '" + key + "'");
    it->second(config, value, key);
  }
  config.explicit_keys.insert(key);
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string where = origin + ":" + std::to_string(line_no) + ": ";
    std::string line(trim(raw.substr(0, raw.find('#'))));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected 'key = value'");
    std::string key(trim(std::string_view(line).substr(0, eq)));
    std::string value(trim(std::string_view(line).substr(eq + 1)));
    if (key.empty()) throw ParseError(where + "empty key");
    if (auto it = seen.find(key); it != seen.end())
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " +
                        std::to_string(it->second) + ")");
    seen[key] = line_no;
    try {
      set_run_config_value(config, key, value);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), path);
}

void RunConfig::validate() const {
  model.validate();
  if (epochs == 0) throw ConfigError("train.epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("pretrain.mask_rate must lie in (0, 1)");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0))
    throw ConfigError("data.valid_fraction must lie in [0, 1)");
  if (!(optimizer.lr >= 0.0) || !std::isfinite(optimizer.lr)) throw ConfigError("optim.lr must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw ConfigError("optim.eps must be positive");
  if (!(optimizer.clip_norm >= 0.0)) throw ConfigError("optim.clip_norm must be >= 0");
  if (source == DataSource::Synth) {
    if (synth.length == 0 || synth.channels == 0) throw ConfigError("data.synth: length and channels must be positive");
    if (synth.task == SynthTask::FreqClass && synth.n_classes < 2)
      throw ConfigError("data.synth.n_classes must be at least 2");
    if (!synth.frequencies.empty() && synth.frequencies.size() != synth.n_classes)
      throw ConfigError("data.synth.frequencies needs one entry per class");
  }
}

std::vector<std::string> RunConfig::warnings() const {
  std::vector<std::string> out = model.grid_warnings();
  if (optimizer.kind != OptimizerKind::RAdam) out.push_back("optim.kind: the published setup uses radam");
  if (optimizer.lr != 1e-3) out.push_back("optim.lr = " + format_double(optimizer.lr) + " (published: 0.001)");
  if (mask_rate != 0.15) out.push_back("pretrain.mask_rate = " + format_double(mask_rate) + " (published: 0.15)");
  return out;
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv = to_key_values(c.model);
  kv["seed"] = std::to_string(c.seed);
  kv["out"] = c.out;
  kv["optim.kind"] = to_string(c.optimizer.kind);
  kv["optim.lr"] = format_double(c.optimizer.lr);
  kv["optim.beta1"] = format_double(c.optimizer.beta1);
  kv["optim.beta2"] = format_double(c.optimizer.beta2);
  kv["optim.eps"] = format_double(c.optimizer.eps);
  kv["optim.clip_norm"] = format_double(c.optimizer.clip_norm);
  kv["train.epochs"] = std::to_string(c.epochs);
  kv["train.batch_size"] = std::to_string(c.batch_size);
  kv["train.patience"] = std::to_string(c.patience);
  kv["train.target_metric"] = std::isnan(c.target_metric) ? "none" : format_double(c.target_metric);
  kv["pretrain.mask_rate"] = format_double(c.mask_rate);
  kv["finetune.init"] = c.init_checkpoint;
  kv["data.source"] = to_string(c.source);
  kv["data.train"] = c.train_path;
  kv["data.test"] = c.test_path;
  kv["data.standardize"] = c.standardize ? "true" : "false";
  kv["data.valid_fraction"] = format_double(c.valid_fraction);
  kv["data.synth.task"] = to_string(c.synth.task);
  kv["data.synth.length"] = std::to_string(c.synth.length);
  kv["data.synth.channels"] = std::to_string(c.synth.channels);
  kv["data.synth.n_classes"] = std::to_string(c.synth.n_classes);
  kv["data.synth.frequencies"] = format_list(c.synth.frequencies);
  kv["data.synth.noise"] = format_double(c.synth.noise);
  kv["data.synth.train_per_class"] = std::to_string(c.synth.train_per_class);
  kv["data.synth.test_per_class"] = std::to_string(c.synth.test_per_class);
  kv["data.synth.train_count"] = std::to_string(c.synth.train_count);
  kv["data.synth.test_count"] = std::to_string(c.synth.test_count);
  kv["data.synth.min_frequency"] = format_double(c.synth.min_frequency);
  kv["data.synth.max_frequency"] = format_double(c.synth.max_frequency);
  kv["data.synth.seed"] = std::to_string(c.synth.seed);
  return kv;
}

std::string format_run_config(const RunConfig& config) {
  std::string out = "# effective configuration\n";
  for (const auto& [k, v] : to_key_values(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace eanet
