#include "fedgru/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedgru/errors.h"

namespace fedgru::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// "value   ; note" -> "value". A comment marker needs whitespace before it.
std::string strip_inline_comment(const std::string& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if ((v[i] == ';' || v[i] == '#') && (v[i - 1] == ' ' || v[i - 1] == '\t')) return trim(v.substr(0, i));
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const std::string& expected) {
  throw ConfigError("invalid value '" + text + "' for " + key + ": expected " + expected);
}

double to_double(const std::string& key, const std::string& text, const std::string& expected) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad_value(key, text, expected);
  return v;
}

long to_long(const std::string& key, const std::string& text, const std::string& expected) {
  const auto t = trim(text);
  long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad_value(key, text, expected);
  return v;
}

double real_in(const std::string& key, const std::string& text, double lo, double hi, const std::string& range) {
  const double v = to_double(key, text, "a number in " + range);
  if (!(v >= lo && v <= hi)) bad_value(key, text, "a number in " + range);
  return v;
}

double positive(const std::string& key, const std::string& text) {
  const double v = to_double(key, text, "a number > 0");
  if (!(v > 0.0)) bad_value(key, text, "a number > 0");
  return v;
}

double non_negative(const std::string& key, const std::string& text) {
  const double v = to_double(key, text, "a number >= 0");
  if (!(v >= 0.0)) bad_value(key, text, "a number >= 0");
  return v;
}

long integer_at_least(const std::string& key, const std::string& text, long lo) {
  const std::string range = "an integer >= " + std::to_string(lo);
  const long v = to_long(key, text, range);
  if (v < lo) bad_value(key, text, range);
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, text, "true or false");
}

std::uint64_t to_seed(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad_value(key, text, "an unsigned 64-bit integer");
  return v;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const auto t = trim(v);
         if (t == "synthetic") c.data.source = DataSource::synthetic;
         else if (t == "trace") c.data.source = DataSource::trace;
         else bad_value(k, v, "synthetic or trace");
       }},
      {"data.trace_file", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.trace_file = trim(v); }},
      {"data.vehicles",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.data.mobility.vehicles = static_cast<std::size_t>(integer_at_least(k, v, 1));
       }},
      {"data.slots", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.slots = integer_at_least(k, v, 0); }},
      {"data.slot_len_s", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.slot_len_s = positive(k, v); }},
      {"data.area_km", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.area_km = positive(k, v); }},
      {"data.min_speed_mps", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.min_speed_mps = positive(k, v); }},
      {"data.max_speed_mps", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.max_speed_mps = positive(k, v); }},
      {"data.active_prob",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.mobility.active_prob = real_in(k, v, 0.0, 1.0, "[0,1]"); }},
      {"data.base_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.base_ms = non_negative(k, v); }},
      {"data.per_km_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.per_km_ms = non_negative(k, v); }},
      {"data.min_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.min_ms = non_negative(k, v); }},
      {"data.noise_std_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.noise_std_ms = non_negative(k, v); }},
      {"data.load_amplitude_ms",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.load_amplitude_ms = non_negative(k, v); }},
      {"data.load_period_slots",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.delay.load_period_slots = positive(k, v); }},

      {"federation.local_nodes",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.fed.num_local = static_cast<std::size_t>(integer_at_least(k, v, 1));
         c.fed.cluster_size = c.fed.num_local + 1;
       }},
      {"federation.rounds",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.fed.rounds = static_cast<int>(integer_at_least(k, v, 1)); }},
      {"federation.weights",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.fed.weights.clear();
         for (const auto& item : split_list(v)) c.fed.weights.push_back(positive(k, item));
       }},

      {"train.batch_len",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.batch_len = integer_at_least(k, v, 2); }},
      {"train.horizon",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.horizon = integer_at_least(k, v, 1);
         c.detect.horizon = c.train.horizon;
       }},
      {"train.epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.epochs = static_cast<int>(integer_at_least(k, v, 0)); }},
      {"train.lr", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.lr = positive(k, v); }},
      {"train.lr_drop_factor",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.lr_drop_factor = real_in(k, v, 0.0, 1.0, "(0,1]");
         if (c.train.lr_drop_factor == 0.0) bad_value(k, v, "a number in (0,1]");
       }},
      {"train.lr_drop_period",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.lr_drop_period = static_cast<int>(integer_at_least(k, v, 1)); }},
      {"train.grad_threshold", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.grad_threshold = positive(k, v); }},
      {"train.dropout",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.dropout_p = real_in(k, v, 0.0, 1.0, "[0,1)");
         if (c.train.dropout_p >= 1.0) bad_value(k, v, "a number in [0,1)");
       }},
      {"train.hidden",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const auto items = split_list(v);
         if (items.empty()) bad_value(k, v, "a comma separated list of positive layer sizes");
         c.shape.hidden.clear();
         for (const auto& item : items) c.shape.hidden.push_back(static_cast<std::size_t>(integer_at_least(k, item, 1)));
       }},
      {"train.gate_bias", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.shape.gate_bias = to_bool(k, v); }},

      {"attack.fraction", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.fractions = parse_fraction_list(v); }},
      {"attack.margin_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.attack.margin_ms = non_negative(k, v); }},
      {"attack.valid_min_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.attack.valid_min_ms = non_negative(k, v); }},
      {"attack.onset_slot", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.attack_onset = integer_at_least(k, v, -1); }},

      {"detect.threshold_ms", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detect.threshold_ms = positive(k, v); }},
      {"detect.rule",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.detect.rule = detector::verdict_rule_from_string(trim(v));
         } catch (const std::exception&) {
           bad_value(k, v, "mean, any_slot or majority");
         }
       }},

      {"run.seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_seed(k, v); }},
      {"run.out_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.out_dir = trim(v); }},
      {"run.execution",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const auto t = trim(v);
         if (t == "parallel") c.execution = Execution::parallel;
         else if (t == "serial") c.execution = Execution::serial;
         else bad_value(k, v, "parallel or serial");
       }},
      {"run.batch_sweep", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.batch_sweep = to_bool(k, v); }},
      {"run.batch_sizes",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.batch_sizes.clear();
         for (const auto& item : split_list(v)) c.batch_sizes.push_back(integer_at_least(k, item, 10));
         if (c.batch_sizes.empty()) bad_value(k, v, "a comma separated list of integers >= 10");
       }},
      {"run.evaluate_local_models",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.evaluate_local_models = to_bool(k, v); }},
      {"run.checkpoints", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.save_checkpoints = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.source == DataSource::trace && data.trace_file.empty())
    throw ConfigError("data.trace_file is required when data.source = trace");
  if (data.mobility.min_speed_mps > data.mobility.max_speed_mps)
    throw ConfigError("data.min_speed_mps must not exceed data.max_speed_mps");
  fed.validate();
  train.validate();
  detect.validate();
  if (detect.horizon != train.horizon) throw ConfigError("detection horizon must equal train.horizon");
  if (shape.hidden.empty()) throw ConfigError("train.hidden must list at least one layer");
  if (fractions.empty()) throw ConfigError("attack.fraction must list at least one value");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fraction must lie in [0,1]");
  auto probe = attack;
  probe.fraction = fractions.front();
  probe.start_slot = onset_slot();
  probe.validate();
  for (long s : batch_sizes)
    if (s < 10) throw ConfigError("run.batch_sizes entries must be at least 10");
}

std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) throw ConfigError("invalid fraction '" + item + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("fraction must lie in [0,1]");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("fraction list is empty");
  return out;
}

ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("malformed config (line " + std::to_string(e.line()) + "): " + e.message());
  }

  ExperimentConfig config;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("unknown config key '" + section + "' (keys belong in a [section])");
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown config key '" + key + "' in section [" + section + "]");
      it->second(config, full, strip_inline_comment(node.get_value<std::string>()));
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

}  // namespace fedgru::cli
