#include "ddgcn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ddgcn/errors.hpp"

namespace ddgcn {

void RunConfig::validate() const {
  model.validate();
  if (lr_encoder <= 0.0 || lr_l2c <= 0.0 || lr_other <= 0.0) {
    throw ConfigError("config: learning rates must be positive");
  }
  if (lambda_lr <= 0.0) throw ConfigError("config: lambda_lr must be positive");
  if (lambda_min > lambda_max) throw ConfigError("config: lambda bounds are inverted");
  if (lambda_init < lambda_min || lambda_init > lambda_max) {
    throw ConfigError("config: lambda_init outside [" + std::to_string(lambda_min) + ", " +
                      std::to_string(lambda_max) + "]");
  }
  if (epochs == 0) throw ConfigError("config: epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("config: batch_size must be at least 1");
  if (max_posts == 0 || max_tokens == 0) {
    throw ConfigError("config: max_posts and max_tokens must be positive");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& origin, int line, const std::string& key,
                            const std::string& value, const std::string& want) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "' wants " + want +
                    ", got '" + value + "'");
}

bool parse_bool(const std::string& origin, int line, const std::string& key,
                const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  bad_value(origin, line, key, value, "a boolean (true/false/on/off/1/0)");
}

double parse_double(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    bad_value(origin, line, key, value, "a number");
  }
}

std::uint64_t parse_uint(const std::string& origin, int line, const std::string& key,
                         const std::string& value) {
  try {
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    bad_value(origin, line, key, value, "a non-negative integer");
  }
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string entry = trim(raw);
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": expected 'key = value', got '" +
                        entry + "'");
    }
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": empty key or value");
    }

    if (key == "d") cfg.model.d = parse_uint(origin, line, key, value);
    else if (key == "hid") cfg.model.hid = parse_uint(origin, line, key, value);
    else if (key == "depth") cfg.model.depth = parse_uint(origin, line, key, value);
    else if (key == "traits") cfg.model.traits = parse_uint(origin, line, key, value);
    else if (key == "mu") cfg.model.mu = parse_double(origin, line, key, value);
    else if (key == "eps") cfg.model.eps = parse_double(origin, line, key, value);
    else if (key == "dropout_encoder") cfg.model.dropout_encoder = parse_double(origin, line, key, value);
    else if (key == "dropout_other") cfg.model.dropout_other = parse_double(origin, line, key, value);
    else if (key == "variant") {
      if (value == "ddgcn") cfg.model.plain_gcn = false;
      else if (value == "gcn") cfg.model.plain_gcn = true;
      else bad_value(origin, line, key, value, "'ddgcn' or 'gcn'");
    } else if (key == "single_hop") cfg.model.single_hop = parse_bool(origin, line, key, value);
    else if (key == "undirected") cfg.model.undirected = parse_bool(origin, line, key, value);
    else if (key == "fixed_graph") cfg.model.fixed_graph = parse_bool(origin, line, key, value);
    else if (key == "fixed_graph_threshold") cfg.model.fixed_graph_threshold = parse_double(origin, line, key, value);
    else if (key == "no_special_node") cfg.model.no_special_node = parse_bool(origin, line, key, value);
    else if (key == "l0_enabled") cfg.model.l0_enabled = parse_bool(origin, line, key, value);
    else if (key == "encoder") {
      if (value == "bag") cfg.encoder = PayloadKind::tokens;
      else if (value == "vectors") cfg.encoder = PayloadKind::vectors;
      else bad_value(origin, line, key, value, "'bag' or 'vectors'");
    } else if (key == "lr_encoder") cfg.lr_encoder = parse_double(origin, line, key, value);
    else if (key == "lr_l2c") cfg.lr_l2c = parse_double(origin, line, key, value);
    else if (key == "lr_other") cfg.lr_other = parse_double(origin, line, key, value);
    else if (key == "lambda_init") cfg.lambda_init = parse_double(origin, line, key, value);
    else if (key == "lambda_lr") cfg.lambda_lr = parse_double(origin, line, key, value);
    else if (key == "lambda_ascent") cfg.lambda_ascent = parse_bool(origin, line, key, value);
    else if (key == "epochs") cfg.epochs = parse_uint(origin, line, key, value);
    else if (key == "batch_size") cfg.batch_size = parse_uint(origin, line, key, value);
    else if (key == "seed") {
      cfg.seed = parse_uint(origin, line, key, value);
      cfg.seed_from_file = true;
    }
    else if (key == "max_posts") cfg.max_posts = parse_uint(origin, line, key, value);
    else if (key == "max_tokens") cfg.max_tokens = parse_uint(origin, line, key, value);
    else {
      throw ConfigError(origin + ":" + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config_text(buf.str(), path);
}

}  // namespace ddgcn
