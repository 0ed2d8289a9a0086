#include "ssf/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ssf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(int line, const std::string& key, const std::string& value, const std::string& want) {
  fail(Errc::invalid_config, "line " + std::to_string(line) + ": " + key + "=" + value + " (expected " + want + ")");
}

template <class I>
I parse_int(int line, const std::string& key, const std::string& v, I lo) {
  I out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || out < lo) bad_value(line, key, v, "integer >= " + std::to_string(lo));
  return out;
}

double parse_double(int line, const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(line, key, v, "number");
  }
  if (used != v.size() || !(out >= 0.0)) bad_value(line, key, v, "non-negative number");
  return out;
}

bool parse_switch(int line, const std::string& key, const std::string& v) {
  if (v == "on" || v == "true") return true;
  if (v == "off" || v == "false") return false;
  bad_value(line, key, v, "on|off|true|false");
}

using Setter = std::function<void(RunConfig&, int, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.scale",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) {
         if (v != "tiny" && v != "small") bad_value(l, k, v, "tiny|small");
         c.model_scale = v;
       }},
      {"pld.fusion",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) {
         if (v == "cat") c.fusion = FusionMode::cat;
         else if (v == "add") c.fusion = FusionMode::add;
         else bad_value(l, k, v, "cat|add");
       }},
      {"pld.le", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.le = parse_switch(l, k, v); }},
      {"pld.sfa", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.sfa = parse_switch(l, k, v); }},
      {"pld.dim", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.pld_dim = parse_int<int>(l, k, v, 1); }},
      {"train.epochs", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.epochs = parse_int<int>(l, k, v, 0); }},
      {"train.batch", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.batch = parse_int<int>(l, k, v, 1); }},
      {"train.lr", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.lr = parse_double(l, k, v); }},
      {"train.weight_decay",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.weight_decay = parse_double(l, k, v); }},
      {"train.augment", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.augment = parse_switch(l, k, v); }},
      {"train.seed",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(l, k, v, 0); }},
      {"data.size",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) {
         c.size = parse_int<int>(l, k, v, 32);
         if (c.size % 32 != 0) bad_value(l, k, v, "a multiple of 32");
       }},
      {"data.dir", [](RunConfig& c, int, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"data.val_dir", [](RunConfig& c, int, const std::string&, const std::string& v) { c.val_dir = v; }},
      {"data.synthetic",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.synthetic = parse_switch(l, k, v); }},
      {"data.train_n", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.train_n = parse_int<int>(l, k, v, 1); }},
      {"data.val_n", [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.val_n = parse_int<int>(l, k, v, 0); }},
      {"data.seed",
       [](RunConfig& c, int l, const std::string& k, const std::string& v) { c.data_seed = parse_int<std::uint64_t>(l, k, v, 0); }},
  };
  return table;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.encoder = model_scale == "small" ? EncoderConfig::small() : EncoderConfig::tiny();
  m.pld.unified_dim = pld_dim;
  m.pld.fusion = fusion;
  m.pld.le_enabled = le;
  m.pld.sfa_enabled = sfa;
  return m;
}

FitOptions RunConfig::fit_options() const {
  FitOptions f;
  f.epochs = epochs;
  f.train.batch_size = batch;
  f.train.augment = augment;
  f.schedule.base_lr = lr;
  f.schedule.total_epochs = std::max(epochs, 1);
  f.adamw.lr = lr;
  f.adamw.weight_decay = weight_decay;
  f.seed = mix_seed(seed, fnv1a("train"));
  return f;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.source_text = text;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto body = raw.substr(0, raw.find('#'));
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(Errc::invalid_config, "line " + std::to_string(line) + ": expected key=value, got '" + body + "'");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) fail(Errc::invalid_config, "line " + std::to_string(line) + ": unknown key '" + key + "'");
    it->second(cfg, line, key, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::invalid_config, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

std::string render_run_config(const RunConfig& c) {
  std::ostringstream o;
  const auto sw = [](bool b) { return b ? "on" : "off"; };
  o << "model.scale=" << c.model_scale << "\n"
    << "pld.fusion=" << (c.fusion == FusionMode::cat ? "cat" : "add") << "\n"
    << "pld.le=" << sw(c.le) << "\n"
    << "pld.sfa=" << sw(c.sfa) << "\n"
    << "pld.dim=" << c.pld_dim << "\n"
    << "train.epochs=" << c.epochs << "\n"
    << "train.batch=" << c.batch << "\n"
    << "train.lr=" << fmt_double(c.lr) << "\n"
    << "train.weight_decay=" << fmt_double(c.weight_decay) << "\n"
    << "train.augment=" << sw(c.augment) << "\n"
    << "train.seed=" << c.seed << "\n"
    << "data.size=" << c.size << "\n"
    << "data.dir=" << c.data_dir << "\n"
    << "data.val_dir=" << c.val_dir << "\n"
    << "data.synthetic=" << sw(c.synthetic) << "\n"
    << "data.train_n=" << c.train_n << "\n"
    << "data.val_n=" << c.val_n << "\n"
    << "data.seed=" << c.data_seed << "\n";
  return o.str();
}

}  // namespace ssf

namespace ssf {

std::uint64_t validation_seed(std::uint64_t data_seed) { return mix_seed(data_seed, fnv1a("validation")); }

RunData load_run_data(const RunConfig& cfg) {
  RunData d;
  if (!cfg.data_dir.empty()) {
    d.train = load_dataset(cfg.data_dir, cfg.size);
    if (!cfg.val_dir.empty()) d.val = load_dataset(cfg.val_dir, cfg.size);
  } else if (cfg.synthetic) {
    d.train = synth_dataset(cfg.train_n, cfg.size, cfg.data_seed);
    if (cfg.val_n > 0) d.val = synth_dataset(cfg.val_n, cfg.size, validation_seed(cfg.data_seed));
  } else {
    fail(Errc::invalid_config, "data.dir is empty and data.synthetic=off");
  }
  if (d.train.empty()) fail(Errc::format_error, "no samples in " + cfg.data_dir);
  return d;
}

}  // namespace ssf
