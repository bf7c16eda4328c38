#include "leafstress/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "leafstress/image.hpp"

namespace leafstress {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::InvalidConfig, "config key '" + key + "': " + why);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) bad(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) bad(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) bad(key, "empty list element");
    out.push_back(to_uint(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) bad(key, "empty list");
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string_view to_string(MixupHeads h) {
  switch (h) {
    case MixupHeads::both: return "both";
    case MixupHeads::stress_only: return "stress_only";
    case MixupHeads::severity_only: return "severity_only";
  }
  return "both";
}

// One entry per key: a reader applying the text to the config and a writer
// producing the canonical text back.
struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <typename Get>
Field dbl(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = to_double(k, v); },
          [get](const RunConfig& c) { return num(get(c)); }};
}

template <typename Get>
Field uint(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) {
            get(c) = static_cast<std::remove_cvref_t<decltype(get(c))>>(to_uint(k, v));
          },
          [get](const RunConfig& c) { return std::to_string(get(c)); }};
}

template <typename Get>
Field flag(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = to_bool(k, v); },
          [get](const RunConfig& c) { return std::string(get(c) ? "true" : "false"); }};
}

using Section = std::vector<std::pair<std::string, Field>>;

const std::vector<std::pair<std::string, Section>>& schema() {
  static const std::vector<std::pair<std::string, Section>> s = [] {
    std::vector<std::pair<std::string, Section>> out;
    out.push_back({"model",
                   {{"stem_width", uint([](auto& c) -> auto& { return c.model.stem_width; })},
                    {"stage_widths",
                     {[](RunConfig& c, const std::string& k, const std::string& v) { c.model.stage_widths = to_list(k, v); },
                      [](const RunConfig& c) { return list(c.model.stage_widths); }}},
                    {"blocks_per_stage",
                     {[](RunConfig& c, const std::string& k, const std::string& v) {
                        c.model.blocks_per_stage = to_list(k, v);
                      },
                      [](const RunConfig& c) { return list(c.model.blocks_per_stage); }}},
                    {"block_kind",
                     {[](RunConfig& c, const std::string&, const std::string& v) { c.model.block_kind = v; },
                      [](const RunConfig& c) { return c.model.block_kind; }}},
                    {"input_size", uint([](auto& c) -> auto& { return c.model.input_size; })},
                    {"mode",
                     {[](RunConfig& c, const std::string& k, const std::string& v) {
                        const auto m = parse_task_mode(v);
                        if (!m) bad(k, "unknown mode '" + v + "'");
                        c.model.mode = *m;
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.model.mode)); }}}}});
    out.push_back({"sgd",
                   {{"lr0", dbl([](auto& c) -> auto& { return c.sgd.lr0; })},
                    {"momentum", dbl([](auto& c) -> auto& { return c.sgd.momentum; })},
                    {"weight_decay", dbl([](auto& c) -> auto& { return c.sgd.weight_decay; })},
                    {"epochs", uint([](auto& c) -> auto& { return c.sgd.epochs; })},
                    {"batch_size", uint([](auto& c) -> auto& { return c.sgd.batch_size; })}}});
    out.push_back({"schedule",
                   {{"period", uint([](auto& c) -> auto& { return c.schedule.period; })},
                    {"half_first", flag([](auto& c) -> auto& { return c.schedule.half_first; })}}});
    out.push_back({"augment",
                   {{"enabled", flag([](auto& c) -> auto& { return c.augment_enabled; })},
                    {"hflip_prob", dbl([](auto& c) -> auto& { return c.augment.hflip_prob; })},
                    {"vflip_prob", dbl([](auto& c) -> auto& { return c.augment.vflip_prob; })},
                    {"rotation_range_deg", dbl([](auto& c) -> auto& { return c.augment.rotation_range_deg; })},
                    {"brightness_jitter", dbl([](auto& c) -> auto& { return c.augment.brightness_jitter; })},
                    {"contrast_jitter", dbl([](auto& c) -> auto& { return c.augment.contrast_jitter; })},
                    {"saturation_jitter", dbl([](auto& c) -> auto& { return c.augment.saturation_jitter; })},
                    {"mixup", flag([](auto& c) -> auto& { return c.augment.mixup_enabled; })},
                    {"mixup_alpha", dbl([](auto& c) -> auto& { return c.augment.mixup_alpha; })},
                    {"mixup_heads",
                     {[](RunConfig& c, const std::string& k, const std::string& v) {
                        if (v == "both") c.augment.mixup_heads = MixupHeads::both;
                        else if (v == "stress_only") c.augment.mixup_heads = MixupHeads::stress_only;
                        else if (v == "severity_only") c.augment.mixup_heads = MixupHeads::severity_only;
                        else bad(k, "unknown value '" + v + "'");
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.augment.mixup_heads)); }}}}});
    out.push_back({"split",
                   {{"train", dbl([](auto& c) -> auto& { return c.split.train; })},
                    {"val", dbl([](auto& c) -> auto& { return c.split.val; })},
                    {"test", dbl([](auto& c) -> auto& { return c.split.test; })},
                    {"stratify",
                     {[](RunConfig& c, const std::string& k, const std::string& v) {
                        if (v == "stress") c.split.stratify = StratifyOn::stress;
                        else if (v == "severity") c.split.stratify = StratifyOn::severity;
                        else bad(k, "unknown value '" + v + "'");
                      },
                      [](const RunConfig& c) {
                        return std::string(c.split.stratify == StratifyOn::stress ? "stress" : "severity");
                      }}},
                    {"respect_existing", flag([](auto& c) -> auto& { return c.split.respect_existing; })}}});
    out.push_back({"tsne",
                   {{"perplexity", dbl([](auto& c) -> auto& { return c.tsne.perplexity; })},
                    {"output_dim", uint([](auto& c) -> auto& { return c.tsne.output_dim; })},
                    {"iterations", uint([](auto& c) -> auto& { return c.tsne.iterations; })},
                    {"learning_rate", dbl([](auto& c) -> auto& { return c.tsne.learning_rate; })},
                    {"early_exaggeration", dbl([](auto& c) -> auto& { return c.tsne.early_exaggeration; })},
                    {"exaggeration_iters", uint([](auto& c) -> auto& { return c.tsne.exaggeration_iters; })},
                    {"initial_momentum", dbl([](auto& c) -> auto& { return c.tsne.initial_momentum; })},
                    {"final_momentum", dbl([](auto& c) -> auto& { return c.tsne.final_momentum; })},
                    {"momentum_switch_iter", uint([](auto& c) -> auto& { return c.tsne.momentum_switch_iter; })},
                    {"min_gain", dbl([](auto& c) -> auto& { return c.tsne.min_gain; })},
                    {"init_std", dbl([](auto& c) -> auto& { return c.tsne.init_std; })},
                    {"entropy_tol", dbl([](auto& c) -> auto& { return c.tsne.entropy_tol; })},
                    {"max_bisection_steps", uint([](auto& c) -> auto& { return c.tsne.max_bisection_steps; })},
                    {"standardize", flag([](auto& c) -> auto& { return c.tsne_standardize; })}}});
    out.push_back({"imaging",
                   {{"s_threshold", dbl([](auto& c) -> auto& { return c.imaging.s_threshold; })},
                    {"hue_lo", dbl([](auto& c) -> auto& { return c.imaging.hue_lo; })},
                    {"hue_hi", dbl([](auto& c) -> auto& { return c.imaging.hue_hi; })},
                    {"s_min", dbl([](auto& c) -> auto& { return c.imaging.s_min; })},
                    {"v_max", dbl([](auto& c) -> auto& { return c.imaging.v_max; })},
                    {"margin_frac", dbl([](auto& c) -> auto& { return c.imaging.margin_frac; })}}});
    out.push_back({"synth",
                   {{"image_size", uint([](auto& c) -> auto& { return c.synth.image_size; })},
                    {"per_class", uint([](auto& c) -> auto& { return c.synth.per_class; })},
                    {"kind",
                     {[](RunConfig& c, const std::string& k, const std::string& v) {
                        const auto kind = parse_kind(v);
                        if (!kind) bad(k, "unknown kind '" + v + "'");
                        c.synth.kind = *kind;
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.synth.kind)); }}}}});
    return out;
  }();
  return s;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields)
      if (k == key) return &f;
    return nullptr;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& [name, fields] : schema())
    if (name == section) return true;
  return false;
}

}  // namespace

void RunConfig::finalize() {
  split.seed = seed;
  synth.seed = seed;
  model.validate();
  sgd.validate();
  augment.validate();
  split.validate();
  synth.validate();
  if (imaging.margin_frac < 0.0 || imaging.s_threshold < 0.0 || imaging.s_threshold > 1.0)
    throw Error(ErrorKind::InvalidConfig, "imaging thresholds out of range");
}

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed config: ") + e.message() + " at line " +
                                              std::to_string(e.line()));
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name != "seed") bad(name, "unknown top-level key");
      cfg.seed = to_uint(name, node.data());
      continue;
    }
    if (!known_section(name)) throw Error(ErrorKind::InvalidConfig, "unknown config section [" + name + "]");
    for (const auto& [key, leaf] : node) {
      const Field* f = find_field(name, key);
      if (!f) bad(name + "." + key, "unknown key");
      f->read(cfg, name + "." + key, leaf.data());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), std::move(base));
}

std::string format_config(const RunConfig& cfg) {
  std::string out = "seed=" + std::to_string(cfg.seed) + "\n";
  for (const auto& [name, fields] : schema()) {
    out += "\n[" + name + "]\n";
    for (const auto& [key, f] : fields) out += key + "=" + f.write(cfg) + "\n";
  }
  return out;
}

}  // namespace leafstress
