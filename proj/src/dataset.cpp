#include "leafstress/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace leafstress {

namespace {

constexpr std::uint64_t kSplitTag = 0x53504c54;  // "SPLT"
constexpr std::uint64_t kSynthTag = 0x53594e54;  // "SYNT"
constexpr std::size_t kMaxSynthAttempts = 200;

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

[[noreturn]] void unknown(std::size_t row, std::string_view column, std::string_view value) {
  throw Error(ErrorKind::UnknownLabel,
              "row " + std::to_string(row) + ", column " + std::string(column) + ": unknown label '" +
                  std::string(value) + "'");
}

float quantize(double v) { return static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0); }

double uniform(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

void set_pixel(ImageRGB& img, std::size_t y, std::size_t x, double h, double s, double v) {
  if (h < 0.0) h += 360.0;
  const auto rgb = hsv_to_rgb(h, s, v);
  for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = quantize(rgb[c]);
}

}  // namespace

std::string_view to_string(SampleKind k) { return k == SampleKind::leaf ? "leaf" : "symptom"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<SampleKind> parse_kind(std::string_view s) {
  if (s == "leaf") return SampleKind::leaf;
  if (s == "symptom") return SampleKind::symptom;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  for (auto v : {Split::train, Split::val, Split::test})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<ManifestRecord> out;
  std::size_t line_no = 0;
  bool header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!header) {
      if (line != kManifestHeader)
        throw Error(ErrorKind::MissingHeader, "manifest must start with '" + std::string(kManifestHeader) + "'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5)
      throw Error(ErrorKind::UnknownLabel,
                  "row " + std::to_string(line_no) + ": expected 5 columns, found " + std::to_string(cells.size()));
    ManifestRecord r;
    r.path = std::string(trim(cells[0]));
    if (r.path.empty()) unknown(line_no, "path", "");
    const auto kind = parse_kind(trim(cells[1]));
    if (!kind) unknown(line_no, "kind", trim(cells[1]));
    r.kind = *kind;
    const auto stress = parse_stress(trim(cells[2]));
    if (!stress) unknown(line_no, "stress", trim(cells[2]));
    r.stress = *stress;
    if (const auto sev = trim(cells[3]); !sev.empty()) {
      const auto parsed = parse_severity(sev);
      if (!parsed) unknown(line_no, "severity", sev);
      r.severity = *parsed;
    } else if (r.kind == SampleKind::leaf) {
      throw Error(ErrorKind::MissingSeverity, "row " + std::to_string(line_no) + ": leaf record without severity");
    }
    if (const auto sp = trim(cells[4]); !sp.empty()) {
      const auto parsed = parse_split(sp);
      if (!parsed) unknown(line_no, "split", sp);
      r.split = *parsed;
    }
    out.push_back(std::move(r));
  }
  if (!header) throw Error(ErrorKind::MissingHeader, "manifest is empty");
  return out;
}

std::filesystem::path resolve_record_path(const std::filesystem::path& manifest_path, const ManifestRecord& r) {
  const std::filesystem::path p(r.path);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path, bool check_files) {
  const auto bytes = read_file_bytes(path);
  auto records = parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (check_files)
    for (const auto& r : records) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(resolve_record_path(path, r), ec))
        throw Error(ErrorKind::FileNotFound, "listed image not found: " + r.path);
    }
  return records;
}

std::string format_manifest(const std::vector<ManifestRecord>& records) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.path;
    out += ',';
    out += to_string(r.kind);
    out += ',';
    out += to_string(r.stress);
    out += ',';
    if (r.severity) out += to_string(*r.severity);
    out += ',';
    if (r.split) out += to_string(*r.split);
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  const auto text = format_manifest(records);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void SplitSpec::validate() const {
  if (!(train >= 0.0 && val >= 0.0 && test >= 0.0) || std::abs(train + val + test - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidConfig, "split fractions must be non-negative and sum to 1");
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
  const auto tr = static_cast<std::size_t>(std::floor(spec.train * double(n) + 1e-9));
  const auto va = static_cast<std::size_t>(std::floor(spec.val * double(n) + 1e-9));
  return {tr, va, n - tr - va};
}

SplitResult stratified_split(const std::vector<ManifestRecord>& records, const SplitSpec& spec) {
  spec.validate();
  SplitResult out{records, {}};
  // Strata: one per class in enum order, plus one for records without severity.
  std::vector<std::vector<std::size_t>> strata(kNumClasses + 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.split) {
      if (spec.respect_existing) continue;
      throw Error(ErrorKind::InvalidParameter, "record '" + r.path + "' already has a split; enable respect_existing");
    }
    const std::size_t s = spec.stratify == StratifyOn::stress ? static_cast<std::size_t>(r.stress)
                          : r.severity                        ? static_cast<std::size_t>(*r.severity)
                                                              : kNumClasses;
    strata[s].push_back(i);
  }
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto& members = strata[s];
    if (members.empty()) {
      if (s < kNumClasses)
        out.warnings.push_back(std::string("empty class '") +
                               std::string(spec.stratify == StratifyOn::stress
                                               ? to_string(static_cast<StressClass>(s))
                                               : to_string(static_cast<SeverityClass>(s))) +
                               "' skipped");
      continue;
    }
    RngStream rng(spec.seed, stream_key({kSplitTag, s}));
    for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng.uniform_index(i + 1)]);
    const auto c = split_counts(members.size(), spec);
    for (std::size_t i = 0; i < members.size(); ++i)
      out.records[members[i]].split = i < c.train ? Split::train : i < c.train + c.val ? Split::val : Split::test;
  }
  return out;
}

void SynthConfig::validate() const {
  if (image_size < 16) throw Error(ErrorKind::InvalidConfig, "synthetic image size must be at least 16");
  if (per_class == 0) throw Error(ErrorKind::InvalidConfig, "per-class count must be positive");
  if (leaf_hue_jitter < 0.0) throw Error(ErrorKind::InvalidConfig, "leaf hue jitter must be non-negative");
  for (double h : leaf_hue)
    if (h - leaf_hue_jitter < 70.0 || h + leaf_hue_jitter > 160.0)
      throw Error(ErrorKind::InvalidConfig, "leaf hues must stay green (70..160 degrees)");
  for (std::size_t s = 1; s < kNumClasses; ++s) {
    const auto [lo, hi] = severity_ranges[s];
    if (!(lo > 0.0 && lo <= hi) || bin_severity(lo) != static_cast<SeverityClass>(s) ||
        bin_severity(hi) != static_cast<SeverityClass>(s))
      throw Error(ErrorKind::InvalidConfig, "severity range for '" +
                                                std::string(to_string(static_cast<SeverityClass>(s))) +
                                                "' must lie inside its bin");
  }
}

SynthSample synth_sample(const SynthConfig& cfg, StressClass stress, SeverityClass severity, RngStream& rng) {
  if ((stress == StressClass::healthy) != (severity == SeverityClass::healthy))
    throw Error(ErrorKind::InvalidParameter, "healthy stress and healthy severity go together");
  const std::size_t n = cfg.image_size;
  const double scale = double(n) / 64.0;
  SynthSample out{ImageRGB(n, n, {1.0f, 1.0f, 1.0f}), Mask(n, n), Mask(n, n), stress, severity};

  const double cx = (double(n) - 1.0) / 2.0 + uniform(rng, -3.0, 3.0) * scale;
  const double cy = (double(n) - 1.0) / 2.0 + uniform(rng, -3.0, 3.0) * scale;
  const double a = uniform(rng, 0.32, 0.42) * double(n);
  const double b = a * uniform(rng, 0.60, 0.70);
  const double theta = uniform(rng, -15.0, 15.0) * std::numbers::pi / 180.0;
  const double hue = cfg.leaf_hue[static_cast<std::size_t>(stress)] + uniform(rng, -cfg.leaf_hue_jitter, cfg.leaf_hue_jitter);
  const double sat = uniform(rng, 0.55, 0.85);
  const double val = uniform(rng, 0.45, 0.75);
  const double cs = std::cos(theta), sn = std::sin(theta);

  std::vector<std::pair<std::size_t, std::size_t>> leaf_px;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      const double u = dx * cs + dy * sn, v = -dx * sn + dy * cs;
      if ((u * u) / (a * a) + (v * v) / (b * b) > 1.0) continue;
      out.leaf.set(y, x);
      leaf_px.emplace_back(y, x);
      set_pixel(out.image, y, x, hue + uniform(rng, -3.0, 3.0), sat, val + uniform(rng, -0.04, 0.04));
    }
  if (stress == StressClass::healthy) return out;

  const auto& style = cfg.styles[static_cast<std::size_t>(stress)];
  const auto [lo, hi] = cfg.severity_ranges[static_cast<std::size_t>(severity)];
  const double leaf_area = double(leaf_px.size());
  for (std::size_t attempt = 0; attempt < kMaxSynthAttempts; ++attempt) {
    Mask sym(n, n);
    std::size_t count = 0;
    const double need = uniform(rng, lo, hi) * leaf_area;
    while (double(count) < need) {
      const auto [by, bx] = leaf_px[rng.uniform_index(leaf_px.size())];
      const double r = uniform(rng, 1.2, 3.0) * scale;
      const auto ri = static_cast<std::ptrdiff_t>(std::ceil(r));
      for (std::ptrdiff_t oy = -ri; oy <= ri; ++oy)
        for (std::ptrdiff_t ox = -ri; ox <= ri; ++ox) {
          const std::ptrdiff_t y = std::ptrdiff_t(by) + oy, x = std::ptrdiff_t(bx) + ox;
          if (y < 0 || x < 0 || y >= std::ptrdiff_t(n) || x >= std::ptrdiff_t(n)) continue;
          if (double(oy * oy + ox * ox) > r * r || !out.leaf.at(y, x) || sym.at(y, x)) continue;
          sym.set(y, x);
          ++count;
        }
    }
    if (bin_severity(double(count) / leaf_area) != severity) continue;
    out.symptom = std::move(sym);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        if (out.symptom.at(y, x))
          set_pixel(out.image, y, x, style.hue + uniform(rng, -style.hue_jitter, style.hue_jitter),
                    uniform(rng, style.s_lo, style.s_hi), uniform(rng, style.v_lo, style.v_hi));
    return out;
  }
  throw Error(ErrorKind::InvalidConfig, "could not place symptoms for the requested severity");
}

std::vector<std::pair<StressClass, SeverityClass>> synth_plan(const SynthConfig& cfg) {
  std::vector<std::pair<StressClass, SeverityClass>> plan;
  for (std::size_t s = 0; s < kNumClasses; ++s)
    for (std::size_t i = 0; i < cfg.per_class; ++i)
      plan.emplace_back(static_cast<StressClass>(s),
                        s == 0 ? SeverityClass::healthy : static_cast<SeverityClass>(1 + i % 4));
  return plan;
}

std::vector<ManifestRecord> generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  const auto plan = synth_plan(cfg);
  std::vector<ManifestRecord> records;
  for (std::size_t g = 0; g < plan.size(); ++g) {
    RngStream rng(cfg.seed, stream_key({kSynthTag, g}));
    const auto s = synth_sample(cfg, plan[g].first, plan[g].second, rng);
    char stem[96];
    std::snprintf(stem, sizeof stem, "%s_%04zu", std::string(to_string(s.stress)).c_str(), g);
    const std::string image = std::string("images/") + stem + ".ppm";
    write_ppm(out_dir / image, s.image);
    write_mask(out_dir / "masks" / (std::string(stem) + "_leaf.pgm"), s.leaf);
    write_mask(out_dir / "masks" / (std::string(stem) + "_symptom.pgm"), s.symptom);
    ManifestRecord r{image, cfg.kind, s.stress, std::nullopt, std::nullopt};
    if (cfg.kind == SampleKind::leaf) r.severity = s.severity;
    records.push_back(std::move(r));
  }
  write_manifest(out_dir / "manifest.csv", records);
  return records;
}

LabeledSample load_sample(const std::filesystem::path& image_path, const ManifestRecord& r) {
  LabeledSample s;
  s.image = to_tensor(read_image(image_path));
  s.y_stress = one_hot(static_cast<std::size_t>(r.stress));
  if (r.severity) s.y_severity = one_hot(static_cast<std::size_t>(*r.severity));
  return s;
}

}  // namespace leafstress
