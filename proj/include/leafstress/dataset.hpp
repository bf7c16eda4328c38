#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leafstress/augment.hpp"
#include "leafstress/image.hpp"
#include "leafstress/labels.hpp"
#include "leafstress/rng.hpp"

namespace leafstress {

enum class SampleKind { leaf, symptom };
enum class Split { train, val, test };

std::string_view to_string(SampleKind k);
std::string_view to_string(Split s);
std::optional<SampleKind> parse_kind(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory unless absolute
  SampleKind kind = SampleKind::leaf;
  StressClass stress = StressClass::healthy;
  std::optional<SeverityClass> severity;
  std::optional<Split> split;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline constexpr std::string_view kManifestHeader = "path,kind,stress,severity,split";

/// Parses manifest text. Throws MissingHeader, UnknownLabel (message names row
/// and column) or MissingSeverity for a leaf row without severity.
std::vector<ManifestRecord> parse_manifest(std::string_view text);

/// Reads a manifest file; with `check_files`, every listed image must exist
/// relative to the manifest's directory (FileNotFound otherwise).
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path, bool check_files = false);

std::string format_manifest(const std::vector<ManifestRecord>& records);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

std::filesystem::path resolve_record_path(const std::filesystem::path& manifest_path, const ManifestRecord& r);

enum class StratifyOn { stress, severity };

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;
  StratifyOn stratify = StratifyOn::stress;
  bool respect_existing = false;

  void validate() const;
};

struct SplitResult {
  std::vector<ManifestRecord> records;
  std::vector<std::string> warnings;  // one per empty stratum
};

/// Per stratum in class order: seeded shuffle, floor(train·n) to train,
/// floor(val·n) to val, the remainder to test. Records keep their relative
/// manifest order in the output.
SplitResult stratified_split(const std::vector<ManifestRecord>& records, const SplitSpec& spec);

struct SplitCounts {
  std::size_t train;
  std::size_t val;
  std::size_t test;
};

SplitCounts split_counts(std::size_t n, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic leaf generator.

struct SymptomStyle {
  double hue;
  double hue_jitter;
  double s_lo, s_hi;
  double v_lo, v_hi;
};

struct SynthConfig {
  std::size_t image_size = 64;
  std::size_t per_class = 100;
  std::uint64_t seed = 0;
  SampleKind kind = SampleKind::leaf;
  /// Indexed by stress class; the healthy entry is unused.
  std::array<SymptomStyle, kNumClasses> styles{{
      {0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
      {50.0, 4.0, 0.40, 0.50, 0.82, 0.90},
      {28.0, 3.0, 0.85, 0.95, 0.90, 1.00},
      {10.0, 4.0, 0.70, 0.80, 0.45, 0.55},
      {30.0, 6.0, 0.35, 0.45, 0.20, 0.30},
  }};
  /// Leaf base hue per stress class, jittered by ±leaf_hue_jitter per image.
  std::array<double, kNumClasses> leaf_hue{{125.0, 117.0, 109.0, 101.0, 133.0}};
  double leaf_hue_jitter = 3.0;
  /// Symptom-to-leaf area ranges per severity class, inside the bins.
  std::array<std::array<double, 2>, kNumClasses> severity_ranges{{
      {0.0, 0.0}, {0.01, 0.03}, {0.06, 0.075}, {0.12, 0.135}, {0.20, 0.26}}};

  void validate() const;
};

struct SynthSample {
  ImageRGB image;
  Mask leaf;
  Mask symptom;
  StressClass stress;
  SeverityClass severity;
};

/// Draws one labelled leaf; retries blob placement until the binned mask
/// ratio equals `severity`.
SynthSample synth_sample(const SynthConfig& cfg, StressClass stress, SeverityClass severity, RngStream& rng);

/// Writes images/*.ppm, masks/*_leaf.pgm, masks/*_symptom.pgm and
/// manifest.csv under `out_dir`; returns the manifest records.
std::vector<ManifestRecord> generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Label plan: per_class images per stress class; diseased classes cycle
/// through the four non-healthy severity bins.
std::vector<std::pair<StressClass, SeverityClass>> synth_plan(const SynthConfig& cfg);

// ---------------------------------------------------------------------------

/// Builds a training sample from an image file and its manifest labels.
LabeledSample load_sample(const std::filesystem::path& image_path, const ManifestRecord& r);

}  // namespace leafstress
