#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "leafstress/augment.hpp"
#include "leafstress/dataset.hpp"
#include "leafstress/image.hpp"
#include "leafstress/model.hpp"
#include "leafstress/optim.hpp"
#include "leafstress/tsne.hpp"

namespace leafstress {

/// Every tunable of a run. INI sections: [model] [sgd] [schedule] [augment]
/// [split] [tsne] [imaging] [synth]; `seed` sits above the first section.
struct RunConfig {
  std::uint64_t seed = 0;
  ArchConfig model{.input_size = 64};
  SgdConfig sgd{.epochs = 30};
  LrSchedule schedule;
  AugmentConfig augment;
  bool augment_enabled = true;
  SplitSpec split;
  TsneConfig tsne;
  bool tsne_standardize = false;
  ImagingConfig imaging;
  SynthConfig synth;

  /// Pushes `seed` into split and synth and validates every section.
  void finalize();
};

/// Overlays INI text on `base`. Unknown sections/keys and malformed values
/// raise InvalidConfig naming the key.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Complete INI text; parse_config(format_config(c)) == c field for field.
std::string format_config(const RunConfig& cfg);

}  // namespace leafstress
