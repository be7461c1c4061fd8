#pragma once

// Everything a run depends on, persisted as flat `key = value` lines so the
// exact settings travel with every output directory.

#include <cstdint>
#include <filesystem>
#include <string>

#include "hyper/autoencoder.hpp"
#include "hyper/meta_offline.hpp"
#include "hyper/online_search.hpp"

namespace hyper {

struct RunConfig {
  std::uint64_t seed = 0;
  HpAxes axes;
  HnSettings hn;
  ExtractorOptions extractor;
  EncoderOptions encoder;
  GbdtOptions gbdt;
  SearchOptions search;
  // Used only to produce ground truth for evaluation.
  ScratchTrainOptions scratch;
  std::string store_dir;
  std::string output_dir;

  MetaOptions meta_options() const;

  std::string to_text() const;
  // Unknown keys, malformed values and duplicate keys raise ParseError with
  // the line number. Keys not present keep their defaults.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace hyper
