#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fcrseg/net.hpp"
#include "fcrseg/trainer.hpp"

namespace fcrseg {

/// Everything a training run needs, as flat `key = value` text.
struct RunConfig {
  NetConfig net;
  TrainConfig train;
  std::string data_dir;
  std::string out_dir = "run";
  int focal_plane = 16;

  /// Full-scale recipe: 512x512 input, 16 base filters, 600 epochs.
  static RunConfig full();
  /// 128x128 synthetic blobs, 8 base filters, depth 4, 60 epochs.
  static RunConfig desk();

  /// Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string serialize() const;
  /// Applies `key = value` lines on top of `base`; '#' starts a comment.
  static RunConfig parse(std::string_view text, RunConfig base = full());
  static RunConfig load(const std::filesystem::path& path, RunConfig base = full());
  void save(const std::filesystem::path& path) const;
};

std::string format_schedule(const ActivationSpec& spec);
/// "0:2,80:2,160:4" -> schedule entries.
ActivationSpec parse_schedule(const std::string& text);

}  // namespace fcrseg
