#pragma once

#include <filesystem>

#include "rationalift/model.h"
#include "rationalift/run_config.h"

namespace rationalift {

// Single-file archive: an 8-byte magic, a little-endian u64 header length, a
// JSON header (model config, run config echo, vocabulary, tensor index) and
// the raw float64 tensor data in index order. Round trips are bit-exact.
void save_checkpoint(const std::filesystem::path& path, RationaleModel& model,
                     const KeyValues& echo = {});

struct LoadedCheckpoint {
  RationaleModel model;
  KeyValues echo;
};

// Throws ConfigError if the file is missing, DataError if it is corrupt.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rationalift
