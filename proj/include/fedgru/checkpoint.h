#pragma once

#include <filesystem>

#include "fedgru/gru.h"

namespace fedgru::grunet {

// JSON checkpoint, format version 1:
//   {"format": "fedgru-checkpoint", "version": 1,
//    "shape": {"input": 1, "hidden": [64,128,256], "gate_bias": false},
//    "layout": [{"name": "gru0.Wz", "offset": 0, "rows": 64, "cols": 1}, ...],
//    "params": [ ...flat values... ]}
// Doubles are written in shortest round-trip form, so save/load is exact.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Throws DataError on unreadable files, wrong format/version, or a layout
// that disagrees with the one rebuilt from the stored shape.
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fedgru::grunet
