#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sssbathy/nn/fcn.hpp"

namespace sssbathy::nn {

enum class BlobType { F32, F64 };

// Checkpoint = <stem>.json descriptor + <stem>.bin blob. The descriptor holds
// the architecture config, a "tensors" index (name, shape, byte offset,
// element count) and free-form "meta" (epoch, metrics).

void write_checkpoint(const std::filesystem::path& stem, const FcnModel& model,
                      const nlohmann::json& meta = nlohmann::json::object(), BlobType type = BlobType::F64);

struct LoadedCheckpoint {
  FcnModel model;
  nlohmann::json meta;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& stem);

}  // namespace sssbathy::nn
