#pragma once

// Single-file model container:
//
//   "XASTNN1" | u32 version | u64 n + n bytes JSON metadata | u32 tensor count |
//   per tensor: u32 n + name | u8 dtype (0 f32, 1 f64) | u8 rank | u64 dims[rank] | raw values
//
// All integers and values little-endian. The metadata holds the training and
// model configuration and the vocabulary.

#include <string>
#include <variant>

#include "model.hpp"
#include "trainer.hpp"

namespace xastnn {

inline constexpr char kCheckpointMagic[] = "XASTNN1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::string& path, Model<T>& model, const TrainConfig& config);

struct LoadedCheckpoint {
  TrainConfig config;
  std::variant<Model<float>, Model<double>> model;

  Precision precision() const {
    return std::holds_alternative<Model<float>>(model) ? Precision::kF32 : Precision::kF64;
  }
};

LoadedCheckpoint load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& doc);

}  // namespace xastnn
