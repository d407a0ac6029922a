#pragma once

#include <string>

#include <json.hpp>

#include "eostb/tinylm.hpp"
#include "eostb/train.hpp"

// Binary checkpoint: "EOSTBCKP", u32 format version, u64 header length, a
// JSON header (model config, tensor table, caller metadata, optimizer step),
// then raw little-endian doubles for the parameters and, when present, the
// Adam first and second moments.
namespace eostb {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Params params;
  AdamState optimizer;  // empty when the file carries none
  nlohmann::json meta = nlohmann::json::object();
};

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace eostb
