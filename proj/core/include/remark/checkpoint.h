#ifndef REMARK_CHECKPOINT_H_
#define REMARK_CHECKPOINT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "remark/corpus.h"
#include "remark/model.h"

namespace remark {

inline constexpr int kCheckpointVersion = 1;

// Layout: the 8-byte magic "RMKCKPT1", a little-endian uint64 header length,
// a JSON header (format version, model config, trained steps, parameter
// manifest of name / shape / offset, optional vocabulary), then the
// parameters as little-endian float32 in manifest order.
struct Checkpoint {
  WatermarkModel model;
  std::optional<Vocabulary> vocab;
};

std::string serialize_checkpoint(const WatermarkModel& model,
                                 const Vocabulary* vocab = nullptr);
// Throws IncompatibleArtifact on a foreign file or version mismatch and
// Error on a truncated or inconsistent payload.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const WatermarkModel& model,
                     const Vocabulary* vocab = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view json_text);

// Whole-file read / write helpers shared by the tools.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace remark

#endif  // REMARK_CHECKPOINT_H_
