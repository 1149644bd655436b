#include "remark/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "remark/error.h"

namespace remark {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'M', 'K', 'C', 'K', 'P', 'T', '1'};

json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"message_bits", c.message_bits},
          {"max_tokens", c.max_tokens},
          {"d_model", c.d_model},
          {"heads", c.heads},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"ff_width", c.ff_width},
          {"extractor_width", c.extractor_width},
          {"extractor_heads", c.extractor_heads},
          {"extractor_layers", c.extractor_layers},
          {"extractor_ff_width", c.extractor_ff_width},
          {"init_std", c.init_std},
          {"embedding_init_std", c.embedding_init_std},
          {"seed", c.seed}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<int>();
    c.message_bits = j.at("message_bits").get<int>();
    c.max_tokens = j.at("max_tokens").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.heads = j.at("heads").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.ff_width = j.at("ff_width").get<int>();
    c.extractor_width = j.at("extractor_width").get<int>();
    c.extractor_heads = j.at("extractor_heads").get<int>();
    c.extractor_layers = j.at("extractor_layers").get<int>();
    c.extractor_ff_width = j.at("extractor_ff_width").get<int>();
    c.init_std = j.at("init_std").get<double>();
    c.embedding_init_std = j.at("embedding_init_std").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  return config_json(config).dump(2);
}

ModelConfig model_config_from_json(std::string_view json_text) {
  try {
    return config_from(json::parse(json_text));
  } catch (const json::parse_error& e) {
    throw Error(std::string("model config is not valid JSON: ") + e.what());
  }
}

std::string serialize_checkpoint(const WatermarkModel& model,
                                 const Vocabulary* vocab) {
  if (vocab && static_cast<int>(vocab->size()) != model.config().vocab_size) {
    throw Error("vocabulary size does not match the model");
  }
  json manifest = json::array();
  std::uint64_t offset = 0;
  const auto params = model.parameters();
  for (const auto& p : params) {
    const auto& v = p.tensor.value();
    manifest.push_back({{"name", p.name},
                        {"shape", {v.rows(), v.cols()}},
                        {"offset", offset}});
    offset += static_cast<std::uint64_t>(v.size());
  }
  json header = {{"format", "remark-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"config", config_json(model.config())},
                 {"trained_steps", model.trained_steps},
                 {"dtype", "float32"},
                 {"parameters", manifest}};
  if (vocab) header["vocabulary"] = vocab->serialize();
  const std::string head = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  const std::uint64_t head_len = head.size();
  out.append(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out += head;
  for (const auto& p : params) {
    const auto& v = p.tensor.value();
    out.append(reinterpret_cast<const char*>(v.data()),
               static_cast<std::size_t>(v.size()) * sizeof(float));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IncompatibleArtifact("not a remark checkpoint");
  }
  std::uint64_t head_len = 0;
  std::memcpy(&head_len, bytes.data() + sizeof(kMagic), sizeof(head_len));
  const std::size_t data_start = sizeof(kMagic) + 8 + head_len;
  if (head_len > bytes.size() || data_start > bytes.size()) {
    throw Error("truncated checkpoint header");
  }
  json header;
  try {
    header = json::parse(bytes.substr(sizeof(kMagic) + 8, head_len));
  } catch (const json::parse_error& e) {
    throw Error(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("version", -1) != kCheckpointVersion) {
    throw IncompatibleArtifact(
        "checkpoint format version " + header.value("version", json(-1)).dump() +
        " is not supported (expected " + std::to_string(kCheckpointVersion) +
        ")");
  }
  Checkpoint ck;
  ck.model = WatermarkModel(config_from(header.at("config")));
  ck.model.trained_steps = header.value("trained_steps", std::int64_t{0});
  auto params = ck.model.parameters();
  const auto& manifest = header.at("parameters");
  if (manifest.size() != params.size()) {
    throw Error("checkpoint parameter count does not match its config");
  }
  const std::string_view data = bytes.substr(data_start);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    auto& value = params[i].tensor.mutable_value();
    if (entry.at("name").get<std::string>() != params[i].name ||
        entry.at("shape")[0].get<nn::Index>() != value.rows() ||
        entry.at("shape")[1].get<nn::Index>() != value.cols()) {
      throw Error("checkpoint manifest mismatch at " + params[i].name);
    }
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const std::size_t n = static_cast<std::size_t>(value.size());
    if ((offset + n) * sizeof(float) > data.size()) {
      throw Error("truncated checkpoint data at " + params[i].name);
    }
    std::memcpy(value.data(), data.data() + offset * sizeof(float),
                n * sizeof(float));
  }
  if (header.contains("vocabulary")) {
    ck.vocab = Vocabulary::parse(header["vocabulary"].get<std::string>());
    if (static_cast<int>(ck.vocab->size()) != ck.model.config().vocab_size) {
      throw Error("embedded vocabulary does not match the model");
    }
  }
  return ck;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path,
                     const WatermarkModel& model, const Vocabulary* vocab) {
  write_file(path, serialize_checkpoint(model, vocab));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace remark
