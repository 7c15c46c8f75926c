// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/model.h"

namespace depscreen {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::size_t kHeaderSize = sizeof kMagic + 4 + 8;

json encoder_json(const EncoderConfig& c) {
  return json{{"input_dim", c.input_dim},       {"model_dim", c.model_dim},
              {"num_blocks", c.num_blocks},     {"num_heads", c.num_heads},
              {"ffn_dim", c.ffn_dim},           {"interpolation_factor", c.interpolation_factor},
              {"embedding_dim", c.embedding_dim}, {"positional_encoding", c.positional_encoding}};
}

EncoderConfig encoder_from(const json& j) {
  EncoderConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.num_blocks = j.at("num_blocks").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.interpolation_factor = j.at("interpolation_factor").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.positional_encoding = j.at("positional_encoding").get<bool>();
  return c;
}

json train_json(const TrainConfig& c) {
  return json{{"margin", c.margin},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"pairs_per_epoch", c.pairs_per_epoch},
              {"seed", c.seed},
              {"learning_rate", c.adam.learning_rate},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"epsilon", c.adam.epsilon}};
}

TrainConfig train_from(const json& j) {
  TrainConfig c;
  c.margin = j.at("margin").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.pairs_per_epoch = j.at("pairs_per_epoch").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  return c;
}

json config_json(const ModelConfig& c) {
  return json{{"visual", encoder_json(c.visual)},
              {"audio", encoder_json(c.audio)},
              {"text_dim", c.text_dim},
              {"fusion", {{"hidden_dim", c.fusion.hidden_dim}, {"output_dim", c.fusion.output_dim}}},
              {"preprocess",
               {{"window_s", c.preprocess.window_s},
                {"min_tail_s", c.preprocess.min_tail_s},
                {"max_steps", c.preprocess.max_steps}}},
              {"pretrain", train_json(c.pretrain)},
              {"fusion_train", train_json(c.fusion_train)}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.visual = encoder_from(j.at("visual"));
  c.audio = encoder_from(j.at("audio"));
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.fusion.hidden_dim = j.at("fusion").at("hidden_dim").get<std::size_t>();
  c.fusion.output_dim = j.at("fusion").at("output_dim").get<std::size_t>();
  c.preprocess.window_s = j.at("preprocess").at("window_s").get<double>();
  c.preprocess.min_tail_s = j.at("preprocess").at("min_tail_s").get<double>();
  c.preprocess.max_steps = j.at("preprocess").at("max_steps").get<std::size_t>();
  c.pretrain = train_from(j.at("pretrain"));
  c.fusion_train = train_from(j.at("fusion_train"));
  return c;
}

// Overlays `patch` onto `base`, requiring every key to exist with a
// compatible type.
void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ValidationError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ValidationError("unknown config key '" + where + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, where);
    } else if (slot.is_boolean() ? !value.is_boolean()
               : slot.is_number_unsigned() ? !value.is_number_unsigned()
                                           : !value.is_number()) {
      throw ValidationError("config key '" + where + "' has the wrong type");
    } else {
      slot = value;
    }
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint payload is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_bundle(const ModelBundle& bundle) {
  const json meta{{"bundle_version", bundle.version},
                  {"config", config_json(bundle.config)},
                  {"metadata",
                   {{"seed", bundle.metadata.seed},
                    {"pretrain_epochs", bundle.metadata.pretrain_epochs},
                    {"fusion_epochs", bundle.metadata.fusion_epochs},
                    {"final_loss", bundle.metadata.final_loss}}}};
  const std::string meta_text = meta.dump();

  std::string payload;
  put_u32(payload, static_cast<std::uint32_t>(meta_text.size()));
  payload += meta_text;
  put_u32(payload, static_cast<std::uint32_t>(bundle.params.size()));
  for (const auto& [name, tensor] : bundle.params) {
    put_u32(payload, static_cast<std::uint32_t>(name.size()));
    payload += name;
    put_u32(payload, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u64(payload, d);
    for (double v : tensor.data()) put_u64(payload, std::bit_cast<std::uint64_t>(v));
  }

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointFormatVersion);
  put_u64(out, payload.size());
  out += payload;
  put_u32(out, checksum(out));
  return out;
}

ModelBundle deserialize_bundle(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a depscreen checkpoint");
  }
  Reader header(bytes.substr(sizeof kMagic, 12));
  const auto format_version = static_cast<std::uint32_t>(header.uint(4));
  if (format_version > kCheckpointFormatVersion) {
    throw UnsupportedVersionError("checkpoint format version " + std::to_string(format_version) +
                                  " is newer than supported version " +
                                  std::to_string(kCheckpointFormatVersion));
  }
  if (format_version == 0) throw FormatError("checkpoint format version 0 is invalid");
  const std::uint64_t payload_size = header.uint(8);
  if (bytes.size() - kHeaderSize < 4 || bytes.size() - kHeaderSize - 4 < payload_size) {
    throw FormatError("checkpoint is truncated");
  }
  if (bytes.size() != kHeaderSize + payload_size + 4) {
    throw FormatError("checkpoint has trailing bytes");
  }
  const std::string_view body = bytes.substr(0, kHeaderSize + payload_size);
  Reader trailer(bytes.substr(kHeaderSize + payload_size));
  if (checksum(body) != static_cast<std::uint32_t>(trailer.uint(4))) {
    throw FormatError("checkpoint checksum mismatch");
  }

  Reader in(body.substr(kHeaderSize));
  ModelBundle bundle;
  try {
    const json meta = json::parse(in.take(in.uint(4)));
    bundle.version = meta.at("bundle_version").get<std::uint64_t>();
    bundle.config = config_from(meta.at("config"));
    const json& m = meta.at("metadata");
    bundle.metadata.seed = m.at("seed").get<std::uint64_t>();
    bundle.metadata.pretrain_epochs = m.at("pretrain_epochs").get<std::size_t>();
    bundle.metadata.fusion_epochs = m.at("fusion_epochs").get<std::size_t>();
    bundle.metadata.final_loss = m.at("final_loss").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is malformed: ") + e.what());
  }
  const auto count = in.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(in.take(in.uint(4)));
    const auto rank = in.uint(4);
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(in.uint(8));
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = std::bit_cast<double>(in.uint(8));
    bundle.params.set(name, Tensor(std::move(shape), std::move(values)));
  }
  if (!in.done()) throw FormatError("checkpoint payload has unread bytes");
  // The tensor set must be exactly what the stored configuration implies.
  try {
    bundle.config.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
  const ModelBundle expected = init_bundle(bundle.config, 0);
  if (expected.params.size() != bundle.params.size()) {
    throw FormatError("checkpoint has " + std::to_string(bundle.params.size()) +
                      " tensors, configuration implies " +
                      std::to_string(expected.params.size()));
  }
  for (const auto& [name, tensor] : expected.params) {
    if (!bundle.params.contains(name) || bundle.params.get(name).shape() != tensor.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' is missing or misshapen");
    }
  }
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  write_file_atomic(path, serialize_bundle(bundle));
}

ModelBundle load_bundle(const std::string& path) {
  try {
    return deserialize_bundle(read_file(path));
  } catch (const FormatError& e) {
    if (dynamic_cast<const UnsupportedVersionError*>(&e) != nullptr) {
      throw UnsupportedVersionError(path + ": " + e.what());
    }
    throw FormatError(path + ": " + e.what());
  }
}

std::string model_config_to_json(const ModelConfig& config) {
  return config_json(config).dump(2) + "\n";
}

ModelConfig model_config_from_json(std::string_view json_text, const ModelConfig& defaults) {
  json patch;
  try {
    patch = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  json base = config_json(defaults);
  overlay(base, patch, "");
  ModelConfig config = config_from(base);
  config.validate();
  return config;
}

}  // namespace depscreen
