#pragma once

// Versioned JSON checkpoint. Each tensor is stored with its name and shape;
// values are little-endian IEEE-754 doubles in base 16, so a round trip is
// bit-exact. A SHA-256 over the canonical dump of the envelope (minus the
// checksum field) detects truncation and edits.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlfilm/crypto.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/mtl_net.hpp"

namespace mtlfilm::mtl {

inline constexpr const char* kCheckpointFormat = "mtlfilm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline std::string encode_doubles(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 16);
  unsigned char bytes[8];
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (auto& b : bytes) {
      b = static_cast<unsigned char>(bits & 0xFF);
      bits >>= 8;
    }
    out += crypto::to_hex(bytes, 8);
  }
  return out;
}

inline std::vector<double> decode_doubles(const std::string& hex) {
  if (hex.size() % 16 != 0) throw Error(ErrorCode::kCorruptCheckpoint, "tensor data length is not a multiple of 16");
  auto nibble = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint64_t>(c - 'A' + 10);
    throw Error(ErrorCode::kCorruptCheckpoint, "invalid hex digit in tensor data");
  };
  std::vector<double> out;
  out.reserve(hex.size() / 16);
  for (std::size_t off = 0; off < hex.size(); off += 16) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      const std::size_t p = off + static_cast<std::size_t>(2 * b);
      bits = (bits << 8) | (nibble(hex[p]) << 4) | nibble(hex[p + 1]);
    }
    out.push_back(std::bit_cast<double>(bits));
  }
  return out;
}

namespace detail {

struct TensorSlot {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset;
  std::size_t size;
};

inline std::vector<TensorSlot> tensor_layout(const NetworkParams& p) {
  std::vector<TensorSlot> out;
  auto add_layers = [&](const std::string& prefix, const std::vector<DenseLayer>& layers) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      const auto base = prefix + "." + std::to_string(k);
      out.push_back({base + ".weight", {l.out, l.in}, l.weight_offset, l.out * l.in});
      out.push_back({base + ".bias", {l.out}, l.bias_offset, l.out});
    }
  };
  add_layers("shared", p.shared());
  add_layers("clf", p.clf());
  add_layers("clf_head", {p.clf_head()});
  add_layers("reg", p.reg());
  add_layers("reg_head", {p.reg_head()});
  out.push_back({"log_var_clf", {1}, p.log_var_clf_index(), 1});
  out.push_back({"log_var_reg", {1}, p.log_var_reg_index(), 1});
  return out;
}

}  // namespace detail

struct Checkpoint {
  NetworkParams params;
  NetworkConfig config;
  nlohmann::json metadata;  // caller-defined, e.g. feature names
};

inline nlohmann::json checkpoint_json(const NetworkParams& params, const NetworkConfig& config,
                                      const nlohmann::json& metadata = nlohmann::json::object()) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["input_width"] = params.input_width();
  j["config"] = config.to_json();
  j["metadata"] = metadata;
  j["tensors"] = nlohmann::json::array();
  for (const auto& slot : detail::tensor_layout(params)) {
    j["tensors"].push_back(
        {{"name", slot.name},
         {"shape", slot.shape},
         {"data", encode_doubles(std::span(params.values()).subspan(slot.offset, slot.size))}});
  }
  j["checksum"] = crypto::sha256_hex(j.dump());
  return j;
}

inline Checkpoint checkpoint_from_json(nlohmann::json j, std::optional<std::size_t> expected_width = std::nullopt) {
  try {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
      throw Error(ErrorCode::kCorruptCheckpoint, "not a checkpoint file");
    }
    if (!j.contains("checksum")) throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint has no checksum");
    const auto checksum = j.at("checksum").get<std::string>();
    j.erase("checksum");
    if (crypto::sha256_hex(j.dump()) != checksum) throw Error(ErrorCode::kCorruptCheckpoint, "checksum mismatch");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                   std::to_string(kCheckpointVersion));
    }
    const auto width = j.at("input_width").get<std::size_t>();
    if (expected_width && *expected_width != width) {
      throw Error(ErrorCode::kVersionMismatch, "checkpoint input width " + std::to_string(width) +
                                                   " does not match expected " + std::to_string(*expected_width));
    }
    Checkpoint ck;
    ck.config = NetworkConfig::from_json(j.at("config"));
    ck.metadata = j.value("metadata", nlohmann::json::object());
    ck.params = NetworkParams(width, ck.config);
    const auto layout = detail::tensor_layout(ck.params);
    const auto& tensors = j.at("tensors");
    if (tensors.size() != layout.size()) throw Error(ErrorCode::kVersionMismatch, "tensor count does not match layout");
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const auto& t = tensors[k];
      if (t.at("name").get<std::string>() != layout[k].name ||
          t.at("shape").get<std::vector<std::size_t>>() != layout[k].shape) {
        throw Error(ErrorCode::kVersionMismatch, "tensor " + layout[k].name + " does not match the layout");
      }
      const auto data = decode_doubles(t.at("data").get<std::string>());
      if (data.size() != layout[k].size) throw Error(ErrorCode::kCorruptCheckpoint, "tensor " + layout[k].name + " truncated");
      std::copy(data.begin(), data.end(), ck.params.values().begin() + static_cast<std::ptrdiff_t>(layout[k].offset));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const NetworkParams& params, const NetworkConfig& config, const std::string& path,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  out << checkpoint_json(params, config, metadata).dump(1) << '\n';
  require(static_cast<bool>(out), "short write to " + path, ErrorCode::kIo);
}

inline Checkpoint load_checkpoint(const std::string& path, std::optional<std::size_t> expected_width = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint_from_json(std::move(j), expected_width);
}

}  // namespace mtlfilm::mtl
