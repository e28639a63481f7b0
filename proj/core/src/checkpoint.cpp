#include "pulseox/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

namespace pulseox::io {

namespace {

constexpr char kMagic[8] = {'P', 'O', 'X', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void append_f64_le(std::string& out, const double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
    }
  }
}

void read_f64_le(const unsigned char* p, double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data, p, n * sizeof(double));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      data[i] = std::bit_cast<double>(get_u64(p + i * 8));
    }
  }
}

nlohmann::json config_to_json(const nn::ModelConfig& c) {
  return {{"hidden", c.hidden},       {"layers", c.layers},
          {"use_attention", c.use_attention}, {"input_dim", c.input_dim},
          {"seq_len", c.seq_len},     {"seed", c.seed}};
}

nn::ModelConfig config_from_json(const nlohmann::json& j) {
  nn::ModelConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.use_attention = j.at("use_attention").get<bool>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  if (!ckpt.model.has_value() && !ckpt.quad.has_value()) {
    throw InvalidSpecError("checkpoint needs a model or a calibration");
  }

  nlohmann::json meta;
  std::string arrays;
  if (ckpt.model.has_value()) {
    const nn::ModelParams& p = *ckpt.model;
    nlohmann::json manifest = nlohmann::json::array();
    p.visit([&](const std::string& name, const Tensor& t, nn::ParamGroup) {
      manifest.push_back({{"name", name}, {"shape", t.shape()}});
      append_f64_le(arrays, t.data(), t.size());
    });
    meta["model"] = {{"config", config_to_json(p.config)},
                     {"trainable",
                      {{"bilstm", p.trainable.bilstm},
                       {"attention", p.trainable.attention},
                       {"fc", p.trainable.fc}}},
                     {"params", manifest}};
  }
  if (ckpt.quad.has_value()) {
    meta["calib"] = {{"c0", ckpt.quad->c0},
                     {"c1", ckpt.quad->c1},
                     {"c2", ckpt.quad->c2}};
  }

  const std::string json = meta.dump();
  std::string blob;
  blob.reserve(24 + json.size() + arrays.size());
  blob.append(kMagic, sizeof(kMagic));
  put_u32(blob, kVersion);
  put_u64(blob, json.size());
  blob += json;
  blob += arrays;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  if (blob.size() < 20 || std::memcmp(blob.data(), kMagic, 8) != 0) {
    throw ParseError(path.string() + ": not a checkpoint file");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint32_t version = get_u32(bytes + 8);
  if (version != kVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " +
                     std::to_string(version));
  }
  const std::uint64_t json_len = get_u64(bytes + 12);
  if (20 + json_len > blob.size()) {
    throw ParseError(path.string() + ": truncated metadata");
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob.substr(20, json_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad metadata JSON: " + e.what());
  }

  Checkpoint ckpt;
  std::size_t offset = 20 + json_len;
  if (meta.contains("model")) {
    const auto& jm = meta.at("model");
    nn::ModelParams params =
        nn::ModelParams::shaped(config_from_json(jm.at("config")));
    params.trainable.bilstm = jm.at("trainable").at("bilstm").get<bool>();
    params.trainable.attention =
        jm.at("trainable").at("attention").get<bool>();
    params.trainable.fc = jm.at("trainable").at("fc").get<bool>();

    // The manifest must match the canonical enumeration exactly.
    const auto& manifest = jm.at("params");
    std::size_t entry = 0;
    std::string problem;
    params.visit([&](const std::string& name, Tensor& t, nn::ParamGroup) {
      if (!problem.empty()) return;
      if (entry >= manifest.size()) {
        problem = "manifest too short";
        return;
      }
      const auto& me = manifest.at(entry);
      if (me.at("name").get<std::string>() != name ||
          me.at("shape").get<std::vector<std::size_t>>() != t.shape()) {
        problem = "manifest entry '" + name + "' does not match";
        return;
      }
      const std::size_t bytes_needed = t.size() * sizeof(double);
      if (offset + bytes_needed > blob.size()) {
        problem = "truncated arrays";
        return;
      }
      read_f64_le(reinterpret_cast<const unsigned char*>(blob.data()) + offset,
                  t.data(), t.size());
      offset += bytes_needed;
      ++entry;
    });
    if (problem.empty() && entry != manifest.size()) {
      problem = "manifest has extra entries";
    }
    if (!problem.empty()) {
      throw ParseError(path.string() + ": " + problem);
    }
    ckpt.model = std::move(params);
  }
  if (meta.contains("calib")) {
    calib::QuadCalib q;
    q.c0 = meta.at("calib").at("c0").get<double>();
    q.c1 = meta.at("calib").at("c1").get<double>();
    q.c2 = meta.at("calib").at("c2").get<double>();
    ckpt.quad = q;
  }
  if (!ckpt.model.has_value() && !ckpt.quad.has_value()) {
    throw ParseError(path.string() + ": empty checkpoint");
  }
  return ckpt;
}

}  // namespace pulseox::io
