#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "fas/network.hpp"

namespace fas::network {

namespace {

using nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw FormatError("parameter file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_params(const std::vector<Param<float>>& params) {
  std::vector<std::uint8_t> out;
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.size()));
    for (float f : p.value) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

void decode_params(std::span<const std::uint8_t> bytes, std::vector<Param<float>>& params) {
  std::size_t pos = 0;
  for (auto& p : params) {
    const std::uint32_t len = get_u32(bytes, pos);
    if (pos + len > bytes.size()) throw FormatError("parameter file truncated");
    const std::string name(bytes.begin() + pos, bytes.begin() + pos + len);
    pos += len;
    if (name != p.name)
      throw FormatError("expected parameter '" + p.name + "', found '" + name + "'");
    const std::uint32_t count = get_u32(bytes, pos);
    if (count != p.value.size())
      throw FormatError("parameter '" + name + "' has " + std::to_string(count) +
                        " values, model expects " + std::to_string(p.value.size()));
    for (auto& f : p.value) {
      const std::uint32_t bits = get_u32(bytes, pos);
      std::memcpy(&f, &bits, 4);
    }
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes in parameter file");
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  const auto& m = ckpt.network.config();
  json cfg = {
      {"model",
       {{"theta", m.theta},
        {"width_multiplier", m.width_multiplier},
        {"input_height", m.input_height},
        {"input_width", m.input_width},
        {"output_channels", m.output_channels}}},
      {"loss", {{"alpha", ckpt.loss.alpha}, {"beta", ckpt.loss.beta}}},
      {"seed", ckpt.seed},
      {"epsilon", ckpt.epsilon},
  };
  io::write_text(dir / "config.json", cfg.dump(2) + "\n");
  const auto bytes = encode_params(ckpt.network.params());
  std::ofstream f(dir / "params.bin", std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw RuntimeFailure("cannot write " + (dir / "params.bin").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  json cfg;
  try {
    cfg = json::parse(io::read_text(dir / "config.json"));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint config: " + std::string(e.what()));
  }
  Checkpoint ckpt;
  try {
    const auto& m = cfg.at("model");
    ckpt.model.theta = m.at("theta").get<double>();
    ckpt.model.width_multiplier = m.at("width_multiplier").get<double>();
    ckpt.model.input_height = m.at("input_height").get<int>();
    ckpt.model.input_width = m.at("input_width").get<int>();
    ckpt.model.output_channels = m.at("output_channels").get<int>();
    ckpt.loss.alpha = cfg.at("loss").at("alpha").get<double>();
    ckpt.loss.beta = cfg.at("loss").at("beta").get<double>();
    ckpt.seed = cfg.at("seed").get<std::uint64_t>();
    ckpt.epsilon = cfg.at("epsilon").get<double>();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint config: " + std::string(e.what()));
  }
  ckpt.network = Network<float>(ckpt.model, ckpt.seed);
  std::ifstream f(dir / "params.bin", std::ios::binary);
  if (!f) throw FormatError("missing " + (dir / "params.bin").string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  decode_params(bytes, ckpt.network.params());
  return ckpt;
}

}  // namespace fas::network
