#include "epd/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace epd::ckpt {

namespace {
constexpr char kMagic[4] = {'E', 'P', 'D', '1'};

nlohmann::ordered_json config_json(const net::ModelConfig& c) {
  return {{"hidden_dim", c.hidden_dim},
          {"n_enc_blocks", c.n_enc_blocks},
          {"n_denoise_blocks", c.n_denoise_blocks},
          {"n_heads", c.n_heads},
          {"dropout", c.dropout},
          {"diffusion_steps", c.diffusion_steps},
          {"representation", net::to_string(c.representation)}};
}

net::ModelConfig config_from_json(const nlohmann::json& j) {
  net::ModelConfig c;
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.n_enc_blocks = j.at("n_enc_blocks").get<int>();
  c.n_denoise_blocks = j.at("n_denoise_blocks").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.diffusion_steps = j.at("diffusion_steps").get<int>();
  c.representation =
      net::representation_from_string(j.at("representation").get<std::string>());
  return c;
}

}  // namespace

void save(const std::string& path, const net::ModelParams& params) {
  nlohmann::ordered_json header;
  header["version"] = 1;
  header["config"] = config_json(params.config);
  header["standardizer"] = {
      {"mean", std::vector<double>(params.standardizer.mean.data(),
                                   params.standardizer.mean.data() +
                                       params.standardizer.mean.size())},
      {"std", std::vector<double>(params.standardizer.std.data(),
                                  params.standardizer.std.data() +
                                      params.standardizer.std.size())}};
  auto tensors = nlohmann::ordered_json::array();
  for (int i = 0; i < params.store.size(); ++i) {
    const auto& e = params.store.at(i);
    tensors.push_back({{"name", e.name},
                       {"rows", e.value.rows()},
                       {"cols", e.value.cols()},
                       {"dtype", "f64"}});
  }
  header["tensors"] = std::move(tensors);

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  char lenbuf[4];
  std::memcpy(lenbuf, &len, 4);
  out.write(lenbuf, 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (int i = 0; i < params.store.size(); ++i) {
    const auto& value = params.store.at(i).value;
    out.write(reinterpret_cast<const char*>(value.data()),
              static_cast<std::streamsize>(sizeof(double) * value.size()));
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

net::ModelParams load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("'" + path + "' is not a model checkpoint");
  char lenbuf[4];
  if (!in.read(lenbuf, 4)) throw DataError("'" + path + "': truncated header");
  std::uint32_t len = 0;
  std::memcpy(&len, lenbuf, 4);
  std::string hs(len, '\0');
  if (!in.read(hs.data(), len)) throw DataError("'" + path + "': truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': bad header: " + e.what());
  }
  net::ModelParams params;
  try {
    if (header.at("version").get<int>() != 1)
      throw DataError("'" + path + "': unsupported checkpoint version");
    params = net::init_params(config_from_json(header.at("config")), 0);
    const auto& st = header.at("standardizer");
    const auto mean = st.at("mean").get<std::vector<double>>();
    const auto sdev = st.at("std").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != params.config.future_dim() ||
        sdev.size() != mean.size())
      throw DataError("'" + path + "': standardizer width mismatch");
    params.standardizer.mean =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    params.standardizer.std =
        Eigen::Map<const Eigen::VectorXd>(sdev.data(), sdev.size());

    std::unordered_map<std::string, int> by_name;
    for (int i = 0; i < params.store.size(); ++i)
      by_name.emplace(params.store.at(i).name, i);
    const auto& tensors = header.at("tensors");
    if (static_cast<int>(tensors.size()) != params.store.size())
      throw DataError("'" + path + "': expected " +
                      std::to_string(params.store.size()) + " tensors, found " +
                      std::to_string(tensors.size()));
    for (const auto& t : tensors) {
      const std::string name = t.at("name").get<std::string>();
      const auto it = by_name.find(name);
      if (it == by_name.end())
        throw DataError("'" + path + "': unknown tensor '" + name + "'");
      if (t.at("dtype").get<std::string>() != "f64")
        throw DataError("'" + path + "': tensor '" + name + "': unsupported dtype");
      auto& value = params.store.at(it->second).value;
      if (t.at("rows").get<Eigen::Index>() != value.rows() ||
          t.at("cols").get<Eigen::Index>() != value.cols())
        throw DataError("'" + path + "': tensor '" + name + "' has shape " +
                        t.at("rows").dump() + "x" + t.at("cols").dump() +
                        ", expected " + std::to_string(value.rows()) + "x" +
                        std::to_string(value.cols()));
      if (!in.read(reinterpret_cast<char*>(value.data()),
                   static_cast<std::streamsize>(sizeof(double) * value.size())))
        throw DataError("'" + path + "': truncated tensor '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': bad header: " + e.what());
  }
  return params;
}

void check_compatible(const net::ModelParams& loaded, const net::ModelConfig& requested) {
  requested.validate();
  const net::ModelParams expected = net::init_params(requested, 0);
  const int n = std::min(loaded.store.size(), expected.store.size());
  for (int i = 0; i < n; ++i) {
    const auto& a = loaded.store.at(i);
    const auto& b = expected.store.at(i);
    if (a.name != b.name)
      throw ModelError("checkpoint mismatch: tensor '" + a.name + "' where '" + b.name +
                       "' was expected");
    if (a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      throw ModelError("checkpoint mismatch: tensor '" + a.name + "' has shape " +
                       std::to_string(a.value.rows()) + "x" +
                       std::to_string(a.value.cols()) + ", expected " +
                       std::to_string(b.value.rows()) + "x" +
                       std::to_string(b.value.cols()));
  }
  if (loaded.store.size() != expected.store.size())
    throw ModelError("checkpoint mismatch: " + std::to_string(loaded.store.size()) +
                     " tensors, expected " + std::to_string(expected.store.size()));
  if (loaded.config.diffusion_steps != requested.diffusion_steps)
    throw ModelError("checkpoint mismatch: diffusion_steps " +
                     std::to_string(loaded.config.diffusion_steps) + ", expected " +
                     std::to_string(requested.diffusion_steps));
  if (loaded.config.representation != requested.representation)
    throw ModelError("checkpoint mismatch: representation " +
                     net::to_string(loaded.config.representation) + ", expected " +
                     net::to_string(requested.representation));
}

}  // namespace epd::ckpt
