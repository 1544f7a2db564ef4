#include "rationalift/checkpoint.h"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rationalift/error.h"

namespace rationalift {

namespace {

using json = nlohmann::json;
constexpr std::array<char, 8> kMagic = {'R', 'L', 'F', 'T', 'C', 'K', 'P', '1'};

json model_config_json(const ModelConfig& c) {
  return {{"embedding_dim", c.embedding_dim}, {"hidden_dim", c.hidden_dim},
          {"hidden_per_direction", c.hidden_per_direction}, {"num_layers", c.num_layers},
          {"share_depth", c.share_depth}, {"num_classes", c.num_classes},
          {"temperature", c.temperature}, {"train_embeddings", c.train_embeddings}};
}

ModelConfig model_config_from(const json& j) {
  ModelConfig c;
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.hidden_per_direction = j.at("hidden_per_direction").get<bool>();
  c.num_layers = j.at("num_layers").get<int>();
  c.share_depth = j.at("share_depth").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.temperature = j.at("temperature").get<double>();
  c.train_embeddings = j.at("train_embeddings").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, RationaleModel& model,
                     const KeyValues& echo) {
  json header;
  header["format"] = 1;
  header["model"] = model_config_json(model.config());
  header["echo"] = echo;
  header["vocab"] = model.vocab().tokens();
  json index = json::array();
  for (const auto* p : model.tensors()) {
    index.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["tensors"] = index;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : model.tensors()) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + " is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 32)) throw DataError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated header");

  try {
    const json header = json::parse(text);
    const ModelConfig cfg = model_config_from(header.at("model"));
    Vocabulary vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    std::vector<Matrix> values;
    for (const auto& t : header.at("tensors")) {
      Matrix m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
      if (!in) throw DataError(path.string() + ": truncated tensor " + t.at("name").get<std::string>());
      values.push_back(std::move(m));
    }
    LoadedCheckpoint out{RationaleModel::from_snapshot(cfg, std::move(vocab), values),
                         header.at("echo").get<KeyValues>()};
    auto tensors = out.model.tensors();
    const auto& idx = header.at("tensors");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i]->name != idx[i].at("name").get<std::string>()) {
        throw DataError(path.string() + ": tensor order mismatch at " + tensors[i]->name);
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace rationalift
