#include "sssbathy/nn/checkpoint.hpp"

#include <fstream>

#include "sssbathy/error.hpp"
#include "sssbathy/raster.hpp"

namespace sssbathy::nn {

void write_checkpoint(const std::filesystem::path& stem, const FcnModel& model, const nlohmann::json& meta,
                      BlobType type) {
  const std::size_t elem = type == BlobType::F64 ? 8 : 4;
  const std::string blob_name = stem.filename().string() + ".bin";
  nlohmann::json desc = {{"format", "sssbathy-fcn"},
                         {"version", 1},
                         {"byte_order", "LE"},
                         {"dtype", type == BlobType::F64 ? "f64" : "f32"},
                         {"blob", blob_name},
                         {"config", model.config().to_json()},
                         {"meta", meta},
                         {"tensors", nlohmann::json::array()}};
  std::ofstream blob(stem.string() + ".bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + stem.string() + ".bin");
  std::size_t offset = 0;
  for (const auto& p : model.parameters()) {
    const auto& t = p.var->value;
    const auto d = t.shape().dims();
    desc["tensors"].push_back({{"name", p.name},
                               {"shape", std::vector<std::size_t>(d.begin(), d.end())},
                               {"offset", offset},
                               {"count", t.numel()}});
    if (type == BlobType::F64) {
      write_f64_le(blob, t.values());
    } else {
      write_f32_le(blob, t.values());
    }
    offset += t.numel() * elem;
  }
  std::ofstream js(stem.string() + ".json", std::ios::trunc);
  js << desc.dump(1) << '\n';
  if (!js || !blob) throw IoError("checkpoint write failed: " + stem.string());
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& stem) {
  std::ifstream js(stem.string() + ".json");
  if (!js) throw IoError("cannot open " + stem.string() + ".json");
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(js);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("malformed checkpoint descriptor: ") + e.what());
  }
  if (desc.value("format", "") != "sssbathy-fcn") throw IoError("not a checkpoint descriptor: " + stem.string());
  const std::string dtype = desc.at("dtype").get<std::string>();
  if (dtype != "f32" && dtype != "f64") throw IoError("unsupported checkpoint dtype " + dtype);
  const std::size_t elem = dtype == "f64" ? 8 : 4;

  LoadedCheckpoint out{FcnModel(FcnConfig::from_json(desc.at("config")), 0), desc.value("meta", nlohmann::json::object())};
  std::ifstream blob(stem.parent_path() / desc.at("blob").get<std::string>(), std::ios::binary);
  if (!blob) throw IoError("missing checkpoint blob for " + stem.string());

  const auto& params = out.model.parameters();
  const auto& index = desc.at("tensors");
  if (index.size() != params.size()) throw IoError("checkpoint tensor count does not match the architecture");
  std::vector<Tensor> state;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = index[i];
    if (e.at("name").get<std::string>() != params[i].name) throw IoError("checkpoint tensor order mismatch");
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 4) throw IoError("checkpoint shapes must have 4 dims");
    const Shape s{shape[0], shape[1], shape[2], shape[3]};
    const auto count = e.at("count").get<std::size_t>();
    if (s.numel() != count) throw IoError("checkpoint shape/count mismatch for " + params[i].name);
    blob.seekg(static_cast<std::streamoff>(e.at("offset").get<std::size_t>()));
    state.emplace_back(s, elem == 8 ? read_f64_le(blob, count) : read_f32_le(blob, count));
  }
  out.model.load_state(state);
  return out;
}

}  // namespace sssbathy::nn
