#include "fedgru/checkpoint.h"

#include <fstream>

#include <json.hpp>

#include "fedgru/errors.h"

namespace fedgru::grunet {

namespace {
constexpr const char* kFormat = "fedgru-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["shape"] = {{"input", params.shape().input},
                {"hidden", params.shape().hidden},
                {"gate_bias", params.shape().gate_bias}};
  auto layout = nlohmann::json::array();
  for (const auto& s : params.layout().slots())
    layout.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  j["layout"] = std::move(layout);
  j["params"] = params.flatten();

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("I/O error while writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != kFormat) throw DataError("not a fedgru checkpoint: " + path.string());
    if (j.at("version") != kVersion)
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    ModelShape shape;
    shape.input = j.at("shape").at("input").get<std::size_t>();
    shape.hidden = j.at("shape").at("hidden").get<std::vector<std::size_t>>();
    shape.gate_bias = j.at("shape").at("gate_bias").get<bool>();

    const ParamLayout expected(shape);
    const auto& stored = j.at("layout");
    if (stored.size() != expected.slots().size()) throw DataError("checkpoint layout does not match its shape");
    for (std::size_t i = 0; i < stored.size(); ++i) {
      const auto& s = expected.slots()[i];
      if (stored[i].at("name") != s.name || stored[i].at("offset") != s.offset ||
          stored[i].at("rows") != s.rows || stored[i].at("cols") != s.cols)
        throw DataError("checkpoint layout entry " + std::to_string(i) + " does not match its shape");
    }
    return ModelParams::unflatten(shape, j.at("params").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const StructuralError& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace fedgru::grunet
