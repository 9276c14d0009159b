#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mrin/attribution.hpp"

namespace mrin {
namespace {

using json = nlohmann::ordered_json;

class MrinFormatError : public IoFailure {
 public:
  explicit MrinFormatError(const std::string& what) : IoFailure("MRIN file: " + what) {}
};

template <typename T>
std::vector<T> array_of(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw MrinFormatError(std::string("missing array '") + key + "'");
  try {
    return it->get<std::vector<T>>();
  } catch (const json::exception& e) {
    throw MrinFormatError(std::string("bad array '") + key + "': " + e.what());
  }
}

}  // namespace

std::string serialize_mrin(const MrinArrays& mrin, const DeltaLedger* ledger) {
  json j;
  j["schema"] = kMrinSchema;
  j["version"] = kMrinVersion;
  j["fingerprint"] = mrin.fingerprint;
  j["instance_count"] = mrin.instance_sessions.size();
  j["instance_sessions"] = mrin.instance_sessions;
  json layers = json::array();
  for (int l = 0; l < kConvLayers; ++l) {
    const auto& layer = mrin.layers[l];
    json lj;
    lj["name"] = "conv" + std::to_string(l + 1);
    lj["shape"] = {layer.spec.filters, layer.spec.kernel, layer.spec.kernel, layer.in_channels};
    lj["ids"] = layer.ids;
    lj["altered"] = layer.altered;
    lj["max_abs_delta"] = layer.score;
    if (ledger) {
      const auto d = ledger->layer_data(l);
      lj["ledger"] = std::vector<double>(d.begin(), d.end());
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  if (ledger) j["ledger_batches"] = ledger->batches_recorded();
  return j.dump() + "\n";
}

MrinFile parse_mrin(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MrinFormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kMrinSchema) throw MrinFormatError("wrong schema");
  if (j.value("version", 0) != kMrinVersion) {
    throw VersionMismatch("MRIN file version " + std::to_string(j.value("version", 0)));
  }
  MrinFile out;
  auto& m = out.mrin;
  m.fingerprint = j.value("fingerprint", "");
  m.instance_sessions = array_of<std::string>(j, "instance_sessions");
  const auto n = m.instance_sessions.size();
  if (j.value("instance_count", std::size_t{0}) != n) throw MrinFormatError("instance_count mismatch");
  const auto& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != kConvLayers) throw MrinFormatError("expected three layers");
  const bool audit = j.contains("ledger_batches");
  std::array<std::vector<double>, kConvLayers> ledger_data;
  std::array<ConvSpec, kConvLayers> specs{};
  std::array<int, kConvLayers> in_ch{};
  for (int l = 0; l < kConvLayers; ++l) {
    const auto& lj = layers[l];
    auto shape = array_of<int>(lj, "shape");
    if (shape.size() != 4 || shape[1] != shape[2]) throw MrinFormatError("bad layer shape");
    auto& layer = m.layers[l];
    layer.spec = {shape[0], shape[1]};
    layer.in_channels = shape[3];
    specs[l] = layer.spec;
    in_ch[l] = layer.in_channels;
    layer.ids = array_of<InstanceId>(lj, "ids");
    layer.altered = array_of<std::uint8_t>(lj, "altered");
    layer.score = array_of<double>(lj, "max_abs_delta");
    const auto size = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
    if (layer.ids.size() != size || layer.altered.size() != size || layer.score.size() != size) {
      throw MrinFormatError("array length does not match layer shape");
    }
    for (auto id : layer.ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= n) throw MrinFormatError("instance id out of range");
    }
    if (audit) ledger_data[l] = array_of<double>(lj, "ledger");
  }
  if (audit) {
    try {
      out.ledger = DeltaLedger::from_data(specs, in_ch, n, std::move(ledger_data),
                                          j.at("ledger_batches").get<std::uint64_t>());
    } catch (const std::invalid_argument& e) {
      throw MrinFormatError(e.what());
    }
  }
  return out;
}

void save_mrin(const MrinArrays& mrin, const std::filesystem::path& path, const DeltaLedger* ledger) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << serialize_mrin(mrin, ledger);
  if (!out) throw IoFailure("write failed for " + path.string());
}

MrinFile load_mrin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mrin(buf.str());
}

}  // namespace mrin
