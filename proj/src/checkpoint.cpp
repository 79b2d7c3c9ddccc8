#include "stgan/checkpoint.hpp"

#include <fstream>

#include "stgan/errors.hpp"

namespace stgan {

using nlohmann::json;

namespace {

void write_store(json& out, const ParameterStore& store) {
  for (const auto& e : store) {
    out[e.name] = json{{"shape", e.value.shape()}, {"data", std::vector<double>(e.value.data().begin(), e.value.data().end())}};
  }
}

void read_store(const json& params, ParameterStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.entry(i).name;
    if (!params.contains(name)) throw ValidationError("checkpoint is missing parameter '" + name + "'");
    const json& p = params.at(name);
    const auto shape = p.at("shape").get<Shape>();
    if (shape != store.value(i).shape()) {
      throw ValidationError("checkpoint parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                            shape_string(store.value(i).shape()));
    }
    const auto data = p.at("data").get<std::vector<double>>();
    store.value(i) = Tensor(shape, data);
    if (!store.value(i).all_finite()) throw ValidationError("checkpoint parameter '" + name + "' is not finite");
  }
}

}  // namespace

json checkpoint_to_json(const CheckpointHeader& header, const Generator& gen, const Discriminator& disc) {
  json doc;
  doc["header"] = {{"format_version", header.format_version},
                   {"D", header.dims.hidden},
                   {"F", header.dims.features},
                   {"L_r", header.dims.recent},
                   {"L_d", header.dims.trend},
                   {"station_order", header.station_order},
                   {"graph_config", header.graph_config}};
  json params = json::object();
  write_store(params, gen.params());
  write_store(params, disc.params());
  doc["parameters"] = std::move(params);
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    const json& h = doc.at("header");
    CheckpointHeader header;
    header.format_version = h.at("format_version").get<int>();
    if (header.format_version != kCheckpointFormatVersion) {
      throw ValidationError("unsupported checkpoint format_version " + std::to_string(header.format_version));
    }
    header.dims.hidden = h.at("D").get<std::size_t>();
    header.dims.features = h.value("F", std::size_t{1});
    header.dims.recent = h.at("L_r").get<std::size_t>();
    header.dims.trend = h.at("L_d").get<std::size_t>();
    header.station_order = h.at("station_order").get<std::vector<std::string>>();
    header.graph_config = h.value("graph_config", json::object());

    Checkpoint ckpt{header, Generator(header.dims), Discriminator(header.dims)};
    const json& params = doc.at("parameters");
    const std::size_t expected = ckpt.generator.params().size() + ckpt.discriminator.params().size();
    if (params.size() != expected) {
      throw ValidationError("checkpoint holds " + std::to_string(params.size()) + " parameters, expected " +
                            std::to_string(expected));
    }
    read_store(params, ckpt.generator.params());
    read_store(params, ckpt.discriminator.params());
    return ckpt;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const Generator& gen,
                     const Discriminator& disc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << checkpoint_to_json(header, gen, disc).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

void validate_station_order(const CheckpointHeader& header, const std::vector<std::string>& station_order) {
  if (header.station_order == station_order) return;
  std::string msg = "checkpoint station order does not match the active graph";
  if (header.station_order.size() != station_order.size()) {
    msg += " (" + std::to_string(header.station_order.size()) + " vs " + std::to_string(station_order.size()) +
           " stations)";
  } else {
    for (std::size_t i = 0; i < station_order.size(); ++i) {
      if (header.station_order[i] != station_order[i]) {
        msg += " (position " + std::to_string(i) + ": '" + header.station_order[i] + "' vs '" + station_order[i] + "')";
        break;
      }
    }
  }
  throw ValidationError(msg);
}

}  // namespace stgan
