#include "remtrack/checkpoint.hpp"

#include <stdexcept>

namespace remtrack::ad {

using nlohmann::json;

json checkpoint_to_json(const ParameterStore& store, const json& dims) {
    json params = json::object();
    for (std::size_t s = 0; s < store.size(); ++s) {
        const Tensor& t = store.tensor(s);
        params[store.name(s)] = {{"shape", t.shape}, {"data", t.data}};
    }
    return {{"version", kCheckpointVersion}, {"dims", dims}, {"params", std::move(params)}};
}

json checkpoint_dims(const json& doc) {
    if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer()) {
        throw std::invalid_argument("checkpoint: missing integer 'version'");
    }
    if (doc["version"].get<int>() != kCheckpointVersion) {
        throw std::invalid_argument("checkpoint: unsupported version " + doc["version"].dump());
    }
    if (!doc.contains("dims") || !doc["dims"].is_object()) {
        throw std::invalid_argument("checkpoint: missing 'dims' object");
    }
    return doc["dims"];
}

void load_checkpoint(const json& doc, const json& expected_dims, ParameterStore& store) {
    const json dims = checkpoint_dims(doc);
    if (dims != expected_dims) {
        throw std::invalid_argument("checkpoint: dims " + dims.dump() + " do not match expected " +
                                    expected_dims.dump());
    }
    if (!doc.contains("params") || !doc["params"].is_object()) {
        throw std::invalid_argument("checkpoint: missing 'params' object");
    }
    const json& params = doc["params"];
    if (params.size() != store.size()) {
        throw std::invalid_argument("checkpoint: expected " + std::to_string(store.size()) +
                                    " parameters, found " + std::to_string(params.size()));
    }
    // Validate everything before touching the store.
    for (std::size_t s = 0; s < store.size(); ++s) {
        const std::string& name = store.name(s);
        if (!params.contains(name)) {
            throw std::invalid_argument("checkpoint: missing parameter '" + name + "'");
        }
        const json& p = params[name];
        if (!p.contains("shape") || !p.contains("data") || !p["data"].is_array()) {
            throw std::invalid_argument("checkpoint: malformed entry '" + name + "'");
        }
        const auto shape = p["shape"].get<std::vector<std::size_t>>();
        if (shape != store.tensor(s).shape) {
            throw std::invalid_argument("checkpoint: '" + name + "' has shape " +
                                        shape_to_string(shape) + ", expected " +
                                        shape_to_string(store.tensor(s).shape));
        }
        if (p["data"].size() != store.tensor(s).size()) {
            throw std::invalid_argument("checkpoint: '" + name + "' data length mismatch");
        }
    }
    for (std::size_t s = 0; s < store.size(); ++s) {
        Tensor& t = store.tensor(s);
        t.data = params[store.name(s)]["data"].get<std::vector<double>>();
        t.grad.reset();
    }
}

}  // namespace remtrack::ad
