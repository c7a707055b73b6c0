#include <fstream>
#include <json.hpp>

#include "geovae/harness/rundir.hpp"

namespace geovae::harness {

using nlohmann::json;

std::string RunConfig::to_json() const
{
    json j;
    j["schema_version"] = schema_version;
    j["model"] = json::parse(nets::model_config_to_json(train.model));
    j["train"] = { { "epochs", train.epochs },
                   { "batch_size", train.batch_size },
                   { "learning_rate", train.learning_rate },
                   { "seed", train.seed } };
    j["data"] = { { "manifest", manifest_path }, { "corpus_root", corpus_root } };
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string &text)
{
    const json j = json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "schema_version" && it.key() != "model" && it.key() != "train"
            && it.key() != "data")
            throw std::invalid_argument("run config: unknown key '" + it.key() + "'");
    if (!j.contains("schema_version"))
        throw std::invalid_argument("run config: missing schema_version");
    if (j.at("schema_version").get<int>() != schema_version)
        throw std::invalid_argument("run config: unsupported schema_version");

    RunConfig cfg;
    if (j.contains("model"))
        cfg.train.model = nets::model_config_from_json(j.at("model").dump(), true);
    if (j.contains("train")) {
        const json &t = j.at("train");
        for (auto it = t.begin(); it != t.end(); ++it)
            if (it.key() != "epochs" && it.key() != "batch_size" && it.key() != "learning_rate"
                && it.key() != "seed")
                throw std::invalid_argument("run config: unknown key 'train." + it.key() + "'");
        if (t.contains("epochs"))
            cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_size"))
            cfg.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("learning_rate"))
            cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("seed"))
            cfg.train.seed = t.at("seed").get<std::uint64_t>();
    }
    if (j.contains("data")) {
        const json &d = j.at("data");
        for (auto it = d.begin(); it != d.end(); ++it)
            if (it.key() != "manifest" && it.key() != "corpus_root")
                throw std::invalid_argument("run config: unknown key 'data." + it.key() + "'");
        if (d.contains("manifest"))
            cfg.manifest_path = d.at("manifest").get<std::string>();
        if (d.contains("corpus_root"))
            cfg.corpus_root = d.at("corpus_root").get<std::string>();
    }
    cfg.train.model.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("run config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

} // namespace geovae::harness
