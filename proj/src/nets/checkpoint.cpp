#include "geovae/nets/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace geovae::nets {

using nlohmann::json;

namespace {

json config_to_json_obj(const ModelConfig &cfg)
{
    json j;
    j["family"] = cfg.family == Family::spherical ? "spherical" : "gaussian";
    j["variational"] = cfg.variational;
    j["equivariant"] = cfg.equivariant;
    j["latent_dim"] = cfg.latent_dim;
    j["kappa_min"] = cfg.kappa_min;
    j["kappa_fixed"] = cfg.kappa_fixed;
    j["group_order"] = cfg.group_order;
    j["spread_weight"] = cfg.spread_weight;
    j["channels"] = cfg.channels;
    j["widths"] = cfg.widths;
    return j;
}

ModelConfig config_from_json_obj(const json &j, bool reject_unknown)
{
    static const std::vector<std::string> known = {
        "family",      "variational",   "equivariant", "latent_dim", "kappa_min",
        "kappa_fixed", "group_order",   "spread_weight", "channels", "widths",
    };
    if (reject_unknown)
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find(known.begin(), known.end(), it.key()) == known.end())
                throw std::invalid_argument("model config: unknown key '" + it.key() + "'");

    ModelConfig cfg;
    if (j.contains("family")) {
        const std::string fam = j.at("family").get<std::string>();
        if (fam == "spherical")
            cfg.family = Family::spherical;
        else if (fam == "gaussian")
            cfg.family = Family::gaussian;
        else
            throw std::invalid_argument("model config: family must be gaussian|spherical");
    }
    if (j.contains("variational"))
        cfg.variational = j.at("variational").get<bool>();
    if (j.contains("equivariant"))
        cfg.equivariant = j.at("equivariant").get<bool>();
    if (j.contains("latent_dim"))
        cfg.latent_dim = j.at("latent_dim").get<int>();
    if (j.contains("kappa_min"))
        cfg.kappa_min = j.at("kappa_min").get<double>();
    if (j.contains("kappa_fixed"))
        cfg.kappa_fixed = j.at("kappa_fixed").get<double>();
    if (j.contains("group_order"))
        cfg.group_order = j.at("group_order").get<int>();
    if (j.contains("spread_weight"))
        cfg.spread_weight = j.at("spread_weight").get<double>();
    if (j.contains("channels"))
        cfg.channels = j.at("channels").get<int>();
    if (j.contains("widths")) {
        auto w = j.at("widths").get<std::vector<int>>();
        if (w.size() != 3)
            throw std::invalid_argument("model config: widths needs exactly 3 entries");
        cfg.widths = { w[0], w[1], w[2] };
    }
    return cfg;
}

template <class T>
void write_pod(std::ostream &os, const T &v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream &is)
{
    T v;
    is.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!is)
        throw std::runtime_error("checkpoint: truncated file");
    return v;
}

constexpr char magic[12] = { 'G', 'E', 'O', 'V', 'A', 'E', 'C', 'K', 'P', 'T', '0', '1' };

} // namespace

std::string model_config_to_json(const ModelConfig &cfg)
{
    return config_to_json_obj(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string &text, bool reject_unknown)
{
    return config_from_json_obj(json::parse(text), reject_unknown);
}

void Checkpoint::save(const std::string &path) const
{
    json header;
    header["version"] = format_version;
    header["config"] = config_to_json_obj(config);
    header["epoch"] = epoch;
    header["seed"] = seed;
    header["rng_state"] = rng_state;
    header["norm_mean"] = norm_mean;
    header["norm_std"] = norm_std;
    header["latent_lo"] = latent_lo;
    header["latent_hi"] = latent_hi;
    json tens = json::array();
    for (const auto &[name, t] : tensors)
        tens.push_back({ { "name", name }, { "shape", t.shape } });
    header["tensors"] = tens;
    header["adam"] = adam.has_value();
    if (adam)
        header["adam_step"] = adam->step_count;

    const std::string htext = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(magic, sizeof(magic));
    write_pod<std::uint64_t>(f, htext.size());
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto &[name, t] : tensors)
        f.write(reinterpret_cast<const char *>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (adam) {
        for (const auto &m : adam->first_moments)
            f.write(reinterpret_cast<const char *>(m.data()),
                    static_cast<std::streamsize>(m.size() * sizeof(double)));
        for (const auto &m : adam->second_moments)
            f.write(reinterpret_cast<const char *>(m.data()),
                    static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
}

Checkpoint Checkpoint::load(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("checkpoint: cannot open: " + path);
    char got[sizeof(magic)];
    f.read(got, sizeof(magic));
    if (!f || std::memcmp(got, magic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const auto hlen = read_pod<std::uint64_t>(f);
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(htext);
    if (header.at("version").get<int>() != format_version)
        throw std::runtime_error("checkpoint: unsupported version");

    Checkpoint ckpt;
    ckpt.config = config_from_json_obj(header.at("config"), false);
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.rng_state = header.at("rng_state").get<std::array<std::uint64_t, 4>>();
    ckpt.norm_mean = header.at("norm_mean").get<std::vector<double>>();
    ckpt.norm_std = header.at("norm_std").get<std::vector<double>>();
    ckpt.latent_lo = header.at("latent_lo").get<std::vector<double>>();
    ckpt.latent_hi = header.at("latent_hi").get<std::vector<double>>();
    for (const auto &tj : header.at("tensors")) {
        Tensor<float> t(tj.at("shape").get<std::vector<int>>());
        f.read(reinterpret_cast<char *>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!f)
            throw std::runtime_error("checkpoint: truncated tensor payload");
        ckpt.tensors.emplace_back(tj.at("name").get<std::string>(), std::move(t));
    }
    if (header.at("adam").get<bool>()) {
        AdamState st;
        st.step_count = header.at("adam_step").get<int>();
        st.first_moments.reserve(ckpt.tensors.size());
        st.second_moments.reserve(ckpt.tensors.size());
        for (const auto &[name, t] : ckpt.tensors) {
            std::vector<double> m(t.size());
            f.read(reinterpret_cast<char *>(m.data()),
                   static_cast<std::streamsize>(m.size() * sizeof(double)));
            st.first_moments.push_back(std::move(m));
        }
        for (const auto &[name, t] : ckpt.tensors) {
            std::vector<double> m(t.size());
            f.read(reinterpret_cast<char *>(m.data()),
                   static_cast<std::streamsize>(m.size() * sizeof(double)));
            st.second_moments.push_back(std::move(m));
        }
        if (!f)
            throw std::runtime_error("checkpoint: truncated optimizer payload");
        ckpt.adam = std::move(st);
    }
    return ckpt;
}

Checkpoint Checkpoint::from_model(Model<float> &model)
{
    Checkpoint ckpt;
    ckpt.config = model.config();
    for (auto *p : model.params())
        ckpt.tensors.emplace_back(p->name, p->value);
    return ckpt;
}

void Checkpoint::apply_to(Model<float> &model) const
{
    auto refs = model.params();
    if (refs.size() != tensors.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i]->name != tensors[i].first)
            throw std::runtime_error("checkpoint: parameter name mismatch at '"
                                     + tensors[i].first + "'");
        if (refs[i]->value.shape != tensors[i].second.shape)
            throw std::runtime_error("checkpoint: tensor shape mismatch at '"
                                     + tensors[i].first + "'");
        refs[i]->value = tensors[i].second;
    }
}

} // namespace geovae::nets
