#include "geovae/harness/rundir.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>

namespace geovae::harness {

std::string config_hash(const RunConfig &cfg)
{
    // FNV-1a over the resolved json plus the seed
    const std::string text = cfg.to_json() + "#" + std::to_string(cfg.train.seed);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffull));
    return buf;
}

std::string run_directory(const RunConfig &cfg, const std::string &run_root_flag)
{
    std::string root = run_root_flag;
    if (root.empty()) {
        if (const char *env = std::getenv("GEOVAE_RUN_ROOT"))
            root = env;
        else
            root = "runs";
    }
    const std::string name = cfg.train.model.tag() + "-m"
        + std::to_string(cfg.train.model.latent_dim) + "-" + config_hash(cfg) + "-s"
        + std::to_string(cfg.train.seed);
    return (std::filesystem::path(root) / name).string();
}

} // namespace geovae::harness
