#include "geovae/patchkit/manifest.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geovae::patchkit {

std::string split_name(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string &name)
{
    if (name == "train")
        return Split::train;
    if (name == "val")
        return Split::val;
    if (name == "test")
        return Split::test;
    throw std::invalid_argument("manifest: unknown split '" + name + "'");
}

std::map<int, int> CorpusManifest::class_counts() const
{
    std::map<int, int> counts;
    for (const auto &r : records)
        ++counts[r.label];
    return counts;
}

std::map<Split, int> CorpusManifest::split_counts() const
{
    std::map<Split, int> counts;
    for (const auto &r : records)
        ++counts[r.split];
    return counts;
}

namespace {

std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

} // namespace

void CorpusManifest::save(const std::string &path) const
{
    std::ofstream f(path, std::ios::binary); // binary: keep \n on every platform
    if (!f)
        throw std::runtime_error("manifest: cannot open for writing: " + path);
    f << "# geovae-manifest v1\n";
    f << "# threshold " << format_real(threshold) << "\n";
    f << "# cap " << stratify_cap << "\n";
    f << "# seed " << seed << "\n";
    f << "# columns image_path\tmask_path\tlabel\tdominance\trelevant_fraction\tsource_id\tsplit\n";
    for (const auto &r : records)
        f << r.image_path << '\t' << r.mask_path << '\t' << r.label << '\t'
          << format_real(r.dominance) << '\t' << format_real(r.relevant_fraction) << '\t'
          << r.source_id << '\t' << split_name(r.split) << '\n';
}

CorpusManifest CorpusManifest::load(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("manifest: cannot open: " + path);
    CorpusManifest m;
    std::string line;
    bool saw_magic = false;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "geovae-manifest")
                saw_magic = true;
            else if (key == "threshold")
                ss >> m.threshold;
            else if (key == "cap")
                ss >> m.stratify_cap;
            else if (key == "seed")
                ss >> m.seed;
            continue;
        }
        std::istringstream ss(line);
        PatchRecord r;
        std::string label_s, dom_s, rel_s, split_s;
        if (!std::getline(ss, r.image_path, '\t') || !std::getline(ss, r.mask_path, '\t')
            || !std::getline(ss, label_s, '\t') || !std::getline(ss, dom_s, '\t')
            || !std::getline(ss, rel_s, '\t') || !std::getline(ss, r.source_id, '\t')
            || !std::getline(ss, split_s))
            throw std::runtime_error("manifest: malformed record line: " + line);
        r.label = std::stoi(label_s);
        r.dominance = std::stod(dom_s);
        r.relevant_fraction = std::stod(rel_s);
        r.split = split_from_name(split_s);
        m.records.push_back(std::move(r));
    }
    if (!saw_magic)
        throw std::runtime_error("manifest: missing header magic: " + path);
    return m;
}

CorpusManifest stratify(const std::vector<PatchRecord> &records, int cap, double threshold,
                        std::uint64_t seed)
{
    if (cap < 0)
        throw std::invalid_argument("stratify: cap must be >= 0");
    CorpusManifest m;
    m.threshold = threshold;
    m.stratify_cap = cap;
    m.seed = seed;

    std::map<int, std::vector<PatchRecord>> per_class;
    for (const auto &r : records)
        per_class[r.label].push_back(r);

    for (auto &[label, recs] : per_class) {
        std::sort(recs.begin(), recs.end(), [](const PatchRecord &a, const PatchRecord &b) {
            if (a.dominance != b.dominance)
                return a.dominance > b.dominance;
            if (a.source_id != b.source_id)
                return a.source_id < b.source_id;
            return a.image_path < b.image_path;
        });
        const int keep = std::min<int>(cap, static_cast<int>(recs.size()));
        for (int i = 0; i < keep; ++i)
            m.records.push_back(recs[i]);
    }
    return m;
}

void assign_splits(CorpusManifest &manifest, double val_fraction,
                   const std::set<std::string> &test_sources, Rng &rng)
{
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("assign_splits: val_fraction must be in [0, 1)");

    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (test_sources.count(manifest.records[i].source_id)) {
            manifest.records[i].split = Split::test;
        } else {
            manifest.records[i].split = Split::train;
            remaining.push_back(i);
        }
    }

    // seeded Fisher-Yates over the non-test records
    for (std::size_t i = remaining.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * i);
        std::swap(remaining[i - 1], remaining[j]);
    }

    const auto n_val =
        static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(remaining.size())));
    for (std::size_t k = 0; k < n_val && k < remaining.size(); ++k)
        manifest.records[remaining[k]].split = Split::val;

    const auto counts = manifest.split_counts();
    if (counts.count(Split::train) == 0 || counts.at(Split::train) == 0)
        throw std::runtime_error("assign_splits: no training records remain");
}

} // namespace geovae::patchkit
