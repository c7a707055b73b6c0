#pragma once

#include <map>
#include <set>
#include <string>

#include "geovae/core/rng.hpp"
#include "geovae/patchkit/mask.hpp"

namespace geovae::patchkit {

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string &name);

/// One retained tile with its derived label and provenance.
struct PatchRecord {
    std::string image_path;
    std::string mask_path;
    int label = 0;
    double dominance = 0.0;
    double relevant_fraction = 0.0;
    std::string source_id;
    Split split = Split::train;

    bool operator==(const PatchRecord &) const = default;
};

/// Retained records plus the preprocessing knobs that produced them.
struct CorpusManifest {
    std::vector<PatchRecord> records;
    double threshold = 0.5;
    int stratify_cap = 8000;
    std::uint64_t seed = 0;

    std::map<int, int> class_counts() const;
    std::map<Split, int> split_counts() const;

    /// Line-delimited text with a # header block; byte-deterministic.
    void save(const std::string &path) const;
    static CorpusManifest load(const std::string &path);
};

/// Keep, per class, the `cap` records with the highest dominance (ties by
/// source id, then image path, lexicographically). Deterministic.
CorpusManifest stratify(const std::vector<PatchRecord> &records, int cap, double threshold,
                        std::uint64_t seed);

/// Held-out-source test split plus a seeded shuffle of the remainder into
/// train/val. Throws if no train records remain.
void assign_splits(CorpusManifest &manifest, double val_fraction,
                   const std::set<std::string> &test_sources, Rng &rng);

} // namespace geovae::patchkit
