#pragma once

#include "geovae/patchkit/manifest.hpp"

namespace geovae::patchkit {

struct SynthOptions {
    int n_per_class = 10;
    int tile_size = 64;
    bool grayscale = false;
};

/// In-memory synthetic corpus: four procedural texture classes (stripes,
/// blobs, rings, granular noise) with exactly matching masks, plus injected
/// background and stroma regions so thresholding and labeling do real work.
struct SynthCorpus {
    std::vector<Image> tiles;
    std::vector<MaskTile> masks;
    std::vector<std::string> source_ids;
    std::vector<int> texture_class; ///< the class the generator drew (2..5)
};

/// Fully seeded generator; identical rng state yields a byte-identical corpus.
SynthCorpus synth_corpus(const SynthOptions &opt, Rng &rng);

/// Write tiles/ and masks/ PNG pairs named p<index>_<source>.png.
void write_corpus(const SynthCorpus &corpus, const std::string &dir);

/// source_id encoded in the tile filename (stem text after the last '_').
std::string source_from_filename(const std::string &filename);

} // namespace geovae::patchkit
