#pragma once

#include <string>

#include "spectrum/config.hpp"
#include "spectrum/lexicon.hpp"
#include "spectrum/model.hpp"
#include "spectrum/text.hpp"

namespace spectrum {

// Everything needed to evaluate or continue from a training run.
struct CheckpointBundle {
    Config config;
    ModelDims dims;
    SpectrumModel model;
    Vocabulary vocab;
    AttributeVocabulary attrs;
    EmotionLexicon lexicon;
    FieldTaxonomy taxonomy;
};

// Directory layout: header.json plus params/NNN_name.spft, one tensor per
// parameter, in the model's canonical order. Byte-stable for fixed inputs.
void save_checkpoint(const std::string& dir, SpectrumModel& model, const Config& config,
                     const Vocabulary& vocab, const AttributeVocabulary& attrs,
                     const EmotionLexicon& lexicon, const FieldTaxonomy& taxonomy);

// Refuses to load when the stored structure hash disagrees with the stored
// config unless force is set (the hash check guards CLI overrides).
CheckpointBundle load_checkpoint(const std::string& dir);

class checkpoint_mismatch_error : public std::runtime_error {
  public:
    explicit checkpoint_mismatch_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Validates that structural overrides agree with the checkpoint; throws
// checkpoint_mismatch_error unless force.
void check_structure(const CheckpointBundle& bundle, const Config& requested, bool force);

} // namespace spectrum
