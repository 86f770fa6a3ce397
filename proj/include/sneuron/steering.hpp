#pragma once

#include "sneuron/atlas.hpp"
#include "sneuron/model.hpp"

#include <string>

namespace sneuron {

enum class Deactivate { None, Source, Target, Both };

std::string to_string(Deactivate d);
// Accepts none|source|target|both; throws Input error otherwise.
Deactivate deactivate_from_string(const std::string& s);

struct DeactivationPolicy {
    bool deactivate_source = false;
    bool deactivate_target = false;
    std::string source_style;
    std::string target_style;

    static DeactivationPolicy from(Deactivate which, std::string source, std::string target);
};

// Union of the exclusive sets selected by the policy. Overlap neurons are
// never included. Throws Input error when the policy's styles are not the
// atlas's two styles.
DeactivationMask build_mask(const NeuronAtlas& atlas, const DeactivationPolicy& policy);

// Resolves the target style as the atlas style that is not `source`.
std::string other_style(const NeuronAtlas& atlas, const std::string& source);

} // namespace sneuron
