#include "sneuron/steering.hpp"

#include "sneuron/error.hpp"

namespace sneuron {

std::string to_string(Deactivate d) {
    switch (d) {
    case Deactivate::None: return "none";
    case Deactivate::Source: return "source";
    case Deactivate::Target: return "target";
    case Deactivate::Both: return "both";
    }
    return "none";
}

Deactivate deactivate_from_string(const std::string& s) {
    if (s == "none") return Deactivate::None;
    if (s == "source") return Deactivate::Source;
    if (s == "target") return Deactivate::Target;
    if (s == "both") return Deactivate::Both;
    fail(ErrorKind::Input, "unknown deactivation '" + s + "' (expected none|source|target|both)");
}

DeactivationPolicy DeactivationPolicy::from(Deactivate which, std::string source, std::string target) {
    return {which == Deactivate::Source || which == Deactivate::Both,
            which == Deactivate::Target || which == Deactivate::Both, std::move(source), std::move(target)};
}

std::string other_style(const NeuronAtlas& atlas, const std::string& source) {
    if (source == atlas.style_a) return atlas.style_b;
    if (source == atlas.style_b) return atlas.style_a;
    fail(ErrorKind::Input, "style '" + source + "' is not in the atlas (" + atlas.style_a + ", " + atlas.style_b + ")");
}

DeactivationMask build_mask(const NeuronAtlas& atlas, const DeactivationPolicy& policy) {
    auto exclusive_of = [&](const std::string& style) -> const std::vector<ScoredNeuron>& {
        if (style == atlas.style_a) return atlas.exclusive_a;
        if (style == atlas.style_b) return atlas.exclusive_b;
        fail(ErrorKind::Input, "style '" + style + "' is not in the atlas (" + atlas.style_a + ", " + atlas.style_b +
                                   ")");
    };
    const auto& source = exclusive_of(policy.source_style);
    const auto& target = exclusive_of(policy.target_style);
    if (&source == &target) fail(ErrorKind::Input, "source and target style must differ");

    DeactivationMask mask;
    if (policy.deactivate_source) for (const auto& n : source) mask.insert(n.coord);
    if (policy.deactivate_target) for (const auto& n : target) mask.insert(n.coord);
    return mask;
}

} // namespace sneuron
