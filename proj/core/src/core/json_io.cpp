#include "tailaug/core/json_io.hpp"

#include "json.hpp"

namespace tailaug::core {

namespace {

nlohmann::ordered_json class_list(const ClassSet& classes, const ClassRegistry* registry) {
    auto out = nlohmann::ordered_json::array();
    for (ClassIndex c : classes) {
        if (registry) {
            out.push_back(registry->name(c));
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string provenance_json_line(const ProvenanceRecord& record, const std::string& status,
                                 const std::string& detail, const ClassRegistry* registry) {
    // ordered_json keeps field order stable so logs diff cleanly.
    nlohmann::ordered_json j;
    j["source_id"] = record.source_id;
    j["status"] = status;
    j["inpainted_classes"] = class_list(record.inpainted_classes, registry);
    j["retained_head_classes"] = class_list(record.retained_head_classes, registry);
    j["mask_area_fraction"] = record.mask_area_fraction;
    j["generator_id"] = record.generator_id;
    j["noise_seed"] = record.noise_seed;
    j["cam_threshold"] = record.cam_threshold;
    if (!detail.empty()) j["detail"] = detail;
    return j.dump();
}

}  // namespace tailaug::core
