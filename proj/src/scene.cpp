#include "bpj/scene.hpp"

namespace bpj {

namespace {

void check_box(const Box& box, int width, int height, const std::string& what,
               const std::string& image_id) {
    if (!box.valid()) {
        throw DataError("scene " + image_id + ": " + what + " has inverted corners");
    }
    if (box.x1 < 0.0 || box.y1 < 0.0 || box.x2 > width || box.y2 > height) {
        throw DataError("scene " + image_id + ": " + what + " extends outside the image");
    }
}

}  // namespace

void Scene::validate(const GridSpec& spec) const {
    if (width != spec.image_w || height != spec.image_h) {
        throw DataError("scene " + image_id + ": image size " + std::to_string(width) + "x" +
                        std::to_string(height) + " does not match spec " +
                        std::to_string(spec.image_w) + "x" + std::to_string(spec.image_h));
    }
    for (const auto& body : bodies) {
        check_box(body.box, width, height, "body " + body.body_id, image_id);
        if (static_cast<int>(body.parts.size()) != spec.part_count) {
            throw DataError("scene " + image_id + ": body " + body.body_id + " has " +
                            std::to_string(body.parts.size()) + " part slots, spec expects " +
                            std::to_string(spec.part_count));
        }
        for (std::size_t j = 0; j < body.parts.size(); ++j) {
            const auto& part = body.parts[j];
            if (!part) {
                continue;
            }
            check_box(part->box, width, height,
                      "part slot " + std::to_string(j) + " of body " + body.body_id, image_id);
            if (part->visible != 0 && part->visible != 1) {
                throw DataError("scene " + image_id + ": part visibility must be 0 or 1");
            }
            if (part->contact) {
                if (!spec.has_contact()) {
                    throw DataError("scene " + image_id +
                                    ": contact states present but spec variant is " +
                                    variant_name(spec.variant));
                }
                for (int state : *part->contact) {
                    if (state < 0 || state > 2) {
                        throw DataError("scene " + image_id +
                                        ": contact state must be 0, 1 or 2");
                    }
                }
            }
        }
    }
}

}  // namespace bpj
