#include "json.hpp"
#include "mrin/coservice.hpp"

namespace mrin {

using json = nlohmann::ordered_json;

std::string suggestion_to_json(const SuggestionResponse& r) {
  const auto& legend = Legend::standard();
  json additions = json::array();
  for (const auto& a : r.additions) {
    additions.push_back({{"x", a.x},
                         {"y", a.y},
                         {"tile", std::string(1, legend.glyph(a.tile))},
                         {"name", legend.name(a.tile)},
                         {"q_value", a.q}});
  }
  json j{{"schema", kSuggestionSchema},
         {"version", kWireVersion},
         {"suggestion_id", r.suggestion_id},
         {"model_fingerprint", r.model_fingerprint},
         {"additions", std::move(additions)}};
  return j.dump();
}

std::string explanation_to_json(const Explanation& e) {
  json j{{"schema", kExplanationSchema},
         {"version", kWireVersion},
         {"instance_id", e.instance_id},
         {"session_id", e.session_id},
         {"layer", e.layer},
         {"filter_index", e.filter_index},
         {"modal_count", e.modal_count},
         {"responsible_level", to_glyph_rows(e.responsible_level)}};
  return j.dump();
}

std::string error_to_json(const std::string& code, const std::string& message) {
  return json{{"schema", kErrorSchema}, {"version", kWireVersion}, {"code", code}, {"message", message}}
      .dump();
}

}  // namespace mrin
