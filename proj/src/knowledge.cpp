#include "knowledge.hpp"

namespace psydial {

DsdKg kg_from_machines(const std::vector<const StateMachineDef*>& defs) {
  if (defs.empty()) throw PreconditionError("knowledge graph needs at least one machine definition");
  DsdKg kg;
  for (const auto* def : defs) {
    if (!def) throw PreconditionError("null machine definition");
    auto& edge_set = kg.edges[def->disorder];
    for (const auto& id : def->node_order) {
      const auto& n = def->nodes.at(id);
      if (kg.owner.count(id) && kg.owner.at(id) != def->disorder)
        throw ValidationError({"node id " + id + " is used by both " + std::string(to_string(kg.owner.at(id))) +
                               " and " + std::string(to_string(def->disorder))});
      kg.descriptions[id] = n.topic.empty() ? id : n.topic;
      kg.owner[id] = def->disorder;
      if (is_symptom_category(n.category)) edge_set.insert(id);
    }
  }
  return kg;
}

DsdKg kg_from_machines(const MachineSet& machines) { return kg_from_machines(machines.all()); }

bool symptom_allowed(const DsdKg& kg, const Emr& emr, std::string_view symptom_id) {
  if (!kg.knows(symptom_id)) throw UnknownSymptomError("unknown symptom id '" + std::string(symptom_id) + "'");
  return emr.symptom_ids.count(std::string(symptom_id)) != 0;
}

ordered_json kg_to_json(const DsdKg& kg) {
  ordered_json out;
  ordered_json edges = ordered_json::array();
  for (const auto& [d, ids] : kg.edges) {
    for (const auto& id : ids) {
      ordered_json e;
      e["disorder"] = std::string(to_string(d));
      e["symptom"] = id;
      edges.push_back(std::move(e));
    }
  }
  out["edges"] = std::move(edges);
  ordered_json desc = ordered_json::object();
  for (const auto& [id, text] : kg.descriptions) desc[id] = text;
  out["descriptions"] = std::move(desc);
  return out;
}

}  // namespace psydial
