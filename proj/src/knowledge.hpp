#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "model.hpp"
#include "statemachine.hpp"

namespace psydial {

/// Disease-symptom description knowledge graph. Derived from the machine
/// definitions so interview questions and the patient filter never drift.
struct DsdKg {
  /// Disorder -> symptom-category node ids of its machine.
  std::map<Disorder, std::set<std::string>> edges;
  /// Every question node id -> short description (its topic).
  std::map<std::string, std::string> descriptions;
  /// Node id -> machine it belongs to.
  std::map<std::string, Disorder> owner;

  bool knows(std::string_view id) const { return descriptions.count(std::string(id)) != 0; }
};

class UnknownSymptomError : public Error {
 public:
  using Error::Error;
};

/// Throws PreconditionError for an empty list.
DsdKg kg_from_machines(const std::vector<const StateMachineDef*>& defs);
DsdKg kg_from_machines(const MachineSet& machines);

/// Patient filter: true iff the EMR records the symptom. Unknown ids throw
/// UnknownSymptomError.
bool symptom_allowed(const DsdKg& kg, const Emr& emr, std::string_view symptom_id);

/// Edge-list export for inspection.
ordered_json kg_to_json(const DsdKg& kg);

}  // namespace psydial
