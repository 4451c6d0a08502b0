#include <doctest.h>

#include "knowledge.hpp"
#include "support.hpp"

using namespace psydial;
using psydial::testing::data_dir;
using psydial::testing::shipped;

TEST_SUITE("knowledge") {
  TEST_CASE("graph mirrors the machines") {
    const auto& kg = shipped().kg;
    const auto& m = shipped().machines;
    std::size_t nodes = 0;
    for (const auto* def : m.all()) {
      nodes += def->nodes.size();
      for (const auto& [id, n] : def->nodes) {
        CHECK(kg.knows(id));
        CHECK(kg.descriptions.at(id) == n.topic);
        CHECK(kg.owner.at(id) == def->disorder);
        CHECK(kg.edges.at(def->disorder).count(id) == (is_symptom_category(n.category) ? 1u : 0u));
      }
    }
    CHECK(kg.descriptions.size() == nodes);
  }

  TEST_CASE("patient filter follows the EMR") {
    const auto emr = load_emrs(data_dir() / "emrs" / "sample" / "sample-01.json").front();
    const auto& kg = shipped().kg;
    CHECK(symptom_allowed(kg, emr, "A3"));
    CHECK_FALSE(symptom_allowed(kg, emr, "K2"));
    CHECK_THROWS_AS(symptom_allowed(kg, emr, "nope"), UnknownSymptomError);
  }

  TEST_CASE("preconditions") {
    CHECK_THROWS_AS(kg_from_machines(std::vector<const StateMachineDef*>{}), PreconditionError);
    const auto& mdd = shipped().machines.at(Disorder::MDD);
    StateMachineDef clash = mdd;
    clash.disorder = Disorder::AD;
    CHECK_THROWS_AS(kg_from_machines(std::vector<const StateMachineDef*>{&mdd, &clash}), ValidationError);
  }

  TEST_CASE("export lists every disorder") {
    const auto j = kg_to_json(shipped().kg);
    CHECK(j.dump().find("\"ADHD\"") != std::string::npos);
  }
}
