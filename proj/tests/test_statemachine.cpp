#include <doctest.h>

#include <bit>
#include <set>

#include "statemachine.hpp"
#include "support.hpp"

using namespace psydial;
using psydial::testing::shipped;

namespace {

// Two-question screen in front of a three-member group.
const char* kTiny = R"({
  "disorder": "MDD",
  "entry": "Q1",
  "sections": {"S": {"title": "Screen", "cue": "in the past week"}},
  "nodes": {
    "Q1": {"section": "S", "level": "ILS", "category": "affective_cognitive", "topic": "low mood",
           "template": "Low mood {cue}?", "present_next": "G", "absent_next": "none"},
    "M1": {"section": "S", "level": "BLS", "category": "physio_behavioral", "topic": "sleep",
           "template": "Sleep trouble {cue}?", "group": "G"},
    "M2": {"section": "S", "level": "BLS", "category": "physio_behavioral", "topic": "appetite",
           "template": "Appetite change {cue}?", "group": "G"},
    "M3": {"section": "S", "level": "BLS", "category": "affective_cognitive", "topic": "guilt",
           "template": "Guilt {cue}?", "group": "G"}
  },
  "groups": {"G": {"section": "S", "members": ["M1", "M2", "M3"], "threshold": 2,
                   "positive_next": "yes", "negative_next": "none"}},
  "terminals": {"yes": {"description": "Episode", "contributes": "MDD"},
                "none": {"description": "No episode"}}
})";

std::shared_ptr<const StateMachineDef> tiny() {
  return std::make_shared<const StateMachineDef>(load_machine_def(kTiny));
}

json tiny_json() { return json::parse(kTiny); }

std::vector<std::string> issues_of(const json& doc) {
  try {
    load_machine_def(doc.dump());
  } catch (const ValidationError& e) {
    return e.issues();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

// Walks a runtime answering from `truth`, returning the terminal.
std::string walk(MachineRuntime& rt, const std::set<std::string>& truth, Rng& rng) {
  for (int guard = 0; !rt.terminated() && guard < 1000; ++guard) {
    const auto& id = rt.current_topic().id;
    rt.apply_response(truth.count(id) ? Answer::present : Answer::absent, rng, id);
  }
  REQUIRE(rt.terminated());
  return *rt.terminal();
}

}  // namespace

TEST_SUITE("statemachine") {
  TEST_CASE("shipped definitions load and validate") {
    const auto& m = shipped().machines;
    for (const auto* def : m.all()) CHECK(validate_machine(*def).empty());
    CHECK(m.at(Disorder::MDD).groups.at("A00").members.size() == 9);
    CHECK(m.at(Disorder::MDD).groups.at("A00").threshold == 5);
  }

  TEST_CASE("syntax errors carry line and column") {
    try {
      load_machine_def("{\n  \"disorder\": \"MDD\",\n  \"entry\": \n}");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(e.column() >= 1);
    }
    CHECK_THROWS_AS(load_machine_def(""), ParseError);
  }

  TEST_CASE("missing required keys are parse errors") {
    auto doc = tiny_json();
    doc.erase("entry");
    CHECK_THROWS_AS(load_machine_def(doc.dump()), ParseError);
    doc = tiny_json();
    doc["nodes"]["Q1"].erase("template");
    CHECK_THROWS_AS(load_machine_def(doc.dump()), ParseError);
    doc = tiny_json();
    doc["nodes"]["Q1"]["level"] = "XLS";
    CHECK_THROWS_AS(load_machine_def(doc.dump()), ParseError);
  }

  TEST_CASE("validation reports each broken invariant") {
    auto doc = tiny_json();
    doc["nodes"]["Q1"]["absent_next"] = "nowhere";
    CHECK(any_contains(issues_of(doc), "unresolved reference 'nowhere'"));

    doc = tiny_json();
    doc["groups"]["G"]["threshold"] = 4;
    CHECK(any_contains(issues_of(doc), "threshold exceeds group size (4 > 3)"));

    doc = tiny_json();
    doc["nodes"]["Q9"] = doc["nodes"]["Q1"];
    CHECK(any_contains(issues_of(doc), "node Q9 is unreachable"));

    doc = tiny_json();
    doc["nodes"]["M2"].erase("group");
    doc["nodes"]["M2"]["present_next"] = "yes";
    doc["nodes"]["M2"]["absent_next"] = "yes";
    CHECK(!issues_of(doc).empty());

    doc = tiny_json();
    doc["nodes"]["M1"]["template"] = "Sleep trouble?";
    CHECK(any_contains(issues_of(doc), "lacks a {cue} placeholder"));

    CHECK(issues_of(tiny_json()).empty());
  }

  TEST_CASE("cycles are rejected") {
    auto doc = tiny_json();
    doc["nodes"]["Q2"] = doc["nodes"]["Q1"];
    doc["nodes"]["Q1"]["absent_next"] = "Q2";
    doc["nodes"]["Q2"]["absent_next"] = "Q1";
    CHECK_FALSE(issues_of(doc).empty());
  }

  TEST_CASE("group members are picked without repetition and judged by threshold") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto rt = init_runtime(tiny());
      Rng rng(seed);
      rt.apply_response(Answer::present, rng, "Q1");
      REQUIRE(rt.active_group() == std::optional<std::string>("G"));
      std::set<std::string> seen;
      int position = 0;
      while (rt.active_group()) {
        CHECK(rt.position_in_group() == position++);
        seen.insert(rt.current_topic().id);
        rt.apply_response(seen.size() <= 2 ? Answer::present : Answer::absent, rng);
      }
      CHECK(seen == std::set<std::string>{"M1", "M2", "M3"});
      CHECK(rt.terminal() == std::optional<std::string>("yes"));
      CHECK(rt.group_verdicts().at("G") == GroupVerdict::positive);
    }
  }

  TEST_CASE("group below threshold goes negative") {
    auto rt = init_runtime(tiny());
    Rng rng(3);
    CHECK(walk(rt, {"Q1", "M2"}, rng) == "none");
    CHECK(rt.group_tallies().at("G") == 1);
    CHECK(rt.group_verdicts().at("G") == GroupVerdict::absent);
  }

  TEST_CASE("evaluate_group counts against the threshold") {
    SubStateGroup g;
    g.members = {"a", "b", "c", "d", "e", "f"};
    g.threshold = 5;
    CHECK(evaluate_group(4, g) == GroupVerdict::absent);
    CHECK(evaluate_group(5, g) == GroupVerdict::positive);
    CHECK(evaluate_group(6, g) == GroupVerdict::positive);
  }

  TEST_CASE("runtime refuses out-of-order and late answers") {
    auto rt = init_runtime(tiny());
    Rng rng(1);
    CHECK_THROWS_AS(rt.apply_response(Answer::present, rng, "M1"), StateError);
    rt.apply_response(Answer::absent, rng, "Q1");
    REQUIRE(rt.terminated());
    CHECK(*rt.terminal() == "none");
    CHECK_THROWS_AS(rt.current_topic(), StateError);
    CHECK_THROWS_AS(rt.apply_response(Answer::present, rng), StateError);
    CHECK_THROWS_AS(rt.inject_flags({"x"}), StateError);
  }

  TEST_CASE("localized pick outside a group is a state error") {
    auto rt = init_runtime(tiny());
    Rng rng(1);
    CHECK_THROWS_AS(localized_random_pick(rt, rng), StateError);
  }

  TEST_CASE("first group question gets the precise cue, later ones 'recently'") {
    const auto def = tiny();
    const auto& m1 = def->node("M1");
    CHECK(render_question(*def, m1, 0) == "Sleep trouble in the past week?");
    CHECK(render_question(*def, m1, 1) == "Sleep trouble recently?");
    CHECK(render_question(*def, def->node("Q1"), 3) == "Low mood in the past week?");
  }

  TEST_CASE("A00 decision equals the count rule on all 512 assignments") {
    const auto& mdd = shipped().machines.defs.at(Disorder::MDD);
    const auto& members = mdd->group("A00").members;
    for (unsigned mask = 0; mask < 512; ++mask) {
      std::set<std::string> truth{"A1", "A1Y", "A2Y", "A23"};
      for (unsigned i = 0; i < 9; ++i)
        if (mask & (1u << i)) truth.insert(members[i]);
      auto rt = init_runtime(mdd);
      Rng rng(mask);
      const auto terminal = walk(rt, truth, rng);
      const bool expected = std::popcount(mask) >= 5;
      CHECK((rt.group_verdicts().at("A00") == GroupVerdict::positive) == expected);
      CHECK((terminal == "depression3") == expected);
    }
  }

  TEST_CASE("bipolar rules") {
    const auto& bd = shipped().machines.at(Disorder::BD);
    CHECK(resolve_bipolar(bd, {"manic_episode"}) == std::optional<std::string>("bipolar8"));
    CHECK(resolve_bipolar(bd, {"hypomanic_episode", "current_mde"}) == std::optional<std::string>("bipolar9"));
    CHECK(resolve_bipolar(bd, {"hypomanic_episode", "past_mde"}) == std::optional<std::string>("bipolar9"));
    CHECK_FALSE(resolve_bipolar(bd, {"hypomanic_episode"}).has_value());
    CHECK_FALSE(resolve_bipolar(bd, {}).has_value());
    CHECK(resolve_bipolar(bd, {"manic_episode", "hypomanic_episode", "past_mde"}) ==
          std::optional<std::string>("bipolar8"));
    CHECK_THROWS_AS(resolve_bipolar(shipped().machines.at(Disorder::MDD), {}), PreconditionError);
  }

  TEST_CASE("enumeration reaches every declared terminal of the shipped machines") {
    for (const auto* def : shipped().machines.all()) {
      std::vector<std::string> problems;
      const auto paths = enumerate_paths(*def, &problems);
      CHECK(problems.empty());
      std::set<std::string> reached;
      for (const auto& p : paths) reached.insert(p.terminal);
      std::set<std::string> declared;
      for (const auto& [code, t] : def->terminals) declared.insert(code);
      CHECK(reached == declared);
    }
  }

  TEST_CASE("labels come from contributing terminals") {
    const auto& m = shipped().machines;
    const std::map<Disorder, std::string> finals{{Disorder::MDD, "depression3"},
                                                 {Disorder::BD, "bipolar9"},
                                                 {Disorder::AD, "anxiety5"},
                                                 {Disorder::ADHD, "adhd2"}};
    CHECK(labels_from_terminals(finals, m) == ComorbidityProfile{Disorder::MDD, Disorder::BD, Disorder::ADHD});
  }
}
