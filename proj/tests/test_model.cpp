#include <doctest.h>

#include "knowledge.hpp"
#include "model.hpp"
#include "support.hpp"

using namespace psydial;
using psydial::testing::data_dir;
using psydial::testing::shipped;

TEST_SUITE("model") {
  TEST_CASE("filter_users keeps users at or above both thresholds") {
    const std::vector<AnnotatedUser> users{{"a", 10, 20}, {"b", 9, 20}, {"c", 10, 19}, {"d", 50, 80}, {"e", 0, 0}};
    const auto kept = filter_users(users);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].user_id == "a");
    CHECK(kept[1].user_id == "d");
  }

  TEST_CASE("eligible combinations") {
    CHECK(eligible_combinations().size() == 6);
    CHECK(is_dataset_eligible({Disorder::MDD, Disorder::AD}));
    CHECK(is_dataset_eligible({Disorder::AD, Disorder::ADHD}));
    CHECK_FALSE(is_dataset_eligible({Disorder::MDD}));
    CHECK_FALSE(is_dataset_eligible({}));
    CHECK_FALSE(is_dataset_eligible({Disorder::MDD, Disorder::AD, Disorder::BD, Disorder::ADHD}));
  }

  TEST_CASE("profiles serialize in canonical order") {
    const ComorbidityProfile p{Disorder::ADHD, Disorder::MDD};
    CHECK(to_json(p).dump() == R"(["MDD","ADHD"])");
    CHECK(profile_from_json(json::parse(R"(["ADHD","MDD"])")) == p);
    CHECK_THROWS_AS(profile_from_json(json::parse(R"(["PTSD"])")), ParseError);
    CHECK_THROWS_AS(profile_from_json(json::parse(R"("MDD")")), ParseError);
  }

  TEST_CASE("shipped sample EMRs validate") {
    const auto emrs = load_emrs(data_dir() / "emrs" / "sample");
    CHECK(emrs.size() == 6);
    for (const auto& e : emrs) CHECK(validate_emr(e, shipped().kg).empty());
  }

  TEST_CASE("EMR validation names each problem") {
    auto emr = load_emrs(data_dir() / "emrs" / "sample" / "sample-01.json").front();
    emr.symptom_ids.insert("Z999");
    emr.family_history.clear();
    emr.demographic.age = 0;
    const auto issues = validate_emr(emr, shipped().kg);
    auto has = [&](const std::string& s) {
      for (const auto& i : issues)
        if (i.find(s) != std::string::npos) return true;
      return false;
    };
    CHECK(has("unknown symptom id Z999"));
    CHECK(has("family_history"));
    CHECK(has("age must be positive"));

    auto unsupported = load_emrs(data_dir() / "emrs" / "sample" / "sample-01.json").front();
    unsupported.preliminary_diagnosis.insert(Disorder::ADHD);
    std::erase_if(unsupported.symptom_ids, [](const std::string& s) { return s[0] == 'K'; });
    CHECK_FALSE(validate_emr(unsupported, shipped().kg).empty());
  }

  TEST_CASE("EMR json roundtrip") {
    const auto emr = load_emrs(data_dir() / "emrs" / "sample" / "sample-03.json").front();
    const auto back = emr_from_json(to_json(emr));
    CHECK(to_json(back) == to_json(emr));
    auto broken = to_json(emr);
    broken.erase("chief_complaint");
    CHECK_THROWS_AS(emr_from_json(broken), ParseError);
  }

  TEST_CASE("session roundtrip and turn invariants") {
    DialogueSession s;
    s.session_id = "s1";
    s.emr_id = "e1";
    s.fed = {"e1", "h1", "x1", "story"};
    s.doctor_profile_id = 2;
    s.strategy = Strategy::symptom_informed;
    s.rng_seed = 42;
    s.turns = {{0, Role::doctor, "Hello?", std::nullopt, std::nullopt},
               {1, Role::patient, "Hi.", std::nullopt, std::nullopt},
               {2, Role::doctor, "Low mood?", std::string("A1"), std::nullopt},
               {3, Role::patient, "Yes.", std::string("A1"), Answer::present}};
    s.final_diagnoses = {{Disorder::MDD, "depression3"}};
    s.predicted_labels = {Disorder::MDD};
    const auto j = to_json(s);
    CHECK(j["eligible"] == false);
    const auto back = session_from_json(json::parse(j.dump()));
    CHECK(back.turns == s.turns);
    CHECK(back.final_diagnoses == s.final_diagnoses);
    CHECK(back.predicted_labels == s.predicted_labels);
    CHECK(to_json(back).dump() == j.dump());

    CHECK(check_turn_invariants(s.turns).empty());
    auto bad = s.turns;
    bad[1].role = Role::doctor;
    CHECK_FALSE(check_turn_invariants(bad).empty());
    bad = s.turns;
    bad[2].index = 7;
    CHECK_FALSE(check_turn_invariants(bad).empty());
  }

  TEST_CASE("doctor profiles") {
    CHECK(builtin_doctor_profiles().size() == 5);
    for (int i = 1; i <= 5; ++i) CHECK(doctor_profile(i).profile_id == i);
    CHECK_THROWS(doctor_profile(6));
  }

  TEST_CASE("load_emrs reports missing paths") {
    CHECK_THROWS_AS(load_emrs(data_dir() / "no-such-dir"), IoError);
  }
}
