#include "synthetic.hpp"

#include <algorithm>

#include "text.hpp"

namespace psydial {

namespace {

using Ids = std::vector<std::string>;

const Ids kA00{"A3", "A6", "A9", "A9Y", "A12", "A13", "A13Y", "A16", "A17"};
const Ids kA01{"A98", "A111", "A114", "A114Y", "A117", "A118", "A118Y", "A121", "A122"};
const Ids kA02{"A02Y", "A138", "A139", "A140", "A141", "A142", "A143", "A144", "A145", "A146", "A147"};
const Ids kA03{"A255", "A256", "A257", "A258", "A259", "A260", "A261", "A262", "A263", "A264"};
const Ids kA04{"A286", "A287", "A288", "A289", "A290", "A291", "A292", "A293", "A294", "A295"};
const Ids kF00{"F144", "F145", "F146", "F147", "F148", "F149"};
const Ids kF01{"F169", "F170", "F171", "F172", "F173", "F174"};
const Ids kK00{"K6", "K6N", "K7", "K8", "K8Y", "K9", "K10", "K10N", "K11", "K12", "K13", "K13N", "K14"};
const Ids kK01{"K16", "K17", "K18", "K19", "K19N", "K20", "K21", "K22", "K23", "K24"};

/// `count` distinct members drawn uniformly.
void add_members(std::set<std::string>& out, const Ids& group, std::size_t count, Rng& rng) {
  Ids pool = group;
  rng.shuffle(pool);
  out.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(count, pool.size())));
}

/// Between `lo` and `hi` members inclusive.
void add_between(std::set<std::string>& out, const Ids& group, std::size_t lo, std::size_t hi, Rng& rng) {
  add_members(out, group, lo + rng.uniform_index(hi - lo + 1), rng);
}

void add(std::set<std::string>& out, std::initializer_list<const char*> ids) {
  for (const char* id : ids) out.insert(id);
}

}  // namespace

std::set<std::string> positive_symptoms(Disorder d, Rng& rng) {
  std::set<std::string> s;
  switch (d) {
    case Disorder::MDD:
      if (rng.uniform_index(10) < 7) {
        // Current episode: depression3.
        switch (rng.uniform_index(3)) {
          case 0: add(s, {"A1", "A1Y", "A2Y"}); break;
          case 1: add(s, {"A1N", "A1Y"}); break;
          default: add(s, {"A2N", "A2_1"}); break;
        }
        add_between(s, kA00, 5, kA00.size(), rng);
        if (rng.uniform_index(2)) s.insert("A17Y");
        s.insert("A23");
      } else {
        // Past episode only: depression5.
        switch (rng.uniform_index(3)) {
          case 0: add(s, {"A96", "A96Y"}); break;
          case 1: add(s, {"A96N", "A96Y"}); break;
          default: add(s, {"A97N", "A97_1"}); break;
        }
        add_between(s, kA01, 5, kA01.size(), rng);
        if (rng.uniform_index(2)) s.insert("A122Y");
      }
      break;
    case Disorder::BD:
      switch (rng.uniform_index(4)) {
        case 0:  // current manic
          add(s, {"A134", "A135", "A135_1", "A137", "A137Y", "A148"});
          add_between(s, kA02, 5, kA02.size(), rng);
          break;
        case 1:  // current hypomanic via irritability; needs a depressive episode
          add(s, {"A136", "A136Y", "A137N", "A137Y"});
          add_between(s, kA02, 5, kA02.size(), rng);
          break;
        case 2:  // past manic
          add(s, {"A251", "A252", "A252_1", "A254", "A254Y"});
          add_between(s, kA03, 5, kA03.size(), rng);
          break;
        default:  // past hypomanic
          add(s, {"A253", "A253Y", "A253N"});
          add_between(s, kA04, 5, kA04.size(), rng);
          break;
      }
      break;
    case Disorder::AD:
      if (rng.uniform_index(10) < 7) {
        add(s, {"F140", "F142_1", "F142_2", "F143", "F151"});
        add_between(s, kF00, 3, kF00.size(), rng);
        if (rng.uniform_index(2)) s.insert("F163");
      } else {
        add(s, {"F165", "F167_1", "F167_2", "F168"});
        add_between(s, kF01, 3, kF01.size(), rng);
      }
      break;
    case Disorder::ADHD:
      if (rng.uniform_index(2)) {
        s.insert("K2");
        add_between(s, kK00, 5, kK00.size(), rng);
      } else {
        s.insert("K2N");
        add_between(s, kK01, 5, kK01.size(), rng);
      }
      s.insert("K5");
      break;
  }
  return s;
}

std::set<std::string> negative_noise(Disorder d, Rng& rng) {
  std::set<std::string> s;
  switch (d) {
    case Disorder::MDD:
      add_between(s, kA00, 0, 4, rng);
      add_between(s, kA01, 0, 4, rng);
      break;
    case Disorder::BD:
      add_between(s, kA02, 0, 4, rng);
      add_between(s, kA03, 0, 4, rng);
      add_between(s, kA04, 0, 4, rng);
      break;
    case Disorder::AD:
      add_between(s, kF00, 0, 2, rng);
      add_between(s, kF01, 0, 2, rng);
      break;
    case Disorder::ADHD:
      add_between(s, kK00, 0, 4, rng);
      add_between(s, kK01, 0, 4, rng);
      break;
  }
  return s;
}

namespace {

constexpr std::array<std::string_view, 6> kOccupations{"teacher", "nurse", "software developer",
                                                       "university student", "shop assistant", "accountant"};
constexpr std::array<std::string_view, 4> kEducation{"secondary school", "vocational diploma", "bachelor's degree",
                                                     "master's degree"};
constexpr std::array<std::string_view, 3> kMarital{"single", "married", "divorced"};

std::string pick(const auto& pool, Rng& rng) { return std::string(pool[rng.uniform_index(pool.size())]); }

}  // namespace

Emr synthesize_emr(const ComorbidityProfile& labels, const std::string& emr_id, Rng& rng, const MachineSet& machines) {
  if (labels.empty()) throw PreconditionError("synthetic EMR needs at least one label");
  if (labels.contains(Disorder::BD) && !labels.contains(Disorder::MDD))
    throw PreconditionError("a bipolar label needs a depressive episode in this fixture");
  Emr e;
  e.emr_id = emr_id;
  e.preliminary_diagnosis = labels;
  std::vector<std::string> highlights;
  for (auto d : kAllDisorders) {
    auto part = labels.contains(d) ? positive_symptoms(d, rng) : negative_noise(d, rng);
    const auto& def = machines.at(d);
    for (const auto& id : part) {
      if (!def.nodes.count(id))
        throw PreconditionError("synthetic symptom " + id + " is missing from the " + std::string(to_string(d)) + " machine");
    }
    if (labels.contains(d)) {
      std::vector<std::string> ids(part.begin(), part.end());
      const auto& topic = def.nodes.at(ids[rng.uniform_index(ids.size())]).topic;
      highlights.push_back(text::ascii_lower(topic));
    }
    e.symptom_ids.insert(part.begin(), part.end());
  }
  e.demographic.gender = rng.uniform_index(2) ? Gender::female : Gender::male;
  e.demographic.age = 18 + static_cast<int>(rng.uniform_index(48));
  e.demographic.education = pick(kEducation, rng);
  e.demographic.marital_status = pick(kMarital, rng);
  e.demographic.occupation = pick(kOccupations, rng);
  e.chief_complaint = "Came in about " + text::join(highlights, "; ") + ".";
  e.medical_condition = "Symptoms have built up over several months and affect work and sleep.";
  e.medical_history = "No major physical illness. No regular medication.";
  e.personal_history = "Lives in the city. Drinks socially at weekends, does not smoke.";
  e.family_history = "One relative was treated for low mood; details unknown.";
  return e;
}

std::vector<Emr> synthetic_fixture(int per_combination, std::uint64_t seed, const MachineSet& machines) {
  if (per_combination < 1) throw PreconditionError("per_combination must be >= 1");
  std::vector<Emr> out;
  const auto& combos = eligible_combinations();
  for (std::size_t c = 0; c < combos.size(); ++c) {
    for (int i = 0; i < per_combination; ++i) {
      Rng rng(derive_seed(seed, {c, static_cast<std::uint64_t>(i)}));
      char id[32];
      std::snprintf(id, sizeof id, "syn-%zu-%02d", c + 1, i + 1);
      out.push_back(synthesize_emr(combos[c], id, rng, machines));
    }
  }
  return out;
}

}  // namespace psydial
