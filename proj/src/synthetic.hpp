#pragma once

// Synthetic EMRs whose symptom sets drive the shipped machines to a known
// label set. Used for fixtures and end-to-end checks; the text sections are
// filler.

#include <string>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "statemachine.hpp"

namespace psydial {

/// Symptoms that, answered truthfully, reach a terminal asserting `d`.
/// The route (current or past episode, gate wording, group members) is
/// drawn from `rng`.
std::set<std::string> positive_symptoms(Disorder d, Rng& rng);

/// Symptoms of `d`'s machine that never reach a terminal asserting `d`:
/// at most threshold - 1 members of each group, no gate questions.
std::set<std::string> negative_noise(Disorder d, Rng& rng);

/// Throws PreconditionError for an empty profile or ids missing from the
/// machines.
Emr synthesize_emr(const ComorbidityProfile& labels, const std::string& emr_id, Rng& rng, const MachineSet& machines);

/// `per_combination` EMRs for each of the six eligible combinations.
std::vector<Emr> synthetic_fixture(int per_combination, std::uint64_t seed, const MachineSet& machines);

}  // namespace psydial
