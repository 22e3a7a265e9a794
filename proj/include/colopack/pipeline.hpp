#pragma once

#include <map>
#include <string>

#include "colopack/clustering.hpp"
#include "colopack/fleet.hpp"
#include "colopack/metrics.hpp"
#include "colopack/sensitivity.hpp"
#include "colopack/solver.hpp"
#include "colopack/synth.hpp"
#include "colopack/telemetry.hpp"

namespace colopack::pipeline {

// Copies percentile limits onto the fleet's tasks as p99. Tasks without an
// entry keep whatever p99 they had.
Fleet apply_limits(const Fleet& fleet, const telemetry::LimitsResult& limits);

// Tags each task with its cluster and that cluster's sensitivity profile.
// Throws Error(kMissingProfile) for a cluster without a profile.
Fleet apply_clusters(const Fleet& fleet, const std::map<std::string, std::string>& task_cluster,
                     const std::map<std::string, SensitivityProfile>& profiles);

// Percentile limits straight from the generator, one task at a time. Equal to
// compute_limits over the full written trace.
telemetry::LimitsResult synth_limits(const synth::Generated& generated,
                                     const synth::GeneratorSpec& spec, int p);

struct Prepared {
  Fleet fleet;  // with p99, cluster and base sensitivity
  clustering::Characterization characterization;
  sensitivity::SensitivityTable table;
};

// percentile -> cluster -> sensitivity table for an in-memory fleet.
Prepared prepare(const Fleet& fleet, const telemetry::LimitsResult& limits, int k,
                 std::uint64_t seed, bool joint,
                 const std::vector<sensitivity::CandidateProfile>& candidates);

struct Outcome {
  solver::SolveResult result;
  metrics::MetricsReport report;
};

// Solves with `config` and reports against the fleet's starting assignment.
Outcome run(const Prepared& prepared, const solver::SolverConfig& config);

}  // namespace colopack::pipeline
