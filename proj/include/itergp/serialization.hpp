#pragma once

#include <json.hpp>

#include "itergp/experiments.hpp"
#include "itergp/itergp.hpp"
#include "itergp/kernels.hpp"
#include "itergp/spectral.hpp"

namespace itergp {

using Json = nlohmann::json;

// {"kind": "matern"|"sqexp"|"series", ...hyperparameters}
Json kernel_spec_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const Json& j);

Json lanczos_result_json(const LanczosResult& lan, bool include_vectors = true);

// Snapshot {m, etas, w}; directions are large and ride behind the flag.
Json itergp_state_json(const IterGPState& state, bool include_directions = false);

Json experiment_config_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& j);

Json experiment_report_json(const ExperimentReport& report);

}  // namespace itergp
