#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "skewstab/branched_map.hpp"
#include "skewstab/fiber.hpp"

namespace skewstab {

// Built-in base maps: "gauss", "luroth_dyadic", "linear_2pow", "mixed_slopes",
// "doubling". n_branches truncates the countable families (ignored by
// "doubling"). Throws std::invalid_argument for unknown names, listing the
// available fixtures.
BranchedMap make_map(const std::string& name, int n_branches = 40);

std::vector<std::string> map_fixture_names();

// Custom map: {"branches":[{"a","b","kind":"linear"|"moebius","params"}...],
//              "tail_bound":{"type":"geometric","ratio",["coeff"]},
//              ["kind"],["n0"]}
BranchedMap map_from_json(const nlohmann::json& spec);

// Built-in fiber families, constructed against a base map so that per-branch
// families can resolve branch membership:
//   "alpha_const" params {"alphas":[...]}   G(x,y) = alpha_i y on I_i
//   "lip_coeff"   params {"coeffs":[[c,d],...],["alpha_max"]}
//                                           G(x,y) = clamp(c_i + d_i(x-a_i)) y
//   "linear_y"    params {"alpha",["c"],["shift"]}
//                                           G(x,y) = clamp(alpha y + c x + shift)
FiberMap make_fiber(const std::string& type, const nlohmann::json& params,
                    const BranchedMap& map);

std::vector<std::string> fiber_fixture_names();

// {"type": ..., "params": {...}}
FiberMap fiber_from_json(const nlohmann::json& spec, const BranchedMap& map);

}  // namespace skewstab
