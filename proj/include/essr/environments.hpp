#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "essr/embedded_environments.hpp"
#include "essr/mdp.hpp"

namespace essr {

/// Six-state RiverSwim chain. Starts in state 1 or 2 with equal probability.
inline TabularMDP build_riverswim() { return parse_mdp(embedded::kRiverSwim, "riverswim.mdp"); }

/// Seven-state SixArms hub. Starts in state 0.
inline TabularMDP build_sixarms() { return parse_mdp(embedded::kSixArms, "sixarms.mdp"); }

struct EnvironmentInfo {
  std::string_view name;
  std::string_view summary;
};

inline const std::vector<EnvironmentInfo>& registered_environments() {
  static const std::vector<EnvironmentInfo> envs = {
      {"riverswim", "6-state chain; sparse 10000 reward at the far end"},
      {"sixarms", "7-state hub with six arms of decreasing entry probability"},
      {"chain<k>", "deterministic k-cycle with one action (e.g. chain3)"},
  };
  return envs;
}

/// Resolves a registered environment name. A name that is not registered is
/// treated as a path to an environment definition file.
inline TabularMDP make_environment(const std::string& name) {
  if (name == "riverswim") return build_riverswim();
  if (name == "sixarms") return build_sixarms();
  if (name.starts_with("chain") && name.size() > 5 &&
      name.find_first_not_of("0123456789", 5) == std::string::npos)
    return build_diagnostic_chain(std::stoull(name.substr(5)));
  if (name.find('/') != std::string::npos || name.ends_with(".mdp")) return load_mdp(name);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace essr
