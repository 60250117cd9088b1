#pragma once

#include "domino/envs.hpp"
#include "domino/mdp.hpp"
#include "domino/policy_set.hpp"

#include <json.hpp>

#include <string>

namespace domino {

using Json = nlohmann::json;

/// Shortest decimal text that round-trips the double exactly; "nan"/"inf" for
/// non-finite values.
std::string format_double(double x);

Json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const Json& j);

Json policy_set_to_json(const PolicySet& set);
PolicySet policy_set_from_json(const Json& j);

Json grid_spec_to_json(const GridSpec& spec);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
Json read_json_file(const std::string& path);

}  // namespace domino
