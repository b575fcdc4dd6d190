#pragma once

#include <map>
#include <string>

#include "rt/train.hpp"

namespace rt {

// Flat UTF-8 key=value lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Applies key=value pairs onto a TrainConfig. Unknown keys are rejected.
// Accepts exactly the keys that config_echo emits.
void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv);

TrainConfig config_from_file(const std::string& path);

}  // namespace rt
