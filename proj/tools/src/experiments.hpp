#pragma once

#include "config.hpp"

namespace perdl_cli {

/// Registers every recognized key with its default value. The synth
/// scenario defaults are the reference benchmark parameters.
void declare_schema(Config& cfg);

int cmd_synth(const Config& cfg);
int cmd_reconstruct(const Config& cfg);
int cmd_validate(const Config& cfg);
int cmd_match(const Config& cfg);

}  // namespace perdl_cli
