#pragma once

#include "perdl/perma.hpp"

#include <string>
#include <vector>

namespace perdl {

/// CSV schema v1: header "round,client_id,global_err,local_err,
/// recon_residual,wall_ms", doubles at full precision, NaN as "nan".
void write_round_trace_csv(const std::string& path,
                           const std::vector<RoundTrace>& rows);

/// One record per line: {"round":..,"direction":"client_to_server"|
/// "server_to_client","client_id":..,"payload_shape":[rows,cols],"kind":".."}
void write_message_log_jsonl(const std::string& path,
                             const std::vector<MessageRecord>& records);

/// Full-precision decimal rendering used by every CSV writer.
std::string format_double(double v);

}  // namespace perdl
